#pragma once

// Small descriptive-statistics toolkit shared by the experiment modules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "lppsim/errors.hpp"
#include "lppsim/rng.hpp"

namespace lpp::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unbiased sample variance (n-1 denominator).
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double stderr_of_mean(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

/// Linear-interpolated quantile (type 7), p in [0,1].
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct Accumulator {
  std::size_t n = 0;
  double m = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - m;
    m += d / static_cast<double>(n);
    m2 += d * (x - m);
  }
  [[nodiscard]] double mean() const { return m; }
  [[nodiscard]] double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  [[nodiscard]] double stderr_of_mean() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope*x.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "ols: need at least two points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  detail::require(sxx > 0, "ols: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
  }
  return f;
}

/// One-sample Kolmogorov-Smirnov statistic sup|F_emp - F|.
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Pearson correlation; 0 when either sample is constant.
inline double correlation(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "correlation: size mismatch");
  if (x.size() < 2) return 0.0;
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap over `count` resampled index sets. `statistic` receives
/// the resampled indices (with repetition) into the caller's replica arrays.
inline Interval bootstrap_ci(std::size_t sample_size, std::size_t count, std::uint64_t seed,
                             const std::function<double(std::span<const std::size_t>)>& statistic,
                             double level = 0.95) {
  detail::require(sample_size >= 2 && count >= 10, "bootstrap: too few samples");
  rng::SplitMix64 eng(rng::key(seed, rng::Stream::bootstrap));
  std::vector<double> stats;
  stats.reserve(count);
  std::vector<std::size_t> idx(sample_size);
  for (std::size_t b = 0; b < count; ++b) {
    for (auto& i : idx) i = static_cast<std::size_t>(eng() % sample_size);
    stats.push_back(statistic(idx));
  }
  const double tail = (1.0 - level) / 2.0;
  return {quantile(stats, tail), quantile(stats, 1.0 - tail)};
}

/// Normal-approximation standard error of a binomial proportion.
inline double binomial_sigma(double p, double n) { return std::sqrt(std::max(p * (1 - p), 0.0) / n); }

/// Wilson score interval for k successes out of n.
inline Interval wilson(double k, double n, double z = 1.96) {
  if (n <= 0) return {0.0, 1.0};
  const double p = k / n;
  const double denom = 1 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace lpp::stats
