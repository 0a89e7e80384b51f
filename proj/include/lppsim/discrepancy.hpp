#pragma once

// Edge discrepancies d(x) = 2c - |F(x+1) - F(x)|, their small-value law, the
// rescaled point process {(n^-zeta x, n^(1-zeta) d(x))} and its comparison
// with the limiting Poisson process of intensity q^2 p_kappa y^(2 kappa + 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/rng.hpp"
#include "lppsim/stats.hpp"

namespace lpp {

/// Discrepancy of the edge {x, x+1}.
inline double discrepancy(const Environment& env, Site x) {
  return 2.0 * env.c() - std::abs(env.F(x + 1) - env.F(x));
}

struct DiscrepancyField {
  Site x_min = 0;           // d[0] is the edge {x_min, x_min + 1}
  std::vector<double> d;

  [[nodiscard]] Site x_max() const { return x_min + static_cast<Site>(d.size()) - 1; }
  [[nodiscard]] double at(Site x) const {
    if (x < x_min || x > x_max()) throw RangeError("edge outside discrepancy field");
    return d[static_cast<std::size_t>(x - x_min)];
  }
};

inline DiscrepancyField discrepancy_field(const Environment& env) {
  if (env.x_max() - env.x_min() < 1) throw RangeError("discrepancy_field: window needs two sites");
  DiscrepancyField out{env.x_min(), {}};
  out.d.reserve(static_cast<std::size_t>(env.x_max() - env.x_min()));
  for (Site x = env.x_min(); x < env.x_max(); ++x)
    out.d.push_back(2.0 * env.c() - std::abs(env.f_at(x + 1) - env.f_at(x)));
  return out;
}

/// p_kappa = 2 B(kappa+1, kappa+1), via log-gamma.
inline double p_kappa(double kappa) {
  if (!(kappa > -1.0)) throw ParameterError("p_kappa: kappa must exceed -1");
  const double a = kappa + 1.0;
  return 2.0 * std::exp(2.0 * std::lgamma(a) - std::lgamma(2.0 * a));
}

/// Scaling exponent (2 kappa + 2) / (2 kappa + 3).
inline double zeta(double kappa) {
  if (!(kappa > -1.0)) throw ParameterError("zeta: kappa must exceed -1");
  return (2.0 * kappa + 2.0) / (2.0 * kappa + 3.0);
}

/// (2 kappa + 2)(zeta - 1) + zeta, identically zero.
inline double zeta_identity_residual(double kappa) {
  const double z = zeta(kappa);
  return (2.0 * kappa + 2.0) * (z - 1.0) + z;
}

/// lim_{u -> 0} P(d(0) <= u) / u^(2 kappa + 2) = p_kappa q^2 / (2 kappa + 2).
inline double small_discrepancy_limit(const EnvParams& p) {
  return p_kappa(p.kappa) * p.q() * p.q() / (2.0 * p.kappa + 2.0);
}

struct CdfCheckRow {
  double u = 0.0;
  std::uint64_t count = 0;
  double ratio = 0.0;  // P_emp(d <= u) / u^(2k+2)
  double ratio_lo = 0.0;
  double ratio_hi = 0.0;
  double relative_error = 0.0;  // ratio / limit - 1
  bool widened_ci = false;      // fewer than 100 hits
};

struct CdfCheckReport {
  double limit = 0.0;
  std::uint64_t samples = 0;
  std::vector<CdfCheckRow> rows;
};

/// Monte Carlo P(d(0) <= u) for each u, from `samples` independent pairs
/// (F(0), F(1)) drawn on a dedicated counter stream of `seed`.
inline CdfCheckReport small_discrepancy_cdf_check(const EnvParams& params, std::vector<double> u_grid,
                                                  std::uint64_t samples, std::uint64_t seed) {
  params.validate();
  for (double u : u_grid)
    if (!(u > 0 && u <= params.c / 4)) throw ParameterError("u_grid must lie in (0, c/4]");
  std::sort(u_grid.begin(), u_grid.end());
  std::vector<std::uint64_t> hist(u_grid.size(), 0);
  const std::uint64_t k = rng::key(seed, rng::Stream::pairs);
  std::optional<detail::TableCdf> table;
  if (params.family == DensityFamily::custom_table) table = detail::table_cdf(*params.table);
  const detail::TableCdf* tp = table ? &*table : nullptr;
  const double umax = u_grid.back();
  const double c2 = 2.0 * params.c;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const auto j = static_cast<std::int64_t>(2 * i);
    const double f0 = detail::inverse_cdf_fast(params, tp, rng::open_unit(rng::bits(k, j)));
    const double f1 = detail::inverse_cdf_fast(params, tp, rng::open_unit(rng::bits(k, j + 1)));
    const double d = c2 - std::abs(f1 - f0);
    if (d <= umax) {
      auto it = std::lower_bound(u_grid.begin(), u_grid.end(), d);
      ++hist[static_cast<std::size_t>(it - u_grid.begin())];
    }
  }
  CdfCheckReport rep{small_discrepancy_limit(params), samples, {}};
  std::uint64_t cum = 0;
  const double n = static_cast<double>(samples);
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    cum += hist[i];
    CdfCheckRow r;
    r.u = u_grid[i];
    r.count = cum;
    const double scale = std::pow(r.u, 2.0 * params.kappa + 2.0);
    r.ratio = static_cast<double>(cum) / n / scale;
    const auto ci = stats::wilson(static_cast<double>(cum), n);
    r.ratio_lo = ci.lo / scale;
    r.ratio_hi = ci.hi / scale;
    r.relative_error = r.ratio / rep.limit - 1.0;
    r.widened_ci = cum < 100;
    rep.rows.push_back(r);
  }
  return rep;
}

struct CloudPoint {
  double x = 0.0;
  double y = 0.0;
};

struct RescaledPointCloud {
  Time n = 1;
  double zeta = 0.0;
  std::vector<CloudPoint> points;  // one per edge {x, x+1} of the window
};

/// Rescales every edge of the window; `view` requires the window to cover
/// [-view n^zeta, view n^zeta].
inline RescaledPointCloud rescale_cloud(const Environment& env, Time n, double view = 0.0) {
  if (n < 1) throw ParameterError("rescale_cloud: n must be >= 1");
  const double z = zeta(env.params().kappa);
  const double sx = std::pow(static_cast<double>(n), -z);
  const double sy = std::pow(static_cast<double>(n), 1.0 - z);
  const double reach = view / sx;
  if (static_cast<double>(env.x_min()) > -reach || static_cast<double>(env.x_max()) < reach + 1)
    throw RangeError("rescale_cloud: window smaller than the requested view");
  RescaledPointCloud cloud{n, z, {}};
  const auto field = discrepancy_field(env);
  cloud.points.reserve(field.d.size());
  for (std::size_t i = 0; i < field.d.size(); ++i)
    cloud.points.push_back({sx * static_cast<double>(field.x_min + static_cast<Site>(i)), sy * field.d[i]});
  return cloud;
}

/// Half-open rectangle [a1, a2) x [b1, b2) in rescaled coordinates.
struct Rect {
  double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  [[nodiscard]] bool contains(double x, double y) const { return x >= a1 && x < a2 && y >= b1 && y < b2; }
};

/// Mean of the limiting Poisson process on r:
/// q^2 p_kappa (a2 - a1)(b2^(2k+2) - b1^(2k+2)) / (2k+2).
inline double rect_lambda(const EnvParams& p, const Rect& r) {
  const double e = 2.0 * p.kappa + 2.0;
  return p.q() * p.q() * p_kappa(p.kappa) * (r.a2 - r.a1) * (std::pow(r.b2, e) - std::pow(r.b1, e)) / e;
}

/// Six y-bands spanning [0.3, 3) geometrically, widths chosen so the
/// limiting means are 0.25, 0.5, 1, 2, 3 and 5.
inline std::vector<Rect> default_rectangles(const EnvParams& p) {
  const double targets[] = {0.25, 0.5, 1.0, 2.0, 3.0, 5.0};
  std::vector<Rect> out;
  for (int i = 0; i < 6; ++i) {
    const double b1 = 0.3 * std::pow(10.0, i / 6.0);
    const double b2 = 0.3 * std::pow(10.0, (i + 1) / 6.0);
    const double unit = rect_lambda(p, Rect{0, 1, b1, b2});
    const double width = targets[i] / unit;
    out.push_back(Rect{-width / 2, width / 2, b1, b2});
  }
  return out;
}

struct RectStats {
  Rect rect;
  double lambda = 0.0;
  double mean = 0.0;
  double var = 0.0;
  double avoid_emp = 0.0;
  double avoid_theory = 0.0;
  double z = 0.0;  // (mean - lambda) / sqrt(lambda / replicas)
  std::vector<std::int64_t> counts;  // per replica
};

struct PoissonComparison {
  Time n = 1;
  std::size_t replicas = 0;
  std::vector<RectStats> rects;
  std::vector<std::vector<double>> count_correlation;  // between rectangles
  double lag1_correlation = 0.0;  // indicator of the union at k vs k+1, pooled
  double lag2_correlation = 0.0;  // k vs k+2 (independent edges)
};

/// Counts of mu_n in each rectangle over `replicas` independent spatial fields.
inline PoissonComparison poisson_compare(const EnvParams& params, Time n, const std::vector<Rect>& rects,
                                         std::size_t replicas, std::uint64_t master_seed) {
  params.validate();
  if (replicas < 2) throw ParameterError("poisson_compare: need at least two replicas");
  const double z = zeta(params.kappa);
  const double nz = std::pow(static_cast<double>(n), z);
  const double sy = std::pow(static_cast<double>(n), 1.0 - z);
  double reach = 0.0;
  for (const auto& r : rects) reach = std::max({reach, std::abs(r.a1), std::abs(r.a2)});
  const Site W = static_cast<Site>(std::ceil(reach * nz)) + 2;

  PoissonComparison out;
  out.n = n;
  out.replicas = replicas;
  for (const auto& r : rects) {
    RectStats s;
    s.rect = r;
    s.lambda = rect_lambda(params, r);
    s.avoid_theory = std::exp(-s.lambda);
    s.counts.assign(replicas, 0);
    out.rects.push_back(std::move(s));
  }
  std::uint64_t pairs = 0;
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;  // lag-1
  double t1 = 0, t2 = 0, t11 = 0, t22 = 0, t12 = 0;  // lag-2
  std::uint64_t pairs2 = 0;
  std::vector<std::uint8_t> in_union;
  for (std::size_t r = 0; r < replicas; ++r) {
    EnvParams p = params;
    p.seed = rng::replica_seed(master_seed, r);
    p.x_min = -W;
    p.x_max = W;
    const auto F = sample_spatial(p, -W, W);
    in_union.assign(F.size() - 1, 0);
    for (std::size_t i = 0; i + 1 < F.size(); ++i) {
      const double x = static_cast<double>(static_cast<Site>(i) - W) / nz;
      const double y = sy * (2.0 * params.c - std::abs(F[i + 1] - F[i]));
      for (auto& s : out.rects) {
        if (s.rect.contains(x, y)) {
          ++s.counts[r];
          in_union[i] = 1;
        }
      }
    }
    for (std::size_t i = 0; i + 1 < in_union.size(); ++i) {
      const double a = in_union[i], b = in_union[i + 1];
      s1 += a; s2 += b; s11 += a * a; s22 += b * b; s12 += a * b;
      ++pairs;
      if (i + 2 < in_union.size()) {
        const double c2 = in_union[i + 2];
        t1 += a; t2 += c2; t11 += a * a; t22 += c2 * c2; t12 += a * c2;
        ++pairs2;
      }
    }
  }
  auto corr = [](double n_, double a, double b, double aa, double bb, double ab) {
    const double va = aa / n_ - (a / n_) * (a / n_);
    const double vb = bb / n_ - (b / n_) * (b / n_);
    if (va <= 0 || vb <= 0) return 0.0;
    return (ab / n_ - (a / n_) * (b / n_)) / std::sqrt(va * vb);
  };
  out.lag1_correlation = corr(static_cast<double>(pairs), s1, s2, s11, s22, s12);
  out.lag2_correlation = corr(static_cast<double>(pairs2), t1, t2, t11, t22, t12);

  const double R = static_cast<double>(replicas);
  std::vector<std::vector<double>> as_double;
  for (auto& s : out.rects) {
    std::vector<double> v(s.counts.begin(), s.counts.end());
    s.mean = stats::mean(v);
    s.var = stats::variance(v);
    s.avoid_emp = static_cast<double>(std::count(s.counts.begin(), s.counts.end(), 0)) / R;
    s.z = s.lambda > 0 ? (s.mean - s.lambda) / std::sqrt(s.lambda / R) : 0.0;
    as_double.push_back(std::move(v));
  }
  out.count_correlation.assign(rects.size(), std::vector<double>(rects.size(), 0.0));
  for (std::size_t i = 0; i < rects.size(); ++i)
    for (std::size_t j = 0; j < rects.size(); ++j)
      out.count_correlation[i][j] = i == j ? 1.0 : stats::correlation(as_double[i], as_double[j]);
  return out;
}

/// Fraction of replicas in which two points of mu_n inside (-a, a) x (0, b)
/// have heights closer than 2 delta, i.e. some strip of height 2 delta holds
/// at least two points.
inline double close_pair_frequency(const EnvParams& params, Time n, double a, double b, double delta,
                                   std::size_t replicas, std::uint64_t master_seed) {
  params.validate();
  if (!(a > 0 && b > 0 && delta > 0) || replicas < 1) throw ParameterError("close_pair_frequency: bad arguments");
  const double z = zeta(params.kappa);
  const double nz = std::pow(static_cast<double>(n), z);
  const double sy = std::pow(static_cast<double>(n), 1.0 - z);
  const Site W = static_cast<Site>(std::ceil(a * nz)) + 2;
  std::size_t hits = 0;
  std::vector<double> ys;
  for (std::size_t r = 0; r < replicas; ++r) {
    EnvParams p = params;
    p.seed = rng::replica_seed(master_seed, r);
    const auto F = sample_spatial(p, -W, W);
    ys.clear();
    for (std::size_t i = 0; i + 1 < F.size(); ++i) {
      const double x = static_cast<double>(static_cast<Site>(i) - W) / nz;
      const double y = sy * (2.0 * params.c - std::abs(F[i + 1] - F[i]));
      if (x > -a && x < a && y < b) ys.push_back(y);
    }
    std::sort(ys.begin(), ys.end());
    for (std::size_t i = 1; i < ys.size(); ++i)
      if (ys[i] - ys[i - 1] < 2 * delta) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(replicas);
}

/// d*(x) = 2c - F(x) + min(F(x-1), F(x), F(x+1)).
inline double modified_discrepancy(const Environment& env, Site x) {
  if (!env.has_site(x - 1) || !env.has_site(x + 1)) throw RangeError("modified_discrepancy: neighbours outside window");
  const double fx = env.f_at(x);
  return 2.0 * env.c() - fx + std::min({env.f_at(x - 1), fx, env.f_at(x + 1)});
}

/// Same formula on a plain spatial array indexed from `x_min`.
inline double modified_discrepancy(std::span<const double> f, Site x_min, double c, Site x) {
  const auto i = static_cast<std::size_t>(x - x_min);
  if (x - 1 < x_min || i + 1 >= f.size()) throw RangeError("modified_discrepancy: neighbours outside field");
  return 2.0 * c - f[i] + std::min({f[i - 1], f[i], f[i + 1]});
}

/// 2 kappa^-2 (1+kappa)^-2 h^(2(kappa+1)), valid when rho(u) <= (c-u)^kappa / kappa.
inline double modified_discrepancy_tail_bound(double kappa, double h) {
  if (!(kappa > 0)) throw ParameterError("tail bound needs kappa > 0");
  return 2.0 / (kappa * kappa * (1 + kappa) * (1 + kappa)) * std::pow(h, 2.0 * (kappa + 1.0));
}

struct RecordEdge {
  Site x = 0;
  double d = 0.0;
};

/// Running minima of d over x = 0, 1, ..., x_end (strictly decreasing).
inline std::vector<RecordEdge> record_edges(const Environment& env, Site x_end) {
  if (!env.has_site(0) || !env.has_site(x_end + 1)) throw RangeError("record_edges: window must cover [0, x_end + 1]");
  std::vector<RecordEdge> out;
  double best = std::numeric_limits<double>::infinity();
  for (Site x = 0; x <= x_end; ++x) {
    const double d = 2.0 * env.c() - std::abs(env.f_at(x + 1) - env.f_at(x));
    if (d < best) {
      best = d;
      out.push_back({x, d});
    }
  }
  return out;
}

}  // namespace lpp
