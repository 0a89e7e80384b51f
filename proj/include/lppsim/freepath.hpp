#pragma once

// Free-endpoint optimal paths: where they settle (the minimal-discrepancy
// edge on their range), how long they take to get there, how these scale
// with n, and the law of the rescaled minimal action.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lppsim/discrepancy.hpp"
#include "lppsim/dp.hpp"
#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/parallel.hpp"
#include "lppsim/rng.hpp"
#include "lppsim/stats.hpp"

namespace lpp {

struct FreePathStats {
  Time n = 0;
  Site ell = 0;         // minimal-discrepancy edge {ell, ell+1} over the path range
  double d = 0.0;       // its discrepancy
  Time tau = 0;         // first time the path stands on {ell, ell+1}
  bool settled = false; // path stays on the edge from tau on
  double action = 0.0;
  Site endpoint = 0;
  Site range_lo = 0, range_hi = 0;
  Site window = 0;      // half-width W of the strip used
};

/// Statistics of an already computed optimal path.
inline FreePathStats path_stats(const Environment& env, const LazyPath& path, double act) {
  FreePathStats st;
  st.n = path.end_time();
  st.action = act;
  st.endpoint = path.back();
  auto [lo, hi] = path.range();
  st.range_lo = lo;
  st.range_hi = hi;
  // Edges {x, x+1} with x in the range; ties resolved by smaller |x|, then negative.
  double best = kInf;
  Site arg = lo;
  for (Site x = lo; x <= hi; ++x) {
    const double d = discrepancy(env, x);
    if (d < best || (d == best && (std::abs(x) < std::abs(arg) || (std::abs(x) == std::abs(arg) && x < arg)))) {
      best = d;
      arg = x;
    }
  }
  st.ell = arg;
  st.d = best;
  st.tau = -1;
  for (Time t = path.start_time; t <= path.end_time(); ++t) {
    const Site x = path.at(t);
    if (x == arg || x == arg + 1) {
      st.tau = t;
      break;
    }
  }
  st.settled = st.tau >= 0;
  for (Time t = std::max<Time>(st.tau, 0); st.settled && t <= path.end_time(); ++t) {
    const Site x = path.at(t);
    st.settled = x == arg || x == arg + 1;
  }
  return st;
}

inline Site default_window(double kappa, Time n) {
  return static_cast<Site>(std::ceil(4.0 * std::pow(static_cast<double>(n), zeta(kappa))));
}

/// Lower bound on the action at time n of any path that leaves [-W, W]:
/// such a path stands on +-W at some t < n with a prefix inside the strip,
/// and each later step costs at least -c.
struct StripCertificate {
  double best = kInf;  // running min over t of min(A_W(t, -W), A_W(t, W)) + c t

  void observe(const StripDP& dp, double c) {
    const double b = std::min(dp.value(dp.strip_lo()), dp.value(dp.strip_hi()));
    best = std::min(best, b + c * static_cast<double>(dp.time() - dp.start_time()));
  }
  [[nodiscard]] double bound(Time n, double c) const { return best - c * static_cast<double>(n); }
};

/// Optimal free-endpoint paths at every n of `n_grid` from one sweep over
/// the strip [-W, W]. Throws WindowTooSmall unless the strip optimum is
/// certified to be the unrestricted one.
inline std::vector<FreePathStats> free_path_sweep(const Environment& env, const std::vector<Time>& n_grid, Site W,
                                                  std::uint64_t* cells = nullptr) {
  if (n_grid.empty()) throw ParameterError("free_path_sweep: empty n grid");
  const Time n_max = n_grid.back();
  W = std::min<Site>(W, n_max);
  const double c = env.c();
  StripDP dp(env, 0, 0, -W, W, true);
  StripCertificate cert;
  std::vector<FreeMin> mins;
  for (Time n : n_grid) {
    if (n < 1) throw ParameterError("free_path_sweep: n must be >= 1");
    while (dp.time() < n) {
      if (W < n_max) cert.observe(dp, c);
      dp.step();
    }
    mins.push_back(free_argmin(dp.row(), -W));
    if (W < n && mins.back().value > cert.bound(n, c))
      throw WindowTooSmall("strip [-W, W] not certified at W = " + std::to_string(W));
  }
  std::vector<FreePathStats> out;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const auto path = dp.path_to(n_grid[i], mins[i].endpoint);
    auto st = path_stats(env, path, mins[i].value);
    st.window = W;
    out.push_back(st);
  }
  if (cells) *cells += dp.cells();
  return out;
}

/// free_path_sweep for a single n.
inline FreePathStats free_path_stats(const Environment& env, Time n, std::optional<Site> W = std::nullopt) {
  const Site w = W ? *W : default_window(env.params().kappa, n);
  return free_path_sweep(env, {n}, w).front();
}

/// Samples one replica's environment over [-W-1, W+1] and runs the sweep,
/// doubling W until the strip optimum is certified.
inline std::vector<FreePathStats> free_path_replica(const EnvParams& base, const std::vector<Time>& n_grid,
                                                    std::uint64_t seed, std::uint64_t* cells = nullptr) {
  const Time n_max = n_grid.back();
  Site W = default_window(base.kappa, n_max);
  for (;;) {
    const Site w = std::min<Site>(W, n_max);
    EnvParams p = base;
    p.seed = seed;
    p.x_min = -w - 1;
    p.x_max = w + 1;
    p.horizon = n_max;
    const auto env = sample_environment(p);
    try {
      return free_path_sweep(env, n_grid, w, cells);
    } catch (const WindowTooSmall&) {
      W *= 2;
    }
  }
}

struct FreePathSample {
  EnvParams params;
  std::vector<Time> n_grid;
  std::size_t replicas = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::vector<FreePathStats>> rows;  // [replica][n index]
  std::uint64_t cells = 0;
  bool truncated = false;
};

/// Cells one replica of free_path_sample is expected to cost (before any widening).
inline std::uint64_t free_path_cost(double kappa, Time n_max) {
  const auto W = static_cast<std::uint64_t>(std::min<Site>(default_window(kappa, n_max), n_max));
  return static_cast<std::uint64_t>(n_max) * (2 * W + 1);
}

inline FreePathSample free_path_sample(const EnvParams& params, std::vector<Time> n_grid, std::size_t replicas,
                                       std::uint64_t master_seed, unsigned threads = 1, std::uint64_t budget = 0) {
  params.validate();
  if (n_grid.empty() || replicas < 1) throw ParameterError("free_path_sample: empty grid or no replicas");
  std::sort(n_grid.begin(), n_grid.end());
  FreePathSample out;
  out.params = params;
  out.n_grid = n_grid;
  out.master_seed = master_seed;
  const std::uint64_t per = free_path_cost(params.kappa, n_grid.back());
  std::size_t R = replicas;
  if (budget > 0 && per * R > budget) {
    R = static_cast<std::size_t>(budget / std::max<std::uint64_t>(per, 1));
    out.truncated = true;
  }
  out.replicas = R;
  out.rows.assign(R, {});
  std::vector<std::uint64_t> cells(R, 0);
  parallel_for(R, threads, [&](std::size_t r) {
    out.rows[r] = free_path_replica(params, n_grid, rng::replica_seed(master_seed, r), &cells[r]);
  });
  for (auto c : cells) out.cells += c;
  return out;
}

// ---------------------------------------------------------------------------

struct SlopeWithCI {
  double slope = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ScalingFit {
  std::vector<Time> n;
  std::vector<double> median_ell, median_d, median_action;
  SlopeWithCI ell, d, action;
};

/// Log-log least-squares slopes of the medians of |ell_n|, d_n and cn + A
/// against n, with percentile-bootstrap intervals over replicas.
inline ScalingFit scaling_regression(const FreePathSample& s, std::size_t bootstrap = 400, std::uint64_t seed = 1) {
  const std::size_t N = s.n_grid.size();
  if (N < 2) throw ParameterError("scaling_regression: need at least two n values");
  if (std::log10(static_cast<double>(s.n_grid.back()) / static_cast<double>(s.n_grid.front())) < 1.5 - 1e-9)
    throw ParameterError("scaling_regression: n grid must span at least 1.5 decades");
  const double c = s.params.c;
  std::vector<double> logn;
  for (Time n : s.n_grid) logn.push_back(std::log(static_cast<double>(n)));
  auto medians = [&](std::span<const std::size_t> idx, int which) {
    std::vector<double> ys;
    for (std::size_t k = 0; k < N; ++k) {
      std::vector<double> v;
      for (std::size_t r : idx) {
        const auto& st = s.rows[r][k];
        v.push_back(which == 0 ? static_cast<double>(std::abs(st.ell))
                    : which == 1 ? st.d
                                 : c * static_cast<double>(st.n) + st.action);
      }
      ys.push_back(stats::median(v));
    }
    return ys;
  };
  auto slope_of = [&](const std::vector<double>& med) {
    std::vector<double> ly;
    for (double m : med) ly.push_back(std::log(std::max(m, 1e-300)));
    return stats::ols(logn, ly).slope;
  };
  std::vector<std::size_t> all(s.replicas);
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  ScalingFit fit;
  fit.n = s.n_grid;
  fit.median_ell = medians(all, 0);
  fit.median_d = medians(all, 1);
  fit.median_action = medians(all, 2);
  SlopeWithCI* outs[3] = {&fit.ell, &fit.d, &fit.action};
  const std::vector<double>* meds[3] = {&fit.median_ell, &fit.median_d, &fit.median_action};
  for (int w = 0; w < 3; ++w) {
    outs[w]->slope = slope_of(*meds[w]);
    const auto ci = stats::bootstrap_ci(s.replicas, bootstrap, seed + static_cast<std::uint64_t>(w),
                                        [&](std::span<const std::size_t> idx) { return slope_of(medians(idx, w)); });
    outs[w]->lo = ci.lo;
    outs[w]->hi = ci.hi;
  }
  return fit;
}

/// h = (p_kappa q^2 2^(2k+2) / (s (k+1)(2k+3)))^(-1/(2k+3)).
inline double compute_h(const EnvParams& p, double s) {
  if (!(s > 0)) throw ParameterError("compute_h: s must be positive");
  const double k = p.kappa;
  const double inner = p_kappa(k) * p.q() * p.q() * std::pow(2.0, 2 * k + 2) / (s * (k + 1) * (2 * k + 3));
  return std::pow(inner, -1.0 / (2 * k + 3));
}

/// Slope of (cn + A) - n d_n / 2 on |ell_n| through the origin; the value of s
/// for which cn + A matches s|ell_n| + n d_n / 2 in least squares.
inline double fit_s(const FreePathSample& s, std::size_t k) {
  double sxy = 0, sxx = 0;
  for (std::size_t r = 0; r < s.replicas; ++r) {
    const auto& st = s.rows[r][k];
    const double x = static_cast<double>(std::abs(st.ell));
    const double y = s.params.c * static_cast<double>(st.n) + st.action - static_cast<double>(st.n) * st.d / 2;
    sxy += x * y;
    sxx += x * x;
  }
  if (sxx <= 0) throw ParameterError("fit_s: all ell_n are zero");
  return sxy / sxx;
}

struct QuantileZ {
  double t = 0.0;
  double survival_theory = 0.0;
  double survival_emp = 0.0;
  double z = 0.0;
};

struct LimitLawReport {
  Time n = 0;
  std::size_t replicas = 0;
  double s = 0.0, h = 0.0, zeta = 0.0;
  double h_lo = 0.0, h_hi = 0.0;  // from the s interval
  double ks = 0.0, ks_lo_band = 0.0, ks_hi_band = 0.0;
  std::vector<QuantileZ> quantiles;
  std::vector<double> values;  // (cn + A) / (h n^zeta)
  std::vector<std::pair<int, double>> tau_diagnostic;  // (M, fraction with tau < M |ell|)
  double settled_fraction = 0.0;
  double min_value = 0.0;
};

inline double limit_survival(double kappa, double t) { return t <= 0 ? 1.0 : std::exp(-std::pow(t, 2 * kappa + 3)); }

/// Compares (cn + A)/(h n^zeta) at grid index k with exp(-t^(2k+3)); s_lo/s_hi
/// give the band of h values reported alongside.
inline LimitLawReport limit_law_test(const FreePathSample& s, std::size_t k, double s_val, double s_lo, double s_hi) {
  LimitLawReport rep;
  const auto& p = s.params;
  rep.n = s.n_grid[k];
  rep.replicas = s.replicas;
  rep.s = s_val;
  rep.zeta = zeta(p.kappa);
  rep.h = compute_h(p, s_val);
  rep.h_lo = compute_h(p, std::max(s_lo, 1e-12));
  rep.h_hi = compute_h(p, std::max(s_hi, 1e-12));
  const double nz = std::pow(static_cast<double>(rep.n), rep.zeta);
  std::vector<double> raw;
  std::size_t settled = 0;
  for (std::size_t r = 0; r < s.replicas; ++r) {
    const auto& st = s.rows[r][k];
    raw.push_back(p.c * static_cast<double>(st.n) + st.action);
    settled += st.settled ? 1 : 0;
  }
  rep.settled_fraction = static_cast<double>(settled) / static_cast<double>(s.replicas);
  auto cdf = [&](double t) { return 1.0 - limit_survival(p.kappa, t); };
  auto ks_for = [&](double h) {
    std::vector<double> v;
    for (double x : raw) v.push_back(x / (h * nz));
    return stats::ks_distance(v, cdf);
  };
  for (double x : raw) rep.values.push_back(x / (rep.h * nz));
  rep.min_value = *std::min_element(rep.values.begin(), rep.values.end());
  rep.ks = ks_for(rep.h);
  const double k1 = ks_for(rep.h_lo), k2 = ks_for(rep.h_hi);
  rep.ks_lo_band = std::min({rep.ks, k1, k2});
  rep.ks_hi_band = std::max({rep.ks, k1, k2});
  const double R = static_cast<double>(s.replicas);
  for (double q : {0.9, 0.75, 0.5, 0.25, 0.1}) {
    QuantileZ z;
    z.survival_theory = q;
    z.t = std::pow(-std::log(q), 1.0 / (2 * p.kappa + 3));
    z.survival_emp = static_cast<double>(std::count_if(rep.values.begin(), rep.values.end(),
                                                       [&](double v) { return v >= z.t; })) / R;
    z.z = (z.survival_emp - q) / std::sqrt(q * (1 - q) / R);
    rep.quantiles.push_back(z);
  }
  for (int M : {2, 4, 8}) {
    std::size_t hit = 0;
    for (std::size_t r = 0; r < s.replicas; ++r) {
      const auto& st = s.rows[r][k];
      if (st.tau >= 0 && static_cast<double>(st.tau) < M * static_cast<double>(std::abs(st.ell))) ++hit;
    }
    rep.tau_diagnostic.push_back({M, static_cast<double>(hit) / R});
  }
  return rep;
}

struct GArgmin {
  Site x = 0;
  double value = 0.0;
};

inline double g_value(double s, double x, double y) { return s * std::abs(x) + y / 2; }

/// Minimiser over the window's edges of g(n^-zeta x, n^(1-zeta) d(x)).
inline GArgmin g_argmin(const Environment& env, Time n, double s, std::optional<Site> W = std::nullopt) {
  const double z = zeta(env.params().kappa);
  const Site w = W ? *W : default_window(env.params().kappa, n);
  if (!env.has_site(-w) || !env.has_site(w + 1)) throw RangeError("g_argmin: window smaller than [-W, W+1]");
  const double sx = std::pow(static_cast<double>(n), -z), sy = std::pow(static_cast<double>(n), 1 - z);
  GArgmin best{0, kInf};
  for (Site x = -w; x <= w; ++x) {
    const double v = g_value(s, sx * static_cast<double>(x), sy * discrepancy(env, x));
    if (v < best.value ||
        (v == best.value && (std::abs(x) < std::abs(best.x) || (std::abs(x) == std::abs(best.x) && x < best.x))))
      best = {x, v};
  }
  return best;
}

}  // namespace lpp
