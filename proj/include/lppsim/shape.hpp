#pragma once

// Monte Carlo estimates of the shape function Lambda(alpha) = -lim A(n,[alpha n])/n
// and checks of its structure: value at 0 and 1, corner bound, strict
// nonlinearity, a linear piece at 0, concavity and evenness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
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

/// [alpha n] rounded towards zero.
inline Site slope_target(double alpha, Time n) {
  return static_cast<Site>(std::trunc(alpha * static_cast<double>(n)));
}

/// {0, +-0.02, ..., +-0.2} and {+-0.25, ..., +-1} in steps of 0.05, sorted.
inline std::vector<double> default_alpha_grid(bool symmetric = true) {
  std::vector<double> pos;
  for (int i = 1; i <= 10; ++i) pos.push_back(0.02 * i);
  for (int i = 5; i <= 20; ++i) pos.push_back(0.05 * i);
  std::vector<double> out{0.0};
  for (double a : pos) {
    out.push_back(a);
    if (symmetric) out.push_back(-a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ShapeEstimate {
  EnvParams params;
  std::vector<double> alphas;
  std::vector<Time> n_values;
  std::size_t replicas = 0;
  std::uint64_t master_seed = 0;
  // Indexed [alpha][n].
  std::vector<std::vector<double>> lambda_hat;
  std::vector<std::vector<double>> stderr_;
  // Per-replica -A(n,[alpha n])/n, indexed [alpha][n][replica].
  std::vector<std::vector<std::vector<double>>> samples;
  bool truncated = false;     // budget ran out before the requested ladder
  std::uint64_t cells = 0;    // DP cell updates spent

  [[nodiscard]] std::size_t alpha_index(double a) const {
    for (std::size_t i = 0; i < alphas.size(); ++i)
      if (std::abs(alphas[i] - a) < 1e-12) return i;
    throw ParameterError("alpha " + std::to_string(a) + " not on the grid");
  }
  [[nodiscard]] bool has_alpha(double a) const {
    return std::any_of(alphas.begin(), alphas.end(), [&](double x) { return std::abs(x - a) < 1e-12; });
  }
  [[nodiscard]] std::size_t last() const { return n_values.size() - 1; }
  [[nodiscard]] double lam(double a) const { return lambda_hat[alpha_index(a)][last()]; }
  [[nodiscard]] double se(double a) const { return stderr_[alpha_index(a)][last()]; }
};

struct ShapeOptions {
  std::uint64_t budget = 0;  // max DP cell updates; 0 = unlimited
  unsigned threads = 1;
  /// Doubles the top of the ladder until c - lambda_hat(0, n) < extend_target * c
  /// or the budget would be exceeded.
  bool extend_ladder = false;
  double extend_target = 0.05;
};

namespace detail {

inline std::uint64_t shape_cells(Time n) { return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n); }

inline void shape_replicas(ShapeEstimate& est, std::size_t from, std::size_t to, unsigned threads) {
  const Time n_max = est.n_values.back();
  const std::size_t A = est.alphas.size(), N = est.n_values.size();
  parallel_for(to - from, threads, [&](std::size_t j) {
    const std::size_t r = from + j;
    EnvParams p = est.params;
    p.seed = rng::replica_seed(est.master_seed, r);
    p.x_min = -n_max;
    p.x_max = n_max;
    p.horizon = n_max;
    const auto env = sample_environment(p);
    StripDP dp(env, 0, 0, -n_max, n_max);
    for (std::size_t k = 0; k < N; ++k) {
      const Time n = est.n_values[k];
      dp.advance_to(n);
      for (std::size_t a = 0; a < A; ++a)
        est.samples[a][k][r] = -dp.value(slope_target(est.alphas[a], n)) / static_cast<double>(n);
    }
  });
}

inline void shape_summarise(ShapeEstimate& est) {
  const std::size_t A = est.alphas.size(), N = est.n_values.size();
  est.lambda_hat.assign(A, std::vector<double>(N, 0.0));
  est.stderr_.assign(A, std::vector<double>(N, 0.0));
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t k = 0; k < N; ++k) {
      std::span<const double> v(est.samples[a][k].data(), est.replicas);
      est.lambda_hat[a][k] = stats::mean(v);
      est.stderr_[a][k] = stats::stderr_of_mean(v);
    }
}

}  // namespace detail

/// One environment and one rolling DP per replica; the rows at every n of
/// the ladder serve every alpha of the grid.
inline ShapeEstimate estimate_shape(const EnvParams& params, std::vector<double> alphas, std::vector<Time> n_ladder,
                                    std::size_t replicas, std::uint64_t master_seed, const ShapeOptions& opt = {}) {
  params.validate();
  if (replicas < 2) throw ParameterError("estimate_shape: need at least two replicas");
  if (n_ladder.empty()) throw ParameterError("estimate_shape: empty n ladder");
  for (std::size_t i = 0; i < n_ladder.size(); ++i) {
    if (n_ladder[i] < 1) throw ParameterError("estimate_shape: n must be >= 1");
    if (i > 0 && n_ladder[i] <= n_ladder[i - 1]) throw ParameterError("estimate_shape: n ladder must increase");
  }
  for (double a : alphas)
    if (!(a >= -1.0 && a <= 1.0)) throw ParameterError("estimate_shape: alpha outside [-1, 1]");
  std::sort(alphas.begin(), alphas.end());

  auto run = [&](const std::vector<Time>& ladder) {
    ShapeEstimate est;
    est.params = params;
    est.alphas = alphas;
    est.n_values = ladder;
    est.replicas = replicas;
    est.master_seed = master_seed;
    est.samples.assign(alphas.size(),
                       std::vector<std::vector<double>>(ladder.size(), std::vector<double>(replicas, 0.0)));
    detail::shape_replicas(est, 0, replicas, opt.threads);
    est.cells = replicas * detail::shape_cells(ladder.back());
    detail::shape_summarise(est);
    return est;
  };

  const std::uint64_t need = replicas * detail::shape_cells(n_ladder.back());
  if (opt.budget > 0 && need > opt.budget)
    throw GuardError("estimate_shape: n^2 * replicas = " + std::to_string(need) + " exceeds budget " +
                     std::to_string(opt.budget));
  ShapeEstimate est = run(n_ladder);
  std::uint64_t spent = est.cells;
  if (opt.extend_ladder && est.has_alpha(0.0)) {
    while (params.c - est.lam(0.0) >= opt.extend_target * params.c) {
      auto ladder = est.n_values;
      ladder.push_back(2 * ladder.back());
      const std::uint64_t more = replicas * detail::shape_cells(ladder.back());
      if (opt.budget > 0 && spent + more > opt.budget) {
        est.truncated = true;
        break;
      }
      auto next = run(ladder);
      spent += next.cells;
      est = std::move(next);
    }
    est.cells = spent;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Structural checks; all use the largest n of the estimate unless noted.

struct BoundRow {
  double alpha = 0.0;
  double lambda = 0.0;
  double stderr_ = 0.0;
  double lower = 0.0;  // c(1 - |alpha|)
  double upper = 0.0;  // c - |alpha|(c - D)
  bool lower_ok = true;
  bool upper_ok = true;
};

struct CornerReport {
  double D = 0.0;
  std::vector<BoundRow> rows;
  double slope_right = 0.0;  // OLS slope of lambda_hat over 0 <= alpha <= 0.2
  double slope_stderr = 0.0;
  bool pass = true;  // upper bound holds within 3 stderr everywhere
};

inline std::vector<BoundRow> bounds_chain(const ShapeEstimate& est) {
  const double c = est.params.c;
  const double D = mean_abs_F(est.params);
  std::vector<BoundRow> out;
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    BoundRow r;
    r.alpha = est.alphas[a];
    r.lambda = est.lambda_hat[a][est.last()];
    r.stderr_ = est.stderr_[a][est.last()];
    r.lower = c * (1.0 - std::abs(r.alpha));
    r.upper = c - std::abs(r.alpha) * (c - D);
    r.lower_ok = r.lambda >= r.lower - 3.0 * r.stderr_;
    r.upper_ok = r.lambda <= r.upper + 3.0 * r.stderr_;
    out.push_back(r);
  }
  return out;
}

inline CornerReport check_corner(const ShapeEstimate& est, double slope_window = 0.2) {
  CornerReport rep;
  rep.D = mean_abs_F(est.params);
  rep.rows = bounds_chain(est);
  for (const auto& r : rep.rows) rep.pass = rep.pass && r.upper_ok;
  std::vector<double> xs, ys;
  for (const auto& r : rep.rows)
    if (r.alpha >= 0 && r.alpha <= slope_window + 1e-12) {
      xs.push_back(r.alpha);
      ys.push_back(r.lambda);
    }
  if (xs.size() >= 2) {
    const auto fit = stats::ols(xs, ys);
    rep.slope_right = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
  }
  return rep;
}

struct MarginRow {
  double alpha = 0.0;
  double margin = 0.0;  // lambda_hat - c(1 - |alpha|)
  double stderr_ = 0.0;
  double z = 0.0;
};

struct NonlinearityReport {
  std::vector<MarginRow> rows;  // interior alphas only
  bool pass = true;             // no interior margin below -3 stderr
};

inline NonlinearityReport check_nonlinearity(const ShapeEstimate& est) {
  NonlinearityReport rep;
  const double c = est.params.c;
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    const double al = est.alphas[a];
    if (al == 0.0 || std::abs(al) >= 1.0) continue;
    MarginRow r;
    r.alpha = al;
    r.margin = est.lambda_hat[a][est.last()] - c * (1.0 - std::abs(al));
    r.stderr_ = est.stderr_[a][est.last()];
    r.z = r.stderr_ > 0 ? r.margin / r.stderr_ : (r.margin > 0 ? INFINITY : -INFINITY);
    if (r.margin < -3.0 * r.stderr_) rep.pass = false;
    rep.rows.push_back(r);
  }
  return rep;
}

struct FlatEdgeReport {
  double alpha0_hat = 0.0;
  double K_hat = 0.0;
  bool inconclusive = true;
  std::vector<double> alphas;     // positive grid points examined
  std::vector<double> residuals;  // lambda_hat - (c - K alpha) for the accepted fit
  std::vector<double> tolerance;
};

/// Fits c - K alpha through (0, c) over 0 < alpha <= alpha_j, growing j while
/// every residual stays below max(2 stderr, 1e-3 c). Works from a table of
/// (alpha, lambda, stderr) so synthetic inputs can be checked directly.
inline FlatEdgeReport detect_flat_edge(const std::vector<double>& alphas, const std::vector<double>& lambda,
                                       const std::vector<double>& se, double c) {
  FlatEdgeReport rep;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (alphas[i] > 0) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return alphas[p] < alphas[q]; });
  std::size_t accepted = 0;
  double K_acc = 0.0;
  for (std::size_t j = 1; j <= idx.size(); ++j) {
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < j; ++k) {
      const double a = alphas[idx[k]];
      sxy += a * (c - lambda[idx[k]]);
      sxx += a * a;
    }
    const double K = sxy / sxx;
    bool ok = true;
    for (std::size_t k = 0; k < j && ok; ++k) {
      const std::size_t i = idx[k];
      ok = std::abs(lambda[i] - (c - K * alphas[i])) < std::max(2.0 * se[i], 1e-3 * c);
    }
    if (!ok) break;
    accepted = j;
    K_acc = K;
  }
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    rep.alphas.push_back(alphas[i]);
    rep.residuals.push_back(lambda[i] - (c - K_acc * alphas[i]));
    rep.tolerance.push_back(std::max(2.0 * se[i], 1e-3 * c));
  }
  rep.inconclusive = accepted < 2;
  if (accepted >= 1) {
    const std::size_t i0 = idx[accepted - 1];
    rep.alpha0_hat = alphas[i0];
    rep.K_hat = (c - lambda[i0]) / alphas[i0];
  }
  return rep;
}

inline FlatEdgeReport detect_flat_edge(const ShapeEstimate& est) {
  std::vector<double> lam, se;
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    lam.push_back(est.lambda_hat[a][est.last()]);
    se.push_back(est.stderr_[a][est.last()]);
  }
  return detect_flat_edge(est.alphas, lam, se, est.params.c);
}

struct SlopeEstimate {
  double s = 0.0;
  double stderr_ = 0.0;
  double base = 0.0;
  double h = 0.0;
  bool consistent = true;  // s > 0
  std::vector<std::pair<double, double>> M_table;  // (M, M (c - lambda_hat(1/M)))
};

/// s = -Lambda'(0+) by the Richardson combination 2 D(h) - D(2h) of one-sided
/// differences D(h) = (lambda(base) - lambda(base + h)) / h. The standard
/// error is taken over replicas, which share environments across alpha.
inline SlopeEstimate estimate_s(const ShapeEstimate& est, double base = 0.1, double h = 0.04) {
  for (double a : {base, base + h, base + 2 * h})
    if (!est.has_alpha(a)) throw ParameterError("estimate_s: grid lacks alpha = " + std::to_string(a));
  const std::size_t k = est.last();
  const auto& x0 = est.samples[est.alpha_index(base)][k];
  const auto& x1 = est.samples[est.alpha_index(base + h)][k];
  const auto& x2 = est.samples[est.alpha_index(base + 2 * h)][k];
  std::vector<double> per(est.replicas);
  for (std::size_t r = 0; r < est.replicas; ++r) {
    const double d1 = (x0[r] - x1[r]) / h;
    const double d2 = (x0[r] - x2[r]) / (2 * h);
    per[r] = 2 * d1 - d2;
  }
  SlopeEstimate out;
  out.s = stats::mean(per);
  out.stderr_ = stats::stderr_of_mean(per);
  out.base = base;
  out.h = h;
  out.consistent = out.s > 0;
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    const double al = est.alphas[a];
    if (al > 0) out.M_table.push_back({1.0 / al, (est.params.c - est.lambda_hat[a][k]) / al});
  }
  std::sort(out.M_table.begin(), out.M_table.end());
  return out;
}

struct PairedCheck {
  double alpha = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
  bool pass = true;
};

/// lambda_hat(alpha) - lambda_hat(-alpha) with paired (same-replica) errors.
inline std::vector<PairedCheck> evenness(const ShapeEstimate& est) {
  std::vector<PairedCheck> out;
  const std::size_t k = est.last();
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    const double al = est.alphas[a];
    if (al <= 0 || !est.has_alpha(-al)) continue;
    const auto& p = est.samples[a][k];
    const auto& m = est.samples[est.alpha_index(-al)][k];
    std::vector<double> d(est.replicas);
    for (std::size_t r = 0; r < est.replicas; ++r) d[r] = p[r] - m[r];
    PairedCheck c{al, stats::mean(d), stats::stderr_of_mean(d), true};
    c.pass = std::abs(c.value) <= 3.0 * c.stderr_;
    out.push_back(c);
  }
  return out;
}

/// Divided second differences over consecutive grid points (should be <= 0).
inline std::vector<PairedCheck> concavity(const ShapeEstimate& est) {
  std::vector<PairedCheck> out;
  const std::size_t k = est.last();
  for (std::size_t a = 1; a + 1 < est.alphas.size(); ++a) {
    const double h1 = est.alphas[a] - est.alphas[a - 1], h2 = est.alphas[a + 1] - est.alphas[a];
    std::vector<double> d(est.replicas);
    for (std::size_t r = 0; r < est.replicas; ++r) {
      const double l = est.samples[a - 1][k][r], m = est.samples[a][k][r], u = est.samples[a + 1][k][r];
      d[r] = (u - m) / h2 - (m - l) / h1;
    }
    PairedCheck c{est.alphas[a], stats::mean(d), stats::stderr_of_mean(d), true};
    c.pass = c.value <= 3.0 * c.stderr_;
    out.push_back(c);
  }
  return out;
}

/// lambda_hat(0, n) along the ladder and whether it increases.
inline std::pair<std::vector<double>, bool> monotone_at_zero(const ShapeEstimate& est) {
  std::vector<double> v = est.lambda_hat[est.alpha_index(0.0)];
  bool inc = true;
  for (std::size_t i = 1; i < v.size(); ++i) inc = inc && v[i] > v[i - 1];
  return {v, inc};
}

/// Two-point extrapolation in n assuming lambda(n) = L - a n^-(1 - zeta),
/// per replica, from the last two ladder points. Diagnostic only.
inline std::vector<std::pair<double, double>> extrapolate_in_n(const ShapeEstimate& est) {
  std::vector<std::pair<double, double>> out;
  if (est.n_values.size() < 2) return out;
  const std::size_t k2 = est.last(), k1 = k2 - 1;
  const double p = 1.0 - zeta(est.params.kappa);
  const double ratio = std::pow(static_cast<double>(est.n_values[k2]) / static_cast<double>(est.n_values[k1]), -p);
  for (std::size_t a = 0; a < est.alphas.size(); ++a) {
    std::vector<double> v(est.replicas);
    for (std::size_t r = 0; r < est.replicas; ++r)
      v[r] = (est.samples[a][k2][r] - ratio * est.samples[a][k1][r]) / (1.0 - ratio);
    out.push_back({stats::mean(v), stats::stderr_of_mean(v)});
  }
  return out;
}

}  // namespace lpp
