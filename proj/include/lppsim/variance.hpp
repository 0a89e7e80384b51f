#pragma once

// Fluctuations over B of the minimal action to reach a record edge and stay
// on it, for one fixed spatial field.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "lppsim/discrepancy.hpp"
#include "lppsim/dp.hpp"
#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/parallel.hpp"
#include "lppsim/rng.hpp"
#include "lppsim/stats.hpp"

namespace lpp {

struct VarianceRow {
  std::size_t index = 0;  // 1-based record index
  Site x = 0;
  double d = 0.0;
  Time horizon = 0;
  double mean = 0.0;
  double variance = 0.0;
  double variance_stderr = 0.0;
  std::size_t replicas = 0;
  std::vector<double> actions;  // per replica
};

struct VarianceStudyResult {
  EnvParams params;
  std::vector<VarianceRow> rows;
  std::uint64_t cells = 0;
  bool truncated = false;
};

struct VarianceOptions {
  std::size_t record_count = 0;    // study the first k records (window grows as needed)
  std::optional<Site> x_limit;     // or every record with x <= x_limit
  std::uint64_t budget = 0;        // max cell updates; 0 = unlimited
  unsigned threads = 1;
  Site initial_window = 64;
};

inline Time variance_horizon(Site x) { return std::max<Time>(4 * x, 8); }

/// Cell updates of one replica at record x.
inline std::uint64_t variance_cells(Site x) {
  const Time H = variance_horizon(x);
  std::uint64_t s = 0;
  for (Time t = 1; t < H && x > 0; ++t) s += static_cast<std::uint64_t>(std::min<Time>(t, x - 1) + 1);
  return s;
}

/// min over first-arrival times m in [0, H] of
///   (action up to m of a walk from (0, 0) that first touches {x, x+1} at m)
///   + (action of eta_x on (m, H]),
/// with walks confined to [0, x+1]. Before m the walk lives in [0, x-1], so it
/// arrives at x from x-1.
inline double reach_and_stay_action(const Environment& env, Site x, Time H, std::uint64_t* cells = nullptr) {
  if (x < 0 || !env.has_site(x + 1) || !env.has_site(0)) throw RangeError("reach_and_stay_action: edge outside window");
  if (env.horizon() < H) throw RangeError("reach_and_stay_action: horizon too short");
  // Suffix sums of eta_x's per-step cost.
  const double f0 = env.f_at(x), f1 = env.f_at(x + 1);
  std::vector<double> tail(static_cast<std::size_t>(H + 1), 0.0);
  for (Time t = H; t >= 1; --t) {
    const double b = env.sign_at(t);
    tail[static_cast<std::size_t>(t - 1)] = tail[static_cast<std::size_t>(t)] + std::min(b * f0, b * f1);
  }
  if (x == 0) return tail[0];
  StripDP dp(env, 0, 0, 0, x - 1);
  double best = kInf;
  for (Time m = 1; m <= H; ++m) {
    const double arrive = dp.value(x - 1) + env.sign_at(m) * f0;
    best = std::min(best, arrive + tail[static_cast<std::size_t>(m)]);
    if (m < H) dp.step();
  }
  if (cells) *cells += dp.cells();
  return best;
}

namespace detail {

/// Unbiased sample variance and its large-sample standard error.
inline std::pair<double, double> variance_with_se(std::span<const double> v) {
  const double m = stats::mean(v);
  const double var = stats::variance(v);
  double m4 = 0;
  for (double x : v) m4 += std::pow(x - m, 4);
  m4 /= static_cast<double>(v.size());
  const double n = static_cast<double>(v.size());
  return {var, std::sqrt(std::max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)};
}

}  // namespace detail

/// One spatial field from `params.seed`; B replicas keyed by (record, replica).
inline VarianceStudyResult variance_study(const EnvParams& params, std::size_t b_replicas, std::uint64_t sign_seed,
                                          const VarianceOptions& opt) {
  params.validate();
  if (b_replicas < 2) throw ParameterError("variance_study: need at least two B replicas");
  if (!opt.x_limit && opt.record_count < 1) throw ParameterError("variance_study: need record_count >= 1 or x_limit");
  VarianceStudyResult out;
  out.params = params;

  // Locate the records, growing the window until enough are found.
  std::vector<RecordEdge> recs;
  Site W = opt.x_limit ? *opt.x_limit : std::max<Site>(opt.initial_window, 1);
  for (;;) {
    EnvParams p = params;
    p.x_min = 0;
    p.x_max = W + 1;
    p.horizon = 1;
    const Environment field(p, sample_spatial(p, 0, W + 1), sample_signs(sign_seed, 1));
    recs = record_edges(field, W);
    if (opt.x_limit || recs.size() >= opt.record_count) break;
    if (opt.budget > 0 && variance_cells(2 * W) * b_replicas > opt.budget) {
      out.truncated = true;
      break;
    }
    W *= 2;
  }
  if (!opt.x_limit && recs.size() > opt.record_count) recs.resize(opt.record_count);

  std::uint64_t planned = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Site x = recs[i].x;
    const std::uint64_t cost = variance_cells(x) * b_replicas;
    if (opt.budget > 0 && planned + cost > opt.budget) {
      out.truncated = true;
      break;
    }
    planned += cost;
    const Time H = variance_horizon(x);
    EnvParams p = params;
    p.x_min = 0;
    p.x_max = x + 1;
    p.horizon = H;
    const Environment base(p, sample_spatial(p, 0, x + 1), sample_signs(sign_seed, H));
    VarianceRow row;
    row.index = i + 1;
    row.x = x;
    row.d = recs[i].d;
    row.horizon = H;
    row.replicas = b_replicas;
    row.actions.assign(b_replicas, 0.0);
    std::vector<std::uint64_t> cells(b_replicas, 0);
    const std::uint64_t rec_seed = rng::replica_seed(sign_seed, i);
    parallel_for(b_replicas, opt.threads, [&](std::size_t r) {
      const auto env = base.with_signs(rng::replica_seed(rec_seed, r));
      row.actions[r] = reach_and_stay_action(env, x, H, &cells[r]);
    });
    for (auto c : cells) out.cells += c;
    row.mean = stats::mean(row.actions);
    std::tie(row.variance, row.variance_stderr) = detail::variance_with_se(row.actions);
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct VarianceTrend {
  double reference = 0.0;  // variance at the 3rd record
  std::vector<double> ratios;  // last five records over the reference
  bool pass = false;
};

/// Whether the last five variances stay within `factor` of the 3rd one.
inline VarianceTrend variance_trend(const VarianceStudyResult& res, double factor = 3.0) {
  VarianceTrend t;
  if (res.rows.size() < 3) return t;
  t.reference = res.rows[2].variance;
  const std::size_t from = res.rows.size() >= 5 ? res.rows.size() - 5 : 0;
  t.pass = t.reference > 0;
  for (std::size_t i = from; i < res.rows.size(); ++i) {
    const double r = res.rows[i].variance / t.reference;
    t.ratios.push_back(r);
    t.pass = t.pass && r <= factor && r >= 1.0 / factor;
  }
  return t;
}

}  // namespace lpp
