#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lppsim/variance.hpp"

using namespace lpp;

namespace {

/// Minimum over all walks in [0, x+1] that reach x, of the action up to the
/// first arrival plus the edge-stay cost afterwards.
double brute_reach_and_stay(const Environment& env, Site x, Time H) {
  std::vector<double> tail(static_cast<std::size_t>(H + 1), 0.0);
  for (Time t = H; t >= 1; --t)
    tail[static_cast<std::size_t>(t - 1)] =
        tail[static_cast<std::size_t>(t)] + std::min(env.B(t) * env.F(x), env.B(t) * env.F(x + 1));
  if (x == 0) return tail[0];
  double best = kInf;
  std::function<void(Time, Site, double)> rec = [&](Time t, Site y, double a) {
    if (y == x) {
      best = std::min(best, a + tail[static_cast<std::size_t>(t)]);
      return;
    }
    if (t == H) return;
    for (Site dy : {-1, 0, 1}) {
      const Site z = y + dy;
      if (z >= 0 && z <= x + 1) rec(t + 1, z, a + env.B(t + 1) * env.F(z));
    }
  };
  rec(0, 0, 0.0);
  return best;
}

}  // namespace

TEST(Variance, HorizonAndCells) {
  EXPECT_EQ(variance_horizon(0), 8);
  EXPECT_EQ(variance_horizon(2), 8);
  EXPECT_EQ(variance_horizon(3), 12);
  EXPECT_EQ(variance_horizon(100), 400);
  EXPECT_EQ(variance_cells(0), 0u);
  // x = 3, H = 12: rows t = 1..11 cover min(t, 2) + 1 sites.
  EXPECT_EQ(variance_cells(3), 2u + 3u * 10u);
}

TEST(Variance, ReachAndStayMatchesEnumeration) {
  for (int k = 0; k < 40; ++k) {
    const Site x = k % 4;
    const Time H = variance_horizon(x);
    auto env = sample_environment(EnvParams::edge_power(0.5 * (k % 3), 1.0, 10 + k, -1, x + 2, H));
    EXPECT_NEAR(reach_and_stay_action(env, x, H), brute_reach_and_stay(env, x, H), 1e-12) << "x " << x;
  }
  auto env = sample_environment(EnvParams::edge_power(0.0, 1.0, 1, 0, 5, 20));
  EXPECT_THROW(reach_and_stay_action(env, 5, 8), RangeError);
  EXPECT_THROW(reach_and_stay_action(env, 2, 21), RangeError);
}

TEST(Variance, FirstRecordVarianceHasClosedForm) {
  const auto p = EnvParams::edge_power(0.0, 1.0, 77, 0, 1, 1);
  VarianceOptions opt;
  opt.record_count = 1;
  const auto res = variance_study(p, 4000, 3, opt);
  ASSERT_EQ(res.rows.size(), 1u);
  const auto& row = res.rows[0];
  EXPECT_EQ(row.x, 0);
  EXPECT_EQ(row.horizon, 8);
  auto f = sample_spatial(p, 0, 1);
  const double var = 8.0 * std::pow((f[0] + f[1]) / 2, 2);
  EXPECT_NEAR(row.variance, var, 4 * row.variance_stderr);
  EXPECT_NEAR(row.mean, -8.0 * std::abs(f[0] - f[1]) / 2, 4 * std::sqrt(var / 4000));
}

TEST(Variance, StudyStructureAndDeterminism) {
  const auto p = EnvParams::edge_power(0.0, 1.0, 5, 0, 1, 1);
  VarianceOptions opt;
  opt.record_count = 5;
  opt.threads = 1;
  const auto a = variance_study(p, 40, 9, opt);
  opt.threads = 3;
  const auto b = variance_study(p, 40, 9, opt);
  ASSERT_EQ(a.rows.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.rows[i].actions, b.rows[i].actions);
    EXPECT_EQ(a.rows[i].index, i + 1);
    if (i) {
      EXPECT_GT(a.rows[i].x, a.rows[i - 1].x);
      EXPECT_LT(a.rows[i].d, a.rows[i - 1].d);
    }
  }
  opt.record_count = 0;
  opt.x_limit = a.rows[4].x;
  const auto c = variance_study(p, 40, 9, opt);
  ASSERT_GE(c.rows.size(), 5u);
  EXPECT_EQ(c.rows[4].actions, a.rows[4].actions);
}

TEST(Variance, BudgetTruncates) {
  const auto p = EnvParams::edge_power(0.0, 1.0, 5, 0, 1, 1);
  VarianceOptions opt;
  opt.x_limit = 2000;
  opt.budget = 1000;
  const auto res = variance_study(p, 10, 1, opt);
  EXPECT_TRUE(res.truncated);
  EXPECT_LE(res.cells, opt.budget);
  EXPECT_THROW(variance_study(p, 1, 1, opt), ParameterError);
  EXPECT_THROW(variance_study(p, 10, 1, VarianceOptions{}), ParameterError);
}

TEST(Variance, TrendRule) {
  VarianceStudyResult r;
  for (double v : {1.0, 2.0, 1.5, 2.0, 3.0, 4.0, 4.4, 1.0}) {
    VarianceRow row;
    row.variance = v;
    r.rows.push_back(row);
  }
  auto t = variance_trend(r);
  EXPECT_DOUBLE_EQ(t.reference, 1.5);
  ASSERT_EQ(t.ratios.size(), 5u);
  EXPECT_TRUE(t.pass);
  r.rows[6].variance = 4.6;
  EXPECT_FALSE(variance_trend(r).pass);
  r.rows[6].variance = 0.4;
  EXPECT_FALSE(variance_trend(r).pass);
  r.rows.resize(2);
  EXPECT_FALSE(variance_trend(r).pass);
}

TEST(Variance, StandardErrorOfVariance) {
  // Two-point distribution: mu4 = sigma^4, so the standard error vanishes for large samples.
  std::vector<double> v;
  for (int i = 0; i < 1000; ++i) v.push_back(i % 2 ? 1.0 : -1.0);
  const auto [var, se] = detail::variance_with_se(v);
  EXPECT_NEAR(var, 1000.0 / 999.0, 1e-12);
  EXPECT_LT(se, 0.01);
}
