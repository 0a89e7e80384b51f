#include <cmath>
#include <random>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lppsim/freepath.hpp"

using namespace lpp;
using testing_helpers::make_env;

namespace {

FreePathSample synthetic_sample(const std::vector<Time>& grid, std::size_t R) {
  FreePathSample s;
  s.params = EnvParams::edge_power(0.0, 1.0, 0, -1, 1, 1);
  s.n_grid = grid;
  s.replicas = R;
  s.rows.assign(R, std::vector<FreePathStats>(grid.size()));
  return s;
}

}  // namespace

TEST(FreePath, StatsOfHandBuiltPath) {
  // d(-2..2) = 1.9, 1.0, 0.3, 0.5, 0.7.
  auto env = make_env(-2, {0.0, 0.1, -0.9, 0.8, -0.7, 0.6}, std::vector<int>(10, 1));
  const LazyPath p(0, {0, 0, 1, 1, 0, 1});
  const auto st = path_stats(env, p, -1.25);
  EXPECT_EQ(st.ell, 0);
  EXPECT_NEAR(st.d, 0.3, 1e-15);
  EXPECT_EQ(st.tau, 0);
  EXPECT_TRUE(st.settled);
  EXPECT_EQ(st.endpoint, 1);
  EXPECT_EQ(st.action, -1.25);
  const LazyPath q(0, {0, -1, -1, 0, 1, 2});
  const auto sq = path_stats(env, q, 0.0);
  // Range [-1, 2] excludes {-2, -1}.
  EXPECT_EQ(sq.ell, 0);
  EXPECT_EQ(sq.tau, 0);
  EXPECT_FALSE(sq.settled);
  const LazyPath r(0, {1, 2, 2});
  const auto sr = path_stats(env, r, 0.0);
  EXPECT_EQ(sr.ell, 1);
  EXPECT_EQ(sr.tau, 0);
  EXPECT_TRUE(sr.settled);
}

TEST(FreePath, SweepMatchesFullWidthDP) {
  // A narrow strip either certifies its optimum or refuses; it is never silently wrong.
  int certified = 0, refused = 0;
  for (int k = 0; k < 40; ++k) {
    const Time n = 300;
    auto env = sample_environment(EnvParams::edge_power(0.5, 1.0, 60 + k, -n - 1, n + 1, n));
    const auto wide = free_path_sweep(env, {50, 150, 300}, n);
    EXPECT_DOUBLE_EQ(wide[2].action, min_action_free(env, n).value);
    EXPECT_EQ(wide[2].endpoint, min_action_free(env, n).endpoint);
    for (Site W : {40, 60, 150}) {
      try {
        const auto narrow = free_path_sweep(env, {50, 150, 300}, W);
        ++certified;
        for (std::size_t i = 0; i < 3; ++i) {
          EXPECT_DOUBLE_EQ(narrow[i].action, wide[i].action);
          EXPECT_EQ(narrow[i].endpoint, wide[i].endpoint);
        }
      } catch (const WindowTooSmall&) {
        ++refused;
      }
    }
  }
  EXPECT_GT(certified, 40);
  EXPECT_GT(refused, 0);
}

TEST(FreePath, WindowTooSmallIsDetectedAndWidened) {
  bool thrown = false;
  for (int k = 0; k < 30 && !thrown; ++k) {
    auto env = sample_environment(EnvParams::edge_power(0.0, 1.0, 700 + k, -401, 401, 400));
    try {
      (void)free_path_sweep(env, {400}, 2);
    } catch (const WindowTooSmall&) {
      thrown = true;
    }
  }
  EXPECT_TRUE(thrown);
  const auto base = EnvParams::edge_power(0.0, 1.0, 0, -1, 1, 1);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rep = free_path_replica(base, {100, 400}, seed);
    EnvParams p = base;
    p.seed = seed;
    p.x_min = -401;
    p.x_max = 401;
    p.horizon = 400;
    const auto full = free_path_sweep(sample_environment(p), {100, 400}, 400);
    EXPECT_DOUBLE_EQ(rep[1].action, full[1].action);
    EXPECT_EQ(rep[1].ell, full[1].ell);
  }
}

TEST(FreePath, SettledEdgeIsNoWorseThanBallistic) {
  for (int k = 0; k < 10; ++k) {
    const Time n = 500;
    auto env = sample_environment(EnvParams::edge_power(1.0, 1.0, 30 + k, -n - 1, n + 1, n));
    const auto st = free_path_stats(env, n, n);
    EXPECT_LE(st.range_hi - st.range_lo, n);
    EXPECT_GE(st.action, -static_cast<double>(n));
    EXPECT_LE(st.action, action(env, ballistic_then_edge(env, st.ell, n)) + 1e-9);
  }
}

TEST(FreePath, DefaultWindowAndCost) {
  EXPECT_EQ(default_window(0.0, 1000), 400);
  EXPECT_EQ(default_window(1.0, 100000), static_cast<Site>(std::ceil(4 * std::pow(1e5, 0.8))));
  EXPECT_EQ(free_path_cost(0.0, 1000), 1000u * 801u);
  EXPECT_EQ(free_path_cost(0.0, 10), 10u * 21u);
}

TEST(FreePath, SampleBudgetAndThreads) {
  const auto p = EnvParams::edge_power(0.0, 1.0, 0, -1, 1, 1);
  const auto a = free_path_sample(p, {50, 200}, 6, 9, 1);
  const auto b = free_path_sample(p, {200, 50}, 6, 9, 3);
  ASSERT_EQ(a.rows.size(), 6u);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.rows[r][k].action, b.rows[r][k].action);
  const auto c = free_path_sample(p, {50, 200}, 6, 9, 1, 3 * free_path_cost(0.0, 200));
  EXPECT_TRUE(c.truncated);
  EXPECT_EQ(c.replicas, 3u);
}

TEST(FreePath, ComputeH) {
  const auto p = EnvParams::edge_power(0.0, 1.0, 0, -1, 1, 1);
  EXPECT_NEAR(compute_h(p, 0.5), std::pow(4.0 / 3.0, -1.0 / 3.0), 1e-14);
  for (double k : {-0.5, 1.0, 2.0})
    for (double c : {1.0, 3.0}) {
      const auto q = EnvParams::edge_power(k, c, 0, -1, 1, 1);
      const double qq = (k + 1) / (2 * std::pow(c, k + 1));
      const double inner =
          2 * boost::math::beta(k + 1, k + 1) * qq * qq * std::pow(2.0, 2 * k + 2) / (0.3 * (k + 1) * (2 * k + 3));
      EXPECT_NEAR(compute_h(q, 0.3), std::pow(inner, -1 / (2 * k + 3)), 1e-12);
    }
  EXPECT_THROW(compute_h(p, 0.0), ParameterError);
}

TEST(FreePath, FitSRecoversExactRelation) {
  auto s = synthetic_sample({1000}, 50);
  std::mt19937_64 g(3);
  for (std::size_t r = 0; r < 50; ++r) {
    auto& st = s.rows[r][0];
    st.n = 1000;
    st.ell = static_cast<Site>(g() % 80) - 40;
    st.d = 0.01 * static_cast<double>(g() % 10);
    st.action = -1000.0 + 0.42 * std::abs(st.ell) + 1000 * st.d / 2;
  }
  EXPECT_NEAR(fit_s(s, 0), 0.42, 1e-12);
}

TEST(FreePath, ScalingRegressionOnPowerLaws) {
  const std::vector<Time> grid{100, 400, 1600, 6400};
  auto s = synthetic_sample(grid, 200);
  std::mt19937_64 g(5);
  std::lognormal_distribution<double> noise(0.0, 0.3);
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double n = static_cast<double>(grid[k]);
      auto& st = s.rows[r][k];
      st.n = grid[k];
      st.ell = static_cast<Site>(std::round(std::pow(n, 2.0 / 3.0) * noise(g)));
      st.d = std::pow(n, -1.0 / 3.0) * noise(g);
      st.action = -n + std::pow(n, 2.0 / 3.0) * noise(g);
    }
  const auto fit = scaling_regression(s, 300, 1);
  EXPECT_NEAR(fit.ell.slope, 2.0 / 3.0, 0.03);
  EXPECT_NEAR(fit.d.slope, -1.0 / 3.0, 0.03);
  EXPECT_NEAR(fit.action.slope, 2.0 / 3.0, 0.03);
  EXPECT_LT(fit.ell.lo, fit.ell.slope);
  EXPECT_GT(fit.ell.hi, fit.ell.slope);
  EXPECT_LE(fit.d.lo, -1.0 / 3.0 + 0.03);
  auto narrow = synthetic_sample({100, 1000}, 5);
  EXPECT_THROW(scaling_regression(narrow), ParameterError);
}

TEST(FreePath, LimitLawOnExactSample) {
  const std::size_t R = 4000;
  auto s = synthetic_sample({8000}, R);
  const double h = compute_h(s.params, 0.5), nz = std::pow(8000.0, 2.0 / 3.0);
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < R; ++r) {
    auto& st = s.rows[r][0];
    st.n = 8000;
    st.action = -8000.0 + h * nz * std::cbrt(-std::log(1 - u(g)));
    st.ell = 10;
    st.tau = static_cast<Time>(r % 50);
    st.settled = r % 2 == 0;
  }
  const auto rep = limit_law_test(s, 0, 0.5, 0.45, 0.55);
  EXPECT_LT(rep.ks, 1.36 / std::sqrt(static_cast<double>(R)));
  EXPECT_LE(rep.ks_lo_band, rep.ks);
  EXPECT_GE(rep.ks_hi_band, rep.ks);
  EXPECT_LT(rep.h_lo, rep.h);
  EXPECT_GT(rep.h_hi, rep.h);
  for (const auto& q : rep.quantiles) EXPECT_LT(std::abs(q.z), 3.5) << q.survival_theory;
  EXPECT_NEAR(rep.quantiles[2].t, std::cbrt(std::log(2.0)), 1e-14);
  EXPECT_DOUBLE_EQ(rep.settled_fraction, 0.5);
  EXPECT_DOUBLE_EQ(rep.tau_diagnostic[0].second, 20.0 / 50.0);
  EXPECT_DOUBLE_EQ(rep.tau_diagnostic[2].second, 1.0);
  EXPECT_GE(rep.min_value, 0.0);
  EXPECT_DOUBLE_EQ(limit_survival(0.0, -1.0), 1.0);
  EXPECT_NEAR(limit_survival(1.0, 1.0), std::exp(-1.0), 1e-15);
}

TEST(FreePath, GMinimiser) {
  // n = 1 makes both scalings the identity.
  auto env = make_env(-3, {0.0, 0.0, -0.9, 0.9, 0.0, -0.95, 0.95, 0.0}, {1});
  // d(-1) = 0.2, d(0) = 1.1, d(2) = 0.1.
  const auto g = g_argmin(env, 1, 0.02, 3);
  EXPECT_EQ(g.x, 2);
  EXPECT_NEAR(g.value, 0.02 * 2 + 0.1 / 2, 1e-14);
  // Exact tie between x = -1 and x = 2 goes to the smaller |x|.
  EXPECT_EQ(g_argmin(env, 1, 0.05, 3).x, -1);
  EXPECT_EQ(g_argmin(env, 1, 0.5, 3).x, 0);
  EXPECT_THROW(g_argmin(env, 1, 0.5, 4), RangeError);
}
