#include <cmath>

#include <gtest/gtest.h>

#include "lppsim/dp.hpp"
#include "lppsim/shape.hpp"

using namespace lpp;

namespace {

EnvParams power(double kappa) { return EnvParams::edge_power(kappa, 1.0, 0, -1, 1, 1); }

/// Hand-built estimate whose replicas all equal lambda(alpha).
template <class Fn>
ShapeEstimate synthetic(const std::vector<double>& alphas, Fn lambda, double noise = 0.0) {
  ShapeEstimate est;
  est.params = power(0.0);
  est.alphas = alphas;
  est.n_values = {1000};
  est.replicas = 4;
  est.samples.assign(alphas.size(), std::vector<std::vector<double>>(1, std::vector<double>(4)));
  for (std::size_t a = 0; a < alphas.size(); ++a)
    for (std::size_t r = 0; r < 4; ++r)
      est.samples[a][0][r] = lambda(alphas[a]) + noise * (r % 2 ? 1.0 : -1.0);
  detail::shape_summarise(est);
  return est;
}

}  // namespace

TEST(Shape, SlopeTargetTruncatesTowardZero) {
  EXPECT_EQ(slope_target(0.15, 10), 1);
  EXPECT_EQ(slope_target(-0.15, 10), -1);
  EXPECT_EQ(slope_target(0.999, 10), 9);
  EXPECT_EQ(slope_target(1.0, 7), 7);
  EXPECT_EQ(slope_target(-0.5, 3), -1);
}

TEST(Shape, DefaultGrid) {
  const auto g = default_alpha_grid();
  EXPECT_EQ(g.size(), 53u);
  EXPECT_DOUBLE_EQ(g.front(), -1.0);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  ShapeEstimate e;
  e.alphas = g;
  for (double a : {0.0, 0.1, 0.14, 0.18, -0.2, 0.25, 0.95}) EXPECT_TRUE(e.has_alpha(a)) << a;
  EXPECT_EQ(default_alpha_grid(false).size(), 27u);
}

TEST(Shape, SamplesEqualDirectDP) {
  const auto p = power(0.5);
  const std::vector<double> alphas{-1.0, -0.3, 0.0, 0.14, 0.5, 1.0};
  const auto est = estimate_shape(p, alphas, {7, 20, 41}, 6, 99);
  for (std::size_t r = 0; r < 6; ++r) {
    EnvParams q = p;
    q.seed = rng::replica_seed(99, r);
    q.x_min = -41;
    q.x_max = 41;
    q.horizon = 41;
    const auto env = sample_environment(q);
    const auto tab = build_table(env, 41);
    for (std::size_t k = 0; k < 3; ++k) {
      const Time n = est.n_values[k];
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        const Site x = static_cast<Site>(std::trunc(alphas[a] * static_cast<double>(n)));
        EXPECT_DOUBLE_EQ(est.samples[a][k][r], -tab.at(n, x) / static_cast<double>(n));
      }
    }
  }
}

TEST(Shape, ThreadCountDoesNotChangeResults) {
  const auto a = estimate_shape(power(0.0), {0.0, 0.2}, {50, 100}, 8, 5, {0, 1});
  const auto b = estimate_shape(power(0.0), {0.0, 0.2}, {50, 100}, 8, 5, {0, 3});
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.cells, 8u * 100u * 100u);
}

TEST(Shape, BudgetGuardAndLadderExtension) {
  EXPECT_THROW(estimate_shape(power(0.0), {0.0}, {100}, 10, 1, {50'000}), GuardError);
  ShapeOptions opt;
  opt.extend_ladder = true;
  opt.budget = 10 * (100 * 100 + 200 * 200 + 400 * 400);
  const auto est = estimate_shape(power(1.0), {0.0}, {100}, 10, 1, opt);
  EXPECT_TRUE(est.truncated);
  EXPECT_EQ(est.n_values.back(), 400);
  EXPECT_LE(est.cells, opt.budget);
  EXPECT_THROW(estimate_shape(power(0.0), {0.0}, {100, 50}, 10, 1), ParameterError);
  EXPECT_THROW(estimate_shape(power(0.0), {1.5}, {100}, 10, 1), ParameterError);
}

TEST(Shape, RealRunStructure) {
  const auto p = power(0.0);
  const std::vector<double> alphas{-0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.5, 0.9, 1.0};
  const auto est = estimate_shape(p, alphas, {100, 400}, 60, 2024);
  // At alpha = 1 the path is forced, so lambda_hat has mean zero.
  EXPECT_LT(std::abs(est.lam(1.0)), 4 * est.se(1.0));
  EXPECT_GT(est.lam(0.0), 0.5);
  EXPECT_LT(est.lam(0.0), 1.0);
  EXPECT_TRUE(check_corner(est).pass);
  // Near alpha = 0 lambda_hat(n) is still well below its limit at n = 400.
  for (const auto& r : check_nonlinearity(est).rows)
    if (std::abs(r.alpha) >= 0.5 && std::abs(r.alpha) < 1.0) {
      EXPECT_GT(r.z, 3.0) << r.alpha;
    }
  for (const auto& e : evenness(est)) EXPECT_TRUE(e.pass) << e.alpha;
  const auto [v, inc] = monotone_at_zero(est);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_TRUE(inc);
  EXPECT_EQ(extrapolate_in_n(est).size(), alphas.size());
}

TEST(Shape, BoundsChainValues) {
  auto est = synthetic({0.0, 0.5, 1.0}, [](double a) { return 1.0 - 0.4 * a; });
  est.params = power(1.0);  // D = 1/3
  const auto rows = bounds_chain(est);
  EXPECT_DOUBLE_EQ(rows[1].lower, 0.5);
  EXPECT_NEAR(rows[1].upper, 1.0 - 0.5 * (2.0 / 3.0), 1e-15);
  EXPECT_TRUE(rows[1].lower_ok);
  EXPECT_FALSE(rows[1].upper_ok);
  EXPECT_FALSE(check_corner(est).pass);
  EXPECT_NEAR(check_corner(est, 0.6).slope_right, -0.4, 1e-12);
}

TEST(Shape, FlatEdgeOnSyntheticCurves) {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.02 * i);
  // Linear up to 0.1, strictly concave after.
  auto kinked = [](double a) { return 1.0 - 0.3 * a - (a > 0.1 ? 4.0 * (a - 0.1) * (a - 0.1) : 0.0); };
  const auto rep = detect_flat_edge(synthetic(grid, kinked));
  EXPECT_FALSE(rep.inconclusive);
  EXPECT_NEAR(rep.alpha0_hat, 0.1, 0.021);
  EXPECT_NEAR(rep.K_hat, 0.3, 0.02);
  // Strictly concave from the start.
  auto curved = [](double a) { return 1.0 - 0.3 * a - 8.0 * a * a; };
  EXPECT_TRUE(detect_flat_edge(synthetic(grid, curved)).inconclusive);
  // Linear throughout.
  const auto lin = detect_flat_edge(synthetic(grid, [](double a) { return 1.0 - 0.5 * a; }));
  EXPECT_NEAR(lin.alpha0_hat, 0.4, 1e-12);
  EXPECT_NEAR(lin.K_hat, 0.5, 1e-12);
}

TEST(Shape, SlopeEstimateOnSyntheticCurves) {
  std::vector<double> grid{0.0, 0.02, 0.06, 0.1, 0.14, 0.18, 0.25};
  const auto lin = estimate_s(synthetic(grid, [](double a) { return 1.0 - 0.37 * a; }));
  EXPECT_NEAR(lin.s, 0.37, 1e-12);
  EXPECT_TRUE(lin.consistent);
  // Richardson removes the quadratic term of the one-sided difference, leaving -lambda'(base).
  const auto quad = estimate_s(synthetic(grid, [](double a) { return 1.0 - 0.37 * a - 0.8 * a * a; }));
  EXPECT_NEAR(quad.s, 0.37 + 2 * 0.8 * 0.1, 1e-12);
  EXPECT_EQ(quad.M_table.size(), 6u);
  EXPECT_NEAR(quad.M_table.front().first, 4.0, 1e-12);
  EXPECT_THROW(estimate_s(synthetic({0.0, 0.1}, [](double) { return 1.0; })), ParameterError);
}

TEST(Shape, ConcavityAndEvennessOnSyntheticCurves) {
  std::vector<double> grid{-0.4, -0.2, 0.0, 0.2, 0.4};
  const auto conc = concavity(synthetic(grid, [](double a) { return 1.0 - a * a; }, 0.01));
  for (const auto& c : conc) EXPECT_TRUE(c.pass);
  const auto conv = concavity(synthetic(grid, [](double a) { return 1.0 + a * a; }));
  for (const auto& c : conv) EXPECT_FALSE(c.pass);
  const auto odd = evenness(synthetic(grid, [](double a) { return 1.0 + a; }));
  ASSERT_EQ(odd.size(), 2u);
  EXPECT_FALSE(odd[0].pass);
}

TEST(Shape, ExtrapolationRecoversPowerLaw) {
  ShapeEstimate est = synthetic({0.0}, [](double) { return 0.0; });
  est.n_values = {1000, 8000};
  est.samples[0] = {std::vector<double>(4), std::vector<double>(4)};
  const double p = 1.0 / 3.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t r = 0; r < 4; ++r)
      est.samples[0][k][r] = 0.9 - 0.7 * std::pow(static_cast<double>(est.n_values[k]), -p) + 0.01 * r;
  detail::shape_summarise(est);
  const auto ex = extrapolate_in_n(est);
  EXPECT_NEAR(ex[0].first, 0.9 + 0.015, 1e-12);
}
