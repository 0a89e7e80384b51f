#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <gtest/gtest.h>

#include "lppsim/env.hpp"
#include "lppsim/stats.hpp"

using namespace lpp;

namespace {

EnvParams power(double kappa, double c = 1.0, std::uint64_t seed = 1) {
  return EnvParams::edge_power(kappa, c, seed, -10, 10, 10);
}

EnvParams table_params() {
  // Half density 1 + x on [0, 1]; normalised internally, q given by hand.
  EnvParams p;
  p.family = DensityFamily::custom_table;
  p.c = 1.0;
  p.table = DensityTable{{0.0, 0.25, 0.5, 1.0}, {1.0, 1.25, 1.5, 2.0}, 2.0 / 3.0};
  p.validate();
  return p;
}

}  // namespace

TEST(Env, ParamValidation) {
  EXPECT_THROW(power(-1.0), ParameterError);
  EXPECT_THROW(power(0.0, 0.0), ParameterError);
  EXPECT_THROW(EnvParams::edge_power(0, 1, 1, 1, 5, 10), ParameterError);
  EXPECT_THROW(EnvParams::edge_power(0, 1, 1, -5, 5, 0), ParameterError);
  EnvParams u;
  u.family = DensityFamily::uniform;
  u.kappa = 1.0;
  EXPECT_THROW(u.validate(), ParameterError);
}

TEST(Env, EdgeConstant) {
  EXPECT_DOUBLE_EQ(power(0.0).q(), 0.5);
  EXPECT_DOUBLE_EQ(power(1.0).q(), 1.0);
  EXPECT_DOUBLE_EQ(power(2.0, 2.0).q(), 3.0 / 16.0);
}

TEST(Env, DensityValues) {
  EXPECT_DOUBLE_EQ(density_pdf(power(0.0), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(density_pdf(power(1.0), 0.5), 0.5);
  for (double k : {0.5, 1.0, 2.0}) EXPECT_EQ(density_pdf(power(k), 1.0), 0.0);
  EXPECT_EQ(density_pdf(power(0.0), 1.5), 0.0);
  for (double k : {-0.5, 0.0, 0.5, 1.0, 2.0})
    for (double x : {0.1, 0.37, 0.9, 0.999}) EXPECT_EQ(density_pdf(power(k), x), density_pdf(power(k), -x));
}

TEST(Env, DensityIntegratesToOne) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double k : {-0.5, 0.0, 0.5, 1.0, 2.0})
    for (double c : {1.0, 2.5}) {
      const auto p = power(k, c);
      const double left = ts.integrate([&](double x) { return density_pdf(p, x); }, -c, 0.0);
      const double right = ts.integrate([&](double x) { return density_pdf(p, x); }, 0.0, c);
      // For kappa < 0 the quadrature itself loses digits to cancellation in c - |x| at the pole.
      EXPECT_NEAR(left + right, 1.0, k < 0 ? 2e-8 : 1e-9) << "kappa " << k << " c " << c;
    }
  EnvParams u;
  u.family = DensityFamily::uniform;
  u.c = 3.0;
  EXPECT_NEAR(ts.integrate([&](double x) { return density_pdf(u, x); }, -3.0, 3.0), 1.0, 1e-9);
  const auto t = table_params();
  // Piecewise linear: Gauss-Kronrod per piece is exact up to rounding.
  const std::vector<double> nodes{-1, -0.5, -0.25, 0, 0.25, 0.5, 1};
  double total = 0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double x) { return density_pdf(t, x); }, nodes[i], nodes[i + 1]);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Env, InverseCdfValues) {
  EXPECT_DOUBLE_EQ(inverse_cdf(power(0.0), 0.5), 0.0);
  EXPECT_DOUBLE_EQ(inverse_cdf(power(2.0), 0.5), 0.0);
  EXPECT_DOUBLE_EQ(inverse_cdf(power(0.0), 0.75), 0.5);
  EXPECT_THROW(inverse_cdf(power(0.0), 1.5), ParameterError);
  EXPECT_THROW(inverse_cdf(power(0.0), -0.1), ParameterError);
  EXPECT_LT(inverse_cdf(power(1.0), 1.0), 1.0);
  EXPECT_GT(inverse_cdf(power(1.0), 1.0 - 1e-12), 0.999);
  EXPECT_GT(inverse_cdf(power(-0.5), 0.0), -1.0);
}

TEST(Env, InverseCdfMatchesNumericInversion) {
  // Oracle: bracket-and-solve on the quadrature CDF.
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double k : {-0.5, 1.0, 2.0}) {
    const auto p = power(k, 1.5);
    auto num_cdf = [&](double x) {
      if (x <= 0) return ts.integrate([&](double y) { return density_pdf(p, y); }, -1.5, x);
      return 0.5 + ts.integrate([&](double y) { return density_pdf(p, y); }, 0.0, x);
    };
    for (double u : {0.01, 0.2, 0.5, 0.7, 0.99}) {
      boost::math::tools::eps_tolerance<double> tol(45);
      std::uintmax_t it = 200;
      auto r = boost::math::tools::bisect([&](double x) { return num_cdf(x) - u; }, -1.5 + 1e-14, 1.5 - 1e-14, tol,
                                          it);
      EXPECT_NEAR(inverse_cdf(p, u), 0.5 * (r.first + r.second), k < 0 ? 1e-7 : 1e-9) << "kappa " << k << " u " << u;
    }
  }
  const auto t = table_params();
  for (double u : {0.05, 0.3, 0.6, 0.95}) EXPECT_NEAR(cdf(t, inverse_cdf(t, u)), u, 1e-12);
}

TEST(Env, MeanAbsF) {
  EXPECT_DOUBLE_EQ(mean_abs_F(power(0.0)), 0.5);
  EXPECT_DOUBLE_EQ(mean_abs_F(power(1.0)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mean_abs_F(power(2.0, 2.0)), 0.5);
  // Table: half density (1 + x) / 1.5 on [0,1]; E|F| = (1/2 + 1/3) / 1.5.
  EXPECT_NEAR(mean_abs_F(table_params()), (0.5 + 1.0 / 3.0) / 1.5, 1e-12);
}

TEST(Env, KolmogorovSmirnovOfSamples) {
  for (double k : {-0.5, 0.0, 1.0, 2.0}) {
    const auto p = EnvParams::edge_power(k, 1.0, 77, 0, 999999, 1);
    auto f = sample_spatial(p, 0, 999999);
    const double ks = stats::ks_distance(f, [&](double x) { return cdf(p, x); });
    EXPECT_LT(ks, 0.002) << "kappa " << k;
  }
}

TEST(Env, EmpiricalMeanAbsKappaOne) {
  const auto p = EnvParams::edge_power(1.0, 1.0, 5, 0, 999999, 1);
  auto f = sample_spatial(p, 0, 999999);
  for (auto& v : f) v = std::abs(v);
  // 2 * integral of x (1 - x) over [0, 1].
  EXPECT_NEAR(stats::mean(f), 1.0 / 3.0, 3 * stats::stderr_of_mean(f));
}

TEST(Env, CountersMakeWindowsNest) {
  auto a = sample_environment(EnvParams::edge_power(0.5, 1, 9, -10, 10, 20));
  auto b = sample_environment(EnvParams::edge_power(0.5, 1, 9, -20, 20, 40));
  for (Site x = -10; x <= 10; ++x) EXPECT_EQ(a.F(x), b.F(x));
  for (Time i = 1; i <= 20; ++i) EXPECT_EQ(a.B(i), b.B(i));
  auto w = a.widened(-30, 15);
  for (Site x = -20; x <= 15; ++x) EXPECT_EQ(w.F(x), b.F(x));
}

TEST(Env, Reproducible) {
  const auto p = EnvParams::edge_power(-0.5, 2, 123, -50, 50, 100);
  auto a = sample_environment(p), b = sample_environment(p);
  for (Site x = -50; x <= 50; ++x) EXPECT_EQ(a.F(x), b.F(x));
  EXPECT_TRUE(std::equal(a.signs().begin(), a.signs().end(), b.signs().begin()));
  auto c = sample_environment(EnvParams::edge_power(-0.5, 2, 124, -50, 50, 100));
  EXPECT_NE(a.F(0), c.F(0));
}

TEST(Env, Invariants) {
  const auto e = sample_environment(EnvParams::edge_power(-0.9, 1, 3, -5000, 5000, 5000));
  std::int64_t plus = 0;
  for (Site x = -5000; x <= 5000; ++x) EXPECT_LT(std::abs(e.F(x)), 1.0);
  for (Time i = 1; i <= 5000; ++i) {
    EXPECT_TRUE(e.B(i) == 1 || e.B(i) == -1);
    plus += e.B(i) == 1;
  }
  EXPECT_EQ(e.n_plus(0, 5000), plus);
  EXPECT_THROW((void)e.F(5001), RangeError);
  EXPECT_THROW((void)e.B(0), RangeError);
  EXPECT_EQ(detail::clamp_interior(1.0, 1.0), std::nextafter(1.0, 0.0));
}

TEST(Env, ConfigRoundTrip) {
  auto p = EnvParams::edge_power(0.75, 1.25, 42, -7, 9, 33);
  EXPECT_EQ(to_config_block(parse_config_block(to_config_block(p))), to_config_block(p));
  const auto q = env_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(q.kappa, p.kappa);
  EXPECT_EQ(q.c, p.c);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.x_min, -7);
  EXPECT_EQ(q.horizon, 33);
  const auto t = table_params();
  const auto t2 = parse_config_block(to_config_block(t));
  EXPECT_EQ(t2.family, DensityFamily::custom_table);
  EXPECT_EQ(t2.table->pdf, t.table->pdf);
  EXPECT_THROW(parse_config_block("env {\n  bogus = 1\n}\n"), ParameterError);
  EXPECT_THROW(parse_config_block("kappa = -3\n"), ParameterError);
}
