#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lppsim/env.hpp"
#include "lppsim/paths.hpp"

namespace testing_helpers {

using lpp::Site;
using lpp::Time;

/// Environment with explicit values: F over [x_min, x_min + F.size() - 1], B(1..).
inline lpp::Environment make_env(Site x_min, const std::vector<double>& F, const std::vector<int>& B,
                                 double c = 1.0) {
  lpp::EnvParams p;
  p.c = c;
  p.x_min = x_min;
  p.x_max = x_min + static_cast<Site>(F.size()) - 1;
  p.horizon = static_cast<Time>(B.size());
  std::vector<std::int8_t> b{1};
  for (int s : B) b.push_back(static_cast<std::int8_t>(s));
  return lpp::Environment(p, F, b);
}

/// Seeded environment on [-w, w] with horizon n.
inline lpp::Environment random_env(double kappa, std::uint64_t seed, Site w, Time n, double c = 1.0) {
  return lpp::sample_environment(lpp::EnvParams::edge_power(kappa, c, seed, -w, w, n));
}

/// Uniformly random lazy walk of length n from (t0, x0).
inline lpp::LazyPath random_walk(std::mt19937_64& g, Time t0, Site x0, Time n, Site lo, Site hi) {
  std::vector<Site> xs{x0};
  std::uniform_int_distribution<int> step(-1, 1);
  for (Time i = 0; i < n; ++i) {
    Site nx = xs.back() + step(g);
    if (nx < lo || nx > hi) nx = xs.back();
    xs.push_back(nx);
  }
  return lpp::LazyPath(t0, xs);
}

/// Independent re-summation of B(i) F(gamma(i)).
inline double resum(const lpp::Environment& env, const lpp::LazyPath& p) {
  long double s = 0;
  for (std::size_t k = 1; k < p.positions.size(); ++k)
    s += static_cast<long double>(env.B(p.start_time + static_cast<Time>(k))) * env.F(p.positions[k]);
  return static_cast<double>(s);
}

}  // namespace testing_helpers
