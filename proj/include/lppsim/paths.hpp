#pragma once

// Lazy walks, their actions, and the explicit constructions used to bound
// minimal actions: edge-stay paths, ballistic-then-stay paths and the
// two-step detour walk that certifies nonlinearity of the shape function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lppsim/discrepancy.hpp"
#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"

namespace lpp {

/// gamma(start_time), gamma(start_time + 1), ... with |gamma(i+1) - gamma(i)| <= 1.
struct LazyPath {
  Time start_time = 0;
  std::vector<Site> positions;

  LazyPath() = default;
  LazyPath(Time t0, std::vector<Site> xs) : start_time(t0), positions(std::move(xs)) {
    if (positions.empty()) throw ParameterError("a path needs at least one position");
    if (!is_lazy()) throw ParameterError("path violates the lazy-walk constraint");
  }

  [[nodiscard]] Time end_time() const { return start_time + static_cast<Time>(positions.size()) - 1; }
  [[nodiscard]] Time length() const { return static_cast<Time>(positions.size()) - 1; }
  [[nodiscard]] Site at(Time t) const {
    if (t < start_time || t > end_time()) throw RangeError("path time out of range");
    return positions[static_cast<std::size_t>(t - start_time)];
  }
  [[nodiscard]] Site front() const { return positions.front(); }
  [[nodiscard]] Site back() const { return positions.back(); }
  [[nodiscard]] std::pair<Site, Site> range() const {
    auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
    return {*lo, *hi};
  }
  [[nodiscard]] bool is_lazy() const {
    for (std::size_t i = 1; i < positions.size(); ++i)
      if (std::abs(positions[i] - positions[i - 1]) > 1) return false;
    return true;
  }

  friend bool operator==(const LazyPath&, const LazyPath&) = default;
};

/// eta_x restricted to times (a, b]; `path.at(a)` is the rule's choice at a
/// (or x when a = 0, where no sign exists).
struct EdgeStayPath {
  Site x = 0;
  LazyPath path;
};

/// Sum over i in (t1, t2] of B(i) F(gamma(i)); gamma(t1) does not contribute.
inline double action(const Environment& env, const LazyPath& path) {
  if (path.start_time < 0 || path.end_time() > env.horizon())
    throw RangeError("path times outside [0, horizon]");
  double s = 0.0;
  for (Time t = path.start_time + 1; t <= path.end_time(); ++t) {
    const Site x = path.at(t);
    if (!env.has_site(x)) throw RangeError("path leaves the sampled window at site " + std::to_string(x));
    s += env.sign_at(t) * env.f_at(x);
  }
  return s;
}

inline std::int64_t n_plus(const Environment& env, Time a, Time b) { return env.n_plus(a, b); }

namespace detail {
/// Site chosen by eta_x at time t; ties F(x) = F(x+1) resolve to x.
inline Site eta_choice(const Environment& env, Site x, Time t) {
  const double fx = env.f_at(x), fy = env.f_at(x + 1);
  const int b = static_cast<int>(env.sign_at(t));
  if (fx <= fy && b == 1) return x;
  if (fx >= fy && b == -1) return x;
  return x + 1;
}
}  // namespace detail

inline EdgeStayPath eta_path(const Environment& env, Site x, Time a, Time b) {
  if (!(a < b)) throw ParameterError("eta_path: need a < b");
  if (a < 0 || b > env.horizon()) throw RangeError("eta_path: times outside [0, horizon]");
  if (!env.has_site(x) || !env.has_site(x + 1)) throw RangeError("eta_path: edge outside window");
  std::vector<Site> xs;
  xs.reserve(static_cast<std::size_t>(b - a + 1));
  xs.push_back(a >= 1 ? detail::eta_choice(env, x, a) : x);
  for (Time t = a + 1; t <= b; ++t) xs.push_back(detail::eta_choice(env, x, t));
  return {x, LazyPath(a, std::move(xs))};
}

/// Action of eta_x over (a, b] via the closed form
/// (b-a)(d/2 - c) + (N+(a,b) - (b-a)/2)(F(x) + F(x+1)).
inline double eta_action_closed_form(const Environment& env, Site x, Time a, Time b) {
  const double len = static_cast<double>(b - a);
  const double np = static_cast<double>(env.n_plus(a, b));
  return len * (0.5 * discrepancy(env, x) - env.c()) + (np - 0.5 * len) * (env.F(x) + env.F(x + 1));
}

/// Per-step minimum min(B(t)F(x), B(t)F(x+1)) summed over (a, b]; the action
/// of eta_x by direct summation, without materialising the path.
inline double eta_action_direct(const Environment& env, Site x, Time a, Time b) {
  const double fx = env.F(x), fy = env.F(x + 1);
  double s = 0.0;
  for (Time t = a + 1; t <= b; ++t) {
    const double sg = env.sign_at(t);
    s += std::min(sg * fx, sg * fy);
  }
  return s;
}

/// Moves one step per unit time towards x, then follows eta_x up to time n.
inline LazyPath ballistic_then_edge(const Environment& env, Site x, Time n) {
  if (std::abs(x) >= n) throw ParameterError("ballistic_then_edge: need |x| < n");
  if (n > env.horizon()) throw RangeError("ballistic_then_edge: n exceeds horizon");
  if (!env.has_site(x) || !env.has_site(x + 1) || !env.has_site(0)) throw RangeError("ballistic_then_edge: edge outside window");
  const Site step = x >= 0 ? 1 : -1;
  const Time arrive = std::abs(x);
  std::vector<Site> xs;
  xs.reserve(static_cast<std::size_t>(n + 1));
  for (Time t = 0; t <= arrive; ++t) xs.push_back(step * t);
  for (Time t = arrive + 1; t <= n; ++t) xs.push_back(detail::eta_choice(env, x, t));
  return LazyPath(0, std::move(xs));
}

/// Upper bound c|x| + (n - |x|)(d(x) - c) on the action of ballistic_then_edge.
inline double ballistic_then_edge_bound(const Environment& env, Site x, Time n) {
  const double ax = static_cast<double>(std::abs(x));
  return env.c() * ax + (static_cast<double>(n) - ax) * (discrepancy(env, x) - env.c());
}

struct DetourWalk {
  LazyPath path;
  Time duration = 0;  // T_n, the first time the walk reaches site n
};

/// Walk from 0 to n that, whenever F(i-1) < -3c/4, F(i) > 3c/4 and the next
/// sign is +1, inserts the detour (i-1, i) instead of the single step to i.
/// Signs are consumed strictly in time order.
inline DetourWalk nonlinearity_walk(const Environment& env, Site n) {
  if (n < 1) throw ParameterError("nonlinearity_walk: need n >= 1");
  if (!env.has_site(0) || !env.has_site(n)) throw RangeError("nonlinearity_walk: sites 0..n outside window");
  if (env.horizon() < 2 * n) throw RangeError("nonlinearity_walk: horizon must be at least 2n");
  const double thr = 0.75 * env.c();
  std::vector<Site> xs{0};
  Time t = 0;
  for (Site i = 1; i <= n; ++i) {
    if (env.f_at(i - 1) < -thr && env.f_at(i) > thr && env.sign_at(t + 1) == 1) {
      xs.push_back(i - 1);
      xs.push_back(i);
      t += 2;
    } else {
      xs.push_back(i);
      t += 1;
    }
  }
  return {LazyPath(0, std::move(xs)), t};
}

/// Lower bound -c(t2-t1) + sum over even i in (t1,t2) of 1{B(i) != B(i+1)} * min d
/// over the edges {x, x+1} with x in range(gamma) (edges leaving the window skipped).
inline double min_discrepancy_action_bound(const Environment& env, const LazyPath& path) {
  const Time t1 = path.start_time, t2 = path.end_time();
  if (t1 < 0 || t2 > env.horizon()) throw RangeError("path times outside [0, horizon]");
  auto [lo, hi] = path.range();
  double dmin = std::numeric_limits<double>::infinity();
  for (Site x = lo; x <= hi; ++x)
    if (env.has_site(x) && env.has_site(x + 1)) dmin = std::min(dmin, discrepancy(env, x));
  std::int64_t changes = 0;
  for (Time i = t1 + 1; i < t2; ++i)
    if (i % 2 == 0 && env.sign_at(i) != env.sign_at(i + 1)) ++changes;
  double bound = -env.c() * static_cast<double>(t2 - t1);
  if (changes > 0) bound += static_cast<double>(changes) * dmin;
  return bound;
}

// ---------------------------------------------------------------------------

/// CSV rows `t,x` with a header line.
inline void write_path_csv(std::ostream& os, const LazyPath& p) {
  os << "t,x\n";
  for (Time t = p.start_time; t <= p.end_time(); ++t) os << t << ',' << p.at(t) << '\n';
}

/// Compact JSON: {"start_time": t0, "x": [..]}.
inline nlohmann::ordered_json path_to_json(const LazyPath& p) {
  return {{"start_time", p.start_time}, {"x", p.positions}};
}

inline LazyPath path_from_json(const nlohmann::json& j) {
  return LazyPath(j.at("start_time").get<Time>(), j.at("x").get<std::vector<Site>>());
}

}  // namespace lpp
