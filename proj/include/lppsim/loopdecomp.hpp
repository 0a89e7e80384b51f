#pragma once

// Loop decomposition of a walk from (0, 0) to (T, n): sites 0 and n first,
// then 1..n-1 in order of increasing modified discrepancy d*, each has the
// stretch between its first and last surviving visit cut out. validate()
// re-derives every combinatorial property of the construction, using fresh
// DP runs on the projected sign sequences for the action inequalities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lppsim/discrepancy.hpp"
#include "lppsim/dp.hpp"
#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/paths.hpp"

namespace lpp {

/// Closed range of times [first, last]; empty when first > last.
struct TimeRange {
  Time first = 1;
  Time last = 0;
  [[nodiscard]] Time size() const { return last >= first ? last - first + 1 : 0; }
  friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

/// Subset of {1..T} stored as the sorted disjoint ranges removed from it.
class SurvivorSet {
 public:
  explicit SurvivorSet(Time total = 0) : total_(total) {}

  [[nodiscard]] Time total() const { return total_; }
  [[nodiscard]] Time size() const { return total_ - removed_count_; }

  [[nodiscard]] bool contains(Time t) const {
    if (t < 1 || t > total_) return false;
    auto it = removed_.upper_bound(t);
    if (it == removed_.begin()) return true;
    --it;
    return t > it->second;
  }

  /// Surviving times inside [lo, hi] as maximal ranges.
  [[nodiscard]] std::vector<TimeRange> survivors_in(Time lo, Time hi) const {
    std::vector<TimeRange> out;
    lo = std::max<Time>(lo, 1);
    hi = std::min(hi, total_);
    Time cur = lo;
    auto it = removed_.upper_bound(cur);
    if (it != removed_.begin()) {
      auto p = std::prev(it);
      if (p->second >= cur) cur = p->second + 1;
    }
    while (cur <= hi) {
      if (it == removed_.end() || it->first > hi) {
        out.push_back({cur, hi});
        break;
      }
      if (it->first > cur) out.push_back({cur, it->first - 1});
      cur = std::max(cur, it->second + 1);
      ++it;
    }
    return out;
  }

  /// Removes every time in `r` (which must currently survive).
  void remove(const TimeRange& r) {
    if (r.size() == 0) return;
    auto next = removed_.lower_bound(r.first);
    Time lo = r.first, hi = r.last;
    if (next != removed_.begin()) {
      auto p = std::prev(next);
      if (p->second + 1 == lo) {
        lo = p->first;
        removed_.erase(p);
      }
    }
    next = removed_.lower_bound(hi + 1);
    if (next != removed_.end() && next->first == hi + 1) {
      hi = next->second;
      removed_.erase(next);
    }
    removed_[lo] = hi;
    removed_count_ += r.size();
  }

  /// Sorted list of surviving times.
  [[nodiscard]] std::vector<Time> times() const {
    std::vector<Time> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (const auto& r : survivors_in(1, total_))
      for (Time t = r.first; t <= r.last; ++t) out.push_back(t);
    return out;
  }

  [[nodiscard]] const std::map<Time, Time>& removed() const { return removed_; }

 private:
  Time total_;
  Time removed_count_ = 0;
  std::map<Time, Time> removed_;  // first -> last
};

struct LoopStep {
  Site v = 0;
  double dstar = 0.0;  // d*(v); unused for v = 0, n
  Time a = 0, z = 0;
  std::vector<TimeRange> L;  // removed times as maximal ranges
  Time L_size = 0;
  Time U_size = 0;  // |U_i| after this step
  std::int64_t e = 0;
  double s = 0.0;
};

struct LoopDecomposition {
  Site n = 0;
  Time total = 0;  // l n, the path length
  LazyPath path;
  std::vector<LoopStep> steps;  // i = 0..n
};

namespace detail {

inline std::vector<Site> dstar_order(const Environment& env, Site n, std::vector<double>& dstar) {
  dstar.assign(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Site> inner;
  for (Site x = 1; x < n; ++x) {
    dstar[static_cast<std::size_t>(x)] = modified_discrepancy(env, x);
    inner.push_back(x);
  }
  std::stable_sort(inner.begin(), inner.end(), [&](Site p, Site q) {
    return dstar[static_cast<std::size_t>(p)] < dstar[static_cast<std::size_t>(q)];
  });
  std::vector<Site> order{0, n};
  order.insert(order.end(), inner.begin(), inner.end());
  return order;
}

}  // namespace detail

/// Runs the decomposition recursion on `path` (from (0,0) to (T, n), n >= 1).
inline LoopDecomposition decompose(const Environment& env, const LazyPath& path, Site n) {
  if (n < 1) throw ParameterError("decompose: need n >= 1");
  if (path.start_time != 0 || path.front() != 0 || path.back() != n)
    throw ParameterError("decompose: path must run from (0,0) to (T, n)");
  const Time T = path.end_time();
  if (T > env.horizon()) throw RangeError("decompose: path longer than the sign sequence");
  if (!env.has_site(0) || !env.has_site(n)) throw RangeError("decompose: sites 0..n outside window");

  std::vector<double> dstar;
  const auto order = detail::dstar_order(env, n, dstar);

  auto [lo, hi] = path.range();
  std::vector<std::vector<Time>> visits(static_cast<std::size_t>(hi - lo + 1));
  for (Time t = 0; t <= T; ++t) visits[static_cast<std::size_t>(path.at(t) - lo)].push_back(t);

  LoopDecomposition dec;
  dec.n = n;
  dec.total = T;
  dec.path = path;
  SurvivorSet U(T);
  for (std::size_t i = 0; i < order.size(); ++i) {
    LoopStep st;
    st.v = order[i];
    st.dstar = i >= 2 ? dstar[static_cast<std::size_t>(st.v)] : 0.0;
    const auto& vt = visits[static_cast<std::size_t>(st.v - lo)];
    bool found = false;
    for (Time t : vt) {
      if (t == 0 || U.contains(t)) {
        if (!found) st.a = t;
        st.z = t;
        found = true;
      }
    }
    if (!found) {
      std::ostringstream os;
      os << "decompose: site " << st.v << " not visited by the surviving walk at step " << i;
      throw StructuralError(os.str());
    }
    st.L = U.survivors_in(st.a + 1, st.z);
    for (const auto& r : st.L) {
      st.L_size += r.size();
      for (Time t = r.first; t <= r.last; ++t) {
        st.s += env.sign_at(t) * env.f_at(path.at(t));
        if (t < r.last && env.sign_at(t) == -1 && env.sign_at(t + 1) == 1) ++st.e;
      }
    }
    for (const auto& r : st.L) U.remove(r);
    st.U_size = U.size();
    dec.steps.push_back(std::move(st));
  }
  return dec;
}

struct ItemResult {
  int item = 0;
  bool pass = true;
  std::string detail;  // first failure
};

struct LoopValidation {
  std::vector<ItemResult> items;  // items 1..11
  int item11_equalities = 0;      // m for which the DP value equals the projected action
  int item11_checked = 0;
  [[nodiscard]] bool all_pass() const {
    return std::all_of(items.begin(), items.end(), [](const ItemResult& r) { return r.pass; });
  }
};

/// Checks every property of the decomposition against its source environment.
/// Only the stored table is trusted as input; sets and actions are rebuilt.
inline LoopValidation validate(const Environment& env, const LoopDecomposition& dec) {
  LoopValidation rep;
  for (int k = 1; k <= 11; ++k) rep.items.push_back({k, true, {}});
  auto fail = [&](int item, const std::string& msg) {
    auto& r = rep.items[static_cast<std::size_t>(item - 1)];
    if (r.pass) r.detail = msg;
    r.pass = false;
  };
  const Site n = dec.n;
  const Time T = dec.total;
  const double c = env.c();
  const auto& path = dec.path;
  if (dec.steps.size() != static_cast<std::size_t>(n + 1)) {
    fail(1, "step table does not have n + 1 rows");
    return rep;
  }

  // Ordering and d* lookup.
  std::vector<double> dstar;
  const auto order = detail::dstar_order(env, n, dstar);
  std::vector<std::int64_t> rank(static_cast<std::size_t>(n + 1), 0);
  for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<std::int64_t>(i);
  for (std::size_t i = 0; i < order.size(); ++i)
    if (dec.steps[i].v != order[i]) fail(1, "ordering differs at index " + std::to_string(i));

  // Item 1: partition, with the recursion U_i = U_{i-1} \ L_i.
  std::vector<int> owner(static_cast<std::size_t>(T + 1), -1);
  {
    Time removed = 0;
    for (std::size_t i = 0; i < dec.steps.size(); ++i) {
      const auto& st = dec.steps[i];
      Time sz = 0;
      for (const auto& r : st.L) {
        if (r.size() == 0) continue;
        if (r.first < 1 || r.last > T) {
          fail(1, "L_" + std::to_string(i) + " leaves {1..T}");
          continue;
        }
        for (Time t = r.first; t <= r.last; ++t) {
          auto& o = owner[static_cast<std::size_t>(t)];
          if (o != -1) fail(1, "time " + std::to_string(t) + " in L_" + std::to_string(o) + " and L_" + std::to_string(i));
          o = static_cast<int>(i);
        }
        sz += r.size();
      }
      if (sz != st.L_size) fail(1, "stored |L_" + std::to_string(i) + "| is inconsistent");
      removed += sz;
      if (st.U_size != T - removed) fail(1, "|U_" + std::to_string(i) + "| != T - sum |L_j|");
    }
  }

  // Surviving set after step m, rebuilt from the L table.
  auto survivors_after = [&](int m) {
    std::vector<Time> u;
    for (Time t = 1; t <= T; ++t) {
      const int o = owner[static_cast<std::size_t>(t)];
      if (o == -1 || o > m) u.push_back(t);
    }
    return u;
  };

  const double A_bar = min_action_point(env, T, n);
  const double path_action = action(env, path);
  double s_cum = 0.0;
  double ed_cum = 0.0;
  std::int64_t e_total = 0;
  std::vector<std::int8_t> proj_b;

  for (std::size_t m = 0; m < dec.steps.size(); ++m) {
    const auto& st = dec.steps[m];
    const std::string tag = "i=" + std::to_string(m);
    // Recompute a_m, z_m on U_{m-1} u {0}.
    {
      auto in_prev = [&](Time t) {
        if (t == 0) return true;
        const int o = owner[static_cast<std::size_t>(t)];
        return o == -1 || o >= static_cast<int>(m);
      };
      Time a = -1, z = -1;
      for (Time t = 0; t <= T; ++t)
        if (path.at(t) == st.v && in_prev(t)) {
          if (a < 0) a = t;
          z = t;
        }
      if (a != st.a || z != st.z) fail(3, tag + ": stored a/z differ from the surviving visits");
      // Item 3: L_m = (a_m, z_m].
      std::vector<Time> Lt;
      for (const auto& r : st.L)
        for (Time t = r.first; t <= r.last; ++t) Lt.push_back(t);
      std::sort(Lt.begin(), Lt.end());
      bool interval = static_cast<Time>(Lt.size()) == std::max<Time>(0, st.z - st.a);
      for (std::size_t k = 0; interval && k < Lt.size(); ++k) interval = Lt[k] == st.a + 1 + static_cast<Time>(k);
      if (!interval) fail(3, tag + ": L is not the interval (a, z]");
      for (Time t : Lt)
        if (!in_prev(t)) fail(1, tag + ": L contains a time already removed");
    }

    const auto u = survivors_after(static_cast<int>(m));
    const Time Usz = static_cast<Time>(u.size());

    // Item 2 and 5: the projected walk.
    {
      std::vector<Site> xs{path.at(0)};
      for (Time t : u) xs.push_back(path.at(t));
      bool lazy = true;
      for (std::size_t k = 1; k < xs.size(); ++k) lazy = lazy && std::abs(xs[k] - xs[k - 1]) <= 1;
      if (!lazy || xs.front() != 0 || xs.back() != n) fail(2, tag + ": projected walk is not lazy from 0 to n");
      std::vector<int> seen(static_cast<std::size_t>(n + 1), 0);
      bool inside = true;
      for (Site x : xs) {
        if (x >= 0 && x <= n) ++seen[static_cast<std::size_t>(x)];
        else inside = false;
      }
      for (std::size_t j = 0; j <= m; ++j)
        if (seen[static_cast<std::size_t>(order[j])] != 1)
          fail(2, tag + ": v_" + std::to_string(j) + " not visited exactly once");
      if (Usz < n) fail(2, tag + ": |U| < n");
      if (m >= 1 && !inside) fail(5, tag + ": projected walk leaves [0, n]");
    }

    // Item 4: U_m is {1..T} minus the disjoint intervals (a_j, z_j], j <= m.
    {
      std::vector<TimeRange> iv;
      for (std::size_t j = 0; j <= m; ++j)
        if (dec.steps[j].z > dec.steps[j].a) iv.push_back({dec.steps[j].a + 1, dec.steps[j].z});
      std::sort(iv.begin(), iv.end(), [](const TimeRange& p, const TimeRange& q) { return p.first < q.first; });
      bool ok = Usz >= n;
      for (std::size_t k = 1; k < iv.size(); ++k) ok = ok && iv[k].first > iv[k - 1].last;
      std::vector<char> cut(static_cast<std::size_t>(T + 1), 0);
      for (const auto& r : iv)
        for (Time t = r.first; t <= r.last; ++t) cut[static_cast<std::size_t>(t)] = 1;
      std::size_t k = 0;
      for (Time t = 1; t <= T && ok; ++t) {
        const bool survives = k < u.size() && u[k] == t;
        if (survives) ++k;
        ok = survives != static_cast<bool>(cut[static_cast<std::size_t>(t)]);
      }
      if (!ok) fail(4, tag + ": U is not the complement of disjoint (a_j, z_j]");
    }

    // Items 6-9 on L_m.
    double s = 0.0;
    std::int64_t e = 0;
    Time Lsz = 0;
    for (const auto& r : st.L) {
      for (Time t = r.first; t <= r.last; ++t) {
        const Site x = path.at(t);
        s += env.sign_at(t) * env.f_at(x);
        if (t < T && owner[static_cast<std::size_t>(t + 1)] == static_cast<int>(m) && env.sign_at(t) == -1 &&
            env.sign_at(t + 1) == 1)
          ++e;
        if (m >= 2) {
          if (x < 0 || x > n || rank[static_cast<std::size_t>(x)] < static_cast<std::int64_t>(m))
            fail(6, tag + ": loop visits site " + std::to_string(x));
          else if (dstar[static_cast<std::size_t>(x)] < st.dstar)
            fail(7, tag + ": loop visits a site with smaller d*");
        }
      }
      Lsz += r.size();
    }
    if (e != st.e) fail(9, tag + ": stored e differs from recount");
    if (std::abs(s - st.s) > 1e-9 * (1.0 + c * static_cast<double>(Lsz))) fail(11, tag + ": stored s differs from recount");
    const double tol = 1e-9 * (1.0 + c * static_cast<double>(Lsz));
    if (st.s < -c * static_cast<double>(Lsz) - tol) fail(8, tag + ": s < -c|L|");
    if (m >= 2 && st.s < -c * static_cast<double>(Lsz) + static_cast<double>(st.e) * st.dstar - tol)
      fail(9, tag + ": s < -c|L| + e d*");
    e_total += st.e;

    // Item 11 via an independent DP on the projected signs.
    s_cum += st.s;
    if (m >= 2) ed_cum += static_cast<double>(st.e) * st.dstar;
    proj_b.assign(static_cast<std::size_t>(Usz + 1), 1);
    double proj_action = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      proj_b[k + 1] = static_cast<std::int8_t>(env.sign_at(u[k]));
      proj_action += env.sign_at(u[k]) * env.f_at(path.at(u[k]));
    }
    EnvParams pp = env.params();
    pp.horizon = std::max<Time>(Usz, 1);
    if (Usz == 0) proj_b.push_back(1);
    const auto f = env.spatial(env.x_min(), env.x_max());
    Environment proj(pp, std::vector<double>(f.begin(), f.end()), proj_b);
    const double dp_val = min_action_point(proj, Usz, n);
    const double scale = 1e-9 * (1.0 + c * static_cast<double>(T));
    if (std::abs(proj_action - (path_action - s_cum)) > scale)
      fail(11, tag + ": projected action != A - sum s");
    if (dp_val > path_action - s_cum + scale) fail(11, tag + ": DP(P_U b) > A - sum s");
    if (A_bar - s_cum > A_bar + static_cast<double>(T - Usz) * c - ed_cum + scale)
      fail(11, tag + ": A - sum s exceeds the loop bound");
    ++rep.item11_checked;
    if (std::abs(dp_val - (A_bar - s_cum)) <= scale) ++rep.item11_equalities;
  }

  // Item 10: counted over consecutive times t, t+1 in {1..T}.
  std::int64_t pairs = 0;
  for (Time t = 1; t < T; ++t)
    if (env.sign_at(t) == -1 && env.sign_at(t + 1) == 1) ++pairs;
  if (e_total < pairs - 2 * (n + 1)) fail(10, "sum e = " + std::to_string(e_total) + " below bound");
  if (std::abs(path_action - A_bar) > 1e-9 * (1.0 + c * static_cast<double>(T)))
    fail(11, "path is not optimal: action differs from the DP minimum");
  return rep;
}

/// Optimal walk from (0,0) to (T, n) by full-table backtracking.
inline LazyPath optimal_bridge(const Environment& env, Time T, Site n) {
  const auto tab = build_table(env, T);
  return backtrack(tab, env, T, n).path;
}

}  // namespace lpp
