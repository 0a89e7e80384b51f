#pragma once

// Minimal actions over lazy walks by dynamic programming.
//
// Row recursion: A(t, x) = min(A(t-1, x-1), A(t-1, x), A(t-1, x+1)) + B(t) F(x),
// with +inf outside the reachable cone. Every cell is one three-way min and
// one addition, so a DP value equals the left-to-right sum along its path
// bit for bit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/paths.hpp"

namespace lpp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

/// next[i] = min(prev[i-1], prev[i], prev[i+1]) + sign * f[i] for i in [lo, hi].
/// prev[lo-1] and prev[hi+1] must be readable.
inline void relax_row(const double* __restrict prev, double* __restrict next, const double* __restrict f,
                      double sign, std::int64_t lo, std::int64_t hi) {
  if (sign > 0) {
    for (std::int64_t i = lo; i <= hi; ++i) {
      const double l = prev[i - 1], s = prev[i], r = prev[i + 1];
      const double m = r < l ? r : l;
      next[i] = (m < s ? m : s) + f[i];
    }
  } else {
    for (std::int64_t i = lo; i <= hi; ++i) {
      const double l = prev[i - 1], s = prev[i], r = prev[i + 1];
      const double m = r < l ? r : l;
      next[i] = (m < s ? m : s) - f[i];
    }
  }
}

}  // namespace detail

/// Rolling DP rooted at (t0, x0) over paths confined to the strip [xl, xr].
/// With `keep_path`, a copy of the row is kept every `checkpoint_every`
/// steps; path_to() recomputes one segment at a time and backtracks through
/// the values, so memory stays O(width * (n / K + K)).
class StripDP {
 public:
  StripDP(const Environment& env, Time t0, Site x0, Site xl, Site xr, bool keep_path = false,
          Time checkpoint_every = 256)
      : env_(&env), t0_(t0), x0_(x0), xl_(xl), xr_(xr), t_(t0), keep_path_(keep_path), K_(checkpoint_every) {
    if (!(xl <= x0 && x0 <= xr)) throw ParameterError("StripDP: origin outside strip");
    if (!env.has_site(xl) || !env.has_site(xr)) throw RangeError("StripDP: strip outside the sampled window");
    if (t0 < 0 || t0 > env.horizon()) throw RangeError("StripDP: start time outside [0, horizon]");
    if (K_ < 1) throw ParameterError("StripDP: checkpoint spacing must be >= 1");
    width_ = xr - xl + 1;
    a_.assign(static_cast<std::size_t>(width_ + 2), kInf);
    b_.assign(static_cast<std::size_t>(width_ + 2), kInf);
    a_[static_cast<std::size_t>(x0 - xl + 1)] = 0.0;
    lo_ = hi_ = x0 - xl;
    f_ = env.spatial(xl, xr);
    if (keep_path_) save_checkpoint();
  }

  [[nodiscard]] Time time() const { return t_; }
  [[nodiscard]] Time start_time() const { return t0_; }
  [[nodiscard]] Site origin() const { return x0_; }
  [[nodiscard]] Site strip_lo() const { return xl_; }
  [[nodiscard]] Site strip_hi() const { return xr_; }
  [[nodiscard]] std::uint64_t cells() const { return cells_; }
  /// Reachable sites at the current time.
  [[nodiscard]] std::pair<Site, Site> active() const { return {xl_ + lo_, xl_ + hi_}; }

  /// Values over the strip; +inf off the reachable set.
  [[nodiscard]] std::span<const double> row() const {
    return {a_.data() + 1, static_cast<std::size_t>(width_)};
  }
  [[nodiscard]] double value(Site x) const {
    if (x < xl_ || x > xr_) return kInf;
    return a_[static_cast<std::size_t>(x - xl_ + 1)];
  }

  void step() {
    if (t_ + 1 > env_->horizon()) throw RangeError("StripDP: horizon exhausted");
    advance_buffers(a_, b_, lo_, hi_, t_ + 1);
    ++t_;
    cells_ += static_cast<std::uint64_t>(hi_ - lo_ + 1);
    if (keep_path_ && (t_ - t0_) % K_ == 0) save_checkpoint();
  }

  void advance_to(Time t) {
    while (t_ < t) step();
  }

  /// Optimal path from (t0, x0) to (time(), x); predecessors prefer stay,
  /// then x-1, then x+1. Needs `keep_path`.
  [[nodiscard]] LazyPath path_to(Site x) const { return path_to(t_, x); }

  /// Same for any earlier time t in [t0, time()].
  [[nodiscard]] LazyPath path_to(Time t, Site x) const {
    if (!keep_path_) throw ParameterError("StripDP: path recovery was not enabled");
    if (t < t0_ || t > t_) throw RangeError("StripDP: time outside the sweep");
    if (x < xl_ || x > xr_) throw RangeError("StripDP: endpoint outside strip");
    std::vector<Site> xs(static_cast<std::size_t>(t - t0_ + 1));
    xs.back() = x;
    Site cur = x;
    Time seg_end = t;
    bool first = true;
    if (t == t0_ && x != x0_) throw RangeError("StripDP: endpoint unreachable");
    const auto w2 = static_cast<std::size_t>(width_ + 2);
    std::vector<double> rows;
    while (seg_end > t0_) {
      const std::size_t c = static_cast<std::size_t>((seg_end - 1 - t0_) / K_);
      const Checkpoint& cp = checkpoints_[c];
      const Time seg_start = t0_ + static_cast<Time>(c) * K_;
      const auto len = static_cast<std::size_t>(seg_end - seg_start);
      rows.assign((len + 1) * w2, kInf);
      std::copy(cp.row.begin(), cp.row.end(), rows.begin());
      std::vector<double> pa(cp.row), pb(w2, kInf);
      std::int64_t lo = cp.lo, hi = cp.hi;
      for (std::size_t k = 1; k <= len; ++k) {
        advance_buffers(pa, pb, lo, hi, seg_start + static_cast<Time>(k));
        std::copy(pa.begin(), pa.end(), rows.begin() + static_cast<std::ptrdiff_t>(k * w2));
      }
      if (first && !std::isfinite(rows[len * w2 + static_cast<std::size_t>(x - xl_ + 1)]))
        throw RangeError("StripDP: endpoint unreachable");
      first = false;
      for (std::size_t k = len; k >= 1; --k) {
        const double* prev = rows.data() + (k - 1) * w2 + 1;
        const auto i = static_cast<std::ptrdiff_t>(cur - xl_);
        const double l = prev[i - 1], s = prev[i], r = prev[i + 1];
        if (s <= l && s <= r) {
        } else if (l <= r) {
          --cur;
        } else {
          ++cur;
        }
        xs[static_cast<std::size_t>(seg_start - t0_) + k - 1] = cur;
      }
      seg_end = seg_start;
    }
    if (cur != x0_) throw StructuralError("StripDP: backtrack did not return to the origin");
    return LazyPath(t0_, std::move(xs));
  }

 private:
  struct Checkpoint {
    std::vector<double> row;
    std::int64_t lo, hi;
  };

  void save_checkpoint() { checkpoints_.push_back({a_, lo_, hi_}); }

  /// Replaces `cur` (row t-1) by row t; `nxt` is scratch.
  void advance_buffers(std::vector<double>& cur, std::vector<double>& nxt, std::int64_t& lo, std::int64_t& hi,
                       Time t) const {
    lo = std::max<std::int64_t>(0, lo - 1);
    hi = std::min<std::int64_t>(width_ - 1, hi + 1);
    // Padded index i+1 holds strip index i.
    detail::relax_row(cur.data() + 1, nxt.data() + 1, f_.data(), env_->sign_at(t), lo, hi);
    std::swap(cur, nxt);
  }

  const Environment* env_;
  Time t0_;
  Site x0_, xl_, xr_;
  Time t_;
  bool keep_path_;
  Time K_;
  std::int64_t width_ = 0, lo_ = 0, hi_ = 0;
  std::vector<double> a_, b_;
  std::span<const double> f_;
  std::vector<Checkpoint> checkpoints_;
  std::uint64_t cells_ = 0;
};

/// Full table of A(t, x) for 0 <= t - t0 <= n, |x - x0| <= t - t0, stored
/// triangularly (row r holds 2r + 1 values for x = x0 - r .. x0 + r).
class ActionTable {
 public:
  ActionTable() = default;
  ActionTable(Time t0, Site x0, Time n) : t0_(t0), x0_(x0), n_(n) {
    v_.assign(static_cast<std::size_t>((n + 1) * (n + 1)), kInf);
  }

  [[nodiscard]] Time n() const { return n_; }
  [[nodiscard]] Time start_time() const { return t0_; }
  [[nodiscard]] Site origin() const { return x0_; }

  [[nodiscard]] bool contains(Time t, Site x) const {
    const Time r = t - t0_;
    return r >= 0 && r <= n_ && std::abs(x - x0_) <= r;
  }
  /// A(t, x); +inf outside the cone.
  [[nodiscard]] double at(Time t, Site x) const {
    const Time r = t - t0_;
    if (r < 0 || r > n_) throw RangeError("ActionTable: time outside table");
    if (std::abs(x - x0_) > r) return kInf;
    return v_[index(r, x - x0_)];
  }
  [[nodiscard]] std::span<const double> row(Time r) const {
    if (r < 0 || r > n_) throw RangeError("ActionTable: row outside table");
    return {v_.data() + r * r, static_cast<std::size_t>(2 * r + 1)};
  }
  double* row_data(Time r) { return v_.data() + r * r; }

  /// Binary dump: 8-byte magic "LPPTAB01", int64 n, then rows r = 0..n of
  /// 2r+1 little-endian doubles for x = x0 - r .. x0 + r.
  void write_binary(std::ostream& os) const {
    os.write(kMagic, 8);
    const std::int64_t n = n_;
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(v_.size() * sizeof(double)));
  }
  static ActionTable read_binary(std::istream& is) {
    char magic[8];
    std::int64_t n = -1;
    is.read(magic, 8);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || std::memcmp(magic, kMagic, 8) != 0 || n < 0) throw ParameterError("not an action table dump");
    ActionTable t(0, 0, n);
    is.read(reinterpret_cast<char*>(t.v_.data()), static_cast<std::streamsize>(t.v_.size() * sizeof(double)));
    if (!is) throw ParameterError("truncated action table dump");
    return t;
  }

 private:
  static constexpr char kMagic[9] = "LPPTAB01";
  [[nodiscard]] std::size_t index(Time r, Site dx) const { return static_cast<std::size_t>(r * r + r + dx); }

  Time t0_ = 0;
  Site x0_ = 0;
  Time n_ = 0;
  std::vector<double> v_;
};

namespace detail {
inline void require_cone(const Environment& env, Time t0, Site x0, Time n) {
  if (n < 0) throw ParameterError("horizon must be >= 0");
  if (t0 < 0 || t0 + n > env.horizon()) throw RangeError("DP horizon exceeds the sign sequence");
  if (!env.has_site(x0 - n) || !env.has_site(x0 + n))
    throw RangeError("window too small for the reachable cone");
}
}  // namespace detail

inline ActionTable build_table(const Environment& env, Time n, Time t0 = 0, Site x0 = 0) {
  detail::require_cone(env, t0, x0, n);
  ActionTable tab(t0, x0, n);
  tab.row_data(0)[0] = 0.0;
  std::vector<double> prev(static_cast<std::size_t>(2 * n + 3), kInf), next(prev.size(), kInf);
  // Padded buffer index j+1 holds x = x0 - n + j.
  prev[static_cast<std::size_t>(n + 1)] = 0.0;
  const auto f = env.spatial(x0 - n, x0 + n);
  for (Time r = 1; r <= n; ++r) {
    detail::relax_row(prev.data() + 1, next.data() + 1, f.data(), env.sign_at(t0 + r), n - r, n + r);
    std::copy_n(next.data() + 1 + (n - r), 2 * r + 1, tab.row_data(r));
    std::swap(prev, next);
  }
  return tab;
}

/// Row x0 - n .. x0 + n of A(t0 + n, .) in O(n) memory.
inline std::vector<double> last_row(const Environment& env, Time n, Time t0 = 0, Site x0 = 0) {
  detail::require_cone(env, t0, x0, n);
  StripDP dp(env, t0, x0, x0 - n, x0 + n);
  dp.advance_to(t0 + n);
  auto r = dp.row();
  return {r.begin(), r.end()};
}

inline double min_action_point(const Environment& env, Time n, Site k) {
  if (std::abs(k) > n) throw ParameterError("min_action_point: need |k| <= n");
  return last_row(env, n)[static_cast<std::size_t>(k + n)];
}

struct FreeMin {
  double value = kInf;
  Site endpoint = 0;
};

/// Minimum of a row with smallest-|k|-then-negative-first tie-break; row
/// index 0 corresponds to site `x_lo`.
inline FreeMin free_argmin(std::span<const double> row, Site x_lo) {
  FreeMin best;
  bool found = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const Site k = x_lo + static_cast<Site>(i);
    const double v = row[i];
    if (!found || v < best.value ||
        (v == best.value && (std::abs(k) < std::abs(best.endpoint) ||
                             (std::abs(k) == std::abs(best.endpoint) && k < best.endpoint)))) {
      if (std::isfinite(v)) {
        best = {v, k};
        found = true;
      }
    }
  }
  return best;
}

inline FreeMin min_action_free(const Environment& env, Time n) {
  if (n < 1) throw ParameterError("min_action_free: need n >= 1");
  const auto r = last_row(env, n);
  return free_argmin(r, -n);
}

struct OptimalPathResult {
  LazyPath path;
  double action = 0.0;
  bool unique = true;
};

/// One optimal path to (t, x): predecessors prefer stay, then x-1, then x+1.
inline OptimalPathResult backtrack(const ActionTable& tab, const Environment& env, Time t, Site x) {
  if (!tab.contains(t, x)) throw RangeError("backtrack: endpoint outside table");
  const double target = tab.at(t, x);
  if (!std::isfinite(target)) throw RangeError("backtrack: endpoint unreachable");
  OptimalPathResult res;
  res.action = target;
  const Time t0 = tab.start_time();
  std::vector<Site> xs(static_cast<std::size_t>(t - t0 + 1));
  Site cur = x;
  for (Time s = t; s > t0; --s) {
    xs[static_cast<std::size_t>(s - t0)] = cur;
    const std::array<Site, 3> cand{cur, cur - 1, cur + 1};
    double best = kInf;
    Site arg = cur;
    int hits = 0;
    for (Site y : cand) {
      if (!tab.contains(s - 1, y)) continue;
      const double v = tab.at(s - 1, y);
      if (v < best) {
        best = v;
        arg = y;
        hits = 1;
      } else if (v == best && std::isfinite(v)) {
        ++hits;
      }
    }
    if (hits > 1) res.unique = false;
    if (best + env.sign_at(s) * env.f_at(cur) != tab.at(s, cur))
      throw StructuralError("backtrack: table is not Bellman-consistent");
    cur = arg;
  }
  xs[0] = cur;
  res.path = LazyPath(t0, std::move(xs));
  return res;
}

/// Minimal action over lazy walks from (t1, x1) to (t2, x2).
inline double two_point_action(const Environment& env, Time t1, Site x1, Time t2, Site x2) {
  const Time T = t2 - t1;
  if (T < std::abs(x2 - x1)) throw ParameterError("two_point_action: endpoint unreachable");
  if (t1 < 0 || t2 > env.horizon()) throw RangeError("two_point_action: times outside [0, horizon]");
  // Sites that lie on some path between the two points.
  const auto lo = static_cast<Site>(std::ceil(0.5 * static_cast<double>(x1 + x2 - T)));
  const auto hi = static_cast<Site>(std::floor(0.5 * static_cast<double>(x1 + x2 + T)));
  const Site sl = std::min({lo, x1, x2}), sr = std::max({hi, x1, x2});
  StripDP dp(env, t1, x1, sl, sr);
  dp.advance_to(t2);
  return dp.value(x2);
}

inline constexpr Time kBruteForceMaxN = 14;

namespace detail {
inline void enumerate_paths(const Environment& env, Time n, Time t, Site x, double acc, std::vector<double>& best,
                            Site off) {
  if (t == n) {
    auto& b = best[static_cast<std::size_t>(x + off)];
    b = std::min(b, acc);
    return;
  }
  const double s = env.sign_at(t + 1);
  for (Site dx : {-1, 0, 1}) enumerate_paths(env, n, t + 1, x + dx, acc + s * env.f_at(x + dx), best, off);
}
}  // namespace detail

/// Exhaustive minimum over all 3^n lazy walks from (0,0), for every endpoint
/// k = -n..n (index k + n).
inline std::vector<double> brute_force_all(const Environment& env, Time n) {
  if (n > kBruteForceMaxN) throw GuardError("brute force limited to n <= 14");
  detail::require_cone(env, 0, 0, n);
  std::vector<double> best(static_cast<std::size_t>(2 * n + 1), kInf);
  detail::enumerate_paths(env, n, 0, 0, 0.0, best, n);
  return best;
}

/// Exhaustive minimum with endpoint k, or over all endpoints when k is empty.
inline double brute_force_oracle(const Environment& env, Time n, std::optional<Site> k = std::nullopt) {
  if (n > kBruteForceMaxN) throw GuardError("brute force limited to n <= 14");
  if (n == 0) return 0.0;
  const auto all = brute_force_all(env, n);
  if (k) {
    if (std::abs(*k) > n) throw ParameterError("brute force: |k| > n");
    return all[static_cast<std::size_t>(*k + n)];
  }
  return *std::min_element(all.begin(), all.end());
}

}  // namespace lpp
