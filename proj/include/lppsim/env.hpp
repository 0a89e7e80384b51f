#pragma once

// Random environment of the product-potential model: a spatial field F on a
// window of lattice sites and a sequence of temporal signs B(1..horizon).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "lppsim/errors.hpp"
#include "lppsim/rng.hpp"

namespace lpp {

using Site = std::int64_t;
using Time = std::int64_t;

enum class DensityFamily { edge_power, uniform, custom_table };

inline std::string to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::edge_power: return "edge_power";
    case DensityFamily::uniform: return "uniform";
    case DensityFamily::custom_table: return "custom_table";
  }
  return "?";
}

inline DensityFamily family_from_string(const std::string& s) {
  if (s == "edge_power") return DensityFamily::edge_power;
  if (s == "uniform") return DensityFamily::uniform;
  if (s == "custom_table") return DensityFamily::custom_table;
  throw ParameterError("unknown density family '" + s + "'");
}

/// Piecewise-linear half density on [0,c], extended evenly to (-c,c).
/// Values need not be normalised; `q` is the user's edge constant.
struct DensityTable {
  std::vector<double> x;    // 0 = x[0] < ... < x.back() = c
  std::vector<double> pdf;  // unnormalised values at x
  double q = 0.0;
};

struct EnvParams {
  double kappa = 0.0;
  double c = 1.0;
  DensityFamily family = DensityFamily::edge_power;
  std::uint64_t seed = 0;
  Site x_min = -1;
  Site x_max = 1;
  Time horizon = 1;
  std::optional<DensityTable> table;  // custom_table only

  /// Edge constant: rho(x) ~ q (c-|x|)^kappa as |x| -> c.
  [[nodiscard]] double q() const {
    switch (family) {
      case DensityFamily::edge_power: return (kappa + 1.0) / (2.0 * std::pow(c, kappa + 1.0));
      case DensityFamily::uniform: return 1.0 / (2.0 * c);
      case DensityFamily::custom_table: return table ? table->q : 0.0;
    }
    return 0.0;
  }

  void validate() const {
    detail::require(kappa > -1.0, "kappa must exceed -1");
    detail::require(c > 0.0 && std::isfinite(c), "c must be positive");
    detail::require(x_min <= 0 && 0 <= x_max, "window must contain the origin");
    detail::require(horizon >= 1, "horizon must be at least 1");
    if (family == DensityFamily::uniform) detail::require(kappa == 0.0, "uniform family has kappa = 0");
    if (family == DensityFamily::custom_table) {
      detail::require(table.has_value(), "custom_table family needs a density table");
      const auto& t = *table;
      detail::require(t.x.size() >= 2 && t.x.size() == t.pdf.size(), "density table: need >= 2 nodes");
      detail::require(t.x.front() == 0.0 && std::abs(t.x.back() - c) <= 1e-12 * c,
                      "density table must span [0, c]");
      for (std::size_t i = 1; i < t.x.size(); ++i)
        detail::require(t.x[i] > t.x[i - 1], "density table nodes must increase");
      for (double p : t.pdf) detail::require(p >= 0.0 && std::isfinite(p), "density table values must be >= 0");
      detail::require(t.q > 0.0, "custom_table needs a positive q");
    }
  }

  static EnvParams edge_power(double kappa, double c, std::uint64_t seed, Site lo, Site hi, Time horizon) {
    EnvParams p;
    p.kappa = kappa;
    p.c = c;
    p.seed = seed;
    p.x_min = lo;
    p.x_max = hi;
    p.horizon = horizon;
    p.validate();
    return p;
  }
};

namespace detail {

struct TableCdf {
  std::vector<double> x, pdf, cum;  // cum[i] = normalised half-mass on [0, x[i]]
};

inline TableCdf table_cdf(const DensityTable& t) {
  TableCdf out{t.x, t.pdf, std::vector<double>(t.x.size(), 0.0)};
  for (std::size_t i = 1; i < t.x.size(); ++i)
    out.cum[i] = out.cum[i - 1] + 0.5 * (t.pdf[i] + t.pdf[i - 1]) * (t.x[i] - t.x[i - 1]);
  const double total = out.cum.back();
  detail::require(total > 0.0, "density table has zero mass");
  for (auto& v : out.cum) v /= total;
  for (auto& v : out.pdf) v /= total;  // now integrates to 1 over [0, c]
  return out;
}

/// Inverse of the half CDF G on [0,c] (G(0)=0, G(c)=1), exact for a
/// piecewise-linear density.
inline double table_half_inverse(const TableCdf& t, double w) {
  auto it = std::upper_bound(t.cum.begin(), t.cum.end(), w);
  std::size_t j = it == t.cum.begin() ? 0 : static_cast<std::size_t>(it - t.cum.begin()) - 1;
  if (j >= t.x.size() - 1) return t.x.back();
  const double h = t.x[j + 1] - t.x[j];
  const double p0 = t.pdf[j], p1 = t.pdf[j + 1];
  const double m = w - t.cum[j];
  const double a = (p1 - p0) / (2 * h);
  double s;
  if (std::abs(a) < 1e-300) {
    s = p0 > 0 ? m / p0 : 0.0;
  } else {
    const double disc = std::max(p0 * p0 + 4 * a * m, 0.0);
    s = 2 * m / (p0 + std::sqrt(disc));  // stable root of a s^2 + p0 s - m = 0
  }
  return t.x[j] + std::clamp(s, 0.0, h);
}

inline double table_half_cdf(const TableCdf& t, double x) {
  if (x <= 0) return 0.0;
  if (x >= t.x.back()) return 1.0;
  auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - t.x.begin()) - 1;
  const double h = t.x[j + 1] - t.x[j];
  const double s = x - t.x[j];
  const double p0 = t.pdf[j], p1 = t.pdf[j + 1];
  return t.cum[j] + p0 * s + (p1 - p0) * s * s / (2 * h);
}

inline double table_half_pdf(const TableCdf& t, double x) {
  if (x < 0 || x > t.x.back()) return 0.0;
  auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
  if (it == t.x.end()) return t.pdf.back();
  const std::size_t j = static_cast<std::size_t>(it - t.x.begin()) - 1;
  const double f = (x - t.x[j]) / (t.x[j + 1] - t.x[j]);
  return t.pdf[j] + f * (t.pdf[j + 1] - t.pdf[j]);
}

/// Pull |F| = c values produced by rounding back inside (-c, c).
inline double clamp_interior(double x, double c) {
  const double hi = std::nextafter(c, 0.0);
  return std::clamp(x, -hi, hi);
}

}  // namespace detail

/// Density rho(x); zero outside (-c, c).
inline double density_pdf(const EnvParams& p, double x) {
  const double ax = std::abs(x);
  if (ax >= p.c) return 0.0;
  switch (p.family) {
    case DensityFamily::edge_power: return p.q() * std::pow(p.c - ax, p.kappa);
    case DensityFamily::uniform: return 1.0 / (2.0 * p.c);
    case DensityFamily::custom_table: {
      const auto t = detail::table_cdf(*p.table);
      return 0.5 * detail::table_half_pdf(t, ax);
    }
  }
  return 0.0;
}

inline double cdf(const EnvParams& p, double x) {
  if (x <= -p.c) return 0.0;
  if (x >= p.c) return 1.0;
  switch (p.family) {
    case DensityFamily::uniform: return (x + p.c) / (2.0 * p.c);
    case DensityFamily::edge_power: {
      const double tail = 0.5 * std::pow((p.c - std::abs(x)) / p.c, p.kappa + 1.0);
      return x >= 0 ? 1.0 - tail : tail;
    }
    case DensityFamily::custom_table: {
      const auto t = detail::table_cdf(*p.table);
      const double g = detail::table_half_cdf(t, std::abs(x));
      return x >= 0 ? 0.5 + 0.5 * g : 0.5 - 0.5 * g;
    }
  }
  return 0.0;
}

namespace detail {

/// Inverse CDF without the argument check or table rebuild.
inline double inverse_cdf_fast(const EnvParams& p, const TableCdf* table, double u) {
  double x = 0.0;
  switch (p.family) {
    case DensityFamily::uniform: x = p.c * (2.0 * u - 1.0); break;
    case DensityFamily::edge_power: {
      const double e = 1.0 / (p.kappa + 1.0);
      x = u < 0.5 ? -p.c + p.c * std::pow(2.0 * u, e) : p.c - p.c * std::pow(2.0 * (1.0 - u), e);
      break;
    }
    case DensityFamily::custom_table:
      x = u < 0.5 ? -table_half_inverse(*table, 1.0 - 2.0 * u) : table_half_inverse(*table, 2.0 * u - 1.0);
      break;
  }
  return clamp_interior(x, p.c);
}

}  // namespace detail

/// Closed-form inverse of the symmetric CDF; finite and exact for every kappa > -1.
inline double inverse_cdf(const EnvParams& p, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw ParameterError("inverse_cdf: u must lie in [0,1]");
  if (p.family == DensityFamily::custom_table) {
    const auto t = detail::table_cdf(*p.table);
    return detail::inverse_cdf_fast(p, &t, u);
  }
  return detail::inverse_cdf_fast(p, nullptr, u);
}

/// D = E|F(0)|.
inline double mean_abs_F(const EnvParams& p) {
  switch (p.family) {
    case DensityFamily::edge_power: return p.c / (p.kappa + 2.0);
    case DensityFamily::uniform: return p.c / 2.0;
    case DensityFamily::custom_table: {
      const auto t = detail::table_cdf(*p.table);
      boost::math::quadrature::tanh_sinh<double> integrator;
      return integrator.integrate([&](double x) { return x * detail::table_half_pdf(t, x); }, 0.0, p.c);
    }
  }
  return 0.0;
}

/// Probability mass P(F <= -c + h) = P(F >= c - h).
inline double edge_tail_mass(const EnvParams& p, double h) { return cdf(p, -p.c + h); }

class Environment {
 public:
  Environment() = default;

  Environment(EnvParams params, std::vector<double> spatial, std::vector<std::int8_t> signs)
      : params_(std::move(params)), F_(std::move(spatial)), B_(std::move(signs)) {
    params_.validate();
    if (F_.size() != static_cast<std::size_t>(params_.x_max - params_.x_min + 1))
      throw ParameterError("spatial field size does not match the window");
    if (B_.size() != static_cast<std::size_t>(params_.horizon + 1))
      throw ParameterError("sign array must hold horizon + 1 entries (index 0 unused)");
    for (double f : F_)
      if (!(std::abs(f) <= params_.c)) throw ParameterError("|F(x)| must not exceed c");
    build_prefix();
  }

  [[nodiscard]] const EnvParams& params() const { return params_; }
  [[nodiscard]] double c() const { return params_.c; }
  [[nodiscard]] Site x_min() const { return params_.x_min; }
  [[nodiscard]] Site x_max() const { return params_.x_max; }
  [[nodiscard]] Time horizon() const { return params_.horizon; }

  [[nodiscard]] bool has_site(Site x) const { return x >= x_min() && x <= x_max(); }
  [[nodiscard]] bool has_time(Time i) const { return i >= 1 && i <= horizon(); }

  [[nodiscard]] double F(Site x) const {
    if (!has_site(x)) throw RangeError("site " + std::to_string(x) + " outside the sampled window");
    return F_[static_cast<std::size_t>(x - x_min())];
  }
  [[nodiscard]] int B(Time i) const {
    if (!has_time(i)) throw RangeError("time " + std::to_string(i) + " outside [1, horizon]");
    return B_[static_cast<std::size_t>(i)];
  }

  /// Unchecked accessors for inner loops.
  [[nodiscard]] double f_at(Site x) const { return F_[static_cast<std::size_t>(x - x_min())]; }
  [[nodiscard]] double sign_at(Time i) const { return B_[static_cast<std::size_t>(i)]; }

  /// F over [lo, hi] as a contiguous span.
  [[nodiscard]] std::span<const double> spatial(Site lo, Site hi) const {
    if (!has_site(lo) || !has_site(hi) || hi < lo) throw RangeError("spatial slice outside window");
    return {F_.data() + (lo - x_min()), static_cast<std::size_t>(hi - lo + 1)};
  }
  [[nodiscard]] std::span<const std::int8_t> signs() const { return B_; }

  /// Number of +1 signs in (a, b].
  [[nodiscard]] std::int64_t n_plus(Time a, Time b) const {
    if (a > b) throw ParameterError("n_plus: need a <= b");
    if (a < 0 || b > horizon()) throw RangeError("n_plus: range outside [0, horizon]");
    return plus_prefix_[static_cast<std::size_t>(b)] - plus_prefix_[static_cast<std::size_t>(a)];
  }

  /// Same spatial field with a fresh sign sequence drawn from `sign_seed`.
  [[nodiscard]] Environment with_signs(std::uint64_t sign_seed, Time new_horizon = -1) const;

  /// Same seeds over a wider window; values on the old window are unchanged.
  [[nodiscard]] Environment widened(Site lo, Site hi) const;

 private:
  void build_prefix() {
    plus_prefix_.assign(B_.size(), 0);
    for (std::size_t i = 1; i < B_.size(); ++i) {
      if (B_[i] != 1 && B_[i] != -1) throw ParameterError("signs must be +1 or -1");
      plus_prefix_[i] = plus_prefix_[i - 1] + (B_[i] == 1 ? 1 : 0);
    }
  }

  EnvParams params_;
  std::vector<double> F_;
  std::vector<std::int8_t> B_;
  std::vector<std::int64_t> plus_prefix_;
};

/// F(x) for x in [lo, hi] drawn from the counter stream of `p.seed`.
inline std::vector<double> sample_spatial(const EnvParams& p, Site lo, Site hi) {
  std::vector<double> out(static_cast<std::size_t>(hi - lo + 1));
  const std::uint64_t k = rng::key(p.seed, rng::Stream::spatial);
  std::optional<detail::TableCdf> table;
  if (p.family == DensityFamily::custom_table) table = detail::table_cdf(*p.table);
  const detail::TableCdf* tp = table ? &*table : nullptr;
  for (Site x = lo; x <= hi; ++x)
    out[static_cast<std::size_t>(x - lo)] = detail::inverse_cdf_fast(p, tp, rng::open_unit(rng::bits(k, x)));
  return out;
}

/// B(1..horizon), index 0 unused (stored as +1).
inline std::vector<std::int8_t> sample_signs(std::uint64_t seed, Time horizon) {
  std::vector<std::int8_t> out(static_cast<std::size_t>(horizon + 1), 1);
  const std::uint64_t k = rng::key(seed, rng::Stream::signs);
  for (Time i = 1; i <= horizon; ++i) out[static_cast<std::size_t>(i)] = (rng::bits(k, i) >> 63) ? 1 : -1;
  return out;
}

inline Environment sample_environment(const EnvParams& params) {
  params.validate();
  return Environment(params, sample_spatial(params, params.x_min, params.x_max),
                     sample_signs(params.seed, params.horizon));
}

inline Environment Environment::with_signs(std::uint64_t sign_seed, Time new_horizon) const {
  EnvParams p = params_;
  if (new_horizon > 0) p.horizon = new_horizon;
  return Environment(p, F_, sample_signs(sign_seed, p.horizon));
}

inline Environment Environment::widened(Site lo, Site hi) const {
  EnvParams p = params_;
  p.x_min = std::min(lo, x_min());
  p.x_max = std::max(hi, x_max());
  std::vector<double> f = sample_spatial(p, p.x_min, p.x_max);
  std::copy(F_.begin(), F_.end(), f.begin() + (x_min() - p.x_min));
  std::vector<std::int8_t> b = B_;
  return Environment(p, std::move(f), std::move(b));
}

// ---------------------------------------------------------------------------
// Serialisation: `env { key=value ... }` text blocks and JSON.

namespace detail {
inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ParameterError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_double(v[i]);
  return out;
}
}  // namespace detail

inline std::string to_config_block(const EnvParams& p) {
  std::ostringstream os;
  os << "env {\n"
     << "  kappa = " << detail::fmt_double(p.kappa) << "\n"
     << "  c = " << detail::fmt_double(p.c) << "\n"
     << "  family = " << to_string(p.family) << "\n"
     << "  seed = " << p.seed << "\n"
     << "  window = " << p.x_min << "," << p.x_max << "\n"
     << "  horizon = " << p.horizon << "\n";
  if (p.table) {
    os << "  table_x = " << detail::join(p.table->x) << "\n"
       << "  table_pdf = " << detail::join(p.table->pdf) << "\n"
       << "  q = " << detail::fmt_double(p.table->q) << "\n";
  }
  os << "}\n";
  return os.str();
}

/// Applies one `key = value` pair of the env schema; returns false for unknown keys.
inline bool apply_env_key(EnvParams& p, const std::string& key, const std::string& value) {
  try {
    if (key == "kappa") p.kappa = std::stod(value);
    else if (key == "c") p.c = std::stod(value);
    else if (key == "family") p.family = family_from_string(value);
    else if (key == "seed") p.seed = std::stoull(value);
    else if (key == "horizon") p.horizon = std::stoll(value);
    else if (key == "window") {
      auto w = detail::parse_list(value);
      if (w.size() != 2) throw ParameterError("window needs two integers");
      p.x_min = static_cast<Site>(w[0]);
      p.x_max = static_cast<Site>(w[1]);
    } else if (key == "table_x") {
      if (!p.table) p.table.emplace();
      p.table->x = detail::parse_list(value);
    } else if (key == "table_pdf") {
      if (!p.table) p.table.emplace();
      p.table->pdf = detail::parse_list(value);
    } else if (key == "q") {
      if (!p.table) p.table.emplace();
      p.table->q = std::stod(value);
    } else {
      return false;
    }
  } catch (const ParameterError&) {
    throw;
  } catch (const std::exception&) {
    throw ParameterError("bad value for '" + key + "': " + value);
  }
  return true;
}

inline EnvParams parse_config_block(const std::string& text) {
  EnvParams p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty() || line == "}" || line.rfind("env", 0) == 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("expected key = value, got '" + line + "'");
    const auto key = detail::trim(line.substr(0, eq));
    if (!apply_env_key(p, key, detail::trim(line.substr(eq + 1))))
      throw ParameterError("unknown env key '" + key + "'");
  }
  p.validate();
  return p;
}

inline nlohmann::ordered_json to_json(const EnvParams& p) {
  nlohmann::ordered_json j;
  j["kappa"] = p.kappa;
  j["c"] = p.c;
  j["family"] = to_string(p.family);
  j["seed"] = p.seed;
  j["window"] = {p.x_min, p.x_max};
  j["horizon"] = p.horizon;
  if (p.table) {
    j["table_x"] = p.table->x;
    j["table_pdf"] = p.table->pdf;
    j["q"] = p.table->q;
  }
  return nlohmann::ordered_json{{"env", j}};
}

inline EnvParams env_from_json(const nlohmann::json& doc) {
  const auto& j = doc.contains("env") ? doc.at("env") : doc;
  EnvParams p;
  try {
    p.kappa = j.value("kappa", 0.0);
    p.c = j.value("c", 1.0);
    p.family = family_from_string(j.value("family", std::string("edge_power")));
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("window")) {
      p.x_min = j.at("window").at(0).get<Site>();
      p.x_max = j.at("window").at(1).get<Site>();
    }
    p.horizon = j.value("horizon", Time{1});
    if (j.contains("table_x")) {
      DensityTable t;
      t.x = j.at("table_x").get<std::vector<double>>();
      t.pdf = j.at("table_pdf").get<std::vector<double>>();
      t.q = j.value("q", 0.0);
      p.table = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("env json: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace lpp
