#pragma once

// Experiment configs and output helpers; the runners live in src/experiment.cpp.
// Every output is a pure function of the config: no timings, host names or
// thread counts are written.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lppsim/discrepancy.hpp"
#include "lppsim/dp.hpp"
#include "lppsim/env.hpp"
#include "lppsim/errors.hpp"
#include "lppsim/freepath.hpp"
#include "lppsim/loopdecomp.hpp"
#include "lppsim/paths.hpp"
#include "lppsim/shape.hpp"
#include "lppsim/svg.hpp"
#include "lppsim/variance.hpp"

namespace lpp {

using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"shape", "pointprocess", "freepath", "limitlaw",
                                          "loops", "variance",     "min-action", "dump-path"};
  return k;
}

struct ExperimentConfig {
  std::string kind;
  EnvParams env;  // env.seed is the master seed
  std::uint64_t budget = 2'000'000'000'000ULL;  // DP cell updates
  unsigned threads = 1;
  std::string out;
  bool svg = false;

  std::size_t replicas = 0;  // 0: per-kind default
  std::vector<Time> n_grid;
  std::vector<double> alphas;
  std::vector<Rect> rects;
  bool extend_ladder = false;

  Time n = 0;  // 0: per-kind default
  std::optional<Site> k;
  Time ell = 3;
  std::size_t paths = 1;
  bool validate = true;
  bool with_path = false;
  std::string table;

  std::string s = "auto";
  Time s_n = 16000;
  std::size_t s_replicas = 200;

  std::size_t records = 0;
  std::optional<Site> x_limit;

  void check() const {
    const auto& ks = experiment_kinds();
    if (std::find(ks.begin(), ks.end(), kind) == ks.end()) throw ParameterError("unknown experiment kind '" + kind + "'");
    if (budget == 0) throw ParameterError("budget must be positive");
    if (threads == 0) throw ParameterError("threads must be positive");
    EnvParams p = env;
    p.validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParameterError("expected a boolean, got '" + v + "'");
}

inline std::vector<Time> parse_times(const std::string& v) {
  std::vector<Time> out;
  for (double x : parse_list(v)) {
    if (x != std::floor(x) || x < 0) throw ParameterError("expected non-negative integers in '" + v + "'");
    out.push_back(static_cast<Time>(x));
  }
  return out;
}

inline Rect parse_rect(const std::string& v) {
  const auto xs = parse_list(v);
  if (xs.size() != 4) throw ParameterError("rectangle needs a1,a2,b1,b2");
  if (!(xs[0] < xs[1] && 0 <= xs[2] && xs[2] < xs[3])) throw ParameterError("rectangle needs a1<a2 and 0<=b1<b2");
  return {xs[0], xs[1], xs[2], xs[3]};
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.find('-') != std::string::npos) throw ParameterError("'" + key + "' must be non-negative: " + v);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && d >= 0 && d == std::floor(d) && v.find_first_of(".eE") != std::string::npos)
      return static_cast<std::uint64_t>(d);
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ParameterError("bad value for '" + key + "': " + v);
  }
}

}  // namespace detail

/// Applies one top-level `key = value`; env keys are accepted too.
inline void apply_config_key(ExperimentConfig& cfg, std::string key, const std::string& value) {
  std::replace(key.begin(), key.end(), '-', '_');
  using namespace detail;
  try {
    if (key == "kind") cfg.kind = value;
    else if (key == "budget") cfg.budget = parse_u64(key, value);
    else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_u64(key, value));
    else if (key == "out") cfg.out = value;
    else if (key == "svg") cfg.svg = parse_bool(value);
    else if (key == "replicas") cfg.replicas = parse_u64(key, value);
    else if (key == "n_grid" || key == "n_ladder") cfg.n_grid = parse_times(value);
    else if (key == "alphas") cfg.alphas = parse_list(value);
    else if (key == "rect") cfg.rects.push_back(parse_rect(value));
    else if (key == "extend_ladder") cfg.extend_ladder = parse_bool(value);
    else if (key == "n") cfg.n = static_cast<Time>(parse_u64(key, value));
    else if (key == "k") cfg.k = std::stoll(value);
    else if (key == "ell") cfg.ell = static_cast<Time>(parse_u64(key, value));
    else if (key == "paths") cfg.paths = parse_u64(key, value);
    else if (key == "validate") cfg.validate = parse_bool(value);
    else if (key == "path") cfg.with_path = parse_bool(value);
    else if (key == "table") cfg.table = value;
    else if (key == "s") cfg.s = value;
    else if (key == "s_n") cfg.s_n = static_cast<Time>(parse_u64(key, value));
    else if (key == "s_replicas") cfg.s_replicas = parse_u64(key, value);
    else if (key == "records") cfg.records = parse_u64(key, value);
    else if (key == "x_limit") cfg.x_limit = static_cast<Site>(parse_u64(key, value));
    else if (!apply_env_key(cfg.env, key, value)) throw ParameterError("unknown config key '" + key + "'");
  } catch (const ParameterError&) {
    throw;
  } catch (const std::exception&) {
    throw ParameterError("bad value for '" + key + "': " + value);
  }
}

/// Parses `key = value` lines; an `env { ... }` block may hold the env keys.
/// `#` starts a comment.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty() || line == "}" || line == "{" || line.rfind("env", 0) == 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParameterError("line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    apply_config_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

// ---------------------------------------------------------------------------
// Output helpers.

namespace detail {

inline std::string out_path(const ExperimentConfig& cfg, const std::string& ext) {
  return cfg.out.empty() ? cfg.kind + ext : cfg.out;
}

/// `stem.ext` next to the primary output.
inline std::string sidecar(const std::string& primary, const std::string& ext) {
  std::filesystem::path p(primary);
  p.replace_extension(ext);
  return p.string();
}

inline std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot write '" + path + "'");
  return os;
}

inline void write_json(const std::string& path, const ojson& j) {
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}


}  // namespace detail

struct RunResult {
  int status = 0;
  bool truncated = false;
  std::vector<std::string> files;
};

/// Runs one experiment, writing its files and a short summary to `log`.
RunResult run(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace lpp
