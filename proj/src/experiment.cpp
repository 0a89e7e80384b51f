// Experiment runners behind lppsim::run and the CLI.

#include "lppsim/experiment.hpp"

#include <algorithm>
#include <cmath>

namespace lpp {

// ---------------------------------------------------------------------------
// Experiments.

namespace detail {

RunResult run_shape(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  auto ladder = cfg.n_grid.empty() ? std::vector<Time>{1000} : cfg.n_grid;
  std::sort(ladder.begin(), ladder.end());
  const auto alphas = cfg.alphas.empty() ? default_alpha_grid() : cfg.alphas;
  std::size_t R = cfg.replicas ? cfg.replicas : 50;
  const std::uint64_t per = shape_cells(ladder.back());
  if (per * R > cfg.budget) {
    R = static_cast<std::size_t>(cfg.budget / per);
    res.truncated = true;
    if (R < 2) throw GuardError("budget too small for two shape replicas at n = " + std::to_string(ladder.back()));
  }
  ShapeOptions opt;
  opt.threads = cfg.threads;
  opt.extend_ladder = cfg.extend_ladder;
  opt.budget = cfg.budget;
  const auto est = estimate_shape(cfg.env, alphas, ladder, R, cfg.env.seed, opt);
  res.truncated = res.truncated || est.truncated;

  const auto csv = out_path(cfg, ".csv");
  {
    auto os = open_out(csv);
    os << "alpha,n,lambda_hat,stderr,replicas\n";
    for (std::size_t a = 0; a < est.alphas.size(); ++a)
      for (std::size_t k = 0; k < est.n_values.size(); ++k)
        os << fmt_double(est.alphas[a]) << ',' << est.n_values[k] << ',' << fmt_double(est.lambda_hat[a][k]) << ','
           << fmt_double(est.stderr_[a][k]) << ',' << est.replicas << "\n";
    if (res.truncated) os << "# truncated: budget exhausted\n";
  }
  res.files.push_back(csv);

  ojson j;
  j["kind"] = "shape";
  j["env"] = to_json(cfg.env)["env"];
  j["n_values"] = est.n_values;
  j["replicas"] = est.replicas;
  j["truncated"] = res.truncated;
  j["cells"] = est.cells;
  const auto corner = check_corner(est);
  ojson rows = ojson::array();
  for (const auto& r : corner.rows)
    rows.push_back({{"alpha", r.alpha}, {"lambda", r.lambda}, {"stderr", r.stderr_}, {"lower", r.lower},
                    {"upper", r.upper}, {"lower_ok", r.lower_ok}, {"upper_ok", r.upper_ok}});
  j["bounds"] = {{"D", corner.D}, {"rows", rows}, {"slope_right", corner.slope_right},
                 {"slope_stderr", corner.slope_stderr}, {"upper_chain_pass", corner.pass}};
  const auto nl = check_nonlinearity(est);
  ojson margins = ojson::array();
  for (const auto& m : nl.rows)
    margins.push_back({{"alpha", m.alpha}, {"margin", m.margin}, {"stderr", m.stderr_}, {"z", m.z}});
  j["nonlinearity"] = margins;
  const auto fe = detect_flat_edge(est);
  j["flat_edge"] = {{"alpha0_hat", fe.alpha0_hat}, {"K_hat", fe.K_hat}, {"inconclusive", fe.inconclusive}};
  if (est.has_alpha(0.1) && est.has_alpha(0.14) && est.has_alpha(0.18)) {
    const auto s = estimate_s(est);
    j["s"] = {{"value", s.s}, {"stderr", s.stderr_}, {"base", s.base}, {"h", s.h}, {"consistent", s.consistent}};
  }
  ojson ev = ojson::array(), cc = ojson::array();
  for (const auto& e : evenness(est))
    ev.push_back({{"alpha", e.alpha}, {"difference", e.value}, {"stderr", e.stderr_}, {"pass", e.pass}});
  for (const auto& e : concavity(est))
    cc.push_back({{"alpha", e.alpha}, {"second_difference", e.value}, {"stderr", e.stderr_}, {"pass", e.pass}});
  j["evenness"] = ev;
  j["concavity"] = cc;
  if (est.has_alpha(0.0)) {
    const auto [v, inc] = monotone_at_zero(est);
    j["lambda0_along_n"] = {{"values", v}, {"increasing", inc}};
  }
  const auto js = sidecar(csv, ".json");
  write_json(js, j);
  res.files.push_back(js);

  if (cfg.svg) {
    const double c = cfg.env.c, D = corner.D;
    svg::Series lam{"estimate", est.alphas, {}, "#1f77b4", true};
    svg::Series lo{"c(1-|a|)", est.alphas, {}, "#d62728", true};
    svg::Series hi{"c-|a|(c-D)", est.alphas, {}, "#2ca02c", true};
    for (std::size_t a = 0; a < est.alphas.size(); ++a) {
      lam.y.push_back(est.lambda_hat[a][est.last()]);
      lo.y.push_back(c * (1 - std::abs(est.alphas[a])));
      hi.y.push_back(c - std::abs(est.alphas[a]) * (c - D));
    }
    const auto sv = sidecar(csv, ".svg");
    auto os = open_out(sv);
    svg::write_chart(os, "shape estimate, n = " + std::to_string(est.n_values.back()), {lam, lo, hi}, "alpha",
                     "lambda");
    res.files.push_back(sv);
  }
  log << "shape: " << est.alphas.size() << " slopes, n = " << est.n_values.back() << ", " << est.replicas
      << " replicas; lambda_hat(0) = " << (est.has_alpha(0.0) ? fmt_double(est.lam(0.0)) : "n/a")
      << (res.truncated ? " [truncated]" : "") << "\n";
  return res;
}

RunResult run_pointprocess(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  const Time n = cfg.n ? cfg.n : 100000;
  const auto rects = cfg.rects.empty() ? default_rectangles(cfg.env) : cfg.rects;
  std::size_t R = cfg.replicas ? cfg.replicas : 1000;
  double reach = 0;
  for (const auto& r : rects) reach = std::max({reach, std::abs(r.a1), std::abs(r.a2)});
  const auto per = static_cast<std::uint64_t>(2 * std::ceil(reach * std::pow(double(n), zeta(cfg.env.kappa))) + 5);
  if (per * R > cfg.budget) {
    R = static_cast<std::size_t>(cfg.budget / per);
    res.truncated = true;
  }
  const auto pc = poisson_compare(cfg.env, n, rects, R, cfg.env.seed);
  ojson j;
  j["kind"] = "pointprocess";
  j["env"] = to_json(cfg.env)["env"];
  j["n"] = n;
  j["replicas"] = R;
  j["truncated"] = res.truncated;
  j["lag1_correlation"] = pc.lag1_correlation;
  j["lag2_correlation"] = pc.lag2_correlation;
  ojson arr = ojson::array();
  for (const auto& s : pc.rects)
    arr.push_back({{"rectangle", {s.rect.a1, s.rect.a2, s.rect.b1, s.rect.b2}},
                   {"lambda", s.lambda},
                   {"mean", s.mean},
                   {"var", s.var},
                   {"avoid_emp", s.avoid_emp},
                   {"avoid_theory", s.avoid_theory},
                   {"z", s.z}});
  j["rectangles"] = arr;
  j["count_correlation"] = pc.count_correlation;
  const auto path = out_path(cfg, ".json");
  write_json(path, j);
  res.files.push_back(path);
  log << "pointprocess: " << rects.size() << " rectangles, n = " << n << ", " << R << " replicas\n";
  for (const auto& s : pc.rects)
    log << "  lambda " << std::setprecision(4) << s.lambda << "  mean " << s.mean << "  var " << s.var << "  avoid "
        << s.avoid_emp << " vs " << s.avoid_theory << "\n";
  return res;
}

ojson free_path_summary(const FreePathSample& s) {
  ojson per = ojson::array();
  const double c = s.params.c;
  for (std::size_t k = 0; k < s.n_grid.size(); ++k) {
    std::vector<double> ell, d;
    std::size_t settled = 0, event = 0, tau_ok = 0;
    for (std::size_t r = 0; r < s.replicas; ++r) {
      const auto& st = s.rows[r][k];
      ell.push_back(static_cast<double>(std::abs(st.ell)));
      d.push_back(st.d);
      settled += st.settled;
      const double n = static_cast<double>(st.n);
      event += (c * n + st.action >= n * st.d / 5) ? 1 : 0;
      tau_ok += (st.tau >= 0 && st.tau <= st.n) ? 1 : 0;
    }
    const double R = static_cast<double>(s.replicas);
    per.push_back({{"n", s.n_grid[k]},
                   {"median_abs_ell", stats::median(ell)},
                   {"median_d", stats::median(d)},
                   {"settled_fraction", settled / R},
                   {"action_bound_fraction", event / R},
                   {"tau_defined_fraction", tau_ok / R}});
  }
  ojson j;
  j["per_n"] = per;
  const bool spans = s.n_grid.size() >= 2 &&
                     std::log10(double(s.n_grid.back()) / double(s.n_grid.front())) >= 1.5 - 1e-9;
  if (spans && s.replicas >= 2) {
    const auto fit = scaling_regression(s);
    auto one = [](const SlopeWithCI& x) { return ojson{{"slope", x.slope}, {"ci", {x.lo, x.hi}}}; };
    j["scaling"] = {{"zeta", zeta(s.params.kappa)}, {"ell", one(fit.ell)}, {"d", one(fit.d)},
                    {"action", one(fit.action)}};
  } else {
    j["scaling"] = nullptr;
  }
  return j;
}

FreePathSample sample_free_paths(const ExperimentConfig& cfg, std::vector<Time> grid, RunResult& res) {
  const std::size_t R = cfg.replicas ? cfg.replicas : 50;
  auto s = free_path_sample(cfg.env, std::move(grid), R, cfg.env.seed, cfg.threads, cfg.budget);
  res.truncated = res.truncated || s.truncated;
  if (s.replicas < 1) throw GuardError("budget too small for a single free-path replica");
  return s;
}

RunResult run_freepath(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  const auto s = sample_free_paths(cfg, cfg.n_grid.empty() ? std::vector<Time>{1000, 3000, 10000} : cfg.n_grid, res);
  const auto csv = out_path(cfg, ".csv");
  {
    auto os = open_out(csv);
    os << "replica,n,ell,d,tau,settled,action,endpoint,window\n";
    for (std::size_t r = 0; r < s.replicas; ++r)
      for (const auto& st : s.rows[r])
        os << r << ',' << st.n << ',' << st.ell << ',' << fmt_double(st.d) << ',' << st.tau << ','
           << (st.settled ? 1 : 0) << ',' << fmt_double(st.action) << ',' << st.endpoint << ',' << st.window << "\n";
    if (res.truncated) os << "# truncated: budget exhausted\n";
  }
  res.files.push_back(csv);
  ojson j;
  j["kind"] = "freepath";
  j["env"] = to_json(cfg.env)["env"];
  j["replicas"] = s.replicas;
  j["truncated"] = res.truncated;
  j.update(free_path_summary(s));
  const auto js = sidecar(csv, ".json");
  write_json(js, j);
  res.files.push_back(js);
  log << "freepath: " << s.n_grid.size() << " horizons, " << s.replicas << " replicas\n";
  return res;
}

struct SSource {
  double s = 0, lo = 0, hi = 0;
  std::string source;
  ojson detail;
};

SSource resolve_s(const ExperimentConfig& cfg, RunResult& res) {
  SSource out;
  if (cfg.s != "auto") {
    try {
      out.s = out.lo = out.hi = std::stod(cfg.s);
    } catch (const std::exception&) {
      throw ParameterError("s must be 'auto' or a number");
    }
    out.source = "override";
    return out;
  }
  std::size_t R = cfg.s_replicas;
  const std::uint64_t per = shape_cells(cfg.s_n);
  if (per * R > cfg.budget / 2) {
    R = static_cast<std::size_t>(cfg.budget / 2 / per);
    res.truncated = true;
    if (R < 2) throw GuardError("budget too small to estimate s");
  }
  ShapeOptions opt;
  opt.threads = cfg.threads;
  const auto est = estimate_shape(cfg.env, {0.1, 0.14, 0.18}, {cfg.s_n}, R, rng::replica_seed(cfg.env.seed, 1u << 20),
                                  opt);
  const auto se = estimate_s(est);
  out.s = se.s;
  out.lo = se.s - 1.96 * se.stderr_;
  out.hi = se.s + 1.96 * se.stderr_;
  out.source = "shape";
  out.detail = {{"n", cfg.s_n}, {"replicas", R}, {"stderr", se.stderr_}, {"base", se.base}, {"h", se.h}};
  return out;
}

ojson limit_law_json(const LimitLawReport& rep) {
  ojson q = ojson::array();
  for (const auto& z : rep.quantiles)
    q.push_back({{"t", z.t}, {"survival_theory", z.survival_theory}, {"survival_emp", z.survival_emp}, {"z", z.z}});
  ojson tau = ojson::array();
  for (const auto& [M, f] : rep.tau_diagnostic) tau.push_back({{"M", M}, {"fraction", f}});
  return {{"n", rep.n},
          {"s", rep.s},
          {"h", rep.h},
          {"h_band", {rep.h_lo, rep.h_hi}},
          {"zeta", rep.zeta},
          {"ks", rep.ks},
          {"ks_band", {rep.ks_lo_band, rep.ks_hi_band}},
          {"quantiles", q},
          {"tau_below_M_ell", tau},
          {"settled_fraction", rep.settled_fraction},
          {"min_value", rep.min_value}};
}

RunResult run_limitlaw(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  std::vector<Time> grid = cfg.n_grid;
  if (grid.empty()) grid = {cfg.n ? cfg.n : 10000};
  const auto src = resolve_s(cfg, res);
  const auto s = sample_free_paths(cfg, grid, res);
  ojson j;
  j["kind"] = "limitlaw";
  j["env"] = to_json(cfg.env)["env"];
  j["replicas"] = s.replicas;
  j["truncated"] = res.truncated;
  j["s_source"] = {{"source", src.source}, {"s", src.s}, {"ci", {src.lo, src.hi}}};
  if (!src.detail.is_null()) j["s_source"]["estimate"] = src.detail;
  ojson per = ojson::array();
  for (std::size_t k = 0; k < s.n_grid.size(); ++k) {
    const auto rep = limit_law_test(s, k, src.s, src.lo, src.hi);
    auto row = limit_law_json(rep);
    // Diagnostic: s chosen so that cn + A best matches s|ell| + n d / 2.
    try {
      const double sf = fit_s(s, k);
      row["fitted_s"] = {{"s", sf}, {"ks", limit_law_test(s, k, sf, sf, sf).ks}};
    } catch (const ParameterError&) {
      row["fitted_s"] = nullptr;
    }
    per.push_back(row);
    log << "limitlaw: n = " << rep.n << "  KS = " << std::setprecision(4) << rep.ks << "  P(tau < 4|ell|) = "
        << rep.tau_diagnostic[1].second << "\n";
  }
  j["per_n"] = per;
  const auto path = out_path(cfg, ".json");
  write_json(path, j);
  res.files.push_back(path);
  return res;
}

RunResult run_loops(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  const Site n = cfg.n ? cfg.n : 200;
  if (cfg.ell < 1) throw ParameterError("ell must be >= 1");
  const Time T = cfg.ell * n;
  const std::size_t P = std::max<std::size_t>(cfg.paths, 1);
  if (static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(T) > cfg.budget)
    throw GuardError("budget too small for one loop decomposition");
  std::vector<int> passes(11, 0);
  std::vector<std::string> first_failure(11);
  int eq = 0, checked = 0;
  std::size_t done = 0;
  for (std::size_t j = 0; j < P; ++j) {
    if (static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(T) * (j + 1) > cfg.budget) {
      res.truncated = true;
      break;
    }
    EnvParams p = cfg.env;
    p.seed = P == 1 ? cfg.env.seed : rng::replica_seed(cfg.env.seed, j);
    p.x_min = -T - 1;
    p.x_max = T + 1;
    p.horizon = T;
    const auto env = sample_environment(p);
    const auto path = optimal_bridge(env, T, n);
    const auto dec = decompose(env, path, n);
    ++done;
    if (!cfg.validate) continue;
    const auto v = validate(env, dec);
    for (const auto& it : v.items) {
      if (it.pass) ++passes[static_cast<std::size_t>(it.item - 1)];
      else if (first_failure[static_cast<std::size_t>(it.item - 1)].empty())
        first_failure[static_cast<std::size_t>(it.item - 1)] = "path " + std::to_string(j) + ": " + it.detail;
    }
    eq += v.item11_equalities;
    checked += v.item11_checked;
  }
  ojson j;
  j["kind"] = "loops";
  j["env"] = to_json(cfg.env)["env"];
  j["n"] = n;
  j["ell"] = cfg.ell;
  j["paths"] = done;
  j["truncated"] = res.truncated;
  bool all = true;
  if (cfg.validate) {
    ojson items = ojson::array();
    log << "item  passed/paths\n";
    for (int k = 0; k < 11; ++k) {
      const bool ok = passes[static_cast<std::size_t>(k)] == static_cast<int>(done);
      all = all && ok;
      items.push_back({{"item", k + 1}, {"passed", passes[static_cast<std::size_t>(k)]}, {"pass", ok},
                       {"first_failure", first_failure[static_cast<std::size_t>(k)]}});
      log << std::setw(4) << k + 1 << "  " << passes[static_cast<std::size_t>(k)] << "/" << done << "  "
          << (ok ? "PASS" : "FAIL") << "\n";
    }
    j["items"] = items;
    j["item11_equalities"] = {{"equal", eq}, {"checked", checked}};
    j["all_pass"] = all;
  }
  const auto path = out_path(cfg, ".json");
  write_json(path, j);
  res.files.push_back(path);
  res.status = all ? 0 : 3;
  return res;
}

RunResult run_variance(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  VarianceOptions opt;
  opt.budget = cfg.budget;
  opt.threads = cfg.threads;
  opt.record_count = cfg.records;
  opt.x_limit = cfg.x_limit;
  if (!opt.x_limit && opt.record_count == 0) opt.record_count = 6;
  const std::size_t R = cfg.replicas ? cfg.replicas : 100;
  const auto vs = variance_study(cfg.env, R, rng::replica_seed(cfg.env.seed, 7), opt);
  res.truncated = vs.truncated;
  const auto csv = out_path(cfg, ".csv");
  {
    auto os = open_out(csv);
    os << "index,x,d,horizon,replicas,mean,variance,variance_stderr\n";
    for (const auto& r : vs.rows)
      os << r.index << ',' << r.x << ',' << fmt_double(r.d) << ',' << r.horizon << ',' << r.replicas << ','
         << fmt_double(r.mean) << ',' << fmt_double(r.variance) << ',' << fmt_double(r.variance_stderr) << "\n";
    if (res.truncated) os << "# truncated: budget exhausted\n";
  }
  res.files.push_back(csv);
  const auto tr = variance_trend(vs);
  ojson j;
  j["kind"] = "variance";
  j["env"] = to_json(cfg.env)["env"];
  j["records"] = vs.rows.size();
  j["replicas"] = R;
  j["truncated"] = res.truncated;
  j["cells"] = vs.cells;
  j["trend"] = {{"reference_variance", tr.reference}, {"ratios_last5", tr.ratios}, {"within_factor_3", tr.pass}};
  const auto js = sidecar(csv, ".json");
  write_json(js, j);
  res.files.push_back(js);
  if (cfg.svg) {
    svg::Series v{"variance", {}, {}, "#1f77b4", true};
    for (const auto& r : vs.rows) {
      v.x.push_back(std::log10(static_cast<double>(r.x) + 1));
      v.y.push_back(r.variance);
    }
    const auto sv = sidecar(csv, ".svg");
    auto os = open_out(sv);
    svg::write_chart(os, "variance over B at record edges", {v}, "log10(x + 1)", "variance");
    res.files.push_back(sv);
  }
  log << "variance: " << vs.rows.size() << " records";
  if (!vs.rows.empty()) log << ", last x = " << vs.rows.back().x;
  log << (res.truncated ? " [truncated]" : "") << "\n";
  return res;
}

/// Environment sized for paths of length n from the origin.
Environment cone_env(const ExperimentConfig& cfg, Time n) {
  EnvParams p = cfg.env;
  p.x_min = -n - 1;
  p.x_max = n + 1;
  p.horizon = n;
  return sample_environment(p);
}

RunResult run_min_action(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  const Time n = cfg.n ? cfg.n : 100;
  if (cfg.k && std::abs(*cfg.k) > n) throw ParameterError("need |k| <= n");
  if (static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(2 * n + 1) > cfg.budget)
    throw GuardError("budget too small for n = " + std::to_string(n));
  const auto env = cone_env(cfg, n);
  StripDP dp(env, 0, 0, -n, n, cfg.with_path);
  dp.advance_to(n);
  const FreeMin m = cfg.k ? FreeMin{dp.value(*cfg.k), *cfg.k} : free_argmin(dp.row(), -n);
  ojson j;
  j["kind"] = "min-action";
  j["env"] = to_json(cfg.env)["env"];
  j["n"] = n;
  if (cfg.k) j["k"] = *cfg.k;
  j["value"] = m.value;
  j["endpoint"] = m.endpoint;
  if (cfg.with_path) j["path"] = path_to_json(dp.path_to(m.endpoint));
  if (!cfg.table.empty()) {
    const auto tab = build_table(env, n);
    auto os = open_out(cfg.table);
    tab.write_binary(os);
    res.files.push_back(cfg.table);
  }
  const auto path = out_path(cfg, ".json");
  write_json(path, j);
  res.files.push_back(path);
  log << "min-action: n = " << n << "  value = " << fmt_double(m.value) << "  endpoint = " << m.endpoint << "\n";
  return res;
}

RunResult run_dump_path(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  const Time n = cfg.n ? cfg.n : 100;
  if (cfg.k && std::abs(*cfg.k) > n) throw ParameterError("need |k| <= n");
  if (2 * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(2 * n + 1) > cfg.budget)
    throw GuardError("budget too small for n = " + std::to_string(n));
  const auto env = cone_env(cfg, n);
  StripDP dp(env, 0, 0, -n, n, true);
  dp.advance_to(n);
  const Site x = cfg.k ? *cfg.k : free_argmin(dp.row(), -n).endpoint;
  const auto p = dp.path_to(x);
  const auto csv = out_path(cfg, ".csv");
  {
    auto os = open_out(csv);
    write_path_csv(os, p);
  }
  res.files.push_back(csv);
  const auto js = sidecar(csv, ".json");
  write_json(js, ojson{{"n", n}, {"endpoint", x}, {"action", action(env, p)}, {"path", path_to_json(p)}});
  res.files.push_back(js);
  log << "dump-path: n = " << n << "  endpoint = " << x << "  action = " << fmt_double(action(env, p)) << "\n";
  return res;
}

}  // namespace detail

RunResult run(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.check();
  if (cfg.kind == "shape") return detail::run_shape(cfg, log);
  if (cfg.kind == "pointprocess") return detail::run_pointprocess(cfg, log);
  if (cfg.kind == "freepath") return detail::run_freepath(cfg, log);
  if (cfg.kind == "limitlaw") return detail::run_limitlaw(cfg, log);
  if (cfg.kind == "loops") return detail::run_loops(cfg, log);
  if (cfg.kind == "variance") return detail::run_variance(cfg, log);
  if (cfg.kind == "min-action") return detail::run_min_action(cfg, log);
  return detail::run_dump_path(cfg, log);
}

}  // namespace lpp
