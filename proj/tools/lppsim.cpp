// Command-line front end: lppsim <experiment> [options], or lppsim --config file.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lppsim/lppsim.hpp"

namespace {

struct Overrides {
  std::vector<std::pair<std::string, std::string>> kv;
  std::map<std::string, std::string> strings;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, bool> flags;
};

void add_value(CLI::App* app, Overrides& o, const std::string& name, const std::string& help) {
  app->add_option("--" + name, o.strings[name], help);
}

void add_flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& help) {
  app->add_flag("--" + name, o.flags[name], help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and dynamic programming for last passage percolation with a product potential"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Overrides o;
  std::string config;
  app.add_option("--config", config, "key = value config file (command-line options take precedence)");
  add_value(&app, o, "seed", "master seed");
  add_value(&app, o, "threads", "worker threads (results do not depend on it)");
  add_value(&app, o, "budget", "maximum DP cell updates");
  add_value(&app, o, "out", "primary output file");
  add_value(&app, o, "kappa", "edge exponent of the density of F");
  add_value(&app, o, "c", "half-width of the support of F");
  add_value(&app, o, "family", "edge_power | uniform | custom_table");

  auto* shape = app.add_subcommand("shape", "shape function estimate and structural checks");
  add_value(shape, o, "n-ladder", "comma-separated horizons");
  add_value(shape, o, "alphas", "comma-separated slopes");
  add_value(shape, o, "replicas", "independent environments");
  add_flag(shape, o, "svg", "also write an SVG plot");
  add_flag(shape, o, "extend-ladder", "double n until lambda_hat(0) is within 5% of c");

  auto* pp = app.add_subcommand("pointprocess", "rescaled discrepancy point process against its Poisson limit");
  add_value(pp, o, "n", "scaling parameter");
  add_value(pp, o, "replicas", "independent spatial fields");
  std::vector<std::string> rects;
  pp->add_option("--rect", rects, "rectangle a1,a2,b1,b2 (repeatable)");

  auto* fp = app.add_subcommand("freepath", "free-endpoint optimal path statistics");
  add_value(fp, o, "n-grid", "comma-separated horizons");
  add_value(fp, o, "replicas", "independent environments");

  auto* ll = app.add_subcommand("limitlaw", "law of (cn + A)/(h n^zeta)");
  add_value(ll, o, "n", "horizon");
  add_value(ll, o, "n-grid", "several horizons from one sweep");
  add_value(ll, o, "replicas", "independent environments");
  add_value(ll, o, "s", "auto or a value for -Lambda'(0+)");
  add_value(ll, o, "s-n", "horizon of the shape run behind s=auto");
  add_value(ll, o, "s-replicas", "replicas of the shape run behind s=auto");

  auto* loops = app.add_subcommand("loops", "loop decomposition of optimal bridges");
  add_value(loops, o, "n", "endpoint site");
  add_value(loops, o, "ell", "path length is ell * n");
  add_value(loops, o, "paths", "number of environments");
  add_flag(loops, o, "validate", "check every decomposition property");

  auto* var = app.add_subcommand("variance", "variance over B at record edges of one F");
  add_value(var, o, "records", "number of record edges");
  add_value(var, o, "x-limit", "all record edges with x <= x-limit");
  add_value(var, o, "replicas", "B replicas per record edge");
  add_flag(var, o, "svg", "also write an SVG plot");

  auto* ma = app.add_subcommand("min-action", "minimal action to (n, k) or over all endpoints");
  add_value(ma, o, "n", "horizon");
  add_value(ma, o, "k", "endpoint (free when omitted)");
  add_flag(ma, o, "path", "include the optimal path");
  add_value(ma, o, "table", "write the full action table to this binary file");

  auto* dp = app.add_subcommand("dump-path", "write an optimal path as t,x rows");
  add_value(dp, o, "n", "horizon");
  add_value(dp, o, "k", "endpoint (free when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    lpp::ExperimentConfig cfg;
    if (!config.empty()) cfg = lpp::load_experiment_config(config);
    for (auto* sub : app.get_subcommands()) cfg.kind = sub->get_name();
    if (cfg.kind.empty()) {
      std::cerr << "no experiment given\n" << app.help();
      return 2;
    }
    for (const auto& [k, v] : o.strings)
      if (!v.empty()) lpp::apply_config_key(cfg, k, v);
    for (const auto& [k, v] : o.flags)
      if (v) lpp::apply_config_key(cfg, k, "true");
    if (!rects.empty()) {
      cfg.rects.clear();
      for (const auto& r : rects) lpp::apply_config_key(cfg, "rect", r);
    }
    const auto res = lpp::run(cfg, std::cout);
    for (const auto& f : res.files) std::cout << "wrote " << f << "\n";
    if (res.truncated) std::cout << "budget exhausted: results are partial\n";
    return res.status;
  } catch (const lpp::ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const lpp::GuardError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
