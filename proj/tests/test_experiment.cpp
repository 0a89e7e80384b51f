#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lppsim/experiment.hpp"

using namespace lpp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("lppsim_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kSmall[] = {
    "kind = shape\nn_grid = 40,80\nalphas = -0.1,0,0.1,0.14,0.18,0.2\nreplicas = 4\nsvg = true\n",
    "kind = pointprocess\nn = 1000\nreplicas = 10\n",
    "kind = freepath\nn_grid = 20,100,700\nreplicas = 6\n",
    "kind = limitlaw\nn = 150\nreplicas = 12\ns = 0.5\n",
    "kind = loops\nn = 5\npaths = 2\n",
    "kind = variance\nrecords = 4\nreplicas = 10\nsvg = true\n",
    "kind = min-action\nn = 25\npath = true\n",
    "kind = dump-path\nn = 25\n",
};

}  // namespace

TEST(Experiment, ParsesConfigText) {
  const auto cfg = parse_experiment_config(
      "# comment\n"
      "kind = shape   # trailing\n"
      "n-ladder = 100, 200\n"
      "alphas = 0, 0.5\n"
      "budget = 1e9\n"
      "env {\n"
      "  kappa = 1.5\n"
      "  c = 2\n"
      "  seed = 77\n"
      "}\n"
      "rect = -1,1,0,0.5\n"
      "rect = -2,2,0.5,1\n"
      "x-limit = 300\n");
  EXPECT_EQ(cfg.kind, "shape");
  EXPECT_EQ(cfg.n_grid, (std::vector<Time>{100, 200}));
  EXPECT_EQ(cfg.alphas, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(cfg.budget, 1'000'000'000u);
  EXPECT_DOUBLE_EQ(cfg.env.kappa, 1.5);
  EXPECT_DOUBLE_EQ(cfg.env.c, 2.0);
  EXPECT_EQ(cfg.env.seed, 77u);
  ASSERT_EQ(cfg.rects.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.rects[1].b2, 1.0);
  EXPECT_EQ(cfg.x_limit, 300);
  EXPECT_NO_THROW(cfg.check());
}

TEST(Experiment, RejectsBadInput) {
  EXPECT_THROW(parse_experiment_config("nonsense = 1\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("kind shape\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("svg = maybe\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("rect = 1,0,0,1\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("n_grid = 10.5\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("replicas = -3\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("kappa = -2\nkind = shape\n").check(), ParameterError);
  auto cfg = parse_experiment_config("kind = teleport\n");
  std::ostringstream log;
  EXPECT_THROW(run(cfg, log), ParameterError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.txt"), ParameterError);
}

TEST(Experiment, EveryKindIsDeterministicAcrossRunsAndThreads) {
  const auto dir = scratch("determinism");
  ASSERT_EQ(std::size(kSmall), experiment_kinds().size());
  for (const char* text : kSmall) {
    std::vector<std::vector<std::string>> contents;
    for (unsigned threads : {1u, 3u, 1u}) {
      auto cfg = parse_experiment_config(text);
      cfg.threads = threads;
      cfg.out = (dir / (cfg.kind + "_" + std::to_string(contents.size()) + (cfg.kind == "shape" || cfg.kind == "freepath" ||
                                                                                       cfg.kind == "variance" ||
                                                                                       cfg.kind == "dump-path"
                                                                                   ? ".csv"
                                                                                   : ".json")))
                    .string();
      std::ostringstream log;
      const auto res = run(cfg, log);
      EXPECT_EQ(res.status, 0) << cfg.kind << "\n" << log.str();
      EXPECT_FALSE(res.files.empty());
      std::vector<std::string> c;
      for (const auto& f : res.files) c.push_back(slurp(f));
      contents.push_back(c);
    }
    EXPECT_EQ(contents[0], contents[1]) << text;
    EXPECT_EQ(contents[0], contents[2]) << text;
  }
}

TEST(Experiment, MinActionAgreesWithDirectDP) {
  const auto dir = scratch("minaction");
  auto cfg = parse_experiment_config("kind = min-action\nn = 30\npath = true\nseed = 9\n");
  cfg.out = (dir / "m.json").string();
  cfg.table = (dir / "t.bin").string();
  std::ostringstream log;
  const auto res = run(cfg, log);
  ASSERT_EQ(res.files.size(), 2u);
  const auto j = nlohmann::json::parse(slurp(cfg.out));
  EnvParams p = cfg.env;
  p.x_min = -31;
  p.x_max = 31;
  p.horizon = 30;
  const auto env = sample_environment(p);
  const auto m = min_action_free(env, 30);
  EXPECT_DOUBLE_EQ(j.at("value").get<double>(), m.value);
  EXPECT_EQ(j.at("endpoint").get<Site>(), m.endpoint);
  const auto path = path_from_json(j.at("path"));
  EXPECT_NEAR(action(env, path), m.value, 1e-12);
  std::ifstream tin(cfg.table, std::ios::binary);
  const auto tab = ActionTable::read_binary(tin);
  EXPECT_EQ(tab.n(), 30);
  EXPECT_DOUBLE_EQ(tab.at(30, m.endpoint), m.value);
}

TEST(Experiment, BudgetGuardsAndTruncation) {
  const auto dir = scratch("budget");
  std::ostringstream log;
  auto big = parse_experiment_config("kind = min-action\nn = 1000\nbudget = 1000\n");
  big.out = (dir / "m.json").string();
  EXPECT_THROW(run(big, log), GuardError);
  auto fp = parse_experiment_config("kind = freepath\nn_grid = 10,400\nreplicas = 50\n");
  fp.budget = 5 * free_path_cost(fp.env.kappa, 400);
  fp.out = (dir / "fp.csv").string();
  const auto res = run(fp, log);
  EXPECT_TRUE(res.truncated);
  EXPECT_NE(slurp(fp.out).find("# truncated: budget exhausted"), std::string::npos);
}

TEST(Experiment, OutputHelpers) {
  ExperimentConfig cfg;
  cfg.kind = "loops";
  EXPECT_EQ(detail::out_path(cfg, ".json"), "loops.json");
  cfg.out = "a/b/run.csv";
  EXPECT_EQ(detail::out_path(cfg, ".json"), "a/b/run.csv");
  EXPECT_EQ(detail::sidecar("a/b/run.csv", ".json"), "a/b/run.json");
  EXPECT_EQ(detail::sidecar("run.csv", ".svg"), "run.svg");
}
