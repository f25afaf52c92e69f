#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>

#include "dlgwas/pipeline.hpp"

using namespace dlgwas;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dlgwas_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json tiny_json(const fs::path& out) {
  auto j = nlohmann::json::parse(R"({
    "seed": 11,
    "simulation": {"n_samples": 300, "n_snps": 40, "n_causal": 4, "sparsity": 0.5},
    "architectures": [[8], [6, 4]],
    "l1": [0.0, 0.01],
    "selection_seeds": 2,
    "replication_seeds": 2,
    "training": {"learning_rate": 0.01, "batch_size": 64, "max_epochs": 15, "patience": 4},
    "top_k": 4
  })");
  j["out_dir"] = out.string();
  return j;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  return files;
}

void run_all(const ExperimentConfig& c) {
  cmd_simulate(c);
  cmd_train_grid(c);
  cmd_replicate(c);
  cmd_evaluate(c);
  cmd_gwas(c);
  cmd_miami(c);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DLGWAS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesTinyConfig) {
  const auto c = experiment_config_from_json(tiny_json("out"));
  EXPECT_EQ(c.master_seed, 11u);
  EXPECT_EQ(c.sim.n_snps, 40u);
  EXPECT_EQ(c.sparsities, std::vector<double>{0.5});
  EXPECT_EQ(c.selection_seeds, (std::vector<uint64_t>{1, 2}));
  EXPECT_EQ(c.replication_seeds, (std::vector<uint64_t>{3, 4}));
  EXPECT_EQ(c.lr_grid, std::vector<double>{0.01});
  EXPECT_EQ(c.architectures.size(), 2u);
  EXPECT_EQ(c.gwas.covariates, (std::vector<std::string>{"cluster2", "cluster3"}));
}

TEST(Config, DefaultsFollowTheExperimentDesign) {
  const auto c = experiment_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.architectures.size(), 4u);
  EXPECT_EQ(c.l1_grid, (std::vector<double>{0.01, 0.1, 1.0, 10.0}));
  EXPECT_EQ(c.lr_grid, (std::vector<double>{1e-3, 1e-4}));
  EXPECT_EQ(c.selection_seeds.size(), 5u);
  EXPECT_EQ(c.replication_seeds.front(), 6u);
  EXPECT_EQ(c.training.batch_size, 128u);
  EXPECT_EQ(c.training.max_epochs, 200u);
  EXPECT_EQ(c.training.patience, 10u);
}

TEST(Config, Rejections) {
  auto bad = [](const std::string& text) { return experiment_config_from_json(nlohmann::json::parse(text)); };
  EXPECT_THROW(bad(R"({"sede": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"simulation": {"sparsity": 0}})"), ConfigError);
  EXPECT_THROW(bad(R"({"simulation": {"sparsity": -0.5}})"), ConfigError);
  EXPECT_THROW(bad(R"({"selection_seeds": [1, 2], "replication_seeds": [2, 3]})"), ConfigError);
  EXPECT_THROW(bad(R"({"attribution_target": "probability"})"), ConfigError);
  EXPECT_THROW(bad(R"({"l1": []})"), ConfigError);
  EXPECT_THROW(bad(R"({"training": {"learning_rate": [0.01, 0]}})"), ConfigError);
  EXPECT_THROW(bad(R"({"architectures": [[0]]})"), ConfigError);
  EXPECT_THROW(bad(R"({"split": {"train": 0.9, "early_stop": 0.2, "validation": 0.1}})"), ConfigError);
  EXPECT_THROW(bad(R"({"top_k": "ten"})"), ConfigError);
  const auto dir = scratch("badjson");
  io::write_file_atomic(dir / "c.json", "{ not json");
  EXPECT_THROW(load_experiment_config(dir / "c.json"), ConfigError);
  EXPECT_THROW(load_experiment_config(dir / "missing.json"), ConfigError);
}

TEST(Selection, HighestMeanWinsAndTiesPreferSmallerModels) {
  std::vector<SelectionCell> cells{
      {{8}, 0.1, 1e-3, 100, {-0.5, -0.7}, 0, -0.6},
      {{16}, 0.1, 1e-3, 200, {-0.5, -0.5}, 0, -0.5},
      {{4}, 0.1, 1e-3, 50, {-0.5}, 1, -0.5},
      {{4}, 0.01, 1e-3, 50, {-0.5}, 0, -0.5},
      {{4}, 0.01, 1e-4, 50, {-0.5}, 0, -0.5},
      {{2}, 0.0, 1e-3, 10, {}, 2, std::numeric_limits<double>::quiet_NaN()},
  };
  EXPECT_EQ(select_winner(cells), 3u);
  for (auto& c : cells) {
    for (auto& v : c.logliks) v += 0.25;
    c.mean_loglik += 0.25;
  }
  EXPECT_EQ(select_winner(cells), 3u);
  cells[0].mean_loglik = -0.1;
  EXPECT_EQ(select_winner(cells), 0u);
  EXPECT_FALSE(select_winner({cells.back()}).has_value());
  EXPECT_EQ(mlp_parameter_count({128, 256}, 10000), 10000u * 128 + 128 + 128 * 256 + 256 + 256 + 1);
}

TEST(Recall, Examples) {
  std::vector<std::size_t> causal{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_DOUBLE_EQ(recall_at({0, 1, 2, 3, 4, 5, 6, 20, 21, 22}, causal), 0.7);
  EXPECT_DOUBLE_EQ(recall_at({11, 12}, causal), 0.0);
  EXPECT_DOUBLE_EQ(recall_at(causal, causal), 1.0);
  EXPECT_THROW(recall_at({1, 2}, {}), DataError);
}

TEST(Miami, JoinAndRender) {
  ScanTable scan;
  scan.snp_ids = {"rs1", "rs2", "rs3"};
  scan.neg_log10_p = {-std::log10(1e-8), 0.5, 2.0};
  scan.beta = {0.1, 0.0, -0.2};
  scan.bonferroni_neg_log10_p = -std::log10(0.05 / 3);
  ScoreTable scores{{"rs3", "rs1", "rs2"}, Eigen::Vector3d(0.4, 0.9, 0.1)};
  const auto d = join_miami(scan, scores, 1);
  ASSERT_EQ(d.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(d.rows[0].neg_log10_p, 8.0);
  EXPECT_DOUBLE_EQ(d.rows[0].score, 0.9);
  EXPECT_TRUE(d.rows[0].shared());
  EXPECT_FALSE(d.rows[2].top_score);
  const auto svg = render_miami_svg(d);
  EXPECT_EQ(svg, render_miami_svg(d));
  EXPECT_NE(svg.find("class=\"bonferroni\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"shared\""), std::string::npos);
  EXPECT_EQ(write_miami_tsv(d).substr(0, 5), "index");

  ScoreTable other{{"rs1", "rs2", "rs9"}, Eigen::Vector3d(0.4, 0.9, 0.1)};
  try {
    join_miami(scan, other, 1);
    FAIL() << "expected a DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("rs3 (scan only)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("rs9 (scores only)"), std::string::npos) << msg;
  }
}

TEST(Pipeline, TinyRunIsDeterministicAcrossThreadCounts) {
  const auto root = scratch("pipeline");
  auto c1 = experiment_config_from_json(tiny_json(root / "a"));
  auto c2 = experiment_config_from_json(tiny_json(root / "b"));
  c2.threads = 3;
  run_all(c1);
  run_all(c2);
  const auto a = read_tree(root / "a");
  const auto b = read_tree(root / "b");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a.size(), b.size());
  for (const auto& [name, text] : a) {
    ASSERT_TRUE(b.contains(name)) << name;
    EXPECT_EQ(text, b.at(name)) << name;
  }
  for (const char* f : {"grid/a0.5_rep0/selection.tsv", "grid/a0.5_rep0/winner.json", "replicate/a0.5_rep0/seed_3.tsv",
                        "replicate/a0.5_rep0/aggregate.tsv", "evaluate/summary.tsv", "gwas/a0.5_rep0/scan.tsv",
                        "miami/a0.5_rep0/miami.svg"}) {
    EXPECT_TRUE(a.contains(f)) << f;
  }
  // 2 architectures x 2 l1 x 1 lr x 2 seeds
  std::size_t cells = 0;
  for (const auto& [name, text] : a) cells += name.starts_with("grid/a0.5_rep0/cells/") ? 1 : 0;
  EXPECT_EQ(cells, 8u);

  // Cached cells are reused: a second grid run rewrites identical outputs.
  cmd_train_grid(c1);
  EXPECT_EQ(io::read_file(root / "a" / "grid/a0.5_rep0/selection.tsv"), a.at("grid/a0.5_rep0/selection.tsv"));

  const auto report = cmd_evaluate(c1);
  ASSERT_EQ(report.settings.size(), 1u);
  EXPECT_EQ(report.settings[0].n_runs, 2u);
  for (const auto& r : report.runs) {
    EXPECT_GE(r.recall, 0.0);
    EXPECT_LE(r.recall, 1.0);
  }
  const auto& dr = report.datasets.at(0);
  for (double r : dr.per_seed) EXPECT_LE(r, dr.union_recall);

  // A different master seed gives a different dataset.
  auto c3 = experiment_config_from_json(tiny_json(root / "c"));
  c3.master_seed = 12;
  cmd_simulate(c3);
  EXPECT_NE(io::read_file(root / "c/datasets/a0.5_rep0/genotypes.gwdl"), a.at("datasets/a0.5_rep0/genotypes.gwdl"));
  fs::remove_all(root);
}

TEST(Pipeline, FixedWinnerSkipsGrid) {
  const auto root = scratch("winner");
  auto j = tiny_json(root);
  j["winner"] = {{"hidden", {8}}, {"l1", 0.01}};
  const auto c = experiment_config_from_json(j);
  cmd_simulate(c);
  const auto reps = cmd_replicate(c);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0].winner.hidden, std::vector<std::size_t>{8});
  for (const auto& r : reps[0].runs) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_LT(r.max_completeness_error, 1e-8);
  }
  fs::remove_all(root);
}

TEST(Pipeline, MissingInputsAreDataErrors) {
  const auto root = scratch("missing");
  const auto c = experiment_config_from_json(tiny_json(root));
  EXPECT_THROW(cmd_train_grid(c), DataError);
  EXPECT_THROW(cmd_gwas(c), DataError);
  EXPECT_THROW(cmd_evaluate(c), DataError);
  cmd_simulate(c);
  EXPECT_THROW(cmd_replicate(c), DataError);  // no grid winner yet
  EXPECT_THROW(cmd_evaluate(c), DataError);   // no attribution scores yet
  fs::remove_all(root);
}

TEST(Cli, ExitCodes) {
  const auto root = scratch("cli");
  const auto good = root / "good.json";
  io::write_file_atomic(good, tiny_json(root / "out").dump());
  auto bad_a = tiny_json(root / "out");
  bad_a["simulation"]["sparsity"] = 0;
  io::write_file_atomic(root / "bad_a.json", bad_a.dump());
  io::write_file_atomic(root / "syntax.json", "{");

  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("simulate"), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "nope.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "bad_a.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "syntax.json").string()), 2);
  EXPECT_EQ(run_cli("gwas --config " + good.string()), 3);
  EXPECT_EQ(run_cli("simulate --config " + good.string()), 0);
  EXPECT_TRUE(fs::exists(root / "out/datasets/a0.5_rep0/genotypes.gwdl"));
  EXPECT_EQ(run_cli("gwas --config " + good.string()), 0);
  EXPECT_EQ(run_cli("miami --config " + good.string() + " --scan x.tsv"), 2);
  fs::remove_all(root);
}
