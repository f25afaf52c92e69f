#pragma once
// Experiment orchestration behind the CLI subcommands.
//
// Output tree under out_dir:
//   datasets/<tag>/            simulated bundles (tag = a<sparsity>_rep<r>)
//   grid/<tag>/cells/*.json    one record per (arch, l1, selection seed)
//   grid/<tag>/selection.tsv   mean validation log-likelihood per cell
//   grid/<tag>/winner.json
//   replicate/<tag>/seed_<s>.tsv, aggregate.tsv, runs.tsv
//   evaluate/recall.tsv, evaluate/summary.tsv
//   gwas/<tag>/scan.tsv
//   miami/<tag>/miami.svg, merged.tsv
//
// Workers only compute; every file is written by the calling thread through
// write_file_atomic, so an interrupted run leaves no partial files and a
// rerun picks up cached grid cells.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlgwas/assoc.hpp"
#include "dlgwas/deeplift.hpp"
#include "dlgwas/error.hpp"
#include "dlgwas/genotype.hpp"
#include "dlgwas/io.hpp"
#include "dlgwas/miami.hpp"
#include "dlgwas/neural.hpp"
#include "dlgwas/parallel.hpp"
#include "dlgwas/phenotype.hpp"
#include "dlgwas/rng.hpp"
#include "dlgwas/simulate.hpp"

namespace dlgwas {

namespace fs = std::filesystem;

struct ArchL1 {
  std::vector<std::size_t> hidden;
  double l1 = 0.0;
  std::optional<double> sparsity;  // winner override scoped to one setting
  std::optional<double> learning_rate;  // unset: first entry of the lr grid
};

struct ExperimentConfig {
  uint64_t master_seed = 1;
  fs::path out_dir = "dlgwas_out";
  unsigned threads = 1;

  // Either simulate sparsities x replicates, or use existing bundles.
  SimConfig sim;
  std::vector<double> sparsities{0.5};
  std::size_t replicates = 1;
  bool write_pi = false;
  std::vector<fs::path> datasets;

  std::vector<std::vector<std::size_t>> architectures{{64, 128}, {64, 256}, {128, 128}, {128, 256}};
  std::vector<double> l1_grid{0.01, 0.1, 1.0, 10.0};
  std::vector<double> lr_grid{1e-3, 1e-4};
  std::vector<uint64_t> selection_seeds{1, 2, 3, 4, 5};
  std::vector<uint64_t> replication_seeds{6, 7, 8, 9, 10};
  TrainConfig training;  // l1_coeff and seed are filled per run
  AttributionTarget target = AttributionTarget::logit;
  std::size_t top_k = 10;
  std::string trait_column = "trait";

  DesignSpec gwas{{"cluster2", "cluster3"}};
  double alpha = 0.05;

  std::vector<ArchL1> winners;  // fixed configs; replicate then skips grid/
  bool save_models = false;

  void validate() const {
    if (architectures.empty()) throw ConfigError("architecture grid is empty");
    for (const auto& a : architectures) {
      if (a.empty()) throw ConfigError("an architecture needs at least one hidden layer");
      for (auto w : a) {
        if (w == 0) throw ConfigError("hidden layer width must be positive");
      }
    }
    if (l1_grid.empty()) throw ConfigError("l1 grid is empty");
    for (double l : l1_grid) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("l1 values must be finite and >= 0");
    }
    if (lr_grid.empty()) throw ConfigError("learning-rate grid is empty");
    for (double lr : lr_grid) {
      if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be finite and > 0");
    }
    if (selection_seeds.empty()) throw ConfigError("selection seeds are empty");
    if (replication_seeds.empty()) throw ConfigError("replication seeds are empty");
    const std::set<uint64_t> sel(selection_seeds.begin(), selection_seeds.end());
    if (sel.size() != selection_seeds.size()) throw ConfigError("selection seeds repeat");
    for (auto s : replication_seeds) {
      if (sel.contains(s)) throw ConfigError("seed " + std::to_string(s) + " is both a selection and a replication seed");
    }
    if (top_k == 0) throw ConfigError("top_k must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (datasets.empty()) {
      if (sparsities.empty()) throw ConfigError("no sparsity values to simulate");
      if (replicates == 0) throw ConfigError("replicates must be positive");
      for (double a : sparsities) {
        SimConfig c = sim;
        c.sparsity = a;
        c.validate();
      }
    }
    training.validate();
    gwas.validate();
    for (const auto& w : winners) {
      if (w.hidden.empty()) throw ConfigError("winner needs hidden layer widths");
      if (!(w.l1 >= 0.0)) throw ConfigError("winner l1 must be >= 0");
      if (w.learning_rate && !(*w.learning_rate > 0.0)) throw ConfigError("winner learning_rate must be > 0");
    }
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

// Seeds given as a count become first..first+count-1.
inline std::vector<uint64_t> parse_seeds(const nlohmann::json& j, uint64_t first, const std::string& key) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto n = j.get<int64_t>();
    if (n <= 0) throw ConfigError(key + " count must be positive");
    std::vector<uint64_t> out;
    for (int64_t i = 0; i < n; ++i) out.push_back(first + static_cast<uint64_t>(i));
    return out;
  }
  if (j.is_array()) return j.get<std::vector<uint64_t>>();
  throw ConfigError(key + " must be a count or a list of seeds");
}

inline ArchL1 parse_winner(const nlohmann::json& j) {
  reject_unknown_keys(j, {"hidden", "l1", "sparsity", "learning_rate"}, "winner");
  ArchL1 w;
  w.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  w.l1 = j.at("l1").get<double>();
  if (j.contains("sparsity")) w.sparsity = j.at("sparsity").get<double>();
  if (j.contains("learning_rate")) w.learning_rate = j.at("learning_rate").get<double>();
  return w;
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    detail::reject_unknown_keys(j,
                                {"seed", "out_dir", "threads", "simulation", "datasets", "architectures", "l1",
                                 "selection_seeds", "replication_seeds", "split", "attribution_target", "training",
                                 "top_k", "trait_column", "gwas", "winner", "save_models"},
                                "experiment config");
    c.master_seed = j.value("seed", c.master_seed);
    c.out_dir = j.value("out_dir", c.out_dir.string());
    c.threads = j.value("threads", c.threads);
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      detail::reject_unknown_keys(s, {"n_samples", "n_snps", "n_causal", "sparsity", "replicates", "random_causal", "write_pi"},
                                  "simulation");
      c.sim.n_samples = s.value("n_samples", c.sim.n_samples);
      c.sim.n_snps = s.value("n_snps", c.sim.n_snps);
      c.sim.n_causal = s.value("n_causal", c.sim.n_causal);
      c.sim.random_causal = s.value("random_causal", c.sim.random_causal);
      if (s.contains("sparsity")) {
        const auto& a = s.at("sparsity");
        c.sparsities = a.is_array() ? a.get<std::vector<double>>() : std::vector<double>{a.get<double>()};
      }
      c.replicates = s.value("replicates", c.replicates);
      c.write_pi = s.value("write_pi", c.write_pi);
    }
    if (j.contains("datasets")) {
      for (const auto& d : j.at("datasets")) c.datasets.emplace_back(d.get<std::string>());
    }
    if (j.contains("architectures")) c.architectures = j.at("architectures").get<std::vector<std::vector<std::size_t>>>();
    if (j.contains("l1")) c.l1_grid = j.at("l1").get<std::vector<double>>();
    if (j.contains("selection_seeds")) c.selection_seeds = detail::parse_seeds(j.at("selection_seeds"), 1, "selection_seeds");
    if (j.contains("replication_seeds")) {
      const uint64_t first = *std::max_element(c.selection_seeds.begin(), c.selection_seeds.end()) + 1;
      c.replication_seeds = detail::parse_seeds(j.at("replication_seeds"), first, "replication_seeds");
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      detail::reject_unknown_keys(s, {"train", "early_stop", "validation"}, "split");
      c.training.split.train = s.value("train", c.training.split.train);
      c.training.split.early_stop = s.value("early_stop", c.training.split.early_stop);
      c.training.split.validation = s.value("validation", c.training.split.validation);
    }
    if (j.contains("attribution_target")) {
      const auto t = j.at("attribution_target").get<std::string>();
      if (t == "logit") {
        c.target = AttributionTarget::logit;
      } else if (t == "output") {
        c.target = AttributionTarget::output;
      } else {
        throw ConfigError("attribution_target must be 'logit' or 'output'");
      }
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      detail::reject_unknown_keys(t, {"learning_rate", "batch_size", "max_epochs", "patience", "early_stop_on_objective"},
                                  "training");
      if (t.contains("learning_rate")) {
        const auto& lr = t.at("learning_rate");
        c.lr_grid = lr.is_array() ? lr.get<std::vector<double>>() : std::vector<double>{lr.get<double>()};
      }
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.training.max_epochs = t.value("max_epochs", c.training.max_epochs);
      c.training.patience = t.value("patience", c.training.patience);
      c.training.early_stop_on_objective = t.value("early_stop_on_objective", c.training.early_stop_on_objective);
    }
    c.top_k = j.value("top_k", c.top_k);
    c.trait_column = j.value("trait_column", c.trait_column);
    if (j.contains("gwas")) {
      const auto& g = j.at("gwas");
      detail::reject_unknown_keys(g, {"covariates", "alpha"}, "gwas");
      if (g.contains("covariates")) c.gwas.covariates = g.at("covariates").get<std::vector<std::string>>();
      c.alpha = g.value("alpha", c.alpha);
    }
    if (j.contains("winner")) {
      const auto& w = j.at("winner");
      if (w.is_array()) {
        for (const auto& e : w) c.winners.push_back(detail::parse_winner(e));
      } else {
        c.winners.push_back(detail::parse_winner(w));
      }
    }
    c.save_models = j.value("save_models", c.save_models);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

// --- datasets ---------------------------------------------------------------

struct DatasetRef {
  std::string tag;
  fs::path dir;
  double sparsity = std::numeric_limits<double>::quiet_NaN();
  std::size_t replicate = 0;
};

inline std::string dataset_tag(double sparsity, std::size_t replicate) {
  return "a" + io::format_double(sparsity) + "_rep" + std::to_string(replicate);
}

inline std::vector<DatasetRef> dataset_refs(const ExperimentConfig& c) {
  std::vector<DatasetRef> out;
  if (!c.datasets.empty()) {
    for (std::size_t i = 0; i < c.datasets.size(); ++i) {
      DatasetRef d;
      d.dir = c.datasets[i];
      d.tag = d.dir.filename().string();
      if (d.tag.empty()) d.tag = d.dir.parent_path().filename().string();
      d.replicate = i;
      const BundlePaths paths{d.dir};
      if (fs::exists(paths.truth())) d.sparsity = load_truth(paths.truth()).config.sparsity;
      out.push_back(std::move(d));
    }
    return out;
  }
  for (double a : c.sparsities) {
    for (std::size_t r = 0; r < c.replicates; ++r) {
      out.push_back({dataset_tag(a, r), c.out_dir / "datasets" / dataset_tag(a, r), a, r});
    }
  }
  return out;
}

inline SimConfig dataset_sim_config(const ExperimentConfig& c, const DatasetRef& d) {
  SimConfig s = c.sim;
  s.sparsity = d.sparsity;
  s.seed = derive_seed(c.master_seed, "cli.dataset." + io::format_double(d.sparsity), d.replicate);
  return s;
}

struct LoadedDataset {
  DatasetRef ref;
  GenotypeMatrix genotypes;
  PhenotypeTable phenotypes;  // rows aligned with genotypes
  Eigen::MatrixXd x;          // N x M dosages, missing imputed to the SNP mean
  Eigen::VectorXd y;
};

inline LoadedDataset load_dataset(const DatasetRef& ref, const std::string& trait_column = "trait") {
  const BundlePaths paths{ref.dir};
  if (!fs::exists(paths.genotypes())) throw DataError("dataset " + ref.tag + ": missing " + paths.genotypes().string());
  LoadedDataset d{ref, load_matrix(paths.genotypes()), {}, {}, {}};
  d.phenotypes = load_phenotypes(paths.phenotypes(), trait_column).aligned_to(d.genotypes.sample_ids());
  d.x = impute_to_mean(d.genotypes);
  d.y.resize(static_cast<Eigen::Index>(d.phenotypes.size()));
  for (std::size_t i = 0; i < d.phenotypes.size(); ++i) {
    const double v = d.phenotypes.trait[i];
    if (!std::isfinite(v)) throw DataError("dataset " + ref.tag + ": trait missing for sample '" + d.phenotypes.sample_ids[i] + "'");
    d.y(static_cast<Eigen::Index>(i)) = v;
  }
  return d;
}

// One split per dataset, shared by every architecture and seed so the
// validation sets that are compared are the same samples.
inline SplitIndices dataset_split(const ExperimentConfig& c, const LoadedDataset& d) {
  return make_split(d.genotypes.n_samples(), c.training.split, derive_seed(c.master_seed, "cli.split." + d.ref.tag));
}

inline uint64_t model_seed(const ExperimentConfig& c, uint64_t seed) { return derive_seed(c.master_seed, "cli.model", seed); }

// --- simulate -----------------------------------------------------------------

inline std::vector<DatasetRef> cmd_simulate(const ExperimentConfig& c) {
  if (!c.datasets.empty()) throw ConfigError("simulate: config lists existing datasets instead of a simulation block");
  auto refs = dataset_refs(c);
  for (const auto& d : refs) make_benchmark(dataset_sim_config(c, d), d.dir, {c.write_pi, c.threads});
  return refs;
}

// --- training grid --------------------------------------------------------------

struct TrainRun {
  std::vector<std::size_t> hidden;
  double l1 = 0.0;
  double learning_rate = 0.0;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double validation_loglik = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

inline nlohmann::json to_json(const TrainRun& r) {
  return {{"hidden", r.hidden},
          {"l1", r.l1},
          {"learning_rate", r.learning_rate},
          {"seed", r.seed},
          {"ok", r.ok},
          {"error", r.error},
          {"validation_loglik", r.ok ? nlohmann::json(r.validation_loglik) : nlohmann::json(nullptr)},
          {"best_epoch", r.best_epoch},
          {"epochs_run", r.epochs_run}};
}

inline TrainRun train_run_from_json(const nlohmann::json& j) {
  TrainRun r;
  r.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  r.l1 = j.at("l1").get<double>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  if (r.ok) r.validation_loglik = j.at("validation_loglik").get<double>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  return r;
}

inline TrainConfig run_train_config(const ExperimentConfig& c, double l1, double lr, uint64_t seed) {
  TrainConfig t = c.training;
  t.l1_coeff = l1;
  t.learning_rate = lr;
  t.seed = model_seed(c, seed);
  return t;
}

inline TrainResult train_one(const ExperimentConfig& c, const LoadedDataset& d, const SplitIndices& split,
                             const std::vector<std::size_t>& hidden, double l1, double lr, uint64_t seed) {
  const auto tc = run_train_config(c, l1, lr, seed);
  auto model = init_model(hidden, d.genotypes.n_snps(), tc.seed, head_for(d.phenotypes.trait_kind));
  return train(std::move(model), d.x, d.y, split, tc);
}

struct SelectionCell {
  std::vector<std::size_t> hidden;
  double l1 = 0.0;
  double learning_rate = 0.0;
  std::size_t n_params = 0;
  std::vector<double> logliks;  // successful seeds only
  std::size_t n_failed = 0;
  double mean_loglik = std::numeric_limits<double>::quiet_NaN();

  bool usable() const { return !logliks.empty(); }
};

struct SelectionReport {
  std::string dataset;
  std::vector<SelectionCell> cells;
  std::optional<std::size_t> winner;  // index into cells
};

inline std::size_t mlp_parameter_count(const std::vector<std::size_t>& hidden, std::size_t input_dim) {
  std::size_t n = 0;
  std::size_t in = input_dim;
  for (auto h : hidden) {
    n += h * in + h;
    in = h;
  }
  return n + in + 1;
}

// Highest mean validation log-likelihood; ties go to fewer parameters, then
// the lower l1, then the higher learning rate. Cells where every seed failed
// are not eligible.
inline std::optional<std::size_t> select_winner(const std::vector<SelectionCell>& cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (!c.usable() || !std::isfinite(c.mean_loglik)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = cells[*best];
    if (c.mean_loglik != b.mean_loglik) {
      if (c.mean_loglik > b.mean_loglik) best = i;
    } else if (c.n_params != b.n_params) {
      if (c.n_params < b.n_params) best = i;
    } else if (c.l1 != b.l1) {
      if (c.l1 < b.l1) best = i;
    } else if (c.learning_rate > b.learning_rate) {
      best = i;
    }
  }
  return best;
}

inline std::string write_selection_tsv(const SelectionReport& r) {
  std::string out = "arch\tl1\tlearning_rate\tn_params\tn_ok\tn_failed\tmean_validation_loglik\twinner\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    out += arch_tag_for(c.hidden) + '\t' + io::format_double(c.l1) + '\t' + io::format_double(c.learning_rate) + '\t' +
           std::to_string(c.n_params) + '\t' +
           std::to_string(c.logliks.size()) + '\t' + std::to_string(c.n_failed) + '\t' + io::format_double(c.mean_loglik) +
           '\t' + (r.winner && *r.winner == i ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string cell_file_name(const std::vector<std::size_t>& hidden, double l1, double lr, uint64_t seed) {
  std::string arch;
  for (auto h : hidden) arch += (arch.empty() ? "" : "x") + std::to_string(h);
  return arch + "_l1_" + io::format_double(l1) + "_lr_" + io::format_double(lr) + "_seed_" + std::to_string(seed) + ".json";
}

inline fs::path model_file(const fs::path& dir, const std::vector<std::size_t>& hidden, double l1, double lr,
                           uint64_t seed) {
  auto name = cell_file_name(hidden, l1, lr, seed);
  name.replace(name.size() - 5, 5, ".gwnn");
  return dir / name;
}

inline std::vector<SelectionReport> cmd_train_grid(const ExperimentConfig& c,
                                                   const std::function<void(const std::string&)>& log = {}) {
  std::vector<SelectionReport> reports;
  for (const auto& ref : dataset_refs(c)) {
    const auto d = load_dataset(ref, c.trait_column);
    const auto split = dataset_split(c, d);
    const fs::path dir = c.out_dir / "grid" / ref.tag;

    struct Job {
      std::size_t cell;
      uint64_t seed;
      fs::path record;
    };
    SelectionReport report;
    report.dataset = ref.tag;
    std::vector<Job> jobs;
    for (const auto& arch : c.architectures) {
      for (double l1 : c.l1_grid) {
        for (double lr : c.lr_grid) {
          report.cells.push_back({arch, l1, lr, mlp_parameter_count(arch, d.genotypes.n_snps()), {}, 0, {}});
          for (auto seed : c.selection_seeds) {
            jobs.push_back({report.cells.size() - 1, seed, dir / "cells" / cell_file_name(arch, l1, lr, seed)});
          }
        }
      }
    }

    std::vector<TrainRun> runs(jobs.size());
    std::vector<std::optional<MlpModel>> models(jobs.size());
    std::vector<bool> cached(jobs.size(), false);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!fs::exists(jobs[i].record)) continue;
      try {
        runs[i] = train_run_from_json(nlohmann::json::parse(io::read_file(jobs[i].record)));
        cached[i] = true;
      } catch (const std::exception&) {
        // Unreadable record: train again.
      }
    }
    parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
      if (cached[i]) return;
      const auto& cell = report.cells[jobs[i].cell];
      TrainRun& r = runs[i];
      r.hidden = cell.hidden;
      r.l1 = cell.l1;
      r.learning_rate = cell.learning_rate;
      r.seed = jobs[i].seed;
      try {
        auto res = train_one(c, d, split, cell.hidden, cell.l1, cell.learning_rate, jobs[i].seed);
        r.validation_loglik = validation_loglik(res.model, d.x, d.y, split.validation);
        r.best_epoch = res.best_epoch;
        r.epochs_run = res.history.size();
        r.ok = std::isfinite(r.validation_loglik);
        if (!r.ok) r.error = "non-finite validation log-likelihood";
        if (c.save_models) models[i] = std::move(res.model);
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!cached[i]) {
        io::write_file_atomic(jobs[i].record, to_json(runs[i]).dump(1) + "\n");
        if (models[i]) save_model(*models[i], model_file(dir / "models", runs[i].hidden, runs[i].l1, runs[i].learning_rate, runs[i].seed));
      }
      auto& cell = report.cells[jobs[i].cell];
      if (runs[i].ok) {
        cell.logliks.push_back(runs[i].validation_loglik);
      } else {
        ++cell.n_failed;
        if (log) log(ref.tag + ": " + arch_tag_for(cell.hidden) + " l1=" + io::format_double(cell.l1) + " lr=" +
                     io::format_double(cell.learning_rate) + " seed " +
                     std::to_string(jobs[i].seed) + " failed: " + runs[i].error);
      }
    }
    for (auto& cell : report.cells) {
      if (!cell.usable()) continue;
      double sum = 0.0;
      for (double v : cell.logliks) sum += v;
      cell.mean_loglik = sum / static_cast<double>(cell.logliks.size());
    }
    report.winner = select_winner(report.cells);
    io::write_file_atomic(dir / "selection.tsv", write_selection_tsv(report));
    nlohmann::json w = {{"dataset", ref.tag}};
    if (report.winner) {
      const auto& cell = report.cells[*report.winner];
      w["hidden"] = cell.hidden;
      w["l1"] = cell.l1;
      w["learning_rate"] = cell.learning_rate;
      w["arch"] = arch_tag_for(cell.hidden);
      w["mean_validation_loglik"] = cell.mean_loglik;
    } else {
      w["error"] = "every grid cell failed";
    }
    io::write_file_atomic(dir / "winner.json", w.dump(1) + "\n");
    if (log) log(ref.tag + ": winner " + (report.winner ? arch_tag_for(report.cells[*report.winner].hidden) + " l1=" +
                                                             io::format_double(report.cells[*report.winner].l1) +
                                                             " lr=" + io::format_double(report.cells[*report.winner].learning_rate)
                                                       : std::string("none")));
    reports.push_back(std::move(report));
  }
  return reports;
}

// Winner for one dataset: a matching fixed config from the experiment file,
// otherwise grid/<tag>/winner.json.
inline ArchL1 winner_for(const ExperimentConfig& c, const DatasetRef& d) {
  const ArchL1* generic = nullptr;
  for (const auto& w : c.winners) {
    if (w.sparsity && std::isfinite(d.sparsity) && *w.sparsity == d.sparsity) return w;
    if (!w.sparsity && !generic) generic = &w;
  }
  if (generic) return *generic;
  const auto path = c.out_dir / "grid" / d.tag / "winner.json";
  if (!fs::exists(path)) throw DataError("dataset " + d.tag + ": no winner; run train-grid first or set 'winner'");
  const auto j = nlohmann::json::parse(io::read_file(path));
  if (!j.contains("hidden")) throw DataError("dataset " + d.tag + ": grid search produced no winner");
  return {j.at("hidden").get<std::vector<std::size_t>>(), j.at("l1").get<double>(), std::nullopt,
          j.at("learning_rate").get<double>()};
}

// --- replicate --------------------------------------------------------------

struct ReplicateRun {
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  AttributionSummary summary;
  double max_completeness_error = 0.0;
  std::size_t best_epoch = 0;
};

struct ReplicateReport {
  std::string dataset;
  ArchL1 winner;
  std::vector<ReplicateRun> runs;
};

inline std::vector<ReplicateReport> cmd_replicate(const ExperimentConfig& c,
                                                  const std::function<void(const std::string&)>& log = {}) {
  std::vector<ReplicateReport> reports;
  for (const auto& ref : dataset_refs(c)) {
    const auto d = load_dataset(ref, c.trait_column);
    const auto split = dataset_split(c, d);
    const auto reference = compute_reference(d.x, "all samples");
    ReplicateReport rep{ref.tag, winner_for(c, ref), {}};
    const double winner_lr = rep.winner.learning_rate.value_or(c.lr_grid.front());
    rep.runs.resize(c.replication_seeds.size());
    std::vector<std::optional<MlpModel>> models(rep.runs.size());
    parallel_for(rep.runs.size(), c.threads, [&](std::size_t i) {
      auto& run = rep.runs[i];
      run.seed = c.replication_seeds[i];
      try {
        auto res = train_one(c, d, split, rep.winner.hidden, rep.winner.l1, winner_lr, run.seed);
        SummaryCheck check;
        run.summary = attribute_and_summarize(res.model, d.x, split.validation, reference, c.target, run.seed, &check);
        run.max_completeness_error = check.max_completeness_error;
        run.best_epoch = res.best_epoch;
        run.ok = true;
        if (c.save_models) models[i] = std::move(res.model);
      } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
      }
    });
    const fs::path dir = c.out_dir / "replicate" / ref.tag;
    std::vector<AttributionSummary> ok;
    std::string runs_tsv = "seed\tok\tbest_epoch\tmax_completeness_error\terror\n";
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      const auto& run = rep.runs[i];
      runs_tsv += std::to_string(run.seed) + '\t' + (run.ok ? "1" : "0") + '\t' + std::to_string(run.best_epoch) + '\t' +
                  io::format_double(run.max_completeness_error) + '\t' + run.error + '\n';
      if (!run.ok) {
        if (log) log(ref.tag + ": seed " + std::to_string(run.seed) + " failed: " + run.error);
        continue;
      }
      io::write_file_atomic(dir / ("seed_" + std::to_string(run.seed) + ".tsv"),
                            write_summary_tsv(run.summary, d.genotypes.snp_ids()));
      if (models[i]) save_model(*models[i], model_file(dir / "models", rep.winner.hidden, rep.winner.l1, winner_lr, run.seed));
      ok.push_back(run.summary);
    }
    io::write_file_atomic(dir / "runs.tsv", runs_tsv);
    if (!ok.empty()) {
      const auto agg = aggregate_seeds(ok, std::min<std::size_t>(c.top_k, d.genotypes.n_snps()));
      io::write_file_atomic(dir / "aggregate.tsv", write_aggregate_tsv(agg, ok, d.genotypes.snp_ids()));
    }
    if (log) log(ref.tag + ": " + std::to_string(ok.size()) + "/" + std::to_string(rep.runs.size()) + " replicate runs ok");
    reports.push_back(std::move(rep));
  }
  return reports;
}

// --- evaluate ---------------------------------------------------------------

inline double recall_at(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& causal) {
  if (causal.empty()) throw DataError("recall is undefined for an empty causal set");
  const std::set<std::size_t> truth(causal.begin(), causal.end());
  std::size_t hits = 0;
  for (auto s : std::set<std::size_t>(selected.begin(), selected.end())) hits += truth.contains(s) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct RecallRun {
  std::string dataset;
  double sparsity = 0.0;
  uint64_t seed = 0;
  double recall = 0.0;
};

struct RecallSetting {
  double sparsity = 0.0;
  std::size_t n_runs = 0;
  double mean_recall = 0.0;         // per-run recall averaged
  double mean_pooled_recall = 0.0;  // recall of pooled scores, averaged over datasets
  double mean_union_recall = 0.0;   // recall of the union of per-seed top-k sets
};

struct DatasetRecall {
  std::string dataset;
  double sparsity = 0.0;
  std::vector<double> per_seed;
  double pooled = 0.0;
  double union_recall = 0.0;
};

struct RecallReport {
  std::vector<RecallRun> runs;
  std::vector<DatasetRecall> datasets;
  std::vector<RecallSetting> settings;
};

inline RecallReport cmd_evaluate(const ExperimentConfig& c) {
  RecallReport report;
  std::map<double, std::vector<const DatasetRecall*>> by_setting;
  std::map<double, std::vector<double>> run_recalls;
  for (const auto& ref : dataset_refs(c)) {
    const BundlePaths paths{ref.dir};
    if (!fs::exists(paths.truth())) throw DataError("dataset " + ref.tag + ": no truth manifest");
    const auto truth = load_truth(paths.truth());
    if (truth.causal_indices.empty()) throw DataError("dataset " + ref.tag + ": recall is undefined with no causal SNPs");
    const std::size_t m = truth.config.n_snps;
    if (c.top_k > m) throw ConfigError("top_k " + std::to_string(c.top_k) + " exceeds the number of SNPs " + std::to_string(m));
    const fs::path dir = c.out_dir / "replicate" / ref.tag;
    DatasetRecall dr{ref.tag, truth.config.sparsity, {}, 0.0, 0.0};
    std::vector<Eigen::VectorXd> scores;
    std::set<std::size_t> uni;
    for (auto seed : c.replication_seeds) {
      const auto path = dir / ("seed_" + std::to_string(seed) + ".tsv");
      if (!fs::exists(path)) continue;
      const auto t = parse_score_tsv(io::read_file(path), "mean_abs_score", path.string());
      if (static_cast<std::size_t>(t.scores.size()) != m) throw DimensionMismatchError(path.string() + ": SNP count differs from truth");
      const auto top = top_k(t.scores, c.top_k);
      uni.insert(top.begin(), top.end());
      const double r = recall_at(top, truth.causal_indices);
      dr.per_seed.push_back(r);
      report.runs.push_back({ref.tag, truth.config.sparsity, seed, r});
      run_recalls[truth.config.sparsity].push_back(r);
      scores.push_back(t.scores);
    }
    if (scores.empty()) throw DataError("dataset " + ref.tag + ": no replicate score files; run replicate first");
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (const auto& s : scores) pooled += s;
    pooled /= static_cast<double>(scores.size());
    dr.pooled = recall_at(top_k(pooled, c.top_k), truth.causal_indices);
    dr.union_recall = recall_at({uni.begin(), uni.end()}, truth.causal_indices);
    report.datasets.push_back(std::move(dr));
  }
  for (const auto& d : report.datasets) by_setting[d.sparsity].push_back(&d);
  for (const auto& [a, ds] : by_setting) {
    RecallSetting s;
    s.sparsity = a;
    const auto& rs = run_recalls[a];
    s.n_runs = rs.size();
    for (double r : rs) s.mean_recall += r;
    s.mean_recall /= static_cast<double>(rs.size());
    for (const auto* d : ds) {
      s.mean_pooled_recall += d->pooled;
      s.mean_union_recall += d->union_recall;
    }
    s.mean_pooled_recall /= static_cast<double>(ds.size());
    s.mean_union_recall /= static_cast<double>(ds.size());
    report.settings.push_back(s);
  }

  std::string runs = "dataset\tsparsity\tseed\trecall\n";
  for (const auto& r : report.runs) {
    runs += r.dataset + '\t' + io::format_double(r.sparsity) + '\t' + std::to_string(r.seed) + '\t' + io::format_double(r.recall) + '\n';
  }
  std::string datasets = "dataset\tsparsity\tn_runs\tmean_recall\tpooled_recall\tunion_recall\n";
  for (const auto& d : report.datasets) {
    double mean = 0.0;
    for (double r : d.per_seed) mean += r;
    mean /= static_cast<double>(d.per_seed.size());
    datasets += d.dataset + '\t' + io::format_double(d.sparsity) + '\t' + std::to_string(d.per_seed.size()) + '\t' +
                io::format_double(mean) + '\t' + io::format_double(d.pooled) + '\t' + io::format_double(d.union_recall) + '\n';
  }
  std::string summary = "sparsity\tn_runs\tmean_recall\tmean_pooled_recall\tmean_union_recall\n";
  for (const auto& s : report.settings) {
    summary += io::format_double(s.sparsity) + '\t' + std::to_string(s.n_runs) + '\t' + io::format_double(s.mean_recall) + '\t' +
               io::format_double(s.mean_pooled_recall) + '\t' + io::format_double(s.mean_union_recall) + '\n';
  }
  io::write_file_atomic(c.out_dir / "evaluate" / "recall.tsv", runs);
  io::write_file_atomic(c.out_dir / "evaluate" / "datasets.tsv", datasets);
  io::write_file_atomic(c.out_dir / "evaluate" / "summary.tsv", summary);
  return report;
}

// --- gwas and miami -----------------------------------------------------------

inline std::vector<AssocResult> cmd_gwas(const ExperimentConfig& c) {
  std::vector<AssocResult> out;
  for (const auto& ref : dataset_refs(c)) {
    const BundlePaths paths{ref.dir};
    if (!fs::exists(paths.genotypes())) throw DataError("dataset " + ref.tag + ": missing " + paths.genotypes().string());
    const auto g = load_matrix(paths.genotypes());
    const auto p = load_phenotypes(paths.phenotypes(), c.trait_column);
    ScanOptions opt;
    opt.threads = c.threads;
    opt.alpha = c.alpha;
    auto r = scan(g, p, c.gwas, opt);
    io::write_file_atomic(c.out_dir / "gwas" / ref.tag / "scan.tsv", write_scan_tsv(r));
    out.push_back(std::move(r));
  }
  return out;
}

// Plots one scan TSV against one attribution TSV (`mean_abs_score` column).
inline MiamiData miami_files(const fs::path& scan_tsv, const fs::path& scores_tsv, const fs::path& svg_out,
                             const fs::path& merged_out, std::size_t k = 10, const std::string& title = {}) {
  const auto scan = parse_scan_tsv(io::read_file(scan_tsv), scan_tsv.string());
  const auto scores = parse_score_tsv(io::read_file(scores_tsv), "mean_abs_score", scores_tsv.string());
  auto d = join_miami(scan, scores, k);
  MiamiStyle style;
  style.title = title;
  io::write_file_atomic(svg_out, render_miami_svg(d, style));
  io::write_file_atomic(merged_out, write_miami_tsv(d));
  return d;
}

inline void cmd_miami(const ExperimentConfig& c) {
  for (const auto& ref : dataset_refs(c)) {
    const fs::path dir = c.out_dir / "miami" / ref.tag;
    miami_files(c.out_dir / "gwas" / ref.tag / "scan.tsv", c.out_dir / "replicate" / ref.tag / "aggregate.tsv",
                dir / "miami.svg", dir / "merged.tsv", c.top_k, ref.tag);
  }
}

}  // namespace dlgwas
