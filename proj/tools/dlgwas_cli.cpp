// dlgwas: simulate, train-grid, replicate, evaluate, gwas, miami.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 I/O error, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "dlgwas/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "master seed (overrides the config)");
  sub->add_option("--out-dir", o.out_dir, "output directory (overrides the config)");
  sub->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

dlgwas::ExperimentConfig resolve(const CommonOptions& o) {
  auto c = dlgwas::load_experiment_config(o.config);
  if (o.seed) c.master_seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.threads) c.threads = dlgwas::resolve_threads(*o.threads);
  return c;
}

void log_line(const std::string& s) { std::cerr << "dlgwas: " << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-interpretability GWAS toolkit"};
  app.require_subcommand(1);
  CommonOptions opts;

  auto* simulate = app.add_subcommand("simulate", "write simulated dataset bundles");
  auto* grid = app.add_subcommand("train-grid", "train the architecture x L1 grid and pick a winner per dataset");
  auto* replicate = app.add_subcommand("replicate", "retrain the winner on replication seeds and attribute with DeepLIFT");
  auto* evaluate = app.add_subcommand("evaluate", "top-k recall of attribution scores against the simulated truth");
  auto* gwas = app.add_subcommand("gwas", "per-SNP association scan");
  auto* miami = app.add_subcommand("miami", "Miami plot of scan p-values against mean |DeepLIFT| scores");
  for (auto* s : {simulate, grid, replicate, evaluate, gwas, miami}) add_common(s, opts);

  std::string scan_tsv, scores_tsv, plot_out;
  miami->add_option("--scan", scan_tsv, "scan TSV (plots one file pair instead of every dataset)");
  miami->add_option("--scores", scores_tsv, "attribution TSV with a mean_abs_score column");
  miami->add_option("--out", plot_out, "output prefix for <prefix>.svg and <prefix>.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto c = resolve(opts);
    if (simulate->parsed()) {
      for (const auto& d : dlgwas::cmd_simulate(c)) log_line("wrote " + d.dir.string());
    } else if (grid->parsed()) {
      dlgwas::cmd_train_grid(c, log_line);
    } else if (replicate->parsed()) {
      dlgwas::cmd_replicate(c, log_line);
    } else if (evaluate->parsed()) {
      const auto r = dlgwas::cmd_evaluate(c);
      std::cout << "sparsity\tn_runs\tmean_recall\tpooled_recall\tunion_recall\n";
      for (const auto& s : r.settings) {
        std::cout << dlgwas::io::format_double(s.sparsity) << '\t' << s.n_runs << '\t'
                  << dlgwas::io::format_fixed(s.mean_recall, 3) << '\t' << dlgwas::io::format_fixed(s.mean_pooled_recall, 3)
                  << '\t' << dlgwas::io::format_fixed(s.mean_union_recall, 3) << '\n';
      }
    } else if (gwas->parsed()) {
      for (const auto& r : dlgwas::cmd_gwas(c)) {
        std::size_t hits = 0;
        for (const auto& row : r.rows) hits += row.neg_log10_p > r.bonferroni_neg_log10() ? 1 : 0;
        log_line(std::to_string(r.rows.size()) + " SNPs tested, " + std::to_string(hits) + " past Bonferroni");
      }
    } else if (miami->parsed()) {
      if (!scan_tsv.empty() || !scores_tsv.empty()) {
        if (scan_tsv.empty() || scores_tsv.empty() || plot_out.empty()) {
          throw dlgwas::ConfigError("--scan, --scores and --out go together");
        }
        dlgwas::miami_files(scan_tsv, scores_tsv, plot_out + ".svg", plot_out + ".tsv", c.top_k);
      } else {
        dlgwas::cmd_miami(c);
      }
    }
  } catch (const dlgwas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const dlgwas::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const dlgwas::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
