#pragma once
// Structured genotype and binary-trait simulation.
//
// Genotypes follow a three-factor allele-frequency model:
//   pi = clamp(Gamma * S, 0, 1),  x_mn ~ Binomial(2, pi_mn)
// with Gamma_{m1,m2} ~ U(0, 0.5), Gamma_{m3} = 0.5, S_{1n,2n} ~ Beta(a, a),
// S_{3n} = 1. Samples are partitioned by 3-means on the columns of S; the
// cluster k contributes a logit offset lambda = k and a noise variance
// tau_k^2 ~ InverseGamma(3, 1). Traits are
//   y_n ~ Bernoulli(logistic(sum_m beta_m x_mn + lambda_n + eps_n)),
//   eps_n ~ N(0, sigma_n^2), beta_m ~ N(0, 1) on the causal set, 0 elsewhere.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlgwas/error.hpp"
#include "dlgwas/genotype.hpp"
#include "dlgwas/io.hpp"
#include "dlgwas/kmeans.hpp"
#include "dlgwas/parallel.hpp"
#include "dlgwas/phenotype.hpp"
#include "dlgwas/rng.hpp"

namespace dlgwas {

struct SimConfig {
  std::size_t n_samples = 10000;
  std::size_t n_snps = 10000;
  double sparsity = 0.1;  // Beta(a, a) shape
  std::size_t n_causal = 10;
  uint64_t seed = 0;
  bool random_causal = false;  // place causal SNPs at random instead of the first n_causal

  void validate() const {
    if (n_samples < 3) throw ConfigError("simulation needs at least 3 samples");
    if (n_snps == 0) throw ConfigError("simulation needs at least one SNP");
    if (!(sparsity > 0.0) || !std::isfinite(sparsity)) throw ConfigError("sparsity a must be > 0");
    if (n_causal > n_snps) throw ConfigError("n_causal exceeds n_snps");
  }
};

inline nlohmann::json to_json(const SimConfig& c) {
  return {{"n_samples", c.n_samples}, {"n_snps", c.n_snps},   {"sparsity", c.sparsity},
          {"n_causal", c.n_causal},   {"seed", c.seed},         {"random_causal", c.random_causal}};
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.n_snps = j.value("n_snps", c.n_snps);
  c.sparsity = j.value("sparsity", c.sparsity);
  c.n_causal = j.value("n_causal", c.n_causal);
  c.seed = j.value("seed", c.seed);
  c.random_causal = j.value("random_causal", c.random_causal);
  return c;
}

struct SimTruth {
  Eigen::MatrixXd gamma;  // M x 3
  Eigen::MatrixXd s;      // 3 x N
  Eigen::MatrixXd pi;     // M x N after clamping; may be left empty to save memory
  std::vector<double> beta;
  std::vector<std::size_t> causal_indices;
  std::vector<double> lambda;
  std::vector<double> sigma2;
  std::array<double, 3> tau2{};
  std::vector<int> cluster;  // 1..3
  SimConfig config;
};

struct Factors {
  Eigen::MatrixXd gamma;  // M x 3
  Eigen::MatrixXd s;      // 3 x N
};

inline Factors sample_factors(const SimConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<Eigen::Index>(cfg.n_snps);
  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  Factors f;
  f.gamma.resize(m, 3);
  Rng gamma_rng(cfg.seed, "sim.gamma");
  for (Eigen::Index i = 0; i < m; ++i) {
    f.gamma(i, 0) = gamma_rng.uniform(0.0, 0.5);
    f.gamma(i, 1) = gamma_rng.uniform(0.0, 0.5);
    f.gamma(i, 2) = 0.5;
  }
  f.s.resize(3, n);
  Rng s_rng(cfg.seed, "sim.s");
  for (Eigen::Index j = 0; j < n; ++j) {
    f.s(0, j) = s_rng.beta(cfg.sparsity, cfg.sparsity);
    f.s(1, j) = s_rng.beta(cfg.sparsity, cfg.sparsity);
    f.s(2, j) = 1.0;
  }
  return f;
}

struct GenotypeDraw {
  GenotypeMatrix genotypes;
  Eigen::MatrixXd pi;  // empty unless requested
};

// Each SNP draws from its own stream (seed, snp index), so the result does not
// depend on the number of worker threads.
inline GenotypeDraw sample_genotypes(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& s, uint64_t seed,
                                     bool keep_pi = true, unsigned threads = 1) {
  if (gamma.cols() != 3 || s.rows() != 3) throw ConfigError("factor shapes must be M x 3 and 3 x N");
  const auto m = static_cast<std::size_t>(gamma.rows());
  const auto n = static_cast<std::size_t>(s.cols());
  const std::size_t stride = packed_bytes(n);
  std::vector<uint8_t> packed(m * stride, 0);
  GenotypeDraw out;
  if (keep_pi) out.pi.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  parallel_for(m, threads, [&](std::size_t snp) {
    Rng rng(seed, "sim.genotype", snp);
    const Eigen::RowVectorXd row = gamma.row(static_cast<Eigen::Index>(snp)) * s;
    uint8_t* col = packed.data() + snp * stride;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(row(static_cast<Eigen::Index>(i)), 0.0, 1.0);
      if (keep_pi) out.pi(static_cast<Eigen::Index>(snp), static_cast<Eigen::Index>(i)) = p;
      col[i / 4] |= static_cast<uint8_t>(rng.binomial2(p) << (2 * (i % 4)));
    }
  });
  out.genotypes = GenotypeMatrix(n, m, std::move(packed), numbered_ids("snp", m), numbered_ids("s", n));
  return out;
}

// Switches used by tests to isolate parts of the trait model.
struct TraitOverrides {
  bool zero_cluster_effect = false;
  bool zero_noise = false;
};

struct TraitDraw {
  PhenotypeTable phenotypes;
  SimTruth truth;  // gamma / s / pi left for the caller
};

inline std::vector<std::size_t> choose_causal(const SimConfig& cfg) {
  std::vector<std::size_t> idx;
  if (!cfg.random_causal) {
    idx.resize(cfg.n_causal);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  std::vector<std::size_t> all(cfg.n_snps);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(cfg.seed, "sim.causal");
  shuffle(all, rng);
  idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.n_causal));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Traits for complete genotypes `x` given the sample factors `s`.
inline TraitDraw sample_traits(const GenotypeMatrix& x, const Eigen::MatrixXd& s, const SimConfig& cfg,
                               TraitOverrides overrides = {}) {
  cfg.validate();
  if (x.n_snps() != cfg.n_snps || x.n_samples() != cfg.n_samples) {
    throw DimensionMismatchError("genotype matrix does not match simulation config");
  }
  if (s.cols() != static_cast<Eigen::Index>(x.n_samples())) throw DimensionMismatchError("S has wrong width");
  const std::size_t n = x.n_samples();

  TraitDraw out;
  SimTruth& t = out.truth;
  t.config = cfg;
  t.causal_indices = choose_causal(cfg);
  t.beta.assign(cfg.n_snps, 0.0);
  Rng beta_rng(cfg.seed, "sim.beta");
  for (auto m : t.causal_indices) t.beta[m] = beta_rng.normal();

  const auto km = kmeans_columns(s, 3, derive_seed(cfg.seed, "sim.kmeans"));
  t.cluster = km.labels;
  Rng tau_rng(cfg.seed, "sim.tau");
  for (auto& v : t.tau2) v = tau_rng.inverse_gamma(3.0, 1.0);
  t.lambda.resize(n);
  t.sigma2.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    t.lambda[j] = static_cast<double>(t.cluster[j]);
    t.sigma2[j] = t.tau2[static_cast<std::size_t>(t.cluster[j] - 1)];
  }

  std::vector<double> logit(n, 0.0);
  for (auto m : t.causal_indices) {
    const auto col = x.column(m);
    for (std::size_t j = 0; j < n; ++j) {
      if (col[j] == kMissing) throw DataError("trait simulation needs complete genotypes");
      logit[j] += t.beta[m] * col[j];
    }
  }
  Rng eps_rng(cfg.seed, "sim.eps");
  Rng y_rng(cfg.seed, "sim.trait");
  auto& p = out.phenotypes;
  p.sample_ids = x.sample_ids();
  p.trait_kind = TraitKind::binary;
  p.trait.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double eps = eps_rng.normal() * std::sqrt(t.sigma2[j]);
    const double eta = logit[j] + (overrides.zero_cluster_effect ? 0.0 : t.lambda[j]) +
                       (overrides.zero_noise ? 0.0 : eps);
    p.trait[j] = y_rng.bernoulli(logistic(eta)) ? 1.0 : 0.0;
  }
  // Cluster indicators (cluster 1 is the baseline) serve as structure covariates.
  p.covariate_names = {"cluster2", "cluster3"};
  p.covariates = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
  for (std::size_t j = 0; j < n; ++j) {
    if (t.cluster[j] == 2) p.covariates(static_cast<Eigen::Index>(j), 0) = 1.0;
    if (t.cluster[j] == 3) p.covariates(static_cast<Eigen::Index>(j), 1) = 1.0;
  }
  return out;
}

struct Simulation {
  GenotypeMatrix genotypes;
  PhenotypeTable phenotypes;
  SimTruth truth;
};

inline Simulation simulate(const SimConfig& cfg, bool keep_pi = true, unsigned threads = 1) {
  auto factors = sample_factors(cfg);
  auto draw = sample_genotypes(factors.gamma, factors.s, derive_seed(cfg.seed, "sim.genotypes"), keep_pi, threads);
  auto traits = sample_traits(draw.genotypes, factors.s, cfg);
  Simulation sim;
  sim.genotypes = std::move(draw.genotypes);
  sim.phenotypes = std::move(traits.phenotypes);
  sim.truth = std::move(traits.truth);
  sim.truth.gamma = std::move(factors.gamma);
  sim.truth.s = std::move(factors.s);
  sim.truth.pi = std::move(draw.pi);
  return sim;
}

// --- ground-truth manifest ------------------------------------------------

inline nlohmann::json truth_to_json(const SimTruth& t) {
  return {{"causal_indices", t.causal_indices},
          {"beta", t.beta},
          {"lambda", t.lambda},
          {"sigma2", t.sigma2},
          {"tau2", t.tau2},
          {"cluster", t.cluster},
          {"config", to_json(t.config)}};
}

inline SimTruth truth_from_json(const nlohmann::json& j) {
  SimTruth t;
  try {
    t.causal_indices = j.at("causal_indices").get<std::vector<std::size_t>>();
    t.beta = j.at("beta").get<std::vector<double>>();
    t.lambda = j.at("lambda").get<std::vector<double>>();
    t.sigma2 = j.at("sigma2").get<std::vector<double>>();
    t.tau2 = j.at("tau2").get<std::array<double, 3>>();
    t.cluster = j.at("cluster").get<std::vector<int>>();
    t.config = sim_config_from_json(j.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("truth manifest: ") + e.what());
  }
  return t;
}

inline SimTruth load_truth(const std::filesystem::path& path) {
  try {
    return truth_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Flat row-major float64 dump used for the large factor sidecars.
inline std::string encode_f64_matrix(const Eigen::MatrixXd& m) {
  io::ByteWriter w;
  w.put<uint64_t>(static_cast<uint64_t>(m.rows()));
  w.put<uint64_t>(static_cast<uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<double>(m(r, c));
  }
  return w.bytes();
}

inline Eigen::MatrixXd decode_f64_matrix(std::string_view bytes) {
  io::ByteReader r(bytes, "f64 sidecar");
  const auto rows = r.get<uint64_t>();
  const auto cols = r.get<uint64_t>();
  if (rows * cols > r.remaining() / 8) throw TruncatedError("f64 sidecar shorter than its header claims");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = r.get<double>();
  }
  return m;
}

struct BundlePaths {
  std::filesystem::path dir;
  std::filesystem::path genotypes() const { return dir / "genotypes.gwdl"; }
  std::filesystem::path phenotypes() const { return dir / "phenotypes.tsv"; }
  std::filesystem::path truth() const { return dir / "truth.json"; }
  std::filesystem::path gamma() const { return dir / "gamma.f64"; }
  std::filesystem::path s() const { return dir / "s.f64"; }
  std::filesystem::path pi() const { return dir / "pi.f64"; }
};

struct BenchmarkOptions {
  bool write_pi = false;  // M x N doubles; large at 10k x 10k
  unsigned threads = 1;
};

// Writes a reproducible dataset bundle: GWDL genotypes, phenotype TSV with
// cluster covariates, truth manifest and factor sidecars.
inline BundlePaths make_benchmark(const SimConfig& cfg, const std::filesystem::path& dir,
                                  BenchmarkOptions options = {}) {
  const auto sim = simulate(cfg, options.write_pi, options.threads);
  BundlePaths paths{dir};
  std::filesystem::create_directories(dir);
  save_matrix(sim.genotypes, paths.genotypes());
  io::write_file_atomic(paths.phenotypes(), write_phenotype_tsv(sim.phenotypes));
  io::write_file_atomic(paths.truth(), truth_to_json(sim.truth).dump(1) + "\n");
  io::write_file_atomic(paths.gamma(), encode_f64_matrix(sim.truth.gamma));
  io::write_file_atomic(paths.s(), encode_f64_matrix(sim.truth.s));
  if (options.write_pi) io::write_file_atomic(paths.pi(), encode_f64_matrix(sim.truth.pi));
  return paths;
}

}  // namespace dlgwas
