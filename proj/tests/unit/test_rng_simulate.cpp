#include <gtest/gtest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "dlgwas/io.hpp"
#include "dlgwas/kmeans.hpp"
#include "dlgwas/rng.hpp"
#include "dlgwas/simulate.hpp"
#include "oracles.hpp"

using namespace dlgwas;

namespace {

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
// Johnk's algorithm in log space; independent of the library's gamma-ratio sampler.
double johnk_beta(Rng& rng, double a, double b) {
  for (;;) {
    const double lx = std::log(rng.uniform()) / a;
    const double ly = std::log(rng.uniform()) / b;
    const double hi = std::max(lx, ly);
    const double lsum = hi + std::log(std::exp(lx - hi) + std::exp(ly - hi));
    if (lsum <= 0.0) return std::exp(lx - lsum);
  }
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dlgwas_unit" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, NamedStreamsAreDistinct) {
  EXPECT_NE(derive_seed(1, "sim.beta"), derive_seed(1, "sim.tau"));
  EXPECT_NE(derive_seed(1, "sim.genotype", 0), derive_seed(1, "sim.genotype", 1));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
  std::set<uint64_t> seen;
  for (uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(7, "idx", i));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Rng, UniformStaysInOpenInterval) {
  Rng r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, BelowIsUnbiasedAcrossBuckets) {
  Rng r(5);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 4 * std::sqrt(n * (1.0 / 7) * (6.0 / 7)));
}

TEST(Rng, NormalMatchesStandardNormalCdf) {
  Rng r(9);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = r.normal();
  boost::math::normal_distribution<double> dist;
  EXPECT_LT(oracle::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }), oracle::ks_critical(xs.size()));
}

TEST(Rng, GammaMatchesBoostCdf) {
  for (double shape : {0.01, 0.3, 1.0, 3.0, 10.0}) {
    Rng r(derive_seed(13, "gamma-test", static_cast<uint64_t>(shape * 100)));
    std::vector<double> xs(20000);
    for (auto& x : xs) x = r.gamma(shape);
    boost::math::gamma_distribution<double> dist(shape, 1.0);
    EXPECT_LT(oracle::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }), oracle::ks_critical(xs.size())) << shape;
  }
}

TEST(Rng, BetaMatchesBoostCdf) {
  for (double a : {0.01, 0.1, 0.5, 1.0, 2.5}) {
    Rng r(derive_seed(17, "beta-test", static_cast<uint64_t>(a * 100)));
    std::vector<double> xs(20000);
    for (auto& x : xs) x = r.beta(a, a);
    boost::math::beta_distribution<double> dist(a, a);
    EXPECT_LT(oracle::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }), oracle::ks_critical(xs.size())) << a;
  }
}

TEST(Rng, InverseGammaMeanIsScaleOverShapeMinusOne) {
  Rng r(21);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += r.inverse_gamma(3.0, 1.0);
  // Var = scale^2 / ((shape-1)^2 (shape-2)) = 1/4.
  EXPECT_NEAR(sum / n, 0.5, 4 * 0.5 / std::sqrt(n));
}

TEST(Simulate, GammaThirdColumnAndSThirdRowFixed) {
  SimConfig cfg;
  cfg.n_samples = 50;
  cfg.n_snps = 40;
  cfg.seed = 99;
  const auto f = sample_factors(cfg);
  for (Eigen::Index m = 0; m < f.gamma.rows(); ++m) {
    EXPECT_EQ(f.gamma(m, 2), 0.5);
    EXPECT_GE(f.gamma(m, 0), 0.0);
    EXPECT_LT(f.gamma(m, 1), 0.5);
  }
  for (Eigen::Index n = 0; n < f.s.cols(); ++n) EXPECT_EQ(f.s(2, n), 1.0);
}

TEST(Simulate, UniformSWhenSparsityIsOne) {
  SimConfig cfg;
  cfg.n_samples = 50000;
  cfg.n_snps = 1;
  cfg.n_causal = 0;
  cfg.sparsity = 1.0;
  cfg.seed = 4;
  const auto f = sample_factors(cfg);
  const double mean = f.s.topRows(2).mean();
  EXPECT_NEAR(mean, 0.5, 3 * std::sqrt(1.0 / 12.0 / 100000.0));
}

TEST(Simulate, SmallSparsityConcentratesNearEnds) {
  SimConfig cfg;
  cfg.n_samples = 20000;
  cfg.n_snps = 1;
  cfg.n_causal = 0;
  cfg.sparsity = 0.01;
  cfg.seed = 8;
  const auto f = sample_factors(cfg);
  Rng oracle(12345);
  std::size_t lib_mid = 0;
  std::size_t ref_mid = 0;
  std::size_t lib_low = 0;
  std::size_t ref_low = 0;
  const std::size_t n = 40000;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = f.s(static_cast<Eigen::Index>(i % 2), static_cast<Eigen::Index>(i / 2));
    const double y = johnk_beta(oracle, 0.01, 0.01);
    lib_mid += (x > 0.4 && x < 0.6) ? 1 : 0;
    ref_mid += (y > 0.4 && y < 0.6) ? 1 : 0;
    lib_low += x < 0.5 ? 1 : 0;
    ref_low += y < 0.5 ? 1 : 0;
  }
  const double exact_mid = boost::math::cdf(boost::math::beta_distribution<double>(0.01, 0.01), 0.6) -
                           boost::math::cdf(boost::math::beta_distribution<double>(0.01, 0.01), 0.4);
  EXPECT_LT(static_cast<double>(lib_mid) / n, 0.01);
  EXPECT_NEAR(static_cast<double>(lib_mid) / n, exact_mid, 4 * std::sqrt(exact_mid / n) + 1.0 / n);
  EXPECT_NEAR(static_cast<double>(lib_mid), static_cast<double>(ref_mid), 4 * std::sqrt(2.0 * exact_mid * n) + 2);
  EXPECT_NEAR(static_cast<double>(lib_low), static_cast<double>(ref_low), 4 * std::sqrt(2.0 * 0.25 * n));
}

TEST(Simulate, DegenerateProbabilityOneAlwaysGivesTwo) {
  Eigen::MatrixXd gamma(1, 3);
  gamma << 0.5, 0.5, 0.5;
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(3, 100);  // Gamma*S = 1.5, clamped to 1
  const auto d = sample_genotypes(gamma, s, 1);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(d.genotypes.code(i, 0), 2);
  EXPECT_EQ(d.pi(0, 0), 1.0);
}

TEST(Simulate, HalfProbabilityMeanDosageIsOne) {
  Eigen::MatrixXd gamma(1, 3);
  gamma << 0.0, 0.0, 0.5;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 100000);
  s.row(2).setOnes();
  const auto d = sample_genotypes(gamma, s, 2, false);
  double sum = 0.0;
  for (std::size_t i = 0; i < 100000; ++i) sum += d.genotypes.code(i, 0);
  EXPECT_NEAR(sum / 100000.0, 1.0, 4 * std::sqrt(0.5 / 100000.0));
}

TEST(Simulate, PerEntryFrequencyMatchesClampedPi) {
  SimConfig cfg;
  cfg.n_samples = 4;
  cfg.n_snps = 5;
  cfg.n_causal = 0;
  cfg.seed = 31;
  const auto f = sample_factors(cfg);
  const int reps = 4000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(5, 4);
  Eigen::MatrixXd pi;
  for (int r = 0; r < reps; ++r) {
    const auto d = sample_genotypes(f.gamma, f.s, derive_seed(500, "rep", static_cast<uint64_t>(r)), r == 0);
    if (r == 0) pi = d.pi;
    for (std::size_t m = 0; m < 5; ++m) {
      for (std::size_t n = 0; n < 4; ++n) sum(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) += d.genotypes.code(n, m) / 2.0;
    }
  }
  for (Eigen::Index m = 0; m < 5; ++m) {
    for (Eigen::Index n = 0; n < 4; ++n) {
      const double p = pi(m, n);
      const double sd = std::sqrt(p * (1 - p) / (2.0 * reps));
      EXPECT_NEAR(sum(m, n) / reps, p, 4 * sd + 1e-12) << m << "," << n;
    }
  }
}

TEST(Simulate, ClampOnlyChangesEntriesAboveOne) {
  SimConfig cfg;
  cfg.n_samples = 200;
  cfg.n_snps = 300;
  cfg.sparsity = 0.1;
  cfg.seed = 77;
  const auto f = sample_factors(cfg);
  const auto d = sample_genotypes(f.gamma, f.s, 1);
  const Eigen::MatrixXd raw = f.gamma * f.s;
  std::size_t clamped = 0;
  for (Eigen::Index m = 0; m < raw.rows(); ++m) {
    for (Eigen::Index n = 0; n < raw.cols(); ++n) {
      EXPECT_GE(raw(m, n), 0.0);
      if (raw(m, n) > 1.0) {
        EXPECT_EQ(d.pi(m, n), 1.0);
        ++clamped;
      } else {
        EXPECT_EQ(d.pi(m, n), raw(m, n));
      }
    }
  }
  EXPECT_GT(clamped, 0u);
}

TEST(Simulate, GenotypesIndependentOfThreadCount) {
  SimConfig cfg;
  cfg.n_samples = 123;
  cfg.n_snps = 77;
  cfg.seed = 5;
  const auto one = simulate(cfg, false, 1);
  const auto four = simulate(cfg, false, 4);
  EXPECT_EQ(one.genotypes, four.genotypes);
  EXPECT_EQ(one.phenotypes.trait, four.phenotypes.trait);
}

TEST(Simulate, NeverEmitsMissing) {
  SimConfig cfg;
  cfg.n_samples = 97;
  cfg.n_snps = 50;
  cfg.seed = 6;
  const auto sim = simulate(cfg, false);
  for (std::size_t j = 0; j < 50; ++j) {
    for (auto c : sim.genotypes.column(j)) EXPECT_NE(c, kMissing);
  }
}

TEST(KMeans, SeparatedPairs) {
  Eigen::MatrixXd pts(3, 6);
  pts << 0, 0, 10, 10, -10, -10, 0, 0, 10, 10, 10, 10, 1, 1, 1, 1, 1, 1;
  const auto r = kmeans_columns(pts, 3, 1);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_EQ(r.labels[4], r.labels[5]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  EXPECT_NE(r.labels[0], r.labels[4]);
  EXPECT_NE(r.labels[2], r.labels[4]);
  EXPECT_NEAR(r.wcss, 0.0, 1e-12);
}

TEST(KMeans, SingleClusterIsColumnMean) {
  Rng rng(2);
  Eigen::MatrixXd pts(3, 50);
  for (Eigen::Index j = 0; j < 50; ++j) pts.col(j) << rng.uniform(), rng.uniform(), 1.0;
  const auto r = kmeans_columns(pts, 1, 3);
  for (int l : r.labels) EXPECT_EQ(l, 1);
  EXPECT_LT((r.centroids.col(0) - pts.rowwise().mean()).norm(), 1e-12);
}

TEST(KMeans, BeatsRandomLabelings) {
  Rng rng(4);
  Eigen::MatrixXd pts(3, 300);
  for (Eigen::Index j = 0; j < 300; ++j) pts.col(j) << rng.uniform(), rng.uniform(), 1.0;
  const auto r = kmeans_columns(pts, 3, 5);
  EXPECT_NEAR(r.wcss, within_cluster_ss(pts, r.labels, 3), 1e-9);
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> labels(300);
    for (auto& l : labels) l = 1 + static_cast<int>(rng.below(3));
    ASSERT_LE(r.wcss, within_cluster_ss(pts, labels, 3));
  }
}

TEST(KMeans, TooFewDistinctColumnsIsError) {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(3, 10);
  pts.col(3) << 2, 2, 1;
  EXPECT_THROW(kmeans_columns(pts, 3, 1), DataError);
}

TEST(KMeans, DeterministicGivenSeed) {
  Rng rng(8);
  Eigen::MatrixXd pts(3, 200);
  for (Eigen::Index j = 0; j < 200; ++j) pts.col(j) << rng.beta(0.1, 0.1), rng.beta(0.1, 0.1), 1.0;
  const auto a = kmeans_columns(pts, 3, 11);
  const auto b = kmeans_columns(pts, 3, 11);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Traits, NoSignalGivesHalfCases) {
  SimConfig cfg;
  cfg.n_samples = 10000;
  cfg.n_snps = 5;
  cfg.n_causal = 0;
  cfg.seed = 12;
  const auto f = sample_factors(cfg);
  const auto g = sample_genotypes(f.gamma, f.s, 3, false);
  const auto t = sample_traits(g.genotypes, f.s, cfg, {true, true});
  double cases = 0;
  for (double y : t.phenotypes.trait) cases += y;
  EXPECT_NEAR(cases / 10000.0, 0.5, 4 * std::sqrt(0.25 / 10000.0));
}

TEST(Traits, TruthInvariantsHold) {
  SimConfig cfg;
  cfg.n_samples = 400;
  cfg.n_snps = 60;
  cfg.seed = 13;
  const auto sim = simulate(cfg);
  const auto& t = sim.truth;
  ASSERT_EQ(t.causal_indices.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(t.causal_indices[i], i);
  for (std::size_t m = 10; m < 60; ++m) EXPECT_EQ(t.beta[m], 0.0);
  for (std::size_t j = 0; j < 400; ++j) {
    EXPECT_EQ(t.lambda[j], t.cluster[j]);
    EXPECT_EQ(t.sigma2[j], t.tau2[static_cast<std::size_t>(t.cluster[j] - 1)]);
    const double y = sim.phenotypes.trait[j];
    EXPECT_TRUE(y == 0.0 || y == 1.0);
  }
  EXPECT_TRUE((t.pi.array() >= 0.0).all() && (t.pi.array() <= 1.0).all());
}

TEST(Traits, PrevalenceRisesWithClusterLabel) {
  SimConfig cfg;
  cfg.n_samples = 10000;
  cfg.n_snps = 3;
  cfg.n_causal = 0;
  cfg.sparsity = 1.0;
  cfg.seed = 14;
  const auto sim = simulate(cfg, false);
  std::array<double, 3> cases{}, total{};
  for (std::size_t j = 0; j < cfg.n_samples; ++j) {
    const auto k = static_cast<std::size_t>(sim.truth.cluster[j] - 1);
    cases[k] += sim.phenotypes.trait[j];
    total[k] += 1;
  }
  for (std::size_t k = 0; k + 1 < 3; ++k) {
    const double p0 = cases[k] / total[k];
    const double p1 = cases[k + 1] / total[k + 1];
    const double se = std::sqrt(p0 * (1 - p0) / total[k] + p1 * (1 - p1) / total[k + 1]);
    EXPECT_GT(p1 - p0, -4 * se);
    EXPECT_GT(p1, p0);
  }
}

TEST(Traits, RandomCausalPlacementIsSortedAndInRange) {
  SimConfig cfg;
  cfg.n_snps = 1000;
  cfg.random_causal = true;
  cfg.seed = 15;
  const auto idx = choose_causal(cfg);
  EXPECT_EQ(idx.size(), 10u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 10u);
  EXPECT_LT(idx.back(), 1000u);
}

TEST(Benchmark, SameConfigGivesIdenticalBundles) {
  SimConfig cfg;
  cfg.n_samples = 150;
  cfg.n_snps = 40;
  cfg.seed = 21;
  const auto a = make_benchmark(cfg, temp_dir("bundle_a"));
  const auto b = make_benchmark(cfg, temp_dir("bundle_b"));
  for (auto member : {&BundlePaths::genotypes, &BundlePaths::phenotypes, &BundlePaths::truth, &BundlePaths::gamma,
                      &BundlePaths::s}) {
    EXPECT_EQ(io::read_file((a.*member)()), io::read_file((b.*member)()));
  }
}

TEST(Benchmark, NullConfigHasEmptyCausalSet) {
  SimConfig cfg;
  cfg.n_samples = 60;
  cfg.n_snps = 20;
  cfg.n_causal = 0;
  cfg.seed = 22;
  const auto p = make_benchmark(cfg, temp_dir("bundle_null"));
  const auto t = load_truth(p.truth());
  EXPECT_TRUE(t.causal_indices.empty());
  for (double b : t.beta) EXPECT_EQ(b, 0.0);
}

TEST(Benchmark, GridOfSparsitiesAndSeedsGivesTwentyBundles) {
  std::set<std::string> genotype_files;
  for (double a : {0.01, 0.1, 0.5, 1.0}) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      SimConfig cfg;
      cfg.n_samples = 12;
      cfg.n_snps = 10;
      cfg.sparsity = a;
      cfg.seed = seed;
      const auto p = make_benchmark(cfg, temp_dir("grid_" + io::format_double(a) + "_" + std::to_string(seed)));
      genotype_files.insert(io::read_file(p.genotypes()));
    }
  }
  EXPECT_EQ(genotype_files.size(), 20u);
}

TEST(Benchmark, TruthJsonRoundTrip) {
  SimConfig cfg;
  cfg.n_samples = 30;
  cfg.n_snps = 12;
  cfg.seed = 23;
  const auto sim = simulate(cfg, false);
  const auto back = truth_from_json(truth_to_json(sim.truth));
  EXPECT_EQ(back.causal_indices, sim.truth.causal_indices);
  EXPECT_EQ(back.beta, sim.truth.beta);
  EXPECT_EQ(back.cluster, sim.truth.cluster);
  EXPECT_EQ(back.tau2, sim.truth.tau2);
  EXPECT_EQ(back.config.seed, cfg.seed);
}

TEST(Config, InvalidSparsityRejected) {
  SimConfig cfg;
  cfg.sparsity = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.sparsity = 0.5;
  cfg.n_causal = cfg.n_snps + 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
