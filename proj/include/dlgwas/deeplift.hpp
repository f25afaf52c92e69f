#pragma once
// DeepLIFT attributions with the Linear and Rescale rules.
//
// For a target neuron t and a reference input x_ref, every input i receives
// A_i = m_i * (x_i - x_ref_i), where the multiplier m_i is composed layer by
// layer: an affine layer passes multipliers through its weights, and an
// elementwise nonlinearity f scales them by
//   (f(z) - f(z_ref)) / (z - z_ref)
// (the gradient at the midpoint when |z - z_ref| <= 1e-7). The scores sum to
// t(x) - t(x_ref).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dlgwas/error.hpp"
#include "dlgwas/genotype.hpp"
#include "dlgwas/neural.hpp"

namespace dlgwas {

enum class AttributionTarget { logit, output };

enum class Nonlinearity { identity, relu, sigmoid };

inline constexpr double kRescaleEpsilon = 1e-7;

struct ReferenceInput {
  Eigen::VectorXd values;
  std::string source;
};

// Per-SNP mean dosage over observed genotypes; identical to the column mean
// of impute_to_mean(m).
inline ReferenceInput compute_reference(const GenotypeMatrix& m, std::string source = "all samples") {
  if (m.n_samples() == 0) throw DataError("reference over an empty sample set");
  ReferenceInput ref;
  ref.source = std::move(source);
  ref.values.resize(static_cast<Eigen::Index>(m.n_snps()));
  for (std::size_t j = 0; j < m.n_snps(); ++j) ref.values(static_cast<Eigen::Index>(j)) = snp_stats(m, j).dosage_mean;
  return ref;
}

inline ReferenceInput compute_reference(const Eigen::MatrixXd& dense, std::string source = "all samples") {
  if (dense.rows() == 0) throw DataError("reference over an empty sample set");
  return {dense.colwise().mean().transpose(), std::move(source)};
}

inline ReferenceInput compute_reference(const Eigen::MatrixXd& dense, const std::vector<Eigen::Index>& rows,
                                        std::string source) {
  if (rows.empty()) throw DataError("reference over an empty sample set");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dense.cols());
  for (auto r : rows) sum += dense.row(r).transpose();
  return {sum / static_cast<double>(rows.size()), std::move(source)};
}

// Linear rule: the multiplier from input i to output j is w_ji.
inline const Eigen::MatrixXd& multipliers_linear(const DenseLayer& layer) { return layer.weight; }

inline double apply(Nonlinearity f, double z) {
  switch (f) {
    case Nonlinearity::relu:
      return z > 0.0 ? z : 0.0;
    case Nonlinearity::sigmoid:
      return sigmoid(z);
    case Nonlinearity::identity:
      break;
  }
  return z;
}

inline double derivative(Nonlinearity f, double z) {
  switch (f) {
    case Nonlinearity::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Nonlinearity::sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Nonlinearity::identity:
      break;
  }
  return 1.0;
}

inline Nonlinearity nonlinearity_of(Activation a) {
  return a == Activation::relu ? Nonlinearity::relu : Nonlinearity::identity;
}

inline double multiplier_rescale(double z, double z_ref, Nonlinearity f) {
  const double dz = z - z_ref;
  if (std::abs(dz) > kRescaleEpsilon) return (apply(f, z) - apply(f, z_ref)) / dz;
  return derivative(f, 0.5 * (z + z_ref));
}

struct AttributionVector {
  Eigen::VectorXd scores;
  double delta_t = 0.0;
  std::string sample_id;
};

struct AttributionBatch {
  Eigen::MatrixXd scores;  // B x M
  Eigen::VectorXd delta_t;  // B
};

namespace detail {

inline Eigen::MatrixXd rescale_matrix(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& z_ref, Nonlinearity f) {
  Eigen::MatrixXd r(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index b = 0; b < z.rows(); ++b) r(b, c) = multiplier_rescale(z(b, c), z_ref(c), f);
  }
  return r;
}

inline void check_reference(const MlpModel& model, const ReferenceInput& ref) {
  if (ref.values.size() != model.input_dim()) throw DimensionMismatchError("reference length differs from model input");
}

// Target multiplier and delta for each row, given output-layer values.
inline void target_terms(const MlpModel& model, AttributionTarget target, const Eigen::VectorXd& out,
                         double out_ref, Eigen::VectorXd& m_out, Eigen::VectorXd& delta) {
  const bool squash = target == AttributionTarget::output && model.head() == HeadKind::sigmoid_binary;
  m_out.resize(out.size());
  delta.resize(out.size());
  for (Eigen::Index b = 0; b < out.size(); ++b) {
    if (squash) {
      m_out(b) = multiplier_rescale(out(b), out_ref, Nonlinearity::sigmoid);
      delta(b) = sigmoid(out(b)) - sigmoid(out_ref);
    } else {
      m_out(b) = 1.0;
      delta(b) = out(b) - out_ref;
    }
  }
}

}  // namespace detail

// Backward multiplier propagation for a batch of inputs (rows of `x`). For a
// regression head `output` and `logit` coincide.
template <typename Derived>
AttributionBatch deeplift_batch(const MlpModel& model, const Eigen::MatrixBase<Derived>& x, const ReferenceInput& ref,
                                AttributionTarget target = AttributionTarget::logit) {
  detail::check_reference(model, ref);
  const auto trace = forward(model, x);
  const auto ref_trace = forward(model, ref.values.transpose());
  const auto& layers = model.layers();

  Eigen::VectorXd m_out;
  AttributionBatch out;
  detail::target_terms(model, target, trace.output(), ref_trace.output()(0), m_out, out.delta_t);

  // Multipliers with respect to the current layer's activations, B x width.
  Eigen::MatrixXd m = m_out;
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (layers[k].activation != Activation::identity) {
      m = m.cwiseProduct(
          detail::rescale_matrix(trace.pre[k], ref_trace.pre[k].row(0), nonlinearity_of(layers[k].activation)));
    }
    m = m * multipliers_linear(layers[k]);
  }
  out.scores = m.cwiseProduct(trace.input.rowwise() - ref.values.transpose());
  return out;
}

inline AttributionVector deeplift_attribute(const MlpModel& model, const Eigen::VectorXd& x, const ReferenceInput& ref,
                                            AttributionTarget target = AttributionTarget::logit,
                                            std::string sample_id = {}) {
  auto batch = deeplift_batch(model, x.transpose(), ref, target);
  return {batch.scores.row(0).transpose(), batch.delta_t(0), std::move(sample_id)};
}

// Same attributions by the forward chain rule: the full input-to-neuron
// multiplier matrix is built layer by layer,
//   T_k[i, j] = sum_l T_{k-1}[i, l] * w_jl * r_kj,
// and read off at the target neuron. Cost is O(M * width^2) per sample.
inline AttributionVector deeplift_attribute_chain_rule(const MlpModel& model, const Eigen::VectorXd& x,
                                                       const ReferenceInput& ref,
                                                       AttributionTarget target = AttributionTarget::logit) {
  detail::check_reference(model, ref);
  const auto& layers = model.layers();
  Eigen::VectorXd h = x;
  Eigen::VectorXd h_ref = ref.values;
  Eigen::MatrixXd t;  // input x width
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const Eigen::VectorXd z = l.weight * h + l.bias;
    const Eigen::VectorXd z_ref = l.weight * h_ref + l.bias;
    Eigen::MatrixXd next = k == 0 ? Eigen::MatrixXd(l.weight.transpose()) : Eigen::MatrixXd(t * l.weight.transpose());
    const auto f = nonlinearity_of(l.activation);
    for (Eigen::Index j = 0; j < next.cols(); ++j) next.col(j) *= multiplier_rescale(z(j), z_ref(j), f);
    t = std::move(next);
    h = z.unaryExpr([f](double v) { return apply(f, v); });
    h_ref = z_ref.unaryExpr([f](double v) { return apply(f, v); });
  }
  Eigen::VectorXd m_out;
  Eigen::VectorXd delta;
  detail::target_terms(model, target, h, h_ref(0), m_out, delta);
  AttributionVector out;
  out.scores = t.col(0).cwiseProduct(x - ref.values) * m_out(0);
  out.delta_t = delta(0);
  return out;
}

// --- summaries ------------------------------------------------------------

struct AttributionSummary {
  Eigen::VectorXd mean_abs;
  std::size_t n_samples = 0;
  uint64_t seed = 0;
};

inline AttributionSummary summarize(const std::vector<AttributionVector>& attributions, uint64_t seed = 0) {
  if (attributions.empty()) throw DataError("summarize needs at least one attribution vector");
  AttributionSummary s;
  s.seed = seed;
  s.n_samples = attributions.size();
  s.mean_abs = Eigen::VectorXd::Zero(attributions.front().scores.size());
  for (const auto& a : attributions) {
    if (a.scores.size() != s.mean_abs.size()) throw DimensionMismatchError("attribution vectors differ in length");
    s.mean_abs += a.scores.cwiseAbs();
  }
  s.mean_abs /= static_cast<double>(attributions.size());
  return s;
}

struct SummaryCheck {
  double max_completeness_error = 0.0;  // max |sum A - delta| / (1 + |delta|)
};

// Streams attributions for `rows` of `x` in chunks and accumulates the mean
// absolute score per input, without materialising every vector.
inline AttributionSummary attribute_and_summarize(const MlpModel& model, const Eigen::MatrixXd& x,
                                                  const std::vector<Eigen::Index>& rows, const ReferenceInput& ref,
                                                  AttributionTarget target, uint64_t seed,
                                                  SummaryCheck* check = nullptr) {
  if (rows.empty()) throw DataError("attribution over an empty split");
  constexpr std::size_t kChunk = 256;
  AttributionSummary s;
  s.seed = seed;
  s.n_samples = rows.size();
  s.mean_abs = Eigen::VectorXd::Zero(x.cols());
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::vector<Eigen::Index> idx(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                        rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), start + kChunk)));
    const Eigen::MatrixXd xb = x(idx, Eigen::all);
    const auto batch = deeplift_batch(model, xb, ref, target);
    s.mean_abs += batch.scores.cwiseAbs().colwise().sum().transpose();
    if (check) {
      const Eigen::VectorXd sums = batch.scores.rowwise().sum();
      for (Eigen::Index b = 0; b < sums.size(); ++b) {
        const double err = std::abs(sums(b) - batch.delta_t(b)) / (1.0 + std::abs(batch.delta_t(b)));
        check->max_completeness_error = std::max(check->max_completeness_error, err);
      }
    }
  }
  s.mean_abs /= static_cast<double>(rows.size());
  return s;
}

// Indices of the k largest scores, ties broken by lower index.
inline std::vector<std::size_t> top_k(const Eigen::VectorXd& scores, std::size_t k) {
  if (k > static_cast<std::size_t>(scores.size())) throw ConfigError("top-k: k exceeds the number of scores");
  std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  return idx;
}

inline std::vector<std::size_t> top_k(const AttributionSummary& s, std::size_t k = 10) { return top_k(s.mean_abs, k); }

struct SeedAggregate {
  std::vector<uint64_t> seeds;
  std::vector<std::vector<std::size_t>> per_seed_top_k;
  Eigen::VectorXd pooled_mean;          // mean of mean_abs across seeds
  Eigen::VectorXd selection_frequency;  // fraction of seeds with the SNP in their top k
};

inline SeedAggregate aggregate_seeds(const std::vector<AttributionSummary>& summaries, std::size_t k = 10) {
  if (summaries.empty()) throw DataError("aggregate needs at least one summary");
  const auto m = summaries.front().mean_abs.size();
  SeedAggregate a;
  a.pooled_mean = Eigen::VectorXd::Zero(m);
  a.selection_frequency = Eigen::VectorXd::Zero(m);
  for (const auto& s : summaries) {
    if (s.mean_abs.size() != m) throw DimensionMismatchError("summaries disagree on the number of SNPs");
    a.seeds.push_back(s.seed);
    a.pooled_mean += s.mean_abs;
    a.per_seed_top_k.push_back(top_k(s.mean_abs, k));
    for (auto i : a.per_seed_top_k.back()) a.selection_frequency(static_cast<Eigen::Index>(i)) += 1.0;
  }
  a.pooled_mean /= static_cast<double>(summaries.size());
  a.selection_frequency /= static_cast<double>(summaries.size());
  return a;
}

// --- attribution TSVs -----------------------------------------------------

inline std::string write_summary_tsv(const AttributionSummary& s, const std::vector<std::string>& snp_ids) {
  if (snp_ids.size() != static_cast<std::size_t>(s.mean_abs.size())) throw DimensionMismatchError("snp id count");
  std::string out = "snp_id\tmean_abs_score\n";
  for (std::size_t i = 0; i < snp_ids.size(); ++i) {
    out += snp_ids[i] + '\t' + io::format_double(s.mean_abs(static_cast<Eigen::Index>(i))) + '\n';
  }
  return out;
}

struct ScoreTable {
  std::vector<std::string> snp_ids;
  Eigen::VectorXd scores;
};

// Reads `snp_id` plus the named score column from an attribution TSV.
inline ScoreTable parse_score_tsv(const std::string& text, const std::string& column = "mean_abs_score",
                                  const std::string& context = "attribution TSV") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(context + ": empty file");
  const auto header = io::split_tabs(line);
  const auto id_it = std::find(header.begin(), header.end(), "snp_id");
  const auto sc_it = std::find(header.begin(), header.end(), column);
  if (id_it == header.end() || sc_it == header.end()) {
    throw ParseError(context + ": needs columns 'snp_id' and '" + column + "'");
  }
  const auto id_col = static_cast<std::size_t>(id_it - header.begin());
  const auto sc_col = static_cast<std::size_t>(sc_it - header.begin());
  ScoreTable t;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_tabs(line);
    if (f.size() != header.size()) throw ParseError(context + ": ragged row");
    t.snp_ids.push_back(f[id_col]);
    values.push_back(io::parse_double(f[sc_col], context));
  }
  t.scores = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return t;
}

inline std::string write_aggregate_tsv(const SeedAggregate& a, const std::vector<AttributionSummary>& summaries,
                                       const std::vector<std::string>& snp_ids) {
  std::string out = "snp_id";
  for (auto seed : a.seeds) out += "\tseed_" + std::to_string(seed);
  out += "\tmean_abs_score\tselection_frequency\n";
  for (std::size_t i = 0; i < snp_ids.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out += snp_ids[i];
    for (const auto& s : summaries) out += '\t' + io::format_double(s.mean_abs(ii));
    out += '\t' + io::format_double(a.pooled_mean(ii)) + '\t' + io::format_double(a.selection_frequency(ii)) + '\n';
  }
  return out;
}

}  // namespace dlgwas
