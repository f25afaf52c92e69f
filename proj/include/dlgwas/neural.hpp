#pragma once
// Feedforward networks trained from scratch: ReLU hidden layers, a single
// output unit read as a logit (binary traits) or a prediction (continuous
// traits), Adam with minibatches, an L1 penalty on the first-layer weights,
// and early stopping on a held-out split.
//
// Batches are row-per-sample: a B x in input gives pre-activations
// Z = X * W^T + b (B x out).

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlgwas/error.hpp"
#include "dlgwas/io.hpp"
#include "dlgwas/phenotype.hpp"
#include "dlgwas/rng.hpp"

namespace dlgwas {

enum class Activation : uint8_t { identity = 0, relu = 1 };
enum class HeadKind : uint8_t { sigmoid_binary = 0, identity_regression = 1 };

inline HeadKind head_for(TraitKind k) {
  return k == TraitKind::binary ? HeadKind::sigmoid_binary : HeadKind::identity_regression;
}

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::relu;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
  bool operator==(const DenseLayer& o) const {
    return activation == o.activation && weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
  }
};

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::vector<DenseLayer> layers, HeadKind head, std::string arch_tag = {})
      : layers_(std::move(layers)), head_(head), arch_tag_(std::move(arch_tag)) {
    check_chain();
  }
  MlpModel(const MlpModel& o)
      : train_meta(o.train_meta), layers_(o.layers_), head_(o.head_), arch_tag_(o.arch_tag_) {}
  MlpModel& operator=(const MlpModel& o) {
    layers_ = o.layers_;
    head_ = o.head_;
    arch_tag_ = o.arch_tag_;
    train_meta = o.train_meta;
    instance_ = next_instance();
    revision_ = 0;
    return *this;
  }
  MlpModel(MlpModel&&) = default;
  MlpModel& operator=(MlpModel&&) = default;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Any mutable access invalidates outstanding forward traces.
  std::vector<DenseLayer>& mutable_layers() {
    ++revision_;
    return layers_;
  }
  HeadKind head() const { return head_; }
  const std::string& arch_tag() const { return arch_tag_; }
  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
  uint64_t instance() const { return instance_; }
  uint64_t revision() const { return revision_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  void check_chain() const {
    if (layers_.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.bias.size() != l.out()) throw DimensionMismatchError("bias length differs from layer width");
      if (k > 0 && layers_[k - 1].out() != l.in()) {
        throw DimensionMismatchError("layer " + std::to_string(k) + " input does not chain with previous output");
      }
    }
    if (layers_.back().out() != 1) throw DimensionMismatchError("output layer must have a single unit");
  }

  bool same_parameters(const MlpModel& o) const { return head_ == o.head_ && layers_ == o.layers_; }

  nlohmann::json train_meta = nlohmann::json::object();

 private:
  static uint64_t next_instance() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::vector<DenseLayer> layers_;
  HeadKind head_ = HeadKind::sigmoid_binary;
  std::string arch_tag_;
  uint64_t instance_ = next_instance();
  uint64_t revision_ = 0;
};

inline std::string arch_tag_for(const std::vector<std::size_t>& hidden) {
  std::string tag;
  for (auto h : hidden) tag += (tag.empty() ? "" : " by ") + std::to_string(h);
  return tag.empty() ? "linear" : tag;
}

// Hidden ReLU layers of the given widths followed by one identity output
// unit. Glorot-uniform weights, zero biases.
inline MlpModel init_model(const std::vector<std::size_t>& hidden, std::size_t input_dim, uint64_t seed,
                           HeadKind head = HeadKind::sigmoid_binary, Activation hidden_activation = Activation::relu) {
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  std::vector<DenseLayer> layers;
  Rng rng(seed, "nn.init");
  std::size_t fan_in = input_dim;
  auto add = [&](std::size_t width, Activation act) {
    if (width == 0) throw ConfigError("layer width must be positive");
    DenseLayer l;
    l.activation = act;
    l.weight.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + width));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-bound, bound);
    }
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    layers.push_back(std::move(l));
    fan_in = width;
  };
  for (auto h : hidden) add(h, hidden_activation);
  add(1, Activation::identity);
  return MlpModel(std::move(layers), head, arch_tag_for(hidden));
}

inline double activate(Activation a, double z) { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : z; }

inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  return a == Activation::relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
}

struct ForwardTrace {
  Eigen::MatrixXd input;                 // B x in
  std::vector<Eigen::MatrixXd> pre;      // per layer, B x out
  std::vector<Eigen::MatrixXd> post;     // per layer, B x out
  uint64_t model_instance = 0;
  uint64_t model_revision = 0;

  // Output neuron before any sigmoid: B-vector.
  Eigen::VectorXd output() const { return post.back().col(0); }
};

template <typename Derived>
ForwardTrace forward(const MlpModel& model, const Eigen::MatrixBase<Derived>& batch) {
  if (batch.cols() != model.input_dim()) {
    throw DimensionMismatchError("batch width " + std::to_string(batch.cols()) + " != model input dim " +
                                 std::to_string(model.input_dim()));
  }
  ForwardTrace t;
  t.input = batch;
  t.model_instance = model.instance();
  t.model_revision = model.revision();
  t.pre.reserve(model.layers().size());
  t.post.reserve(model.layers().size());
  const Eigen::MatrixXd* prev = &t.input;
  for (const auto& l : model.layers()) {
    Eigen::MatrixXd z = (*prev) * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    t.post.push_back(activate(l.activation, z));
    t.pre.push_back(std::move(z));
    prev = &t.post.back();
  }
  return t;
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

// Binary cross-entropy of a logit, log-sum-exp form.
inline double bce_from_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

inline void check_targets(HeadKind head, const Eigen::VectorXd& targets) {
  if (head != HeadKind::sigmoid_binary) return;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    if (targets(i) != 0.0 && targets(i) != 1.0) throw DataError("binary targets must be 0 or 1");
  }
}

// Mean data loss of the output column (no penalty).
inline double data_loss(HeadKind head, const Eigen::VectorXd& out, const Eigen::VectorXd& targets) {
  if (out.size() != targets.size()) throw DimensionMismatchError("target count differs from batch size");
  if (out.size() == 0) throw DataError("loss of an empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (head == HeadKind::sigmoid_binary) {
      total += bce_from_logit(out(i), targets(i));
    } else {
      const double r = out(i) - targets(i);
      total += r * r;
    }
  }
  return total / static_cast<double>(out.size());
}

inline double l1_penalty(const MlpModel& model, double l1) {
  return l1 == 0.0 ? 0.0 : l1 * model.layers().front().weight.cwiseAbs().sum();
}

template <typename Derived>
double loss(const MlpModel& model, const Eigen::MatrixBase<Derived>& batch, const Eigen::VectorXd& targets,
            double l1) {
  check_targets(model.head(), targets);
  return data_loss(model.head(), forward(model, batch).output(), targets) + l1_penalty(model, l1);
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
};

inline double sign_of(double w) { return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0); }

// Exact gradients of loss(model, trace.input, targets, l1). The L1 term uses
// the subgradient sign(w) with sign(0) = 0.
inline Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Eigen::VectorXd& targets,
                          double l1) {
  if (trace.model_instance != model.instance() || trace.model_revision != model.revision()) {
    throw std::logic_error("backward: trace was produced by a different or since-modified model");
  }
  check_targets(model.head(), targets);
  const auto& layers = model.layers();
  const auto n_layers = layers.size();
  const double inv_b = 1.0 / static_cast<double>(trace.input.rows());

  // dL/d(output pre-activation), B x 1.
  Eigen::MatrixXd delta(trace.input.rows(), 1);
  const auto& out = trace.post.back();
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    delta(i, 0) = model.head() == HeadKind::sigmoid_binary ? (sigmoid(out(i, 0)) - targets(i)) * inv_b
                                                           : 2.0 * (out(i, 0) - targets(i)) * inv_b;
  }
  if (layers.back().activation == Activation::relu) {
    delta = delta.cwiseProduct((trace.pre.back().array() > 0.0).cast<double>().matrix());
  }

  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);
  for (std::size_t k = n_layers; k-- > 0;) {
    const Eigen::MatrixXd& below = k == 0 ? trace.input : trace.post[k - 1];
    g.weight[k] = delta.transpose() * below;
    g.bias[k] = delta.colwise().sum().transpose();
    if (k == 0) break;
    delta = delta * layers[k].weight;
    if (layers[k - 1].activation == Activation::relu) {
      delta = delta.cwiseProduct((trace.pre[k - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  if (l1 != 0.0) g.weight[0] += l1 * layers[0].weight.unaryExpr([](double w) { return sign_of(w); });
  return g;
}

// --- training -------------------------------------------------------------

struct SplitFractions {
  double train = 0.50;
  double early_stop = 0.25;
  double validation = 0.25;

  void validate() const {
    if (!(train > 0 && early_stop > 0 && validation > 0)) throw ConfigError("split fractions must be positive");
    if (std::abs(train + early_stop + validation - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
};

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> early_stop;
  std::vector<Eigen::Index> validation;
};

// Deterministic shuffle of 0..n-1, then a contiguous cut.
inline SplitIndices make_split(std::size_t n, SplitFractions f, uint64_t seed) {
  f.validate();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed, "nn.split");
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_stop = static_cast<std::size_t>(std::llround(f.early_stop * static_cast<double>(n)));
  if (n_train == 0 || n_stop == 0 || n_train + n_stop >= n) throw DataError("a data split is empty");
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.early_stop.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_stop));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_stop), order.end());
  return s;
}

struct TrainConfig {
  double l1_coeff = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  uint64_t seed = 0;
  SplitFractions split;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Early stopping tracks the data loss plus the L1 term when true.
  bool early_stop_on_objective = false;

  void validate() const {
    if (!(l1_coeff >= 0.0)) throw ConfigError("l1_coeff must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch_size and max_epochs must be positive");
    split.validate();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"l1_coeff", c.l1_coeff}, {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs}, {"patience", c.patience}, {"seed", c.seed},
          {"split", {c.split.train, c.split.early_stop, c.split.validation}},
          {"early_stop_on_objective", c.early_stop_on_objective}};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;       // mean batch objective, penalty included
  double early_stop_loss = 0.0;  // mean data loss on the early-stop split
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_early_stop_loss = std::numeric_limits<double>::infinity();
};

// Mean data loss over the given rows, evaluated in chunks.
inline double split_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const std::vector<Eigen::Index>& rows) {
  if (rows.empty()) throw DataError("loss over an empty split");
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::vector<Eigen::Index> idx(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                        rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), start + kChunk)));
    const Eigen::MatrixXd xb = x(idx, Eigen::all);
    const Eigen::VectorXd yb = y(idx);
    total += data_loss(model.head(), forward(model, xb).output(), yb) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(rows.size());
}

namespace detail {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  std::size_t step = 0;

  explicit AdamState(const MlpModel& m) {
    for (const auto& l : m.layers()) {
      mw.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      vw.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      mb.push_back(Eigen::VectorXd::Zero(l.bias.size()));
      vb.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
  }

  void apply(MlpModel& model, const Gradients& g, const TrainConfig& c) {
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    const double lr = c.learning_rate;
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = c.beta1 * m + (1.0 - c.beta1) * grad;
      v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
    };
    auto& layers = model.mutable_layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
      update(layers[k].weight, mw[k], vw[k], g.weight[k]);
      update(layers[k].bias, mb[k], vb[k], g.bias[k]);
    }
  }
};

}  // namespace detail

// Adam on shuffled minibatches of split.train; after every epoch the data
// loss on split.early_stop is recorded and the best-epoch weights are kept.
// Stops after `patience` epochs without improvement.
inline TrainResult train(MlpModel model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const SplitIndices& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty() || split.early_stop.empty()) throw DataError("training needs non-empty train and early-stop splits");
  if (x.rows() != y.size()) throw DimensionMismatchError("genotype rows differ from target count");
  if (x.cols() != model.input_dim()) throw DimensionMismatchError("data width differs from model input dim");
  check_targets(model.head(), y);

  TrainResult result;
  detail::AdamState adam(model);
  std::vector<Eigen::Index> order = split.train;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(cfg.seed, "nn.shuffle", epoch);
    shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<Eigen::Index> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
      const Eigen::MatrixXd xb = x(idx, Eigen::all);
      const Eigen::VectorXd yb = y(idx);
      const auto trace = forward(model, xb);
      const double batch_loss = data_loss(model.head(), trace.output(), yb) + l1_penalty(model, cfg.l1_coeff);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (lr=" + io::format_double(cfg.learning_rate) +
                            ", l1=" + io::format_double(cfg.l1_coeff) + ")");
      }
      epoch_loss += batch_loss;
      ++batches;
      adam.apply(model, backward(model, trace, yb, cfg.l1_coeff), cfg);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(batches);
    rec.early_stop_loss = split_loss(model, x, y, split.early_stop) +
                          (cfg.early_stop_on_objective ? l1_penalty(model, cfg.l1_coeff) : 0.0);
    if (!std::isfinite(rec.early_stop_loss)) {
      throw TrainingError("non-finite early-stop loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (rec.early_stop_loss < result.best_early_stop_loss) {
      result.best_early_stop_loss = rec.early_stop_loss;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.model.train_meta = {{"config", to_json(cfg)},
                             {"best_epoch", result.best_epoch},
                             {"epochs_run", result.history.size()},
                             {"best_early_stop_loss", result.best_early_stop_loss},
                             {"final_train_loss", result.history.back().train_loss}};
  return result;
}

// Mean per-sample log-likelihood over `rows`: Bernoulli with probabilities
// clamped to [1e-12, 1 - 1e-12], or a unit-variance Gaussian for regression.
inline double validation_loglik(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const std::vector<Eigen::Index>& rows) {
  if (rows.empty()) throw DataError("validation split is empty");
  const Eigen::MatrixXd xb = x(rows, Eigen::all);
  const Eigen::VectorXd out = forward(model, xb).output();
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double target = y(rows[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    if (model.head() == HeadKind::sigmoid_binary) {
      const double p = clamp_probability(sigmoid(out(ii)));
      total += target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
    } else {
      const double r = target - out(ii);
      total += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * r * r;
    }
  }
  return total / static_cast<double>(rows.size());
}

// --- GWNN model files -----------------------------------------------------
// magic "GWNN" | version u32 | head u8 | layer count u32 |
// per layer: out u64, in u64, activation u8, out*in f64 row-major, out f64 |
// train_meta JSON (u64 length + bytes)

inline constexpr uint32_t kModelVersion = 1;

inline std::string encode_model(const MlpModel& model) {
  io::ByteWriter w;
  w.put_bytes("GWNN", 4);
  w.put<uint32_t>(kModelVersion);
  w.put<uint8_t>(static_cast<uint8_t>(model.head()));
  w.put<uint32_t>(static_cast<uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    w.put<uint64_t>(static_cast<uint64_t>(l.out()));
    w.put<uint64_t>(static_cast<uint64_t>(l.in()));
    w.put<uint8_t>(static_cast<uint8_t>(l.activation));
    for (Eigen::Index r = 0; r < l.out(); ++r) {
      for (Eigen::Index c = 0; c < l.in(); ++c) w.put<double>(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.out(); ++r) w.put<double>(l.bias(r));
  }
  nlohmann::json meta = model.train_meta;
  meta["arch_tag"] = model.arch_tag();
  const std::string blob = meta.dump();
  w.put<uint64_t>(blob.size());
  w.put_bytes(blob);
  return w.bytes();
}

inline MlpModel decode_model(std::string_view bytes, const std::string& context = "model") {
  io::ByteReader r(bytes, context);
  if (bytes.size() < 4 || bytes.substr(0, 4) != "GWNN") throw BadMagicError(context + ": not a GWNN model file");
  r.get_bytes(4);
  const auto version = r.get<uint32_t>();
  if (version != kModelVersion) throw VersionError(context + ": unsupported model version " + std::to_string(version));
  const auto head_raw = r.get<uint8_t>();
  if (head_raw > 1) throw ParseError(context + ": unknown head kind");
  const auto n_layers = r.get<uint32_t>();
  std::vector<DenseLayer> layers;
  for (uint32_t k = 0; k < n_layers; ++k) {
    const auto out = r.get<uint64_t>();
    const auto in = r.get<uint64_t>();
    const auto act = r.get<uint8_t>();
    if (act > 1) throw ParseError(context + ": unknown activation tag");
    if (out == 0 || in == 0 || out > r.remaining() / 8 || in > r.remaining() / 8 / out) {
      throw TruncatedError(context + ": layer " + std::to_string(k) + " dimensions exceed file size");
    }
    DenseLayer l;
    l.activation = static_cast<Activation>(act);
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(i, c) = r.get<double>();
    }
    l.bias.resize(static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = r.get<double>();
    layers.push_back(std::move(l));
  }
  const auto blob_len = r.get<uint64_t>();
  const auto blob = r.get_bytes(blob_len);
  if (r.remaining() != 0) throw ParseError(context + ": trailing bytes after model");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(context + ": bad train_meta blob: " + e.what());
  }
  const std::string tag = meta.value("arch_tag", std::string{});
  MlpModel model(std::move(layers), static_cast<HeadKind>(head_raw), tag);
  meta.erase("arch_tag");
  model.train_meta = std::move(meta);
  return model;
}

inline void save_model(const MlpModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(model));
}

inline MlpModel load_model(const std::filesystem::path& path) { return decode_model(io::read_file(path), path.string()); }

}  // namespace dlgwas
