#ifndef ALGSEL_MLP_HPP
#define ALGSEL_MLP_HPP

// Small dense feed-forward binary classifier: ReLU hidden layers, a single
// sigmoid output, mean binary cross-entropy, minibatch SGD or Adam.
// Features are standardized inside the model with statistics captured at
// training time, so callers always pass raw features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "algsel/index_set.hpp"
#include "algsel/rng.hpp"

namespace algsel {

/// One sample per row.
struct LabeledData {
  Matrix x;
  Vector y;  // 0 or 1

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index features() const { return x.cols(); }

  LabeledData subset(const std::vector<int>& rows) const {
    LabeledData out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
      out.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
    }
    return out;
  }

  bool has_both_classes() const {
    return size() > 0 && (y.array() == 0.0).any() && (y.array() == 1.0).any();
  }
};

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

struct MlpModel {
  std::vector<int> layer_sizes;
  std::vector<DenseLayer> layers;
  Vector feature_mean;
  Vector feature_std;
  std::vector<std::string> feature_names;  // optional schema tag
  nlohmann::json train_config = nlohmann::json::object();

  int input_size() const { return layer_sizes.front(); }

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("MlpModel: need at least two layers");
    if (layer_sizes.back() != 1) throw std::invalid_argument("MlpModel: output layer must have size 1");
    if (layers.size() != layer_sizes.size() - 1) throw std::invalid_argument("MlpModel: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].w.rows() != layer_sizes[l + 1] || layers[l].w.cols() != layer_sizes[l] ||
          layers[l].b.size() != layer_sizes[l + 1])
        throw std::invalid_argument("MlpModel: weight shapes do not chain");
    }
    if (feature_mean.size() != input_size() || feature_std.size() != input_size())
      throw std::invalid_argument("MlpModel: standardization size mismatch");
    if ((feature_std.array() <= 0.0).any()) throw std::invalid_argument("MlpModel: non-positive feature std");
    if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(input_size()))
      throw std::invalid_argument("MlpModel: feature name count mismatch");
  }
};

/// Weights uniform on +-sqrt(6 / fan_in) (He uniform), biases zero,
/// identity standardization.
inline MlpModel mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp_init: need at least two layers");
  for (int s : layer_sizes)
    if (s < 1) throw std::invalid_argument("mlp_init: layer sizes must be positive");
  if (layer_sizes.back() != 1) throw std::invalid_argument("mlp_init: output layer must have size 1");
  Rng rng(seed);
  MlpModel m;
  m.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l], out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / in);
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.w(i, j) = rng.uniform(-limit, limit);
    m.layers.push_back(std::move(layer));
  }
  m.feature_mean = Vector::Zero(layer_sizes.front());
  m.feature_std = Vector::Ones(layer_sizes.front());
  return m;
}

/// Per-feature mean and population standard deviation; zero-variance
/// features get std 1.
inline void fit_standardization(MlpModel& m, const Matrix& x) {
  if (x.cols() != m.input_size()) throw std::invalid_argument("fit_standardization: feature count mismatch");
  if (x.rows() == 0) throw std::invalid_argument("fit_standardization: no rows");
  m.feature_mean = x.colwise().mean().transpose();
  m.feature_std.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - m.feature_mean[j]).square().mean();
    m.feature_std[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
}

namespace detail {

/// Standardized features, one sample per column.
inline Matrix standardized_columns(const MlpModel& m, const Matrix& x_rows) {
  if (x_rows.cols() != m.input_size()) throw std::invalid_argument("mlp: feature length mismatch");
  return ((x_rows.rowwise() - m.feature_mean.transpose()).array().rowwise() /
          m.feature_std.transpose().array())
      .matrix()
      .transpose();
}

/// Forward pass keeping every layer's pre-activation (z) and activation (a).
struct Trace {
  std::vector<Matrix> a;  // a[0] = input, a[l+1] = activation of layer l
  std::vector<Matrix> z;  // z[l] = pre-activation of layer l
};

inline Trace trace(const MlpModel& m, Matrix input) {
  Trace t;
  t.a.push_back(std::move(input));
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Matrix z = m.layers[l].w * t.a.back();
    z.colwise() += m.layers[l].b;
    Matrix act = l + 1 < m.layers.size() ? Matrix(z.cwiseMax(0.0)) : z;
    t.z.push_back(std::move(z));
    t.a.push_back(std::move(act));
  }
  return t;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Binary cross-entropy of sigmoid(z) against label t, in the stable
/// pre-sigmoid form max(z, 0) - z t + log(1 + exp(-|z|)).
inline double bce_from_logit(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace detail

/// Output pre-activations for every row of x.
inline Vector logits(const MlpModel& m, const Matrix& x_rows) {
  const auto t = detail::trace(m, detail::standardized_columns(m, x_rows));
  return t.z.back().row(0).transpose();
}

/// Probabilities for every row of x.
inline Vector predict_proba(const MlpModel& m, const Matrix& x_rows) {
  Vector z = logits(m, x_rows);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = detail::sigmoid(z[i]);
  return z;
}

/// Probability for a single feature vector.
inline double forward(const MlpModel& m, const Vector& x) {
  if (x.size() != m.input_size()) throw std::invalid_argument("forward: feature length mismatch");
  return predict_proba(m, x.transpose())[0];
}

inline double mean_bce(const MlpModel& m, const LabeledData& d) {
  const Vector z = logits(m, d.x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) sum += detail::bce_from_logit(z[i], d.y[i]);
  return sum / static_cast<double>(z.size());
}

struct Gradients {
  std::vector<Matrix> w;
  std::vector<Vector> b;
};

/// Exact gradient of the mean BCE over the batch. The ReLU derivative at 0
/// is taken as 0.
inline Gradients grad(const MlpModel& m, const LabeledData& batch) {
  if (batch.size() == 0) throw std::invalid_argument("grad: empty batch");
  for (Eigen::Index i = 0; i < batch.y.size(); ++i)
    if (batch.y[i] != 0.0 && batch.y[i] != 1.0) throw std::invalid_argument("grad: labels must be 0 or 1");
  const auto t = detail::trace(m, detail::standardized_columns(m, batch.x));
  const auto count = static_cast<double>(batch.size());
  const std::size_t layers = m.layers.size();

  Gradients g;
  g.w.resize(layers);
  g.b.resize(layers);
  // d(mean BCE)/dz_out = (sigmoid(z) - t) / B
  Matrix delta(1, batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    delta(0, i) = (detail::sigmoid(t.z.back()(0, i)) - batch.y[i]) / count;
  for (std::size_t l = layers; l-- > 0;) {
    g.w[l] = delta * t.a[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = m.layers[l].w.transpose() * delta;
    delta = back.array() * (t.z[l - 1].array() > 0.0).cast<double>();
  }
  return g;
}

/// Fraction of rows whose prediction (probability >= 0.5 means class 1)
/// equals the label.
inline double evaluate(const MlpModel& m, const LabeledData& rows) {
  if (rows.size() == 0) throw std::invalid_argument("evaluate: no rows");
  const Vector p = predict_proba(m, rows.x);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) hits += ((p[i] >= 0.5 ? 1.0 : 0.0) == rows.y[i]);
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(train_fraction > 0 && train_fraction < 1))
      throw std::invalid_argument("TrainConfig: train_fraction must lie in (0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"optimizer", optimizer == Optimizer::Adam ? "adam" : "sgd"},
            {"seed", seed},
            {"train_fraction", train_fraction},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_epsilon", adam_epsilon}};
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
};

/// Uniform random permutation of 0..n-1 (Fisher-Yates with Rng::below).
inline std::vector<int> permutation(Rng& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return p;
}

namespace detail {

inline bool train_once(MlpModel& m, const LabeledData& data, const TrainConfig& cfg, double lr,
                       std::vector<EpochRecord>& history) {
  Rng rng(derive_seed(cfg.seed, {0x7472ULL}));
  const std::size_t layers = m.layers.size();
  std::vector<Matrix> mw(layers), vw(layers);
  std::vector<Vector> mb(layers), vb(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    mw[l] = Matrix::Zero(m.layers[l].w.rows(), m.layers[l].w.cols());
    vw[l] = mw[l];
    mb[l] = Vector::Zero(m.layers[l].b.size());
    vb[l] = mb[l];
  }
  const auto n = static_cast<int>(data.size());
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = permutation(rng, n);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      const std::vector<int> rows(order.begin() + start, order.begin() + stop);
      const Gradients g = grad(m, data.subset(rows));
      ++step;
      for (std::size_t l = 0; l < layers; ++l) {
        if (cfg.optimizer == Optimizer::Sgd) {
          m.layers[l].w -= lr * g.w[l];
          m.layers[l].b -= lr * g.b[l];
          continue;
        }
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        mw[l] = b1 * mw[l] + (1 - b1) * g.w[l];
        vw[l] = b2 * vw[l] + (1 - b2) * g.w[l].cwiseAbs2();
        mb[l] = b1 * mb[l] + (1 - b1) * g.b[l];
        vb[l] = b2 * vb[l] + (1 - b2) * g.b[l].cwiseAbs2();
        m.layers[l].w.array() -=
            lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + cfg.adam_epsilon);
        m.layers[l].b.array() -=
            lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + cfg.adam_epsilon);
      }
    }
    const double loss = mean_bce(m, data);
    if (!std::isfinite(loss)) return false;
    history.push_back({epoch, loss, evaluate(m, data)});
  }
  return true;
}

}  // namespace detail

/// Fits standardization on `train_rows`, then runs minibatch optimization of
/// the mean BCE. A non-finite epoch loss restarts once from the initial
/// parameters at half the learning rate; a second failure throws.
inline TrainResult train(const MlpModel& init, const LabeledData& train_rows, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  if (train_rows.features() != init.input_size())
    throw std::invalid_argument("train: feature count does not match the input layer");
  if (!train_rows.has_both_classes())
    throw std::invalid_argument("train: training data must contain both classes");

  double lr = cfg.learning_rate;
  for (int attempt = 0; attempt < 2; ++attempt, lr *= 0.5) {
    TrainResult out;
    out.model = init;
    fit_standardization(out.model, train_rows.x);
    if (detail::train_once(out.model, train_rows, cfg, lr, out.history)) {
      out.model.train_config = cfg.to_json();
      out.model.train_config["effective_learning_rate"] = lr;
      return out;
    }
  }
  throw std::runtime_error("train: loss became non-finite twice; giving up");
}

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,loss,train_accuracy\n";
  os << std::setprecision(17);
  for (const auto& r : history) os << r.epoch << ',' << r.loss << ',' << r.accuracy << '\n';
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr const char* kMlpSchema = "algsel.mlp";
inline constexpr int kMlpSchemaVersion = 1;

inline nlohmann::json to_json(const MlpModel& m) {
  m.validate();
  nlohmann::json j;
  j["schema"] = kMlpSchema;
  j["version"] = kMlpSchemaVersion;
  j["layer_sizes"] = m.layer_sizes;
  j["hidden_activation"] = "relu";
  j["output_activation"] = "sigmoid";
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : m.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.w.size()));
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
      for (Eigen::Index k = 0; k < layer.w.cols(); ++k) w.push_back(layer.w(i, k));
    j["layers"].push_back({{"weights_row_major", w},
                           {"biases", std::vector<double>(layer.b.data(), layer.b.data() + layer.b.size())}});
  }
  j["standardization"] = {
      {"mean", std::vector<double>(m.feature_mean.data(), m.feature_mean.data() + m.feature_mean.size())},
      {"std", std::vector<double>(m.feature_std.data(), m.feature_std.data() + m.feature_std.size())}};
  j["feature_names"] = m.feature_names;
  j["train_config"] = m.train_config;
  return j;
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema", "") != kMlpSchema)
    throw std::runtime_error("model: not an algsel.mlp document");
  if (j.value("version", -1) != kMlpSchemaVersion)
    throw std::runtime_error("model: unsupported schema version " + j.value("version", nlohmann::json()).dump());
  if (j.value("hidden_activation", "") != "relu" || j.value("output_activation", "") != "sigmoid")
    throw std::runtime_error("model: unsupported activations");
  MlpModel m;
  try {
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    if (m.layer_sizes.size() < 2 || layers.size() != m.layer_sizes.size() - 1)
      throw std::runtime_error("model: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("weights_row_major").get<std::vector<double>>();
      const auto b = layers[l].at("biases").get<std::vector<double>>();
      const int in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
      if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out))
        throw std::runtime_error("model: weight array size mismatch");
      DenseLayer layer{Matrix(out, in), Vector(out)};
      for (int i = 0; i < out; ++i)
        for (int k = 0; k < in; ++k) layer.w(i, k) = w[static_cast<std::size_t>(i) * in + k];
      for (int i = 0; i < out; ++i) layer.b[i] = b[static_cast<std::size_t>(i)];
      m.layers.push_back(std::move(layer));
    }
    const auto mean = j.at("standardization").at("mean").get<std::vector<double>>();
    const auto sd = j.at("standardization").at("std").get<std::vector<double>>();
    m.feature_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.feature_std = Eigen::Map<const Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    m.train_config = j.value("train_config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model: malformed document: ") + e.what());
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  return m;
}

inline void save(const MlpModel& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("model: cannot open " + path + " for writing");
  os << to_json(m).dump(1) << '\n';
  if (!os) throw std::runtime_error("model: write to " + path + " failed");
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("model: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("model: parse error in " + path + ": " + e.what());
  }
  return mlp_from_json(j);
}

}  // namespace algsel

#endif  // ALGSEL_MLP_HPP
