#ifndef ALGSEL_SGD_LAB_HPP
#define ALGSEL_SGD_LAB_HPP

// SGD on least squares with constant or epoch-decay step sizes, generation
// of consistent and inconsistent systems over one fixed matrix, labeling by
// the better schedule, and evaluation of a learned schedule selector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "algsel/ensembles.hpp"
#include "algsel/io.hpp"
#include "algsel/mlp.hpp"
#include "algsel/parallel.hpp"
#include "algsel/rng.hpp"
#include "algsel/tomo.hpp"

namespace algsel {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Schedules

struct Schedule {
  enum class Kind { Constant, EpochDecay };
  Kind kind = Kind::Constant;
  double c1 = 0.01;  // the constant, or the initial rate
  double c2 = 1.0;   // decay factor per epoch
  long c3 = 1;       // epoch length in iterations

  static Schedule constant(double c) { return {Kind::Constant, c, 1.0, 1}; }
  static Schedule epoch_decay(double c1, double c2, long c3) { return {Kind::EpochDecay, c1, c2, c3}; }

  void validate() const {
    if (!(c1 > 0) || !std::isfinite(c1)) throw std::invalid_argument("schedule: rate must be positive");
    if (kind == Kind::EpochDecay) {
      if (!(c2 > 0 && c2 <= 1)) throw std::invalid_argument("schedule: c2 must lie in (0, 1]");
      if (c3 < 1) throw std::invalid_argument("schedule: c3 must be >= 1");
    }
  }

  nlohmann::json to_json() const {
    if (kind == Kind::Constant) return {{"kind", "constant"}, {"c", c1}};
    return {{"kind", "epoch"}, {"c1", c1}, {"c2", c2}, {"c3", c3}};
  }

  static Schedule from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    Schedule s = kind == "constant" ? constant(j.at("c").get<double>())
                 : kind == "epoch"
                     ? epoch_decay(j.at("c1").get<double>(), j.at("c2").get<double>(), j.at("c3").get<long>())
                     : throw std::invalid_argument("schedule: unknown kind '" + kind + "'");
    s.validate();
    return s;
  }
};

/// Step size at iteration index t >= 0: c, or c1 c2^floor((t + 1) / c3).
inline double schedule_value(const Schedule& s, long t) {
  if (t < 0) throw std::invalid_argument("schedule_value: t must be >= 0");
  if (s.kind == Schedule::Kind::Constant) return s.c1;
  return s.c1 * std::pow(s.c2, static_cast<double>((t + 1) / s.c3));
}

// ---------------------------------------------------------------------------
// SGD

struct SgdResult {
  Vector x;
  double recovery_error = 0;
  double residual_error = 0;
  bool diverged = false;
  long diverged_at = 0;  // step at which the iterate stopped being finite
};

/// M steps of x <- x - alpha_{t-1} a_i (<a_i, x> - y_i), i uniform with
/// replacement (per-sample loss 1/2 (<a_i, x> - y_i)^2), starting from x0
/// (zero when absent).
inline SgdResult sgd_least_squares(const RowMatrix& a, const Vector& y, const Vector& x_true, const Schedule& sched,
                                   long steps, std::uint64_t seed, const Vector* x0 = nullptr) {
  sched.validate();
  if (steps < 1) throw std::invalid_argument("sgd: M must be >= 1");
  if (y.size() != a.rows() || x_true.size() != a.cols()) throw std::invalid_argument("sgd: dimension mismatch");
  if (x0 && x0->size() != a.cols()) throw std::invalid_argument("sgd: x0 length mismatch");
  Rng rng(seed);
  SgdResult out;
  out.x = x0 ? *x0 : Vector::Zero(a.cols());
  const auto m = static_cast<std::uint64_t>(a.rows());
  for (long t = 1; t <= steps; ++t) {
    const auto i = static_cast<Eigen::Index>(rng.below(m));
    const double err = a.row(i).dot(out.x) - y[i];
    out.x.noalias() -= (schedule_value(sched, t - 1) * err) * a.row(i).transpose();
    if (!std::isfinite(err) || !out.x.allFinite()) {
      out.diverged = true;
      out.diverged_at = t;
      break;
    }
  }
  if (out.diverged) {
    out.recovery_error = out.residual_error = std::numeric_limits<double>::infinity();
  } else {
    out.recovery_error = (out.x - x_true).norm();
    out.residual_error = (a * out.x - y).norm();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Systems

/// The shared matrix of a dataset plus an orthonormal basis of its range.
struct SgdMatrix {
  RowMatrix a;
  Matrix range_basis;  // m x rank(A)

  static SgdMatrix from(const Matrix& a) {
    SgdMatrix out;
    out.a = a;
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank < 1) throw std::invalid_argument("sgd matrix: A is zero");
    out.range_basis = Matrix(qr.householderQ()).leftCols(rank);
    return out;
  }

  bool full_column_rank() const { return range_basis.cols() == a.cols(); }
  /// v minus its projection onto range(A).
  Vector off_range(const Vector& v) const { return v - range_basis * (range_basis.transpose() * v); }
};

struct LsqSystem {
  Vector y;       // unit norm
  Vector x_true;  // signal on the scale of y
  bool consistent = true;
  double noise_norm = 0;  // norm of the part of y orthogonal to range(A)
};

/// y = A x / ||A x||, x_true = x / ||A x||. Throws when A x = 0.
inline LsqSystem make_consistent(const SgdMatrix& mat, const Vector& x) {
  const Vector ax = mat.a * x;
  const double norm = ax.norm();
  if (!(norm > 0)) throw std::invalid_argument("make_consistent: A x = 0");
  return {ax / norm, x / norm, true, 0.0};
}

/// y = A x/||A x|| + scale e/||e|| with e = v - P v, P the projector onto
/// range(A), then y and x_true rescaled so that ||y|| = 1. v is redrawn
/// while e = 0.
inline LsqSystem make_inconsistent(const SgdMatrix& mat, const Vector& x, double noise_scale, Rng& rng) {
  if (!(noise_scale >= 0) || !std::isfinite(noise_scale))
    throw std::invalid_argument("make_inconsistent: noise_scale must be >= 0");
  LsqSystem sys = make_consistent(mat, x);
  Vector e;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("make_inconsistent: A spans the whole space");
    Vector v(mat.a.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    e = mat.off_range(v);
    if (e.norm() > 1e-12 * v.norm()) break;
  }
  const Vector y = sys.y + noise_scale * e / e.norm();
  const double scale = 1.0 / y.norm();
  sys.y = y * scale;
  sys.x_true *= scale;
  sys.consistent = false;
  sys.noise_norm = noise_scale * scale;
  return sys;
}

inline Vector gaussian_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline LsqSystem gen_consistent(const SgdMatrix& mat, std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    const Vector x = gaussian_vector(mat.a.cols(), rng);
    if ((mat.a * x).norm() > 0) return make_consistent(mat, x);
  }
}

inline LsqSystem gen_inconsistent(const SgdMatrix& mat, double noise_scale, std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    const Vector x = gaussian_vector(mat.a.cols(), rng);
    if ((mat.a * x).norm() > 0) return make_inconsistent(mat, x, noise_scale, rng);
  }
}

/// Outcome of both schedules on one system, same sampled rows for both.
struct SystemOutcome {
  int label = 0;  // 0: schedule a (constant) is better or tied, 1: schedule b
  double recovery[2] = {0, 0};
  double residual[2] = {0, 0};
  bool dropped = false;  // both runs diverged
};

inline SystemOutcome label_system(const SgdMatrix& mat, const LsqSystem& sys, const Schedule& a, const Schedule& b,
                                  long steps, std::uint64_t seed) {
  const SgdResult ra = sgd_least_squares(mat.a, sys.y, sys.x_true, a, steps, seed);
  const SgdResult rb = sgd_least_squares(mat.a, sys.y, sys.x_true, b, steps, seed);
  SystemOutcome out;
  out.recovery[0] = ra.recovery_error;
  out.recovery[1] = rb.recovery_error;
  out.residual[0] = ra.residual_error;
  out.residual[1] = rb.residual_error;
  out.dropped = ra.diverged && rb.diverged;
  out.label = rb.recovery_error < ra.recovery_error ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

enum class SgdKind { Synthetic, Ct };

inline std::string_view to_string(SgdKind k) { return k == SgdKind::Synthetic ? "synthetic" : "ct"; }

inline SgdKind sgd_kind_from_string(std::string_view s) {
  if (s == "synthetic") return SgdKind::Synthetic;
  if (s == "ct") return SgdKind::Ct;
  throw std::invalid_argument("unknown SGD dataset kind '" + std::string(s) + "'");
}

struct SgdDatasetConfig {
  SgdKind kind = SgdKind::Synthetic;
  int count = 3000;
  long steps = 5000;
  std::uint64_t seed = 0;
  Schedule constant = Schedule::constant(0.01);
  Schedule epoch = Schedule::epoch_decay(0.01, 0.3, 100);
  double noise_scale = 1.0;
  // synthetic
  int rows = 1000;
  int cols = 100;
  // ct
  int tomo_n = 20;
  double tomo_f = 10;
  double tomo_pixel = 1.5;  // pixel edge length; the domain is [0, N pixel]^2
  std::string mnist_path;
  int jobs = 0;

  static SgdDatasetConfig synthetic() { return {}; }

  static SgdDatasetConfig ct(std::string mnist_images) {
    SgdDatasetConfig c;
    c.kind = SgdKind::Ct;
    c.epoch = Schedule::epoch_decay(0.01, 0.95, 100);
    c.noise_scale = 0.5;
    c.mnist_path = std::move(mnist_images);
    return c;
  }

  void validate() const {
    if (count < 2 || count % 2 != 0) throw std::invalid_argument("sgd dataset: count must be even and >= 2");
    if (steps < 1) throw std::invalid_argument("sgd dataset: M must be >= 1");
    constant.validate();
    epoch.validate();
    if (!(noise_scale >= 0)) throw std::invalid_argument("sgd dataset: noise_scale must be >= 0");
    if (kind == SgdKind::Synthetic && (rows < 1 || cols < 1 || rows < cols))
      throw std::invalid_argument("sgd dataset: synthetic matrix must be overdetermined");
    if (kind == SgdKind::Ct && mnist_path.empty()) throw std::invalid_argument("sgd dataset: MNIST path required");
    if (kind == SgdKind::Ct && (tomo_n < 2 || !(tomo_f > 0) || !(tomo_pixel > 0)))
      throw std::invalid_argument("sgd dataset: bad tomography parameters");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)},     {"count", count},
                        {"M", steps},                  {"seed", seed},
                        {"constant", constant.to_json()}, {"epoch", epoch.to_json()},
                        {"noise_scale", noise_scale}};
    if (kind == SgdKind::Synthetic) {
      j["matrix"] = {{"kind", "gaussian_unit_variance"}, {"rows", rows}, {"cols", cols}, {"seed", matrix_seed()}};
    } else {
      j["matrix"] = {{"kind", "tomo"}, {"N", tomo_n}, {"f", tomo_f}, {"pixel", tomo_pixel}, {"seed", matrix_seed()}};
      j["mnist"] = std::filesystem::path(mnist_path).filename().string();
    }
    return j;
  }

  std::uint64_t matrix_seed() const { return derive_seed(seed, {0x6d6174ULL}); }
};

/// The dataset matrix: a fixed N(0,1) matrix or a tomography matrix.
inline SgdMatrix sgd_matrix(const SgdDatasetConfig& cfg) {
  if (cfg.kind == SgdKind::Synthetic)
    return SgdMatrix::from(gaussian_dense(cfg.rows, cfg.cols, 1.0, cfg.matrix_seed()));
  return SgdMatrix::from(gen_tomo_dense(cfg.tomo_n, cfg.tomo_f, cfg.matrix_seed(), cfg.tomo_pixel * cfg.tomo_n));
}

struct SgdRecord {
  LsqSystem system;
  SystemOutcome outcome;
};

struct SgdDataset {
  SgdDatasetConfig config;
  std::vector<SgdRecord> records;  // consistent first, then inconsistent
  std::vector<std::string> diagnostics;
};

/// count / 2 consistent systems followed by count / 2 inconsistent ones, each
/// labeled by running both schedules with the system's own seed. Systems whose
/// two runs both diverge are dropped with a diagnostic.
inline SgdDataset build_sgd_dataset(const SgdDatasetConfig& cfg) {
  cfg.validate();
  const SgdMatrix mat = sgd_matrix(cfg);
  if (!mat.full_column_rank()) throw std::runtime_error("sgd dataset: matrix is not full column rank");
  std::vector<Vector> images;
  if (cfg.kind == SgdKind::Ct) {
    if (!std::filesystem::exists(cfg.mnist_path))
      throw std::runtime_error("sgd dataset: MNIST image file not found: " + cfg.mnist_path);
    images = load_mnist(cfg.mnist_path, cfg.count);
    if (images.size() < static_cast<std::size_t>(cfg.count))
      throw std::runtime_error("sgd dataset: need " + std::to_string(cfg.count) + " MNIST images, file has " +
                               std::to_string(images.size()));
  }
  const int half = cfg.count / 2;
  std::vector<std::optional<SgdRecord>> slots(static_cast<std::size_t>(cfg.count));
  parallel_for(slots.size(), cfg.jobs, [&](std::size_t idx) {
    const auto i = static_cast<std::uint64_t>(idx);
    const bool consistent = idx < static_cast<std::size_t>(half);
    Rng rng(derive_seed(cfg.seed, {0x737973ULL, i}));
    Vector x;
    if (cfg.kind == SgdKind::Synthetic) {
      do x = gaussian_vector(mat.a.cols(), rng);
      while (!((mat.a * x).norm() > 0));
    } else {
      x = resize_to_grid(images[idx], cfg.tomo_n);
      if (!((mat.a * x).norm() > 0)) throw std::runtime_error("sgd dataset: MNIST image " + std::to_string(idx) + " is blank");
    }
    SgdRecord rec;
    rec.system = consistent ? make_consistent(mat, x) : make_inconsistent(mat, x, cfg.noise_scale, rng);
    rec.outcome = label_system(mat, rec.system, cfg.constant, cfg.epoch, cfg.steps, derive_seed(cfg.seed, {0x736764ULL, i}));
    slots[idx] = std::move(rec);
  });
  SgdDataset out;
  out.config = cfg;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]->outcome.dropped) {
      out.diagnostics.push_back("system " + std::to_string(i) + ": both schedules diverged; dropped");
      continue;
    }
    out.records.push_back(std::move(*slots[i]));
  }
  return out;
}

/// `label,y_1..y_m`, one row per system.
inline std::string write_sgd_dataset_csv(const SgdDataset& d) {
  std::string out = "label";
  const auto m = d.records.empty() ? 0 : d.records.front().system.y.size();
  for (Eigen::Index i = 1; i <= m; ++i) out += ",y_" + std::to_string(i);
  out += '\n';
  for (const auto& r : d.records) {
    out += std::to_string(r.outcome.label);
    for (Eigen::Index i = 0; i < m; ++i) out += ',' + format_double(r.system.y[i]);
    out += '\n';
  }
  return out;
}

/// Per-system SGD outcomes (the evaluation reuses them instead of rerunning
/// the identical seeded SGD).
inline std::string write_sgd_outcomes_csv(const SgdDataset& d) {
  std::string out = "index,consistent,label,recovery_constant,recovery_epoch,residual_constant,residual_epoch\n";
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& o = d.records[i].outcome;
    out += std::to_string(i) + ',' + (d.records[i].system.consistent ? "1" : "0") + ',' + std::to_string(o.label) + ',' +
           format_double(o.recovery[0]) + ',' + format_double(o.recovery[1]) + ',' + format_double(o.residual[0]) +
           ',' + format_double(o.residual[1]) + '\n';
  }
  return out;
}

inline nlohmann::json sgd_dataset_sidecar(const SgdDataset& d) {
  nlohmann::json j = d.config.to_json();
  int consistent = 0, epoch_labels = 0;
  for (const auto& r : d.records) {
    consistent += r.system.consistent;
    epoch_labels += r.outcome.label;
  }
  j["rows"] = d.records.size();
  j["consistent_rows"] = consistent;
  j["epoch_labels"] = epoch_labels;
  j["features"] = d.records.empty() ? 0 : d.records.front().system.y.size();
  j["diagnostics"] = d.diagnostics;
  return j;
}

/// Reads the two CSV files back into records (signals are not stored, so
/// x_true is left empty).
inline SgdDataset read_sgd_dataset(const std::filesystem::path& dataset_csv, const std::filesystem::path& outcomes_csv) {
  SgdDataset d;
  {
    std::istringstream is(read_file(dataset_csv));
    std::string line;
    if (!std::getline(is, line) || line.rfind("label", 0) != 0)
      throw std::runtime_error(dataset_csv.string() + ": missing header");
    const auto width = split_csv_line(line).size();
    int lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != width) throw std::runtime_error(dataset_csv.string() + ":" + std::to_string(lineno) + ": wrong field count");
      SgdRecord r;
      r.outcome.label = parse_number<int>(f[0], "label");
      r.system.y.resize(static_cast<Eigen::Index>(width - 1));
      for (std::size_t i = 1; i < width; ++i) r.system.y[static_cast<Eigen::Index>(i - 1)] = parse_number<double>(f[i], "y");
      d.records.push_back(std::move(r));
    }
  }
  std::istringstream is(read_file(outcomes_csv));
  std::string line;
  std::getline(is, line);
  std::size_t i = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7 || i >= d.records.size())
      throw std::runtime_error(outcomes_csv.string() + ": does not match the dataset");
    auto& r = d.records[i++];
    r.system.consistent = f[1] == "1";
    if (parse_number<int>(f[2], "label") != r.outcome.label)
      throw std::runtime_error(outcomes_csv.string() + ": label mismatch at row " + std::to_string(i));
    r.outcome.recovery[0] = parse_number<double>(f[3], "recovery");
    r.outcome.recovery[1] = parse_number<double>(f[4], "recovery");
    r.outcome.residual[0] = parse_number<double>(f[5], "residual");
    r.outcome.residual[1] = parse_number<double>(f[6], "residual");
  }
  if (i != d.records.size()) throw std::runtime_error(outcomes_csv.string() + ": row count mismatch");
  return d;
}

inline LabeledData sgd_labeled_data(const SgdDataset& d, const std::vector<int>& rows) {
  if (d.records.empty()) throw std::invalid_argument("sgd: empty dataset");
  const auto m = d.records.front().system.y.size();
  LabeledData out{Matrix(static_cast<Eigen::Index>(rows.size()), m), Vector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = d.records[static_cast<std::size_t>(rows[i])];
    out.x.row(static_cast<Eigen::Index>(i)) = r.system.y.transpose();
    out.y[static_cast<Eigen::Index>(i)] = r.outcome.label;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Selector evaluation

inline constexpr int kSgdHiddenNodes = 30;

struct SelectorTrial {
  double accuracy = 0;
  double recovery[3] = {0, 0, 0};  // constant, epoch, predicted
  double residual[3] = {0, 0, 0};
};

struct SelectorReport {
  double train_fraction = 0;
  int trials = 0;
  double accuracy = 0;
  double recovery[3] = {0, 0, 0};
  double residual[3] = {0, 0, 0};
  std::vector<SelectorTrial> per_trial;
};

/// Train/test split of trial t: a seeded permutation, first round(f N) rows train.
inline std::pair<std::vector<int>, std::vector<int>> selector_split(std::size_t n, double train_fraction,
                                                                    std::uint64_t seed, int trial) {
  Rng rng(derive_seed(seed, {0x73706c6974ULL, static_cast<std::uint64_t>(trial)}));
  const auto order = permutation(rng, static_cast<int>(n));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw std::invalid_argument("selector: split leaves an empty side");
  return {std::vector<int>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<int>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end())};
}

/// Error averages over the test rows for constant-only, epoch-only and the
/// predicted schedule (label 1 means epoch).
inline SelectorTrial score_predictions(const SgdDataset& d, const std::vector<int>& test,
                                       const std::vector<int>& predicted) {
  SelectorTrial t;
  int hits = 0;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& o = d.records[static_cast<std::size_t>(test[k])].outcome;
    const int p = predicted[k];
    hits += p == o.label;
    for (int s = 0; s < 2; ++s) {
      t.recovery[s] += o.recovery[s];
      t.residual[s] += o.residual[s];
    }
    t.recovery[2] += o.recovery[p];
    t.residual[2] += o.residual[p];
  }
  const auto n = static_cast<double>(test.size());
  t.accuracy = hits / n;
  for (int s = 0; s < 3; ++s) {
    t.recovery[s] /= n;
    t.residual[s] /= n;
  }
  return t;
}

/// For each trial: split, train an m -> 30 -> 1 network on the training rows,
/// predict the test rows, and average the errors of the three policies.
inline SelectorReport evaluate_selector(const SgdDataset& d, double train_fraction, int trials, const TrainConfig& base) {
  if (trials < 1) throw std::invalid_argument("selector: trials must be >= 1");
  if (d.records.empty()) throw std::invalid_argument("selector: empty dataset");
  SelectorReport rep;
  rep.train_fraction = train_fraction;
  rep.trials = trials;
  const auto m = static_cast<int>(d.records.front().system.y.size());
  for (int t = 0; t < trials; ++t) {
    const auto [train_rows, test_rows] = selector_split(d.records.size(), train_fraction, base.seed, t);
    TrainConfig cfg = base;
    cfg.train_fraction = train_fraction;
    cfg.seed = derive_seed(base.seed, {0x747269616cULL, static_cast<std::uint64_t>(t)});
    const auto res = train(mlp_init({m, kSgdHiddenNodes, 1}, cfg.seed), sgd_labeled_data(d, train_rows), cfg);
    const Vector p = predict_proba(res.model, sgd_labeled_data(d, test_rows).x);
    std::vector<int> predicted(test_rows.size());
    for (std::size_t k = 0; k < predicted.size(); ++k) predicted[k] = p[static_cast<Eigen::Index>(k)] >= 0.5 ? 1 : 0;
    rep.per_trial.push_back(score_predictions(d, test_rows, predicted));
  }
  for (const auto& t : rep.per_trial) {
    rep.accuracy += t.accuracy / trials;
    for (int s = 0; s < 3; ++s) {
      rep.recovery[s] += t.recovery[s] / trials;
      rep.residual[s] += t.residual[s] / trials;
    }
  }
  return rep;
}

inline std::string selector_report_header() {
  return "train_fraction,trials,accuracy,recovery_constant,recovery_epoch,recovery_nn,residual_constant,"
         "residual_epoch,residual_nn\n";
}

inline std::string selector_report_line(const SelectorReport& r) {
  std::string s = format_double(r.train_fraction) + ',' + std::to_string(r.trials) + ',' + format_double(r.accuracy);
  for (double v : r.recovery) s += ',' + format_double(v);
  for (double v : r.residual) s += ',' + format_double(v);
  return s + '\n';
}

// ---------------------------------------------------------------------------
// Mixture curves

struct ClassErrors {
  double const_on_consistent = 0;
  double const_on_inconsistent = 0;
  double epoch_on_consistent = 0;
  double epoch_on_inconsistent = 0;
};

struct MixturePoint {
  double p = 0;  // fraction of inconsistent systems
  double constant = 0;
  double epoch = 0;
  double nn = 0;
};

/// Expected average recovery error against the inconsistent fraction p for
/// constant-only, epoch-only and a selector that picks each class's better
/// schedule with probability `accuracy`.
inline std::vector<MixturePoint> mixture_curve(const ClassErrors& e, double accuracy, const std::vector<double>& p_grid) {
  for (double v : {e.const_on_consistent, e.const_on_inconsistent, e.epoch_on_consistent, e.epoch_on_inconsistent})
    if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("mixture_curve: errors must be finite and >= 0");
  if (!(accuracy >= 0 && accuracy <= 1)) throw std::invalid_argument("mixture_curve: accuracy must lie in [0, 1]");
  auto pick = [accuracy](double a, double b) {
    return accuracy * std::min(a, b) + (1 - accuracy) * std::max(a, b);
  };
  const double nn_cons = pick(e.const_on_consistent, e.epoch_on_consistent);
  const double nn_incons = pick(e.const_on_inconsistent, e.epoch_on_inconsistent);
  std::vector<MixturePoint> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("mixture_curve: p must lie in [0, 1]");
    out.push_back({p, (1 - p) * e.const_on_consistent + p * e.const_on_inconsistent,
                   (1 - p) * e.epoch_on_consistent + p * e.epoch_on_inconsistent, (1 - p) * nn_cons + p * nn_incons});
  }
  return out;
}

/// p = i / (points - 1).
inline std::vector<double> unit_grid(int points) {
  if (points < 2) throw std::invalid_argument("unit_grid: need at least two points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return g;
}

/// The open interval of p where the selector curve is strictly below both
/// fixed curves (all three are affine, so it is one interval or empty).
inline std::optional<std::pair<double, double>> selector_advantage_interval(const ClassErrors& e, double accuracy) {
  const auto ends = mixture_curve(e, accuracy, {0.0, 1.0});
  // g(p) = nn(p) - fixed(p), affine; find where g < 0 on [0, 1].
  double lo = 0, hi = 1;
  for (auto fixed : {&MixturePoint::constant, &MixturePoint::epoch}) {
    const double g0 = ends[0].nn - ends[0].*fixed, g1 = ends[1].nn - ends[1].*fixed;
    if (g0 >= 0 && g1 >= 0) return std::nullopt;
    if (g0 < 0 && g1 < 0) continue;
    const double root = g0 / (g0 - g1);
    if (g0 < 0)
      hi = std::min(hi, root);
    else
      lo = std::max(lo, root);
  }
  if (!(lo < hi)) return std::nullopt;
  // Roots that only differ by rounding (e.g. accuracy 1/2) leave no room.
  const auto mid = mixture_curve(e, accuracy, {0.5 * (lo + hi)}).front();
  if (!(mid.nn < mid.constant && mid.nn < mid.epoch) || hi - lo < 1e-12) return std::nullopt;
  return std::make_pair(lo, hi);
}

inline std::string write_mixture_csv(const std::vector<MixturePoint>& pts) {
  std::string out = "p_inconsistent,constant,epoch,nn\n";
  for (const auto& q : pts)
    out += format_double(q.p) + ',' + format_double(q.constant) + ',' + format_double(q.epoch) + ',' + format_double(q.nn) + '\n';
  return out;
}

}  // namespace algsel

#endif  // ALGSEL_SGD_LAB_HPP
