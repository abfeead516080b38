#ifndef ALGSEL_PHASE_LAB_HPP
#define ALGSEL_PHASE_LAB_HPP

// Labeled success data over the (delta, rho) plane, one dataset per solver,
// and the classifier that predicts success from (n, m, s, ensemble).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "algsel/ensembles.hpp"
#include "algsel/greedy.hpp"
#include "algsel/io.hpp"
#include "algsel/mlp.hpp"
#include "algsel/parallel.hpp"

namespace algsel {

struct GridPoint {
  double delta = 0;
  double rho = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

inline constexpr int kDeskRhoSteps = 16;   // 19 x 16 = 304 points
inline constexpr int kPaperRhoSteps = 39;  // 19 x 39 = 741 points

/// delta in {0.05, 0.10, ..., 0.95}; for each, rho = (j - 1/2) / rho_steps,
/// j = 1..rho_steps. rho = 1 is left out: with s = m every solver fits y
/// exactly, so the residual test reports convergence without recovery.
inline std::vector<GridPoint> default_grid(int rho_steps) {
  if (rho_steps < 1) throw std::invalid_argument("default_grid: rho_steps must be >= 1");
  std::vector<GridPoint> out;
  for (int i = 1; i <= 19; ++i)
    for (int j = 1; j <= rho_steps; ++j) out.push_back({i / 20.0, (j - 0.5) / rho_steps});
  return out;
}

/// delta = i / side, rho = j / side for i, j = 1..side.
inline std::vector<GridPoint> uniform_grid(int side) {
  if (side < 1) throw std::invalid_argument("uniform_grid: side must be >= 1");
  std::vector<GridPoint> out;
  for (int i = 1; i <= side; ++i)
    for (int j = 1; j <= side; ++j) out.push_back({static_cast<double>(i) / side, static_cast<double>(j) / side});
  return out;
}

/// Grid file: optional header "delta,rho", then one point per line.
inline std::vector<GridPoint> read_grid_csv(const std::string& path) {
  std::istringstream is(read_file(path));
  std::vector<GridPoint> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "delta,rho" || line == "delta,rho\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected delta,rho");
    GridPoint p{parse_number<double>(f[0], "delta"), parse_number<double>(f[1], "rho")};
    if (!(p.delta > 0 && p.delta <= 1 && p.rho > 0 && p.rho <= 1))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": point outside (0,1]^2");
    out.push_back(p);
  }
  if (out.empty()) throw std::runtime_error(path + ": grid is empty");
  return out;
}

// ---------------------------------------------------------------------------
// Cells

struct CellCounts {
  int success_count = 0;
  int trials = 0;
};

/// label = 1 iff success_count >= ceil(trials / 2).
inline int majority_label(int success_count, int trials) { return 2 * success_count >= trials ? 1 : 0; }

/// Runs `trials` independent problems (trial t uses seed derive_seed(seed, {t}))
/// and counts Converged outcomes. A solver exception counts as a failure.
inline CellCounts run_cell(Algorithm algo, EnsembleKind ens, const PlanePoint& point, int trials,
                           const StoppingConfig& cfg, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("label_cell: trials must be >= 1");
  params_from_plane(point);  // validates
  CellCounts c{0, trials};
  for (int t = 0; t < trials; ++t) {
    try {
      const auto p = make_problem(ens, point, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      if (solve(algo, p.a, p.y, p.s, cfg).status == ExitStatus::Converged) ++c.success_count;
    } catch (const std::exception&) {
    }
  }
  return c;
}

struct CsDatasetRow {
  int n = 0, m = 0, s = 0;
  EnsembleKind ensemble = EnsembleKind::Gaussian;
  int label = 0;
  double delta = 0, rho = 0;
  int success_count = 0, trials = 0;

  friend bool operator==(const CsDatasetRow&, const CsDatasetRow&) = default;
};

inline CsDatasetRow make_row(EnsembleKind ens, const PlanePoint& point, const CellCounts& c) {
  const auto size = params_from_plane(point);
  return {point.n, size.m, size.s, ens, majority_label(c.success_count, c.trials), point.delta, point.rho,
          c.success_count, c.trials};
}

inline CsDatasetRow label_cell(Algorithm algo, EnsembleKind ens, const PlanePoint& point, int trials,
                               const StoppingConfig& cfg, std::uint64_t seed) {
  return make_row(ens, point, run_cell(algo, ens, point, trials, cfg, seed));
}

inline constexpr const char* kCsDatasetHeader = "n,m,s,ens_gauss,ens_sparse,ens_dct,label,delta,rho,success_count,trials";
inline const std::vector<std::string> kCsFeatureNames = {"n", "m", "s", "ens_gauss", "ens_sparse", "ens_dct"};

inline std::string to_csv_line(const CsDatasetRow& r) {
  std::string out = std::to_string(r.n) + ',' + std::to_string(r.m) + ',' + std::to_string(r.s);
  for (auto k : kCsEnsembles) out += r.ensemble == k ? ",1" : ",0";
  out += ',' + std::to_string(r.label) + ',' + format_double(r.delta) + ',' + format_double(r.rho) + ',' +
         std::to_string(r.success_count) + ',' + std::to_string(r.trials);
  return out;
}

inline std::string write_cs_dataset_csv(const std::vector<CsDatasetRow>& rows) {
  std::string out = std::string(kCsDatasetHeader) + '\n';
  for (const auto& r : rows) out += to_csv_line(r) + '\n';
  return out;
}

inline std::vector<CsDatasetRow> read_cs_dataset_csv(const std::string& path) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || split_csv_line(line).size() != 11 || line.rfind("n,m,s,ens_gauss", 0) != 0)
    throw std::runtime_error(path + ": missing or wrong CS dataset header");
  std::vector<CsDatasetRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 11) throw std::runtime_error(where + ": expected 11 fields");
    CsDatasetRow r;
    r.n = parse_number<int>(f[0], "n");
    r.m = parse_number<int>(f[1], "m");
    r.s = parse_number<int>(f[2], "s");
    int hot = 0;
    for (int k = 0; k < 3; ++k) {
      const int v = parse_number<int>(f[3 + static_cast<std::size_t>(k)], "ensemble indicator");
      if (v != 0 && v != 1) throw std::runtime_error(where + ": indicator must be 0 or 1");
      if (v == 1) r.ensemble = kCsEnsembles[k];
      hot += v;
    }
    if (hot != 1) throw std::runtime_error(where + ": exactly one ensemble indicator must be 1");
    r.label = parse_number<int>(f[6], "label");
    r.delta = parse_number<double>(f[7], "delta");
    r.rho = parse_number<double>(f[8], "rho");
    r.success_count = parse_number<int>(f[9], "success_count");
    r.trials = parse_number<int>(f[10], "trials");
    if (r.label != majority_label(r.success_count, r.trials))
      throw std::runtime_error(where + ": label disagrees with success_count/trials");
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dataset builder

struct CsDatasetConfig {
  std::vector<GridPoint> grid;
  std::vector<Algorithm> algorithms{std::begin(kAlgorithms), std::end(kAlgorithms)};
  std::vector<EnsembleKind> ensembles{std::begin(kCsEnsembles), std::end(kCsEnsembles)};
  int n = 1024;
  int trials = 20;
  std::uint64_t seed = 0;
  int jobs = 0;
  /// Overrides the per-algorithm stopping defaults when set.
  std::optional<StoppingConfig> stopping;

  StoppingConfig stopping_for(Algorithm a) const { return stopping ? *stopping : StoppingConfig::for_algorithm(a); }

  void validate() const {
    if (grid.empty()) throw std::invalid_argument("cs dataset: grid is empty");
    if (algorithms.empty() || ensembles.empty()) throw std::invalid_argument("cs dataset: nothing to run");
    if (trials < 1) throw std::invalid_argument("cs dataset: trials must be >= 1");
    for (auto e : ensembles)
      if (e != EnsembleKind::Gaussian && e != EnsembleKind::SparseCol && e != EnsembleKind::SubDCT)
        throw std::invalid_argument("cs dataset: ensemble must be gaussian, sparse or dct");
    for (const auto& g : grid) params_from_plane({n, g.delta, g.rho});
  }

  /// Everything that affects the rows, in a canonical text form.
  std::string fingerprint() const {
    std::string s = "n=" + std::to_string(n) + ";trials=" + std::to_string(trials) + ";seed=" + std::to_string(seed);
    for (auto a : algorithms) s += ";algo=" + std::string(to_string(a));
    for (auto e : ensembles) s += ";ens=" + std::string(to_string(e));
    if (stopping) s += ";stopping=custom";
    for (const auto& g : grid) s += ";" + format_double(g.delta) + ":" + format_double(g.rho);
    return hex64(fnv1a64(s));
  }
};

/// Problem seed of a cell. Independent of the algorithm, so every solver sees
/// the same matrices and signals.
inline std::uint64_t cell_seed(std::uint64_t seed, EnsembleKind ens, std::size_t grid_index) {
  return derive_seed(seed, {static_cast<std::uint64_t>(ens), static_cast<std::uint64_t>(grid_index)});
}

inline std::filesystem::path cs_dataset_path(const std::filesystem::path& dir, Algorithm a) {
  return dir / ("cs_dataset_" + std::string(to_string(a)) + ".csv");
}

struct CsProgress {
  std::size_t done = 0;
  std::size_t total = 0;
};

/// Labels every (algorithm, ensemble, grid point) cell and writes one CSV per
/// algorithm into out_dir (rows ordered by ensemble, then grid index).
/// Finished cells are appended to out_dir/cs_checkpoint.txt as they complete;
/// a later run with the same configuration resumes from it (or, when it is
/// complete, only rewrites the CSVs). Output is identical for any number of
/// jobs.
inline std::map<Algorithm, std::vector<CsDatasetRow>> build_cs_dataset(
    const CsDatasetConfig& cfg, const std::filesystem::path& out_dir,
    const std::function<void(const CsProgress&)>& progress = {}) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const auto ckpt_path = out_dir / "cs_checkpoint.txt";
  const std::string ckpt_header = "# algsel cs checkpoint " + cfg.fingerprint();

  const std::size_t per_algo = cfg.ensembles.size() * cfg.grid.size();
  const std::size_t total = cfg.algorithms.size() * per_algo;
  std::vector<std::optional<CellCounts>> results(total);

  if (std::filesystem::exists(ckpt_path)) {
    std::istringstream is(read_file(ckpt_path));
    std::string line;
    std::getline(is, line);
    if (line != ckpt_header)
      throw std::runtime_error(ckpt_path.string() + " belongs to a different configuration; remove it to start over");
    while (std::getline(is, line)) {
      const auto f = split_csv_line(line);
      if (f.size() != 3) continue;  // torn final line from an interrupted write
      try {
        const auto idx = parse_number<std::size_t>(f[0], "cell");
        if (idx < total)
          results[idx] = CellCounts{parse_number<int>(f[1], "success"), parse_number<int>(f[2], "trials")};
      } catch (const std::runtime_error&) {
      }
    }
  } else {
    write_file_atomic(ckpt_path, ckpt_header + '\n');
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < total; ++i)
    if (!results[i]) todo.push_back(i);

  std::ofstream ckpt(ckpt_path, std::ios::app);
  if (!ckpt) throw std::runtime_error("cannot append to " + ckpt_path.string());
  std::mutex mu;
  CsProgress prog{total - todo.size(), total};
  if (progress) progress(prog);

  parallel_for(todo.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t idx = todo[k];
    const Algorithm algo = cfg.algorithms[idx / per_algo];
    const std::size_t within = idx % per_algo;
    const EnsembleKind ens = cfg.ensembles[within / cfg.grid.size()];
    const std::size_t g = within % cfg.grid.size();
    const PlanePoint point{cfg.n, cfg.grid[g].delta, cfg.grid[g].rho};
    const CellCounts c = run_cell(algo, ens, point, cfg.trials, cfg.stopping_for(algo), cell_seed(cfg.seed, ens, g));
    std::lock_guard<std::mutex> lock(mu);
    results[idx] = c;
    ckpt << idx << ',' << c.success_count << ',' << c.trials << '\n' << std::flush;
    ++prog.done;
    if (progress) progress(prog);
  });
  ckpt.close();

  std::map<Algorithm, std::vector<CsDatasetRow>> out;
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    auto& rows = out[cfg.algorithms[a]];
    for (std::size_t e = 0; e < cfg.ensembles.size(); ++e)
      for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
        const std::size_t idx = a * per_algo + e * cfg.grid.size() + g;
        rows.push_back(make_row(cfg.ensembles[e], {cfg.n, cfg.grid[g].delta, cfg.grid[g].rho}, *results[idx]));
      }
    write_file_atomic(cs_dataset_path(out_dir, cfg.algorithms[a]), write_cs_dataset_csv(rows));
  }
  return out;
}

/// Fraction of delta columns whose labels, ordered by rho, never go from 0
/// back up to 1.
inline double monotone_column_fraction(const std::vector<CsDatasetRow>& rows, EnsembleKind ens) {
  std::map<double, std::vector<std::pair<double, int>>> cols;
  for (const auto& r : rows)
    if (r.ensemble == ens) cols[r.delta].push_back({r.rho, r.label});
  if (cols.empty()) return 0.0;
  int good = 0;
  for (auto& [delta, pts] : cols) {
    std::sort(pts.begin(), pts.end());
    bool ok = true;
    for (std::size_t i = 1; i < pts.size(); ++i) ok = ok && pts[i].second <= pts[i - 1].second;
    good += ok;
  }
  return static_cast<double>(good) / static_cast<double>(cols.size());
}

// ---------------------------------------------------------------------------
// Classifier

inline std::vector<double> cs_features(int n, int m, int s, EnsembleKind ens) {
  return {double(n), double(m), double(s), ens == EnsembleKind::Gaussian ? 1.0 : 0.0,
          ens == EnsembleKind::SparseCol ? 1.0 : 0.0, ens == EnsembleKind::SubDCT ? 1.0 : 0.0};
}

inline LabeledData cs_labeled_data(const std::vector<CsDatasetRow>& rows) {
  LabeledData d{Matrix(static_cast<Eigen::Index>(rows.size()), 6), Vector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = cs_features(rows[i].n, rows[i].m, rows[i].s, rows[i].ensemble);
    for (int j = 0; j < 6; ++j) d.x(static_cast<Eigen::Index>(i), j) = f[static_cast<std::size_t>(j)];
    d.y[static_cast<Eigen::Index>(i)] = rows[i].label;
  }
  return d;
}

inline const std::vector<int> kCsLayerSizes = {6, 3, 9, 1};

struct CsClassifier {
  MlpModel model;
  double validation_accuracy = 0;
  std::vector<EpochRecord> history;
  std::vector<int> train_rows;
  std::vector<int> validation_rows;
};

/// Shuffles the rows with the seed, trains on the first round(fraction * N)
/// and reports accuracy on the rest.
inline CsClassifier train_cs_classifier(const std::vector<CsDatasetRow>& rows, const TrainConfig& cfg) {
  cfg.validate();
  const LabeledData all = cs_labeled_data(rows);
  if (!all.has_both_classes()) throw std::invalid_argument("cs classifier: dataset has a single class; nothing to learn");
  Rng rng(derive_seed(cfg.seed, {0x73706c6974ULL}));
  const auto order = permutation(rng, static_cast<int>(rows.size()));
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(rows.size())));
  if (n_train < 1 || n_train >= rows.size()) throw std::invalid_argument("cs classifier: split leaves an empty side");
  CsClassifier out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  const LabeledData train_part = all.subset(out.train_rows);
  if (!train_part.has_both_classes())
    throw std::invalid_argument("cs classifier: training split has a single class");
  auto res = train(mlp_init(kCsLayerSizes, derive_seed(cfg.seed, {0x696e6974ULL})), train_part, cfg);
  out.model = std::move(res.model);
  out.model.feature_names = kCsFeatureNames;
  out.history = std::move(res.history);
  out.validation_accuracy = evaluate(out.model, all.subset(out.validation_rows));
  return out;
}

struct PlanePrediction {
  double delta = 0, rho = 0;
  double probability = 0;
  int label = 0;
};

inline std::vector<PlanePrediction> predict_plane(const MlpModel& model, const std::vector<GridPoint>& grid,
                                                  EnsembleKind ens, int n) {
  if (model.input_size() != 6 || (!model.feature_names.empty() && model.feature_names != kCsFeatureNames))
    throw std::invalid_argument("predict_plane: model was not trained on the CS feature schema");
  if (ens != EnsembleKind::Gaussian && ens != EnsembleKind::SparseCol && ens != EnsembleKind::SubDCT)
    throw std::invalid_argument("predict_plane: ensemble must be gaussian, sparse or dct");
  Matrix x(static_cast<Eigen::Index>(grid.size()), 6);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto size = params_from_plane({n, grid[i].delta, grid[i].rho});
    const auto f = cs_features(n, size.m, size.s, ens);
    for (int j = 0; j < 6; ++j) x(static_cast<Eigen::Index>(i), j) = f[static_cast<std::size_t>(j)];
  }
  const Vector p = predict_proba(model, x);
  std::vector<PlanePrediction> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double prob = p[static_cast<Eigen::Index>(i)];
    out.push_back({grid[i].delta, grid[i].rho, prob, prob >= 0.5 ? 1 : 0});
  }
  return out;
}

inline std::string write_plane_csv(const std::vector<PlanePrediction>& rows) {
  std::string out = "delta,rho,predicted_probability,predicted_label\n";
  for (const auto& r : rows)
    out += format_double(r.delta) + ',' + format_double(r.rho) + ',' + format_double(r.probability) + ',' +
           std::to_string(r.label) + '\n';
  return out;
}

}  // namespace algsel

#endif  // ALGSEL_PHASE_LAB_HPP
