// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [criterion ...]     run all criteria, or only the listed numbers
//
// Environment:
//   ALGSEL_ACCEPT_CACHE  directory for the desk-scale CS dataset (resumable)
//   ALGSEL_MNIST_DIR     directory holding train-images-idx3-ubyte

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "algsel/ensembles.hpp"
#include "algsel/greedy.hpp"
#include "algsel/io.hpp"
#include "algsel/mlp.hpp"
#include "algsel/phase_lab.hpp"
#include "algsel/rng.hpp"
#include "algsel/sgd_lab.hpp"
#include "algsel/sparse_ops.hpp"

using namespace algsel;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

// Dense copy of A built from products with unit vectors.
Matrix dense_of(const MeasurementMatrix& a) {
  Matrix d(a.rows(), a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    Vector e = Vector::Zero(a.cols());
    e[j] = 1;
    d.col(j) = a.apply(e);
  }
  return d;
}

IndexSet random_support(Rng& rng, int n, int s) { return IndexSet::from_unsorted(sample_without_replacement(rng, n, s)); }

Verdict ensemble_invariants() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_dct = 0, worst_norm = 0;
  bool counts_ok = true;
  for (int k = 0; k < 20; ++k) {
    const int n = 16 + static_cast<int>(rng.below(2033));
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const std::uint64_t seed = rng.next();
    const auto a = gen_subdct(m, n, seed);
    const Matrix d = a.columns(IndexSet::all(n));
    worst_dct = std::max(worst_dct, (d * d.transpose() - Matrix::Identity(m, m)).cwiseAbs().maxCoeff());
    // The fast products must agree with the explicit block.
    for (int probe = 0; probe < 3; ++probe) {
      Vector x(n), r(m);
      for (auto& v : x) v = rng.normal();
      for (auto& v : r) v = rng.normal();
      worst_dct = std::max(worst_dct, (a.apply(x) - d * x).cwiseAbs().maxCoeff());
      worst_dct = std::max(worst_dct, (a.adjoint(r) - d.transpose() * r).cwiseAbs().maxCoeff());
    }
  }
  for (int k = 0; k < 20; ++k) {
    const int n = 16 + static_cast<int>(rng.below(1009));
    const int m = 7 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 6)));
    const auto a = gen_sparse_col(m, n, 7, rng.next());
    const Matrix d = dense_of(a);
    for (int j = 0; j < n; ++j) {
      counts_ok &= (d.col(j).array() != 0.0).count() == 7;
      worst_norm = std::max(worst_norm, std::abs(d.col(j).norm() - 1.0));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst_dct <= 1e-10 && worst_norm <= 1e-10 && counts_ok && secs < 10,
          fmt("max |AA^T - I| %.2e, max |norm - 1| %.2e, nnz 7 per column %s, %.1f s", worst_dct, worst_norm,
              counts_ok ? "yes" : "no", secs)};
}

Verdict solver_oracles() {
  Rng rng(202);
  const EnsembleKind kinds[] = {EnsembleKind::Gaussian, EnsembleKind::SparseCol, EnsembleKind::SubDCT};
  double worst_step = 0, worst_lsq = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = 32 * (1 + static_cast<int>(rng.below(4)));
    const int m = static_cast<int>(std::lround(rng.uniform(0.3, 0.9) * n));
    const int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m / 2)));
    const auto a = gen_ensemble(kinds[k % 3], m, n, rng.next());
    const Matrix d = dense_of(a);
    const IndexSet t = random_support(rng, n, s);
    Vector r(m), y(m);
    for (int i = 0; i < m; ++i) {
      r[i] = rng.normal();
      y[i] = rng.normal();
    }

    const Vector g = d.transpose() * r;
    Vector g_t = Vector::Zero(n);
    for (int i : t) g_t[i] = g[i];
    const double w_ref = g_t.squaredNorm() / (d * g_t).squaredNorm();
    worst_step = std::max(worst_step, std::abs(step_size(a, r, t).w - w_ref) / w_ref);

    Matrix d_t(m, s);
    int c = 0;
    for (int i : t) d_t.col(c++) = d.col(i);
    const Vector z = d_t.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    Vector x_ref = Vector::Zero(n);
    c = 0;
    for (int i : t) x_ref[i] = z[c++];
    worst_lsq = std::max(worst_lsq, (lsq_on_support(a, t, y).x - x_ref).norm() / std::max(1.0, x_ref.norm()));
  }

  int supp_mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + static_cast<int>(rng.below(300));
    const int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    Vector v(n);
    // Every third vector is drawn from a small alphabet so magnitude ties are common.
    for (int i = 0; i < n; ++i) v[i] = k % 3 == 0 ? static_cast<double>(rng.below(7)) - 3.0 : rng.normal();
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return std::abs(v[x]) > std::abs(v[y]); });
    order.resize(static_cast<std::size_t>(s));
    std::sort(order.begin(), order.end());
    const IndexSet got = supp_s(v, s);
    supp_mismatch += !std::equal(got.begin(), got.end(), order.begin(), order.end());
  }
  return {worst_step <= 1e-10 && worst_lsq <= 1e-10 && supp_mismatch == 0,
          fmt("step_size rel err %.2e, lsq_on_support rel err %.2e over 50 instances; supp_s mismatches %d/1000",
              worst_step, worst_lsq, supp_mismatch)};
}

CsDatasetConfig desk_cs_config() {
  CsDatasetConfig cfg;
  cfg.grid = default_grid(kDeskRhoSteps);
  cfg.n = 1024;
  cfg.trials = 20;
  cfg.seed = 1;
  cfg.jobs = 0;
  return cfg;
}

const std::map<Algorithm, std::vector<CsDatasetRow>>& desk_cs_rows() {
  static const auto rows = [] {
    const fs::path dir = env_or("ALGSEL_ACCEPT_CACHE", "acceptance_cache") + "/cs_desk";
    std::size_t last = 0;
    return build_cs_dataset(desk_cs_config(), dir, [&](const CsProgress& p) {
      if (p.done >= last + 100 || p.done == p.total) {
        last = p.done;
        std::fprintf(stderr, "  cs dataset %zu/%zu cells\n", p.done, p.total);
      }
    });
  }();
  return rows;
}

Verdict phase_shape() {
  const auto start = std::chrono::steady_clock::now();
  const auto& data = desk_cs_rows();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = true;
  std::string detail;
  for (const auto& [algo, rows] : data) {
    for (EnsembleKind e : kCsEnsembles) {
      const double f = monotone_column_fraction(rows, e);
      ok &= f >= 0.9;
      detail += fmt("%s/%s %.3f ", std::string(to_string(algo)).c_str(), std::string(to_string(e)).c_str(), f);
    }
  }
  return {ok, detail + fmt("(%zu cells per ensemble, %.0f s)", desk_cs_config().grid.size(), secs)};
}

Verdict cs_classifier() {
  bool ok = true;
  std::string detail;
  for (const auto& [algo, rows] : desk_cs_rows()) {
    TrainConfig cfg;
    cfg.seed = 1;
    const auto start = std::chrono::steady_clock::now();
    const auto res = train_cs_classifier(rows, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ok &= res.validation_accuracy >= 0.90 && secs < 120;
    detail += fmt("%s %.3f (%.1f s) ", std::string(to_string(algo)).c_str(), res.validation_accuracy, secs);
  }
  return {ok, detail};
}

Verdict gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(505);
  double worst = 0;
  for (int b = 0; b < 20; ++b) {
    auto m = mlp_init({5, 3, 9, 1}, rng.next());
    for (auto& layer : m.layers)
      for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = rng.uniform(-0.5, 0.5);
    LabeledData d;
    d.x.resize(16, 5);
    d.y.resize(16);
    for (Eigen::Index r = 0; r < 16; ++r) {
      for (Eigen::Index c = 0; c < 5; ++c) d.x(r, c) = rng.normal();
      d.y[r] = rng.coin() ? 1.0 : 0.0;
    }
    fit_standardization(m, d.x);
    const Gradients g = grad(m, d);
    const double h = 1e-5;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = mean_bce(m, d);
      param = keep - h;
      const double down = mean_bce(m, d);
      param = keep;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic) / scale);
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < m.layers[l].w.size(); ++i) check(m.layers[l].w.data()[i], g.w[l].data()[i]);
      for (Eigen::Index i = 0; i < m.layers[l].b.size(); ++i) check(m.layers[l].b[i], g.b[l][i]);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-5 && secs < 5, fmt("max relative error %.2e over 20 batches, %.2f s", worst, secs)};
}

bool within_factor_two(double got, double ref) { return got <= 2 * ref && got >= ref / 2; }

Verdict selector_trend(const SgdDatasetConfig& cfg, double fraction, const double ref[3], double min_accuracy) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = build_sgd_dataset(cfg);
  TrainConfig train;
  train.epochs = 100;
  train.seed = 1;
  const auto rep = evaluate_selector(data, fraction, 10, train);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double* e = rep.recovery;  // constant, epoch, nn
  const bool order = e[2] < e[0] && e[2] < e[1];
  bool scale = true;
  for (int i = 0; i < 3; ++i) scale &= within_factor_two(e[i], ref[i]);
  return {order && scale && rep.accuracy >= min_accuracy,
          fmt("accuracy %.4f, recovery const %.5f epoch %.5f nn %.5f (reference %.5f %.5f %.5f), %.0f s", rep.accuracy,
              e[0], e[1], e[2], ref[0], ref[1], ref[2], secs)};
}

Verdict sgd_synthetic() {
  SgdDatasetConfig cfg;
  cfg.seed = 1;
  const double ref[3] = {0.01142, 0.01525, 0.00909};
  return selector_trend(cfg, 0.75, ref, 0.75);
}

Verdict sgd_ct() {
  const auto images = env_or("ALGSEL_MNIST_DIR", "data/mnist") + "/train-images-idx3-ubyte";
  if (!fs::exists(images)) return {false, "MNIST images not found at " + images};
  auto cfg = SgdDatasetConfig::ct(images);
  cfg.seed = 1;
  const double ref[3] = {0.00664, 0.00683, 0.00538};
  return selector_trend(cfg, 0.25, ref, 0.0);
}

Verdict mixture() {
  const ClassErrors e{0.00278, 0.01117, 0.00555, 0.00899};
  const auto iv = selector_advantage_interval(e, 0.8);
  if (!iv) return {false, "no interval where the selector beats both schedules"};
  const auto [lo, hi] = *iv;
  bool below = lo > 0 && hi < 1;
  for (const auto& pt : mixture_curve(e, 0.8, unit_grid(1001)))
    if (pt.p > lo && pt.p < hi) below &= pt.nn < pt.constant && pt.nn < pt.epoch;
  return {below && std::abs(lo - 0.3) <= 0.1 && std::abs(hi - 0.8) <= 0.1,
          fmt("interval (%.4f, %.4f), target (0.3, 0.8) +/- 0.1", lo, hi)};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "algsel_acceptance_determinism";
  fs::remove_all(root);
  int compared = 0, differ = 0;
  auto same = [&](const std::string& a, const std::string& b) {
    ++compared;
    differ += a != b;
  };

  CsDatasetConfig cs;
  cs.grid = default_grid(4);
  cs.n = 64;
  cs.trials = 3;
  cs.seed = 9;
  cs.jobs = 1;
  build_cs_dataset(cs, root / "cs_a");
  cs.jobs = 0;
  build_cs_dataset(cs, root / "cs_b");
  for (Algorithm a : kAlgorithms)
    same(read_file(cs_dataset_path(root / "cs_a", a)), read_file(cs_dataset_path(root / "cs_b", a)));
  const auto rows = read_cs_dataset_csv(cs_dataset_path(root / "cs_a", Algorithm::HTP).string());
  TrainConfig t;
  t.epochs = 20;
  t.seed = 9;
  same(to_json(train_cs_classifier(rows, t).model).dump(), to_json(train_cs_classifier(rows, t).model).dump());

  SgdDatasetConfig sgd;
  sgd.count = 60;
  sgd.steps = 1000;
  sgd.seed = 9;
  const auto d1 = build_sgd_dataset(sgd);
  sgd.jobs = 1;
  const auto d2 = build_sgd_dataset(sgd);
  same(write_sgd_dataset_csv(d1), write_sgd_dataset_csv(d2));
  same(write_sgd_outcomes_csv(d1), write_sgd_outcomes_csv(d2));
  t.epochs = 5;
  same(selector_report_line(evaluate_selector(d1, 0.5, 2, t)), selector_report_line(evaluate_selector(d2, 0.5, 2, t)));
  fs::remove_all(root);
  return {differ == 0, fmt("%d/%d artifact pairs byte-identical (CS datasets and model, SGD dataset, outcomes, report)",
                           compared - differ, compared)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"ensemble invariants", ensemble_invariants},
      {"solver oracle equivalence", solver_oracles},
      {"phase-transition monotonicity", phase_shape},
      {"cs classifier accuracy", cs_classifier},
      {"mlp gradient check", gradient_check},
      {"sgd selector, synthetic", sgd_synthetic},
      {"sgd selector, ct", sgd_ct},
      {"mixture advantage interval", mixture},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
