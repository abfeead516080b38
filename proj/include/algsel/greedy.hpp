#ifndef ALGSEL_GREEDY_HPP
#define ALGSEL_GREEDY_HPP

// Greedy sparse recovery: Hard Thresholding Pursuit (HTP), Normalized
// Iterative Hard Thresholding (NIHT) and CoSaMP/Subspace Pursuit (CSMPSP),
// all driven by the same five-way stopping rule.

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "algsel/ensembles.hpp"
#include "algsel/sparse_ops.hpp"

namespace algsel {

enum class Algorithm { HTP, NIHT, CSMPSP };

inline constexpr Algorithm kAlgorithms[] = {Algorithm::HTP, Algorithm::NIHT, Algorithm::CSMPSP};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::HTP: return "htp";
    case Algorithm::NIHT: return "niht";
    case Algorithm::CSMPSP: return "csmpsp";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(std::string_view s) {
  for (auto a : kAlgorithms)
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

enum class ExitStatus { Converged, Diverged, SlowProgressI, SlowProgressII, MaxIterations, TimeCap };

inline std::string_view to_string(ExitStatus s) {
  switch (s) {
    case ExitStatus::Converged: return "converged";
    case ExitStatus::Diverged: return "diverged";
    case ExitStatus::SlowProgressI: return "slow_progress_1";
    case ExitStatus::SlowProgressII: return "slow_progress_2";
    case ExitStatus::MaxIterations: return "max_iterations";
    case ExitStatus::TimeCap: return "time_cap";
  }
  return "unknown";
}

/// Direction of the windowed rate test.
///   AsPrinted:   (r[k-w] / r[k])^(1/w) <= tol   (fires on slow growth)
///   RateNearOne: (r[k] / r[k-w])^(1/w) >= tol   (fires on slow decay)
enum class SlowRateRule { AsPrinted, RateNearOne };

struct StoppingConfig {
  double conv_factor = 1e-3;  // converged when ||r|| <= conv_factor * delta
  double div_factor = 100.0;  // diverged when ||r|| >= div_factor * ||r_0||
  int slow_window = 15;
  double slow_abs_tol = 1e-6;
  double slow_rate_tol = 0.999;
  int slow_start = 150;
  int max_iter = 200;
  double time_cap_seconds = 3600.0;
  SlowRateRule slow_rate_rule = SlowRateRule::AsPrinted;

  static StoppingConfig for_algorithm(Algorithm a) {
    StoppingConfig cfg;
    if (a == Algorithm::NIHT) {
      cfg.slow_start = 750;
      cfg.max_iter = 900;
    }
    return cfg;
  }

  void validate() const {
    if (!(conv_factor > 0 && div_factor > 0 && slow_window > 0 && slow_abs_tol > 0 &&
          slow_rate_tol > 0 && slow_start > 0 && max_iter > 0 && time_cap_seconds > 0))
      throw std::invalid_argument("StoppingConfig: all fields must be positive");
    if (slow_start >= max_iter) throw std::invalid_argument("StoppingConfig: need slow_start < max_iter");
  }
};

struct SolveResult {
  Vector x;
  std::vector<double> residual_history;  // ||r_0||, ..., ||r_k||
  int iterations = 0;
  ExitStatus status = ExitStatus::MaxIterations;
  double wall_time = 0.0;
  bool lsq_damped = false;       // some restricted least-squares solve was damped
  bool step_degenerate = false;  // some step-size denominator vanished

  double final_residual() const { return residual_history.back(); }
};

/// Exit decision after iteration k, or nullopt to continue. Criteria are
/// tested in priority order: converged, diverged, slow progress I and II
/// (only once k >= slow_start + slow_window), iteration cap, time cap.
/// A non-finite residual counts as divergence.
inline std::optional<ExitStatus> check_exit(std::span<const double> history, int k, double delta,
                                            double r0_norm, double elapsed_seconds,
                                            const StoppingConfig& cfg) {
  if (k < 0 || history.size() != static_cast<std::size_t>(k) + 1)
    throw std::invalid_argument("check_exit: history must hold k+1 residual norms");
  const auto h = [&](int i) { return history[static_cast<std::size_t>(i)]; };
  const double rk = h(k);
  if (!std::isfinite(rk)) return ExitStatus::Diverged;
  if (rk <= cfg.conv_factor * delta) return ExitStatus::Converged;
  if (rk >= cfg.div_factor * r0_norm) return ExitStatus::Diverged;

  const int w = cfg.slow_window;
  if (k >= cfg.slow_start + w) {
    double largest_step = 0.0;
    for (int i = 1; i <= w; ++i) largest_step = std::max(largest_step, std::abs(h(k - i + 1) - h(k - i)));
    if (largest_step <= cfg.slow_abs_tol) return ExitStatus::SlowProgressI;

    const double inv_w = 1.0 / w;
    if (cfg.slow_rate_rule == SlowRateRule::AsPrinted) {
      if (std::pow(h(k - w) / rk, inv_w) <= cfg.slow_rate_tol) return ExitStatus::SlowProgressII;
    } else {
      if (std::pow(rk / h(k - w), inv_w) >= cfg.slow_rate_tol) return ExitStatus::SlowProgressII;
    }
  }
  if (k >= cfg.max_iter) return ExitStatus::MaxIterations;
  if (elapsed_seconds >= cfg.time_cap_seconds) return ExitStatus::TimeCap;
  return std::nullopt;
}

struct StepSize {
  double w = 0.0;
  bool degenerate = false;  // A_T g_T == 0; w forced to 1
};

/// w = ||g_T||^2 / ||A_T g_T||^2 for a precomputed gradient g = A^T r.
inline StepSize step_size_from_gradient(const MeasurementMatrix& a, const Vector& g, const IndexSet& t) {
  if (t.empty()) throw std::invalid_argument("step_size: empty support");
  double num = 0.0;
  for (int i : t) num += g[i] * g[i];
  if (num == 0.0) return {0.0, false};
  const double den = a.apply_support(t, g).squaredNorm();
  if (den == 0.0) return {1.0, true};
  return {num / den, false};
}

inline StepSize step_size(const MeasurementMatrix& a, const Vector& r, const IndexSet& t) {
  return step_size_from_gradient(a, a.adjoint(r), t);
}

namespace detail {

inline bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

/// Restricted least squares for one solver run, y fixed.
///
/// Repeats of the previous support are free. After a few distinct supports
/// the run is evidently not converging fast, and projections of the whole
/// matrix are precomputed so that later solves avoid refactoring the column
/// block:
///  * tall blocks: Cholesky of the block's Gram submatrix taken from A^T A,
///    then one step of iterative refinement against the block itself;
///  * wide blocks: the minimum-norm fit u_T + H_{T,C} (I - H_CC)^{-1} u_C
///    over the complement C, with H = A^T (A A^T)^{-1} A and u = H-side
///    image of y (Woodbury on A_T A_T^T = A A^T - A_C A_C^T).
/// Anything that looks ill-conditioned goes to lsq_on_support.
class RestrictedLsq {
 public:
  static constexpr int kWarmupSolves = 3;
  static constexpr Eigen::Index kMaxPrecomputeCols = 8192;
  static constexpr double kPivotTol = 1e-6;
  static constexpr double kResidualTol = 1e-9;

  RestrictedLsq(const MeasurementMatrix& a, const Vector& y) : a_(a), y_(y) {}

  const Vector& solve(const IndexSet& t, bool& damped) {
    if (valid_ && t == support_) return x_;
    ++solves_;
    LsqResult r;
    if (!(solves_ > kWarmupSolves && prepare() && fast(t, r))) {
      r = lsq_on_support(a_, t, y_);
    }
    damped = damped || r.damped;
    support_ = t;
    x_ = std::move(r.x);
    valid_ = true;
    return x_;
  }

 private:
  bool prepare() {
    if (state_ == State::Unprepared) {
      if (a_.cols() > kMaxPrecomputeCols || a_.rows() > kMaxPrecomputeCols) {
        state_ = State::Unavailable;
        return false;
      }
      // All-zero rows (possible for sparse columns) only add a constant to
      // the residual; dropping them keeps A A^T invertible.
      const Matrix full = a_.densify();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < full.rows(); ++i)
        if ((full.row(i).array() != 0.0).any()) keep.push_back(i);
      if (keep.empty()) {
        state_ = State::Unavailable;
        return false;
      }
      dense_.resize(static_cast<Eigen::Index>(keep.size()), full.cols());
      y_kept_.resize(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        dense_.row(static_cast<Eigen::Index>(i)) = full.row(keep[i]);
        y_kept_[static_cast<Eigen::Index>(i)] = y_[keep[i]];
      }
      gram_ = Matrix::Zero(a_.cols(), a_.cols());
      gram_.selfadjointView<Eigen::Lower>().rankUpdate(dense_.transpose());
      aty_ = dense_.transpose() * y_kept_;
      state_ = State::Ready;
    }
    return state_ == State::Ready;
  }

  bool prepare_wide() {
    if (wide_ == State::Unprepared) {
      wide_ = State::Unavailable;
      Matrix g = Matrix::Zero(dense_.rows(), dense_.rows());
      g.selfadjointView<Eigen::Lower>().rankUpdate(dense_);
      Eigen::LLT<Matrix> llt(g);
      if (llt.info() != Eigen::Success || !pivots_ok(llt.matrixLLT().diagonal())) return false;
      const Matrix w = llt.matrixL().solve(dense_);
      proj_ = Matrix::Zero(a_.cols(), a_.cols());
      proj_.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
      proj_.triangularView<Eigen::StrictlyUpper>() = proj_.transpose();
      u_ = w.transpose() * llt.matrixL().solve(y_kept_);
      wide_ = State::Ready;
    }
    return wide_ == State::Ready;
  }

  static bool pivots_ok(const Vector& diag) {
    return diag.allFinite() && diag.minCoeff() > kPivotTol * diag.maxCoeff();
  }

  Matrix block(const IndexSet& t) const {
    Matrix b(dense_.rows(), static_cast<Eigen::Index>(t.size()));
    for (std::size_t c = 0; c < t.size(); ++c) b.col(static_cast<Eigen::Index>(c)) = dense_.col(t[c]);
    return b;
  }

  bool fast(const IndexSet& t, LsqResult& out) {
    const auto k = static_cast<Eigen::Index>(t.size());
    const Eigen::Index m = dense_.rows(), n = a_.cols();
    if (k == 0) return false;
    Vector z(k);
    const Matrix b = block(t);
    if (k <= m) {
      Matrix g(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
          const int hi = std::max(t[std::size_t(i)], t[std::size_t(j)]);
          const int lo = std::min(t[std::size_t(i)], t[std::size_t(j)]);
          g(i, j) = gram_(hi, lo);
        }
      Eigen::LLT<Matrix> llt(g);
      if (llt.info() != Eigen::Success || !pivots_ok(llt.matrixLLT().diagonal())) return false;
      for (Eigen::Index i = 0; i < k; ++i) z[i] = aty_[t[std::size_t(i)]];
      z = llt.solve(z);
      z += llt.solve(b.transpose() * (y_kept_ - b * z));
      out.damped = false;
    } else {
      const Eigen::Index c = n - k;
      // Complement route only when its c^3 factorization beats the m^2 k Gram.
      if (static_cast<double>(c) * c * c > 3.0 * static_cast<double>(m) * m * k) return false;
      if (!prepare_wide()) return false;
      for (Eigen::Index i = 0; i < k; ++i) z[i] = u_[t[std::size_t(i)]];
      if (c > 0) {
        std::vector<int> comp;
        comp.reserve(static_cast<std::size_t>(c));
        for (int j = 0, p = 0; j < n; ++j) {
          if (p < k && t[std::size_t(p)] == j)
            ++p;
          else
            comp.push_back(j);
        }
        Matrix kc(c, c);
        Vector uc(c);
        for (Eigen::Index i = 0; i < c; ++i) {
          uc[i] = u_[comp[std::size_t(i)]];
          for (Eigen::Index j = 0; j < c; ++j)
            kc(i, j) = (i == j ? 1.0 : 0.0) - proj_(comp[std::size_t(i)], comp[std::size_t(j)]);
        }
        Eigen::LLT<Matrix> llt(kc);
        if (llt.info() != Eigen::Success || !pivots_ok(llt.matrixLLT().diagonal())) return false;
        const Vector zc = llt.solve(uc);
        Matrix cross(k, c);
        for (Eigen::Index i = 0; i < k; ++i)
          for (Eigen::Index j = 0; j < c; ++j) cross(i, j) = proj_(t[std::size_t(i)], comp[std::size_t(j)]);
        z += cross * zc;
      }
      // A wide full-row-rank block interpolates y.
      if (!((y_kept_ - b * z).norm() <= kResidualTol * y_kept_.norm())) return false;
      out.damped = true;
    }
    out.x = Vector::Zero(n);
    for (Eigen::Index i = 0; i < k; ++i) out.x[t[std::size_t(i)]] = z[i];
    return true;
  }

  enum class State { Unprepared, Ready, Unavailable };

  const MeasurementMatrix& a_;
  const Vector& y_;
  int solves_ = 0;
  bool valid_ = false;
  IndexSet support_;
  Vector x_;
  State state_ = State::Unprepared;
  State wide_ = State::Unprepared;
  Matrix dense_, gram_, proj_;  // dense_ holds the nonzero rows of A
  Vector y_kept_, aty_, u_;
};

}  // namespace detail

/// Runs one of the three greedy solvers on y ~ A x with sparsity s.
///
/// Every iterate is s-sparse. The iteration is a deterministic map of
/// (x_k, T_k); once it returns the same state bit for bit, every later
/// iteration would too, so the remaining residuals are appended without
/// recomputation until the stopping rule fires.
inline SolveResult solve(Algorithm algo, const MeasurementMatrix& a, const Vector& y, int s,
                         const StoppingConfig& cfg) {
  cfg.validate();
  if (y.size() != a.rows()) throw std::invalid_argument("solve: y length mismatch");
  if (s < 1 || s > a.rows()) throw std::invalid_argument("solve: need 1 <= s <= m");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const double delta = static_cast<double>(a.rows()) / a.cols();

  SolveResult res;
  Vector x = a.adjoint(y);
  IndexSet t = supp_s(x, s);
  x = project(x, t);
  Vector r = y - a.apply_support(t, x);
  res.residual_history.push_back(r.norm());
  const double r0 = res.residual_history.front();

  detail::RestrictedLsq lsq(a, y);
  bool fixed_point = false;
  for (int k = 1;; ++k) {
    if (!fixed_point) {
      const Vector x_prev = x;
      const IndexSet t_prev = t;
      const Vector g = a.adjoint(r);
      switch (algo) {
        case Algorithm::HTP: {
          const StepSize w = step_size_from_gradient(a, g, t_prev);
          res.step_degenerate = res.step_degenerate || w.degenerate;
          t = supp_s(x + w.w * g, s);
          x = lsq.solve(t, res.lsq_damped);
          break;
        }
        case Algorithm::NIHT: {
          const StepSize w = step_size_from_gradient(a, g, t_prev);
          res.step_degenerate = res.step_degenerate || w.degenerate;
          const Vector v = x + w.w * g;
          t = supp_s(v, s);
          x = project(v, t);
          break;
        }
        case Algorithm::CSMPSP: {
          const IndexSet merged = IndexSet::set_union(t_prev, supp_s(g, s));
          const Vector& b = lsq.solve(merged, res.lsq_damped);
          t = supp_s(b, s);
          x = project(b, t);
          break;
        }
      }
      r = y - a.apply_support(t, x);
      fixed_point = t == t_prev && detail::same_bits(x, x_prev);
    }
    res.residual_history.push_back(r.norm());
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (auto st = check_exit(res.residual_history, k, delta, r0, elapsed, cfg)) {
      res.status = *st;
      res.iterations = k;
      break;
    }
  }
  res.x = std::move(x);
  res.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

inline SolveResult htp(const MeasurementMatrix& a, const Vector& y, int s,
                       const StoppingConfig& cfg = StoppingConfig::for_algorithm(Algorithm::HTP)) {
  return solve(Algorithm::HTP, a, y, s, cfg);
}

inline SolveResult niht(const MeasurementMatrix& a, const Vector& y, int s,
                        const StoppingConfig& cfg = StoppingConfig::for_algorithm(Algorithm::NIHT)) {
  return solve(Algorithm::NIHT, a, y, s, cfg);
}

inline SolveResult csmpsp(const MeasurementMatrix& a, const Vector& y, int s,
                          const StoppingConfig& cfg = StoppingConfig::for_algorithm(Algorithm::CSMPSP)) {
  return solve(Algorithm::CSMPSP, a, y, s, cfg);
}

/// JSON record: status, iterations, final residual, recovery error when the
/// true signal is known. Wall time is opt-in so records stay reproducible.
inline nlohmann::json to_json(const SolveResult& r, const Vector* truth = nullptr,
                              bool with_timing = false) {
  nlohmann::json j;
  j["status"] = std::string(to_string(r.status));
  j["iterations"] = r.iterations;
  j["final_residual"] = r.final_residual();
  j["initial_residual"] = r.residual_history.front();
  j["lsq_damped"] = r.lsq_damped;
  j["step_degenerate"] = r.step_degenerate;
  if (with_timing) j["wall_time_seconds"] = r.wall_time;
  if (truth != nullptr) j["recovery_error"] = (r.x - *truth).norm();
  return j;
}

}  // namespace algsel

#endif  // ALGSEL_GREEDY_HPP
