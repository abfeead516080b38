#include "algsel/greedy.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace algsel;

namespace {

Vector random_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

MeasurementMatrix identity(int n) {
  return MeasurementMatrix::from_dense(EnsembleKind::ExplicitDense, Matrix::Identity(n, n));
}

// Matrix with orthonormal columns, scaled by c.
MeasurementMatrix scaled_orthonormal(int m, int n, double c, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(gen_gaussian(m, n, seed).densify());
  const Matrix q = qr.householderQ() * Matrix::Identity(m, n);
  return MeasurementMatrix::from_dense(EnsembleKind::ExplicitDense, c * q);
}

int count_nonzeros(const Vector& x) { return int((x.array() != 0.0).count()); }

}  // namespace

TEST(StoppingConfig, PerAlgorithmDefaults) {
  const auto niht_cfg = StoppingConfig::for_algorithm(Algorithm::NIHT);
  EXPECT_EQ(niht_cfg.slow_start, 750);
  EXPECT_EQ(niht_cfg.max_iter, 900);
  for (auto a : {Algorithm::HTP, Algorithm::CSMPSP}) {
    const auto cfg = StoppingConfig::for_algorithm(a);
    EXPECT_EQ(cfg.slow_start, 150);
    EXPECT_EQ(cfg.max_iter, 200);
    EXPECT_EQ(cfg.slow_window, 15);
    EXPECT_DOUBLE_EQ(cfg.conv_factor, 0.001);
    EXPECT_DOUBLE_EQ(cfg.div_factor, 100.0);
    EXPECT_DOUBLE_EQ(cfg.slow_abs_tol, 1e-6);
    EXPECT_DOUBLE_EQ(cfg.slow_rate_tol, 0.999);
  }
  StoppingConfig bad;
  bad.slow_start = 300;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(CheckExit, ConvergedUsesDeltaThreshold) {
  const StoppingConfig cfg;
  const std::vector<double> h{1.0, 4e-4};
  EXPECT_EQ(check_exit(h, 1, 0.5, 1.0, 0.0, cfg), ExitStatus::Converged);
  const std::vector<double> h2{1.0, 6e-4};
  EXPECT_EQ(check_exit(h2, 1, 0.5, 1.0, 0.0, cfg), std::nullopt);
}

TEST(CheckExit, Diverged) {
  const StoppingConfig cfg;
  const std::vector<double> h{1.0, 150.0};
  EXPECT_EQ(check_exit(h, 1, 0.5, 1.0, 0.0, cfg), ExitStatus::Diverged);
  const std::vector<double> nan_h{1.0, std::nan("")};
  EXPECT_EQ(check_exit(nan_h, 1, 0.5, 1.0, 0.0, cfg), ExitStatus::Diverged);
}

TEST(CheckExit, ZeroResidualIsConvergedEvenWithZeroR0) {
  const StoppingConfig cfg;
  const std::vector<double> h{0.0, 0.0};
  EXPECT_EQ(check_exit(h, 1, 0.5, 0.0, 0.0, cfg), ExitStatus::Converged);
}

TEST(CheckExit, FlatHistoryTriggersSlowProgressOnlyAfterWindow) {
  const StoppingConfig cfg;  // slow_start 150, window 15
  const int k = cfg.slow_start + cfg.slow_window;
  std::vector<double> h(static_cast<std::size_t>(k) + 1, 0.3);
  h[0] = 1.0;
  EXPECT_EQ(check_exit(h, k, 0.5, 1.0, 0.0, cfg), ExitStatus::SlowProgressI);
  std::vector<double> shorter(h.begin(), h.end() - 1);
  EXPECT_EQ(check_exit(shorter, k - 1, 0.5, 1.0, 0.0, cfg), std::nullopt);
}

TEST(CheckExit, SlowProgressTwoFollowsPrintedDirection) {
  StoppingConfig cfg;
  const int k = 170;
  std::vector<double> grow(k + 1), decay(k + 1);
  for (int i = 0; i <= k; ++i) {
    grow[i] = 0.1 * std::pow(1.01, i / 5.0);    // slowly growing residual
    decay[i] = 10.0 * std::pow(0.9995, i);      // slowly shrinking residual
  }
  EXPECT_EQ(check_exit(grow, k, 0.5, grow[0], 0.0, cfg), ExitStatus::SlowProgressII);
  EXPECT_EQ(check_exit(decay, k, 0.5, decay[0], 0.0, cfg), std::nullopt);
  cfg.slow_rate_rule = SlowRateRule::RateNearOne;
  EXPECT_EQ(check_exit(decay, k, 0.5, decay[0], 0.0, cfg), ExitStatus::SlowProgressII);
}

TEST(CheckExit, IterationAndTimeCaps) {
  StoppingConfig cfg;
  std::vector<double> h(201);
  for (int i = 0; i <= 200; ++i) h[i] = 1.0 - 1e-3 * i;  // steady but slow decrease
  EXPECT_EQ(check_exit(h, 200, 0.5, 1.0, 0.0, cfg), ExitStatus::MaxIterations);
  std::vector<double> early(h.begin(), h.begin() + 11);
  cfg.time_cap_seconds = 5;
  EXPECT_EQ(check_exit(early, 10, 0.5, 1.0, 6.0, cfg), ExitStatus::TimeCap);
  EXPECT_THROW(check_exit(early, 11, 0.5, 1.0, 0.0, cfg), std::invalid_argument);
}

TEST(CheckExit, PriorityOrderIsTotal) {
  // A residual that is both converged and beyond the divergence factor of a
  // tiny r0 reports Converged.
  const StoppingConfig cfg;
  const std::vector<double> h{1e-9, 1e-5};
  EXPECT_EQ(check_exit(h, 1, 1.0, 1e-9, 0.0, cfg), ExitStatus::Converged);
}

TEST(StepSize, OrthonormalColumnsGiveUnitStep) {
  const auto a = scaled_orthonormal(40, 12, 1.0, 1);
  const Vector r = random_vector(40, 2);
  const auto w = step_size(a, r, IndexSet::from_unsorted({1, 4, 7}));
  EXPECT_NEAR(w.w, 1.0, 1e-12);
  const auto half = step_size(scaled_orthonormal(40, 12, 2.0, 1), r, IndexSet::from_unsorted({1, 4, 7}));
  EXPECT_NEAR(half.w, 0.25, 1e-12);
}

TEST(StepSize, MatchesDenseFormula) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = gen_gaussian(64, 128, seed);
    const Vector r = random_vector(64, seed + 50);
    Rng rng(seed);
    const IndexSet t = IndexSet::from_unsorted(sample_without_replacement(rng, 128, 8));
    const Matrix d = a.densify();
    const Vector g = d.transpose() * r;
    Vector gt(8);
    for (std::size_t c = 0; c < 8; ++c) gt[Eigen::Index(c)] = g[t[c]];
    const Matrix at = a.columns(t);
    const double expected = gt.squaredNorm() / (at * gt).squaredNorm();
    EXPECT_NEAR(step_size(a, r, t).w, expected, 1e-12 * expected);
  }
}

TEST(StepSize, ScalingLaw) {
  const auto a = gen_sparse_col(50, 90, 7, 4);
  const Vector r = random_vector(50, 5);
  const IndexSet t = IndexSet::from_unsorted({0, 10, 20, 30});
  const double w1 = step_size(a, r, t).w;
  // Scaling A by c scales g by c and A_T g_T by c^2: w -> w / c^2.
  const double w3 = step_size(a.scaled(3.0), r, t).w;
  EXPECT_NEAR(w3, w1 / 9.0, 1e-13 * w1);
}

TEST(StepSize, DegenerateCases) {
  const auto a = identity(4);
  EXPECT_EQ(step_size(a, Vector::Zero(4), IndexSet::from_unsorted({0})).w, 0.0);
  // Column 0 is zero, so A_T g_T vanishes for any g supported on T.
  Matrix z = Matrix::Identity(3, 3);
  z(0, 0) = 0.0;
  const auto zero_col = MeasurementMatrix::from_dense(EnsembleKind::ExplicitDense, z);
  const auto w = step_size_from_gradient(zero_col, Vector{{1, 0, 0}}, IndexSet::from_unsorted({0}));
  EXPECT_TRUE(w.degenerate);
  EXPECT_EQ(w.w, 1.0);
}

TEST(Solvers, IdentityRecoversInOneIteration) {
  const auto sig = gen_signal(64, 6, 3);
  const Vector x = sig.dense();
  for (auto algo : kAlgorithms) {
    const auto res = solve(algo, identity(64), x, 6, StoppingConfig::for_algorithm(algo));
    EXPECT_EQ(res.status, ExitStatus::Converged) << to_string(algo);
    EXPECT_EQ(res.iterations, 1) << to_string(algo);
    EXPECT_EQ(res.x, x) << to_string(algo);
    EXPECT_EQ(res.residual_history.size(), 2u);
  }
}

TEST(Solvers, EasyRegimeRecoveryAndSparsity) {
  // n = 1024, delta = 0.5, rho = 0.05: deep inside the success region.
  for (auto algo : kAlgorithms) {
    int recovered = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
      const auto prob = make_problem(EnsembleKind::Gaussian, {1024, 0.5, 0.05}, derive_seed(1, {std::uint64_t(t)}));
      const auto res = solve(algo, prob.a, prob.y, prob.s, StoppingConfig::for_algorithm(algo));
      EXPECT_LE(count_nonzeros(res.x), prob.s);
      EXPECT_EQ(res.residual_history.size(), std::size_t(res.iterations) + 1);
      for (double h : res.residual_history) EXPECT_GE(h, 0.0);
      if (res.status == ExitStatus::Converged && (res.x - prob.x).norm() <= 1e-3) ++recovered;
    }
    EXPECT_GE(recovered, 95) << to_string(algo);
  }
}

TEST(Solvers, HopelessRegimeFails) {
  const auto prob = make_problem(EnsembleKind::Gaussian, {1024, 0.1, 0.9}, 77);
  for (auto algo : kAlgorithms) {
    const auto res = solve(algo, prob.a, prob.y, prob.s, StoppingConfig::for_algorithm(algo));
    EXPECT_NE(res.status, ExitStatus::Converged) << to_string(algo);
    EXPECT_LE(res.iterations, StoppingConfig::for_algorithm(algo).max_iter);
  }
}

TEST(Solvers, IterationCapsRespected) {
  const auto prob = make_problem(EnsembleKind::SparseCol, {256, 0.3, 0.6}, 5);
  EXPECT_LE(niht(prob.a, prob.y, prob.s).iterations, 900);
  EXPECT_LE(htp(prob.a, prob.y, prob.s).iterations, 200);
  EXPECT_LE(csmpsp(prob.a, prob.y, prob.s).iterations, 200);
}

TEST(Solvers, Deterministic) {
  const auto prob = make_problem(EnsembleKind::SubDCT, {256, 0.4, 0.2}, 8);
  for (auto algo : kAlgorithms) {
    const auto a = solve(algo, prob.a, prob.y, prob.s, StoppingConfig::for_algorithm(algo));
    const auto b = solve(algo, prob.a, prob.y, prob.s, StoppingConfig::for_algorithm(algo));
    EXPECT_EQ(a.residual_history, b.residual_history);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.status, b.status);
  }
}

TEST(Solvers, HtpResidualNonIncreasingOnStableSupport) {
  const auto prob = make_problem(EnsembleKind::Gaussian, {512, 0.3, 0.3}, 21);
  const auto res = htp(prob.a, prob.y, prob.s);
  // Re-run the iteration by hand with the same arithmetic and check the
  // fixed-support law.
  Vector x = project(prob.a.adjoint(prob.y), supp_s(prob.a.adjoint(prob.y), prob.s));
  IndexSet t = supp_s(x, prob.s);
  Vector r = prob.y - prob.a.apply_support(t, x);
  detail::RestrictedLsq lsq(prob.a, prob.y);
  bool damped = false;
  for (int k = 1; k <= std::min(res.iterations, 30); ++k) {
    const Vector g = prob.a.adjoint(r);
    const double w = step_size_from_gradient(prob.a, g, t).w;
    const IndexSet t_new = supp_s(x + w * g, prob.s);
    const Vector x_new = lsq.solve(t_new, damped);
    const Vector r_new = prob.y - prob.a.apply_support(t_new, x_new);
    if (t_new == t && k > 1) {
      EXPECT_LE(r_new.norm(), r.norm() * (1 + 1e-12) + 1e-14);
    }
    EXPECT_EQ(r_new.norm(), res.residual_history[std::size_t(k)]);
    x = x_new;
    t = t_new;
    r = r_new;
  }
}

TEST(Solvers, CsmpspMergedSupportAtMostTwoS) {
  const auto prob = make_problem(EnsembleKind::Gaussian, {256, 0.5, 0.2}, 2);
  Vector x = project(prob.a.adjoint(prob.y), supp_s(prob.a.adjoint(prob.y), prob.s));
  IndexSet t = supp_s(x, prob.s);
  Vector r = prob.y - prob.a.apply(x);
  for (int k = 0; k < 10; ++k) {
    const IndexSet merged = IndexSet::set_union(t, supp_s(prob.a.adjoint(r), prob.s));
    EXPECT_LE(merged.size(), std::size_t(2 * prob.s));
    const Vector b = lsq_on_support(prob.a, merged, prob.y).x;
    t = supp_s(b, prob.s);
    x = project(b, t);
    r = prob.y - prob.a.apply(x);
  }
}

TEST(Solvers, RejectBadSparsity) {
  const auto a = gen_gaussian(10, 20, 1);
  const Vector y = random_vector(10, 1);
  EXPECT_THROW(htp(a, y, 0), std::invalid_argument);
  EXPECT_THROW(htp(a, y, 11), std::invalid_argument);
}

TEST(SolveResultJson, RecordFields) {
  const auto sig = gen_signal(16, 2, 1);
  const Vector x = sig.dense();
  const auto res = htp(identity(16), x, 2);
  const auto j = to_json(res, &x);
  EXPECT_EQ(j["status"], "converged");
  EXPECT_EQ(j["iterations"], 1);
  EXPECT_EQ(j["recovery_error"], 0.0);
  EXPECT_FALSE(j.contains("wall_time_seconds"));
}

TEST(RestrictedLsq, AcceleratedPathsMatchDirectSolve) {
  for (auto kind : kCsEnsembles) {
    const auto p = make_problem(kind, {256, 0.5, 0.3}, 11);
    detail::RestrictedLsq lsq(p.a, p.y);
    Rng rng(5);
    // Sizes: tall, square-ish, wide with a small complement, and everything.
    for (int k : {10, 60, 100, 120, 128, 200, 240, 250, 256, 40, 230}) {
      const IndexSet t = IndexSet::from_unsorted(sample_without_replacement(rng, 256, k));
      bool damped = false;
      const Vector fast = lsq.solve(t, damped);
      const auto ref = lsq_on_support(p.a, t, p.y);
      Eigen::JacobiSVD<Matrix> svd(p.a.columns(t), Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(1e-10);
      const Vector pinv = svd.solve(p.y);
      Vector oracle = Vector::Zero(256);
      for (std::size_t c = 0; c < t.size(); ++c) oracle[t[c]] = pinv[Eigen::Index(c)];
      EXPECT_LE((fast - oracle).norm(), 1e-9 * std::max(1.0, oracle.norm())) << to_string(kind) << " k=" << k;
      EXPECT_LE((fast - ref.x).norm(), 1e-7 * std::max(1.0, ref.x.norm())) << to_string(kind) << " k=" << k;
      EXPECT_EQ(damped, ref.damped) << to_string(kind) << " k=" << k;
    }
  }
}
