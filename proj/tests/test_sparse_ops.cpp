#include "algsel/sparse_ops.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace algsel;

namespace {

Vector random_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Full sort by (|v| desc, index asc), keep s, return ascending.
std::vector<int> sort_oracle(const Vector& v, int s) {
  std::vector<int> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(v[a]) > std::abs(v[b]); });
  idx.resize(static_cast<std::size_t>(s));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Minimum-norm least squares through an SVD of the dense column block.
Vector pinv_oracle(const Matrix& at, const Vector& y) {
  Eigen::JacobiSVD<Matrix> svd(at, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(y);
}

}  // namespace

TEST(SuppS, Examples) {
  EXPECT_EQ(supp_s(Vector{{3, -5, 1, 0}}, 2).indices(), (std::vector<int>{0, 1}));
  EXPECT_EQ(supp_s(Vector{{1, 1, 1}}, 2).indices(), (std::vector<int>{0, 1}));
  EXPECT_EQ(supp_s(Vector{{1, 1, 1}}, 3).indices(), (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(supp_s(Vector{{1, 2}}, 0), std::invalid_argument);
  EXPECT_THROW(supp_s(Vector{{1, 2}}, 3), std::invalid_argument);
}

TEST(SuppS, MatchesFullSortOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(300));
    const int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    Vector v(n);
    // Every third trial uses small integers so that ties are common.
    for (int i = 0; i < n; ++i)
      v[i] = trial % 3 == 0 ? double(int(rng.below(7)) - 3) : rng.normal();
    ASSERT_EQ(supp_s(v, s).indices(), sort_oracle(v, s)) << "trial " << trial;
  }
  const Vector big = random_vector(4096, 5);
  EXPECT_EQ(supp_s(big, 512).indices(), sort_oracle(big, 512));
}

TEST(SuppS, NanRanksLast) {
  const Vector v{{std::nan(""), 1.0, -2.0}};
  EXPECT_EQ(supp_s(v, 2).indices(), (std::vector<int>{1, 2}));
}

TEST(Project, ExamplesAndLaws) {
  const Vector v{{1, 2, 3}};
  const IndexSet t = IndexSet::from_unsorted({1});
  EXPECT_EQ(project(v, t), (Vector{{0, 2, 0}}));
  EXPECT_EQ(project(project(v, t), t), project(v, t));
  EXPECT_EQ(project(v, IndexSet::all(3)), v);

  const Vector a = random_vector(50, 1), b = random_vector(50, 2);
  const IndexSet u = IndexSet::from_unsorted({0, 7, 8, 33, 49});
  EXPECT_LE((project(2.0 * a - b, u) - (2.0 * project(a, u) - project(b, u))).norm(), 1e-14);
  EXPECT_THROW(project(v, IndexSet::from_unsorted({3})), std::out_of_range);
}

TEST(LsqOnSupport, IdentityPseudoInverse) {
  const auto a = MeasurementMatrix::from_dense(EnsembleKind::ExplicitDense, Matrix::Identity(3, 3));
  const auto res = lsq_on_support(a, IndexSet::from_unsorted({0, 2}), Vector{{5, 6, 7}});
  EXPECT_LE((res.x - Vector{{5, 0, 7}}).norm(), 1e-15);
  EXPECT_FALSE(res.damped);
}

TEST(LsqOnSupport, ResidualOrthogonalToSupportColumns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = gen_gaussian(50, 100, seed);
    const Vector y = random_vector(50, seed + 100);
    Rng rng(seed);
    const IndexSet t = IndexSet::from_unsorted(sample_without_replacement(rng, 100, 10));
    const auto res = lsq_on_support(a, t, y);
    const Vector r = y - a.apply(res.x);
    const Vector atr = a.columns(t).transpose() * r;
    EXPECT_LE(atr.cwiseAbs().maxCoeff(), 1e-8 * y.norm());
    for (int i = 0; i < 100; ++i) {
      if (!t.contains(i)) {
        EXPECT_EQ(res.x[i], 0.0);
      }
    }
    const Vector z = pinv_oracle(a.columns(t), y);
    for (std::size_t c = 0; c < t.size(); ++c) EXPECT_NEAR(res.x[t[c]], z[Eigen::Index(c)], 1e-10);
  }
}

TEST(LsqOnSupport, ConsistentSubsystemHasZeroResidual) {
  const auto a = gen_subdct(40, 128, 4);
  const IndexSet t = IndexSet::from_unsorted({2, 5, 77, 100});
  Vector x = Vector::Zero(128);
  x[2] = 1.5;
  x[5] = -2;
  x[77] = 0.25;
  x[100] = 3;
  const Vector y = a.apply(x);
  const auto res = lsq_on_support(a, t, y);
  EXPECT_LE(residual_norm(a, res.x, y), 1e-10 * y.norm());
  EXPECT_LE((res.x - x).norm(), 1e-10);
}

TEST(LsqOnSupport, RankDeficientBlockIsDampedNotFatal) {
  Matrix d = gen_gaussian(20, 6, 3).densify();
  d.col(4) = d.col(1);  // duplicated column
  const auto a = MeasurementMatrix::from_dense(EnsembleKind::ExplicitDense, d);
  const Vector y = random_vector(20, 9);
  const IndexSet t = IndexSet::from_unsorted({0, 1, 4});
  const auto res = lsq_on_support(a, t, y);
  EXPECT_TRUE(res.damped);
  EXPECT_TRUE(res.x.allFinite());
  // The minimum-norm solution splits weight evenly between the duplicates.
  const Vector z = pinv_oracle(a.columns(t), y);
  EXPECT_NEAR(res.x[1], z[1], 1e-5);
  EXPECT_NEAR(res.x[4], z[2], 1e-5);
  EXPECT_NEAR(res.x[1], res.x[4], 1e-5);
}

TEST(LsqOnSupport, WideBlockGivesMinimumNormFit) {
  const auto a = gen_gaussian(8, 30, 12);
  const Vector y = random_vector(8, 13);
  Rng rng(1);
  const IndexSet t = IndexSet::from_unsorted(sample_without_replacement(rng, 30, 12));
  const auto res = lsq_on_support(a, t, y);
  EXPECT_TRUE(res.damped);
  EXPECT_LE(residual_norm(a, res.x, y), 1e-8 * y.norm());
  const Vector z = pinv_oracle(a.columns(t), y);
  for (std::size_t c = 0; c < t.size(); ++c) EXPECT_NEAR(res.x[t[c]], z[Eigen::Index(c)], 1e-8);
}

TEST(ResidualNorm, Examples) {
  const auto a = gen_subdct(64, 256, 2);
  const Vector y = random_vector(64, 3);
  EXPECT_DOUBLE_EQ(residual_norm(a, Vector::Zero(256), y), y.norm());

  const Vector x = random_vector(256, 4);
  EXPECT_EQ(residual_norm(a, x, a.apply(x)), 0.0);

  const Matrix d = a.densify();
  EXPECT_NEAR(residual_norm(a, x, y), (y - d * x).norm(), 1e-12);
}
