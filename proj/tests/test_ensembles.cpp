#include "algsel/ensembles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace algsel;

namespace {

// Orthonormal DCT-II row evaluated straight from the definition.
double dct_oracle(int n, int k, int j) {
  const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return scale * std::cos(std::numbers::pi * (2.0 * j + 1.0) * k / (2.0 * n));
}

Vector random_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST(ParamsFromPlane, Examples) {
  EXPECT_EQ(params_from_plane({4096, 0.5, 0.25}), (ProblemSize{2048, 512}));
  EXPECT_EQ(params_from_plane({4096, 1.0, 1.0}), (ProblemSize{4096, 4096}));
  EXPECT_EQ(params_from_plane({100, 0.013, 0.5}), (ProblemSize{1, 1}));
}

TEST(ParamsFromPlane, RejectsOutOfRange) {
  EXPECT_THROW(params_from_plane({100, 1.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(params_from_plane({100, 0.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(params_from_plane({0, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(params_from_plane({100, 0.001, 0.5}), std::invalid_argument);  // m rounds to 0
}

TEST(Gaussian, MomentsMatchNormalOneOverM) {
  const int m = 2048, n = 4096;
  const auto a = gen_gaussian(m, n, 7);
  const Matrix& d = std::get<MeasurementMatrix::Dense>(a.storage()).a;
  const double count = double(m) * n;
  const double mean = d.mean();
  const double sigma = std::sqrt(1.0 / m);
  EXPECT_LE(std::abs(mean), 4 * sigma / std::sqrt(count));
  const double var = (d.array() - mean).square().sum() / (count - 1);
  EXPECT_NEAR(var, 1.0 / m, 0.05 / m);
}

TEST(Gaussian, DeterministicAndDegenerate) {
  const auto a = gen_gaussian(30, 40, 11);
  const auto b = gen_gaussian(30, 40, 11);
  EXPECT_TRUE((a.densify().array() == b.densify().array()).all());
  EXPECT_FALSE((a.densify().array() == gen_gaussian(30, 40, 12).densify().array()).all());
  const auto one = gen_gaussian(1, 1, 0);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_TRUE(std::isfinite(one.entry(0, 0)));
  EXPECT_THROW(gen_gaussian(1000, 1000, 0, 1000), std::length_error);
}

TEST(Gaussian, ColumnNormsAreOneInExpectation) {
  const auto a = gen_gaussian(256, 200, 5);
  const double mean_norm = a.densify().colwise().norm().mean();
  EXPECT_NEAR(mean_norm, 1.0, 0.05);
}

TEST(SparseCol, ExactNormsAndCounts) {
  const auto a = gen_sparse_col(100, 200, 7, 3);
  const Matrix d = a.densify();
  const double v = 1.0 / std::sqrt(7.0);
  for (int j = 0; j < d.cols(); ++j) {
    EXPECT_NEAR(d.col(j).norm(), 1.0, 1e-12);
    int nnz = 0;
    for (int i = 0; i < d.rows(); ++i) {
      const double e = std::abs(d(i, j));
      if (e != 0.0) {
        ++nnz;
        EXPECT_EQ(e, v);
      }
    }
    EXPECT_EQ(nnz, 7);
  }
}

TEST(SparseCol, FullColumnWhenPEqualsM) {
  const auto a = gen_sparse_col(5, 1, 5, 0);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(std::abs(a.entry(i, 0)), 1.0 / std::sqrt(5.0));
  EXPECT_THROW(gen_sparse_col(5, 3, 6, 0), std::invalid_argument);
}

TEST(SubDct, FullMatrixIsOrthogonal) {
  for (int n : {1, 2, 7, 64}) {
    const Matrix d = gen_subdct(n, n, 99).densify();
    EXPECT_LE((d * d.transpose() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10) << n;
    EXPECT_LE((d.transpose() * d - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10) << n;
  }
}

TEST(SubDct, RowSubsetHasOrthonormalRows) {
  const auto a = gen_subdct(512, 4096, 1);
  const Matrix d = a.densify();
  EXPECT_LE((d * d.transpose() - Matrix::Identity(512, 512)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(gen_subdct(10, 5, 0), std::invalid_argument);
}

TEST(SubDct, EntriesMatchDefinition) {
  const int n = 97;
  const auto a = gen_subdct(40, n, 8);
  const auto& rows = std::get<MeasurementMatrix::SubDct>(a.storage()).row_ids;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < n; ++j) EXPECT_NEAR(a.entry(i, j), dct_oracle(n, rows[i], j), 1e-13);
  const auto row0 = MeasurementMatrix::from_dct_rows(n, {0});
  for (int j = 0; j < n; ++j) EXPECT_NEAR(row0.entry(0, j), 1.0 / std::sqrt(double(n)), 1e-15);
}

TEST(MeasurementMatrix, MatrixFreeOperatorsMatchDense) {
  const std::vector<MeasurementMatrix> mats = {gen_gaussian(30, 70, 1), gen_sparse_col(30, 70, 7, 2),
                                               gen_subdct(30, 70, 3)};
  for (const auto& a : mats) {
    const Matrix d = a.densify();
    const Vector x = random_vector(70, 10);
    const Vector r = random_vector(30, 11);
    EXPECT_LE((a.apply(x) - d * x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.adjoint(r) - d.transpose() * r).cwiseAbs().maxCoeff(), 1e-12);
    const IndexSet t = IndexSet::from_unsorted({3, 9, 41, 69});
    Vector xt = Vector::Zero(70);
    for (int j : t) xt[j] = x[j];
    EXPECT_LE((a.apply_support(t, x) - d * xt).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix cols = a.columns(t);
    for (std::size_t c = 0; c < t.size(); ++c)
      EXPECT_TRUE((cols.col(Eigen::Index(c)).array() == d.col(t[c]).array()).all());
  }
}

TEST(Signal, SupportAndValues) {
  const auto sig = gen_signal(4096, 512, 9);
  const Vector x = sig.dense();
  int nnz = 0;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) {
      ++nnz;
      EXPECT_EQ(std::abs(x[i]), 1.0);
    }
  }
  EXPECT_EQ(nnz, 512);
  EXPECT_EQ(x.squaredNorm(), 512.0);
  EXPECT_EQ(x.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(gen_signal(3, 3, 0).dense().cwiseAbs().minCoeff(), 1.0);
  EXPECT_THROW(gen_signal(3, 4, 0), std::invalid_argument);
}

TEST(Signal, SignsAreBalanced) {
  const auto sig = gen_signal(20000, 10000, 1);
  double sum = 0;
  for (double v : sig.values) sum += v;
  EXPECT_LE(std::abs(sum), 4 * std::sqrt(10000.0));
}

TEST(MatrixIo, BinaryRoundTripPreservesEveryKind) {
  const std::vector<MeasurementMatrix> mats = {gen_gaussian(6, 9, 1), gen_sparse_col(6, 9, 3, 2),
                                               gen_subdct(6, 9, 3)};
  for (const auto& a : mats) {
    std::stringstream buf;
    write_matrix(buf, a);
    const auto b = read_matrix(buf);
    EXPECT_EQ(b.kind(), a.kind());
    EXPECT_EQ(b.seed(), a.seed());
    EXPECT_TRUE((a.densify().array() == b.densify().array()).all());
  }
}

TEST(MatrixIo, RejectsCorruptInput) {
  std::stringstream bad("NOTAMATRIX");
  EXPECT_THROW(read_matrix(bad), std::runtime_error);
  std::stringstream buf;
  write_matrix(buf, gen_gaussian(4, 4, 0));
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::stringstream truncated(s);
  EXPECT_THROW(read_matrix(truncated), std::runtime_error);
}

TEST(MatrixIo, CsvHasOneLinePerRow) {
  std::stringstream buf;
  write_matrix_csv(buf, gen_sparse_col(4, 5, 2, 0));
  std::string line;
  int lines = 0;
  while (std::getline(buf, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  }
  EXPECT_EQ(lines, 4);
}
