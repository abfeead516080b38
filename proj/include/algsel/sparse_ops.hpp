#ifndef ALGSEL_SPARSE_OPS_HPP
#define ALGSEL_SPARSE_OPS_HPP

// Primitives shared by the greedy solvers: hard thresholding, support
// projection, restricted least squares and residuals.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "algsel/ensembles.hpp"
#include "algsel/index_set.hpp"

namespace algsel {

/// Indices of the s largest-magnitude entries of v, ties to the lower index.
/// NaN entries rank below every number.
inline IndexSet supp_s(const Vector& v, int s) {
  const auto n = static_cast<int>(v.size());
  if (s < 1 || s > n) throw std::invalid_argument("supp_s: need 1 <= s <= length(v)");
  auto key = [&](int i) {
    const double a = std::abs(v[i]);
    return std::isnan(a) ? -1.0 : a;
  };
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&](int a, int b) {
    const double ka = key(a);
    const double kb = key(b);
    return ka > kb || (ka == kb && a < b);
  };
  if (s < n) std::nth_element(idx.begin(), idx.begin() + s, idx.end(), before);
  idx.resize(static_cast<std::size_t>(s));
  return IndexSet::from_unsorted(std::move(idx));
}

/// v on T, zero elsewhere.
inline Vector project(const Vector& v, const IndexSet& t) {
  t.check_bounds(static_cast<int>(v.size()));
  Vector out = Vector::Zero(v.size());
  for (int i : t) out[i] = v[i];
  return out;
}

struct LsqResult {
  Vector x;             // length n, zero off the support
  bool damped = false;  // rank-deficient or underdetermined block
};

/// Relative pivot size below which A_T is treated as rank deficient.
inline constexpr double kLsqRankTol = 1e-10;
/// Tikhonov damping relative to ||A_T||_F^2 for the rank-deficient fallback.
inline constexpr double kLsqDamping = 1e-12;

/// x = A_T^+ y embedded in R^n.
///
/// Full-column-rank blocks are solved by Householder QR. Rank-deficient or
/// wide blocks (|T| > m) use a damped solve, which approximates the
/// minimum-norm solution and sets `damped`.
inline LsqResult lsq_on_support(const MeasurementMatrix& a, const IndexSet& t, const Vector& y) {
  if (y.size() != a.rows()) throw std::invalid_argument("lsq_on_support: y length mismatch");
  LsqResult out;
  out.x = Vector::Zero(a.cols());
  if (t.empty()) return out;

  const Matrix b = a.columns(t);
  const auto cols = b.cols();
  Vector z;
  bool solved = false;
  if (cols <= b.rows()) {
    Eigen::HouseholderQR<Matrix> qr(b);
    const auto rdiag = qr.matrixQR().diagonal().cwiseAbs();
    if (rdiag.minCoeff() > kLsqRankTol * rdiag.maxCoeff()) {
      z = qr.solve(y);
      solved = true;
    }
  }
  if (!solved) {
    out.damped = true;
    const double lambda = kLsqDamping * b.squaredNorm();
    if (cols <= b.rows()) {
      Matrix g = b.transpose() * b;
      g.diagonal().array() += lambda;
      z = g.ldlt().solve(b.transpose() * y);
    } else {
      Matrix g;
      if (const auto* sc = std::get_if<MeasurementMatrix::SparseCols>(&a.storage())) {
        // Sum of p x p outer products, one per column.
        g = Matrix::Zero(b.rows(), b.rows());
        for (int j : t) {
          const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(sc->p);
          for (int e = 0; e < sc->p; ++e)
            for (int f = 0; f < sc->p; ++f)
              g(sc->rows[base + e], sc->rows[base + f]) += sc->values[base + e] * sc->values[base + f];
        }
      } else {
        g = b * b.transpose();
      }
      g.diagonal().array() += lambda;
      z = b.transpose() * g.ldlt().solve(y);
    }
  }
  for (std::size_t c = 0; c < t.size(); ++c) out.x[t[c]] = z[static_cast<Eigen::Index>(c)];
  return out;
}

/// ||y - A x||_2.
inline double residual_norm(const MeasurementMatrix& a, const Vector& x, const Vector& y) {
  return (y - a.apply(x)).norm();
}

}  // namespace algsel

#endif  // ALGSEL_SPARSE_OPS_HPP
