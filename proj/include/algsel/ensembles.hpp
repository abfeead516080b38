#ifndef ALGSEL_ENSEMBLES_HPP
#define ALGSEL_ENSEMBLES_HPP

// Measurement ensembles for sparse recovery experiments and the (delta, rho)
// sampling plane. All generators are pure functions of (shape, seed).

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "algsel/index_set.hpp"
#include "algsel/rng.hpp"

namespace algsel {

enum class EnsembleKind : std::uint32_t {
  Gaussian = 0,
  SparseCol = 1,
  SubDCT = 2,
  Tomo = 3,
  ExplicitDense = 4,
};

inline std::string_view to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::Gaussian: return "gaussian";
    case EnsembleKind::SparseCol: return "sparse";
    case EnsembleKind::SubDCT: return "dct";
    case EnsembleKind::Tomo: return "tomo";
    case EnsembleKind::ExplicitDense: return "dense";
  }
  return "unknown";
}

inline EnsembleKind ensemble_from_string(std::string_view s) {
  for (auto k : {EnsembleKind::Gaussian, EnsembleKind::SparseCol, EnsembleKind::SubDCT,
                 EnsembleKind::Tomo, EnsembleKind::ExplicitDense})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown ensemble '" + std::string(s) + "'");
}

/// The three compressed-sensing ensembles, in dataset column order.
inline constexpr EnsembleKind kCsEnsembles[] = {EnsembleKind::Gaussian, EnsembleKind::SparseCol,
                                                EnsembleKind::SubDCT};

/// Sparse-column ensemble nonzeros per column.
inline constexpr int kSparseColNonzeros = 7;

/// Default cap on m*n for dense storage (2^28 doubles = 2 GiB).
inline constexpr std::size_t kDefaultDenseEntryCap = std::size_t{1} << 28;

// ---------------------------------------------------------------------------
// (delta, rho) plane

struct PlanePoint {
  int n = 0;
  double delta = 0.0;  // m / n
  double rho = 0.0;    // s / m
};

struct ProblemSize {
  int m = 0;
  int s = 0;
  friend bool operator==(const ProblemSize&, const ProblemSize&) = default;
};

/// Round half up.
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// m = round(delta n), s = max(1, round(rho m)).
inline ProblemSize params_from_plane(const PlanePoint& p) {
  if (p.n < 1) throw std::invalid_argument("params_from_plane: n must be positive");
  if (!(p.delta > 0.0 && p.delta <= 1.0))
    throw std::invalid_argument("params_from_plane: delta must lie in (0, 1]");
  if (!(p.rho > 0.0 && p.rho <= 1.0))
    throw std::invalid_argument("params_from_plane: rho must lie in (0, 1]");
  ProblemSize out;
  out.m = round_half_up(p.delta * p.n);
  if (out.m < 1) throw std::invalid_argument("params_from_plane: delta*n rounds to m = 0");
  out.s = std::max(1, round_half_up(p.rho * out.m));
  if (out.m > p.n || out.s > out.m)
    throw std::invalid_argument("params_from_plane: rounding violates s <= m <= n");
  return out;
}

// ---------------------------------------------------------------------------
// Measurement matrices

class MeasurementMatrix {
 public:
  struct Dense {
    Matrix a;
  };
  /// Column j owns entries [j*p, (j+1)*p) of rows/values; rows ascending.
  struct SparseCols {
    int p = 0;
    std::vector<int> rows;
    std::vector<double> values;
  };
  /// Rows row_ids of the orthonormal n x n DCT-II matrix.
  /// Entry (i, j) = scale(k) * cos(pi (2j+1) k / 2n) with k = row_ids[i],
  /// evaluated through a table of cos(pi q / 2n), q in [0, 4n). Products
  /// with A and A^T go through a length-n FFT.
  struct SubDct {
    std::vector<int> row_ids;
    std::vector<double> cos_table;
  };
  using Storage = std::variant<Dense, SparseCols, SubDct>;

  MeasurementMatrix() = default;

  static MeasurementMatrix from_dense(EnsembleKind kind, Matrix a, std::uint64_t seed = 0) {
    if (kind == EnsembleKind::SparseCol || kind == EnsembleKind::SubDCT)
      throw std::invalid_argument("from_dense: structured kinds need structured storage");
    MeasurementMatrix out;
    out.kind_ = kind;
    out.m_ = static_cast<int>(a.rows());
    out.n_ = static_cast<int>(a.cols());
    out.seed_ = seed;
    out.storage_ = Dense{std::move(a)};
    return out;
  }

  static MeasurementMatrix from_sparse_cols(int m, int n, SparseCols sc, std::uint64_t seed = 0) {
    if (sc.p < 1 || sc.p > m) throw std::invalid_argument("sparse columns: need 1 <= p <= m");
    const auto nnz = static_cast<std::size_t>(n) * static_cast<std::size_t>(sc.p);
    if (sc.rows.size() != nnz || sc.values.size() != nnz)
      throw std::invalid_argument("sparse columns: payload size mismatch");
    for (int r : sc.rows)
      if (r < 0 || r >= m) throw std::invalid_argument("sparse columns: row index out of range");
    MeasurementMatrix out;
    out.kind_ = EnsembleKind::SparseCol;
    out.m_ = m;
    out.n_ = n;
    out.seed_ = seed;
    out.storage_ = std::move(sc);
    return out;
  }

  static MeasurementMatrix from_dct_rows(int n, std::vector<int> row_ids, std::uint64_t seed = 0) {
    for (int k : row_ids)
      if (k < 0 || k >= n) throw std::invalid_argument("dct rows: index out of range");
    SubDct d;
    d.row_ids = std::move(row_ids);
    d.cos_table.resize(4 * static_cast<std::size_t>(n));
    for (std::size_t q = 0; q < d.cos_table.size(); ++q)
      d.cos_table[q] = std::cos(std::numbers::pi * static_cast<double>(q) / (2.0 * n));
    MeasurementMatrix out;
    out.kind_ = EnsembleKind::SubDCT;
    out.m_ = static_cast<int>(d.row_ids.size());
    out.n_ = n;
    out.seed_ = seed;
    out.storage_ = std::move(d);
    return out;
  }

  EnsembleKind kind() const { return kind_; }
  int rows() const { return m_; }
  int cols() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  const Storage& storage() const { return storage_; }

  /// A x.
  Vector apply(const Vector& x) const {
    check_len(x, n_, "apply");
    return std::visit([&](const auto& st) { return apply_impl(st, x); }, storage_);
  }

  /// A^T r.
  Vector adjoint(const Vector& r) const {
    check_len(r, m_, "adjoint");
    return std::visit([&](const auto& st) { return adjoint_impl(st, r); }, storage_);
  }

  /// A_T x_T, reading x only on T (x has length n).
  Vector apply_support(const IndexSet& t, const Vector& x) const {
    check_len(x, n_, "apply_support");
    t.check_bounds(n_);
    return std::visit([&](const auto& st) { return apply_support_impl(st, t, x); }, storage_);
  }

  /// The m x |T| block of columns indexed by T.
  Matrix columns(const IndexSet& t) const {
    t.check_bounds(n_);
    Matrix out(m_, static_cast<Eigen::Index>(t.size()));
    for (std::size_t c = 0; c < t.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = column(t[c]);
    return out;
  }

  Vector column(int j) const {
    Vector out = Vector::Zero(m_);
    std::visit(
        [&](const auto& st) {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, Dense>) {
            out = st.a.col(j);
          } else if constexpr (std::is_same_v<S, SparseCols>) {
            const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(st.p);
            for (int e = 0; e < st.p; ++e) out[st.rows[base + e]] = st.values[base + e];
          } else {
            for (int i = 0; i < m_; ++i) out[i] = dct_entry(st, i, j);
          }
        },
        storage_);
    return out;
  }

  double entry(int i, int j) const {
    return std::visit(
        [&](const auto& st) -> double {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, Dense>) {
            return st.a(i, j);
          } else if constexpr (std::is_same_v<S, SparseCols>) {
            const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(st.p);
            for (int e = 0; e < st.p; ++e)
              if (st.rows[base + e] == i) return st.values[base + e];
            return 0.0;
          } else {
            return dct_entry(st, i, j);
          }
        },
        storage_);
  }

  Matrix densify() const {
    if (const auto* d = std::get_if<Dense>(&storage_)) return d->a;
    Matrix out(m_, n_);
    for (int j = 0; j < n_; ++j) out.col(j) = column(j);
    return out;
  }

  /// Same kind and structure, every entry multiplied by c.
  MeasurementMatrix scaled(double c) const {
    MeasurementMatrix out = *this;
    std::visit(
        [&](auto& st) {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, Dense>) {
            st.a *= c;
          } else if constexpr (std::is_same_v<S, SparseCols>) {
            for (auto& v : st.values) v *= c;
          } else {
            out = from_dense(EnsembleKind::ExplicitDense, densify() * c, seed_);
          }
        },
        out.storage_);
    return out;
  }

 private:
  static void check_len(const Vector& v, int want, const char* what) {
    if (v.size() != want)
      throw std::invalid_argument(std::string("MeasurementMatrix::") + what + ": length mismatch");
  }

  static double dct_scale(const SubDct& st, int k) {
    const double n = static_cast<double>(st.cos_table.size() / 4);
    return k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  }

  static double dct_entry(const SubDct& st, int i, int j) {
    const auto period = static_cast<std::int64_t>(st.cos_table.size());
    const std::int64_t k = st.row_ids[static_cast<std::size_t>(i)];
    const auto q = static_cast<std::size_t>(((2 * static_cast<std::int64_t>(j) + 1) * k) % period);
    return dct_scale(st, static_cast<int>(k)) * st.cos_table[q];
  }

  static Vector project_to(const IndexSet& t, const Vector& x) {
    Vector out = Vector::Zero(x.size());
    for (int j : t) out[j] = x[j];
    return out;
  }

  static Eigen::FFT<double>& fft() {
    thread_local Eigen::FFT<double> f;
    return f;
  }

  // Full orthonormal DCT-II of length n through one complex FFT: even
  // samples forward, odd samples reversed, then a quarter-sample twiddle.
  static Vector dct_ii(const SubDct& st, const Vector& x) {
    const auto n = static_cast<int>(x.size());
    std::vector<std::complex<double>> v(static_cast<std::size_t>(n)), spectrum;
    for (int j = 0; 2 * j < n; ++j) v[static_cast<std::size_t>(j)] = x[2 * j];
    for (int j = 0; 2 * j + 1 < n; ++j) v[static_cast<std::size_t>(n - 1 - j)] = x[2 * j + 1];
    fft().fwd(spectrum, v);
    Vector out(n);
    for (int k = 0; k < n; ++k) {
      const std::complex<double> w(st.cos_table[static_cast<std::size_t>(k)],
                                   -st.cos_table[static_cast<std::size_t>(k + 3 * n)]);
      out[k] = dct_scale(st, k) * (w * spectrum[static_cast<std::size_t>(k)]).real();
    }
    return out;
  }

  // Inverse (= transpose) of dct_ii.
  static Vector dct_iii(const SubDct& st, const Vector& c) {
    const auto n = static_cast<int>(c.size());
    auto y = [&](int k) { return k >= n ? 0.0 : c[k] / dct_scale(st, k); };
    std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(n)), v;
    for (int k = 0; k < n; ++k) {
      const std::complex<double> w_conj(st.cos_table[static_cast<std::size_t>(k)],
                                        st.cos_table[static_cast<std::size_t>(k + 3 * n)]);
      spectrum[static_cast<std::size_t>(k)] = w_conj * std::complex<double>(y(k), k == 0 ? 0.0 : -y(n - k));
    }
    fft().inv(v, spectrum);
    Vector out(n);
    for (int j = 0; 2 * j < n; ++j) out[2 * j] = v[static_cast<std::size_t>(j)].real();
    for (int j = 0; 2 * j + 1 < n; ++j) out[2 * j + 1] = v[static_cast<std::size_t>(n - 1 - j)].real();
    return out;
  }

  Vector apply_impl(const Dense& st, const Vector& x) const { return st.a * x; }

  Vector apply_impl(const SparseCols& st, const Vector& x) const {
    Vector y = Vector::Zero(m_);
    for (int j = 0; j < n_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(st.p);
      for (int e = 0; e < st.p; ++e) y[st.rows[base + e]] += st.values[base + e] * xj;
    }
    return y;
  }

  Vector apply_impl(const SubDct& st, const Vector& x) const {
    const Vector full = dct_ii(st, x);
    Vector y(m_);
    for (int i = 0; i < m_; ++i) y[i] = full[st.row_ids[static_cast<std::size_t>(i)]];
    return y;
  }

  Vector adjoint_impl(const Dense& st, const Vector& r) const { return st.a.transpose() * r; }

  Vector adjoint_impl(const SparseCols& st, const Vector& r) const {
    Vector x(n_);
    for (int j = 0; j < n_; ++j) {
      const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(st.p);
      double acc = 0.0;
      for (int e = 0; e < st.p; ++e) acc += st.values[base + e] * r[st.rows[base + e]];
      x[j] = acc;
    }
    return x;
  }

  Vector adjoint_impl(const SubDct& st, const Vector& r) const {
    Vector z = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i) z[st.row_ids[static_cast<std::size_t>(i)]] = r[i];
    return dct_iii(st, z);
  }

  Vector apply_support_impl(const Dense& st, const IndexSet& t, const Vector& x) const {
    Vector y = Vector::Zero(m_);
    for (int j : t) y.noalias() += st.a.col(j) * x[j];
    return y;
  }

  Vector apply_support_impl(const SparseCols& st, const IndexSet& t, const Vector& x) const {
    Vector y = Vector::Zero(m_);
    for (int j : t) {
      const auto base = static_cast<std::size_t>(j) * static_cast<std::size_t>(st.p);
      for (int e = 0; e < st.p; ++e) y[st.rows[base + e]] += st.values[base + e] * x[j];
    }
    return y;
  }

  Vector apply_support_impl(const SubDct& st, const IndexSet& t, const Vector& x) const {
    // Direct sums cost m |T|; the transform costs a few n log n.
    if (static_cast<double>(m_) * static_cast<double>(t.size()) > 8.0 * n_ * std::log2(n_ + 1.0))
      return apply_impl(st, project_to(t, x));
    Vector y(m_);
    const auto period = static_cast<std::int64_t>(st.cos_table.size());
    for (int i = 0; i < m_; ++i) {
      const std::int64_t k = st.row_ids[static_cast<std::size_t>(i)];
      double acc = 0.0;
      for (int j : t) {
        const auto q = static_cast<std::size_t>(((2 * static_cast<std::int64_t>(j) + 1) * k) % period);
        acc += st.cos_table[q] * x[j];
      }
      y[i] = dct_scale(st, static_cast<int>(k)) * acc;
    }
    return y;
  }

  EnsembleKind kind_ = EnsembleKind::ExplicitDense;
  int m_ = 0;
  int n_ = 0;
  std::uint64_t seed_ = 0;
  Storage storage_ = Dense{};
};

// ---------------------------------------------------------------------------
// Generators

/// Dense m x n with i.i.d. N(0, variance) entries, drawn in row-major order.
inline Matrix gaussian_dense(int m, int n, double variance, std::uint64_t seed,
                             std::size_t entry_cap = kDefaultDenseEntryCap) {
  if (m < 1 || n < 1) throw std::invalid_argument("gaussian matrix: m and n must be positive");
  if (static_cast<std::size_t>(m) * static_cast<std::size_t>(n) > entry_cap)
    throw std::length_error("gaussian matrix: m*n exceeds the dense entry cap");
  Rng rng(seed);
  const double sd = std::sqrt(variance);
  Matrix a(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = sd * rng.normal();
  return a;
}

/// Entries i.i.d. N(0, 1/m): unit-norm columns in expectation.
inline MeasurementMatrix gen_gaussian(int m, int n, std::uint64_t seed,
                                      std::size_t entry_cap = kDefaultDenseEntryCap) {
  return MeasurementMatrix::from_dense(EnsembleKind::Gaussian,
                                       gaussian_dense(m, n, 1.0 / m, seed, entry_cap), seed);
}

/// Exactly p nonzeros per column at distinct uniform rows, each +-1/sqrt(p).
inline MeasurementMatrix gen_sparse_col(int m, int n, int p, std::uint64_t seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("sparse matrix: m and n must be positive");
  if (p < 1 || p > m) throw std::invalid_argument("sparse matrix: need 1 <= p <= m");
  Rng rng(seed);
  const double v = 1.0 / std::sqrt(static_cast<double>(p));
  MeasurementMatrix::SparseCols sc;
  sc.p = p;
  sc.rows.reserve(static_cast<std::size_t>(n) * p);
  sc.values.reserve(static_cast<std::size_t>(n) * p);
  for (int j = 0; j < n; ++j) {
    auto rows = sample_without_replacement(rng, m, p);
    std::sort(rows.begin(), rows.end());
    for (int r : rows) {
      sc.rows.push_back(r);
      sc.values.push_back(rng.sign() * v);
    }
  }
  return MeasurementMatrix::from_sparse_cols(m, n, std::move(sc), seed);
}

/// m distinct rows (ascending) of the orthonormal n x n DCT-II matrix.
inline MeasurementMatrix gen_subdct(int m, int n, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("dct matrix: m and n must be positive");
  if (m > n) throw std::invalid_argument("dct matrix: need m <= n");
  Rng rng(seed);
  auto rows = sample_without_replacement(rng, n, m);
  std::sort(rows.begin(), rows.end());
  return MeasurementMatrix::from_dct_rows(n, std::move(rows), seed);
}

/// Draws the named compressed-sensing ensemble.
inline MeasurementMatrix gen_ensemble(EnsembleKind kind, int m, int n, std::uint64_t seed) {
  switch (kind) {
    case EnsembleKind::Gaussian: return gen_gaussian(m, n, seed);
    case EnsembleKind::SparseCol: return gen_sparse_col(m, n, std::min(kSparseColNonzeros, m), seed);
    case EnsembleKind::SubDCT: return gen_subdct(m, n, seed);
    default: break;
  }
  throw std::invalid_argument("gen_ensemble: not a compressed-sensing ensemble");
}

// ---------------------------------------------------------------------------
// Sparse signals

struct SparseSignal {
  int n = 0;
  IndexSet support;
  std::vector<double> values;  // aligned with support

  Vector dense() const {
    Vector x = Vector::Zero(n);
    for (std::size_t i = 0; i < support.size(); ++i) x[support[i]] = values[i];
    return x;
  }
};

/// s-sparse signal with uniform support and +-1 entries.
inline SparseSignal gen_signal(int n, int s, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_signal: n must be positive");
  if (s < 1 || s > n) throw std::invalid_argument("gen_signal: need 1 <= s <= n");
  Rng rng(seed);
  SparseSignal out;
  out.n = n;
  out.support = IndexSet::from_unsorted(sample_without_replacement(rng, n, s));
  out.values.resize(static_cast<std::size_t>(s));
  for (auto& v : out.values) v = rng.sign();
  return out;
}

/// One compressed-sensing instance y = A x.
struct SparseProblem {
  MeasurementMatrix a;
  Vector y;
  int s = 0;
  Vector x;
  PlanePoint point;
};

inline SparseProblem make_problem(EnsembleKind kind, const PlanePoint& point, std::uint64_t seed) {
  const ProblemSize size = params_from_plane(point);
  SparseProblem out;
  out.a = gen_ensemble(kind, size.m, point.n, derive_seed(seed, {1}));
  out.x = gen_signal(point.n, size.s, derive_seed(seed, {2})).dense();
  out.y = out.a.apply(out.x);
  out.s = size.s;
  out.point = point;
  return out;
}

// ---------------------------------------------------------------------------
// Binary and CSV export
//
// Binary layout (little-endian):
//   char[8]  "ALGSELMM"
//   u32      format version (1)
//   u32      kind tag (EnsembleKind value)
//   u64      m, n, seed
//   u64      aux: p for sparse columns, else 0
//   payload:
//     dense kinds:   m*n f64, row-major
//     sparse cols:   n*p u32 row indices, then n*p f64 values (column blocks)
//     subsampled DCT: m u32 row indices

inline constexpr char kMatrixMagic[8] = {'A', 'L', 'G', 'S', 'E', 'L', 'M', 'M'};
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw std::runtime_error("matrix file: truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_matrix(std::ostream& os, const MeasurementMatrix& a) {
  os.write(kMatrixMagic, sizeof(kMatrixMagic));
  detail::put<std::uint32_t>(os, kMatrixFormatVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(a.kind()));
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(a.rows()));
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(a.cols()));
  detail::put<std::uint64_t>(os, a.seed());
  std::visit(
      [&](const auto& st) {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, MeasurementMatrix::Dense>) {
          detail::put<std::uint64_t>(os, 0);
          for (Eigen::Index i = 0; i < st.a.rows(); ++i)
            for (Eigen::Index j = 0; j < st.a.cols(); ++j) detail::put<double>(os, st.a(i, j));
        } else if constexpr (std::is_same_v<S, MeasurementMatrix::SparseCols>) {
          detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(st.p));
          for (int r : st.rows) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(r));
          for (double v : st.values) detail::put<double>(os, v);
        } else {
          detail::put<std::uint64_t>(os, 0);
          for (int r : st.row_ids) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(r));
        }
      },
      a.storage());
  if (!os) throw std::runtime_error("matrix file: write failed");
}

inline MeasurementMatrix read_matrix(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0)
    throw std::runtime_error("matrix file: bad magic");
  if (detail::get<std::uint32_t>(is) != kMatrixFormatVersion)
    throw std::runtime_error("matrix file: unsupported version");
  const auto tag = detail::get<std::uint32_t>(is);
  if (tag > static_cast<std::uint32_t>(EnsembleKind::ExplicitDense))
    throw std::runtime_error("matrix file: unknown kind tag");
  const auto kind = static_cast<EnsembleKind>(tag);
  const auto m = static_cast<int>(detail::get<std::uint64_t>(is));
  const auto n = static_cast<int>(detail::get<std::uint64_t>(is));
  const auto seed = detail::get<std::uint64_t>(is);
  const auto aux = detail::get<std::uint64_t>(is);
  switch (kind) {
    case EnsembleKind::SparseCol: {
      MeasurementMatrix::SparseCols sc;
      sc.p = static_cast<int>(aux);
      const auto nnz = static_cast<std::size_t>(n) * aux;
      sc.rows.resize(nnz);
      sc.values.resize(nnz);
      for (auto& r : sc.rows) r = static_cast<int>(detail::get<std::uint32_t>(is));
      for (auto& v : sc.values) v = detail::get<double>(is);
      return MeasurementMatrix::from_sparse_cols(m, n, std::move(sc), seed);
    }
    case EnsembleKind::SubDCT: {
      std::vector<int> rows(static_cast<std::size_t>(m));
      for (auto& r : rows) r = static_cast<int>(detail::get<std::uint32_t>(is));
      return MeasurementMatrix::from_dct_rows(n, std::move(rows), seed);
    }
    default: {
      Matrix a(m, n);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = detail::get<double>(is);
      return MeasurementMatrix::from_dense(kind, std::move(a), seed);
    }
  }
}

/// Densified rows, full round-trip precision.
inline void write_matrix_csv(std::ostream& os, const MeasurementMatrix& a) {
  const Matrix d = a.densify();
  std::ostringstream line;
  line << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    line.str({});
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (j) line << ',';
      line << d(i, j);
    }
    os << line.str() << '\n';
  }
}

}  // namespace algsel

#endif  // ALGSEL_ENSEMBLES_HPP
