#ifndef ALGSEL_TOMO_HPP
#define ALGSEL_TOMO_HPP

// Random-ray tomography matrices on an N x N pixel grid, MNIST IDX reading
// and writing, and bilinear image resizing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "algsel/ensembles.hpp"
#include "algsel/rng.hpp"

namespace algsel {

/// A ray P + t d, t in [0, length], lying inside the square [0, side]^2.
struct Ray {
  double px = 0, py = 0;
  double dx = 0, dy = 0;  // unit direction
  double length = 0;      // chord length through the square
};

/// Chord of the ray starting at (px, py) with unit direction (dx, dy)
/// through [0, side]^2. The start point must be inside or on the boundary.
inline Ray clip_ray(double side, double px, double py, double dx, double dy) {
  auto exit_t = [side](double p, double d) {
    if (d > 0) return (side - p) / d;
    if (d < 0) return -p / d;
    return std::numeric_limits<double>::infinity();
  };
  return {px, py, dx, dy, std::max(0.0, std::min(exit_t(px, dx), exit_t(py, dy)))};
}

/// Pixel intersection lengths of a ray with the N x N grid covering
/// [0, side]^2. Pixel (row i, col j) covers y in [i h, (i+1) h) and
/// x in [j h, (j+1) h), h = side / N, and has index i N + j.
/// Walks the grid one cell boundary at a time.
inline std::vector<std::pair<int, double>> trace_ray(int n, double side, const Ray& ray) {
  std::vector<std::pair<int, double>> out;
  if (!(ray.length > 0)) return out;
  const double h = side / n;

  // Parameter of the next vertical (x) and horizontal (y) grid line crossing.
  auto first_crossing = [h, n](double p, double d, double& t_delta) {
    if (d > 0) {
      t_delta = h / d;
      const int k = std::min(n, static_cast<int>(std::floor(p / h)) + 1);
      return (k * h - p) / d;
    }
    if (d < 0) {
      t_delta = -h / d;
      const int k = std::max(0, static_cast<int>(std::ceil(p / h)) - 1);
      return (k * h - p) / d;
    }
    t_delta = std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::infinity();
  };
  double tdx = 0, tdy = 0;
  double tx = first_crossing(ray.px, ray.dx, tdx);
  double ty = first_crossing(ray.py, ray.dy, tdy);

  double t = 0.0;
  while (t < ray.length) {
    const double next = std::min({tx, ty, ray.length});
    if (next > t) {
      // The segment midpoint decides the cell, which keeps rays running
      // along grid lines or through corners well defined.
      const double mid = 0.5 * (t + next);
      const int col = std::clamp(static_cast<int>(std::floor((ray.px + mid * ray.dx) / h)), 0, n - 1);
      const int row = std::clamp(static_cast<int>(std::floor((ray.py + mid * ray.dy) / h)), 0, n - 1);
      const int idx = row * n + col;
      if (!out.empty() && out.back().first == idx)
        out.back().second += next - t;
      else
        out.emplace_back(idx, next - t);
    }
    t = next;
    if (tx <= t) tx += tdx;
    if (ty <= t) ty += tdy;
  }
  return out;
}

/// Uniform point on the boundary of [0, side]^2 and a direction whose angle
/// to the boundary edge is uniform on (0, pi), pointing inward.
inline Ray random_boundary_ray(Rng& rng, double side) {
  const double u = 4.0 * rng.uniform();
  const int edge = std::min(3, static_cast<int>(u));
  const double a = (u - edge) * side;
  const double theta = std::numbers::pi * rng.uniform();
  const double c = std::cos(theta), s = std::sin(theta);
  switch (edge) {
    case 0: return clip_ray(side, a, 0.0, c, s);          // bottom, inward +y
    case 1: return clip_ray(side, side, a, -s, c);        // right, inward -x
    case 2: return clip_ray(side, side - a, side, -c, -s);  // top, inward -y
    default: return clip_ray(side, 0.0, side - a, s, -c);  // left, inward +x
  }
}

inline constexpr double kMinChord = 1e-12;

/// round(f N^2) random rays through the N x N grid on [0, side]^2; row r is the
/// vector of intersection lengths of ray r. Rays with a chord shorter than
/// kMinChord * side are redrawn. Each row uses its own derived stream.
inline Matrix gen_tomo_dense(int n, double f, std::uint64_t seed, double side = 1.0) {
  if (n < 2) throw std::invalid_argument("gen_tomo: N must be >= 2");
  if (!(f > 0) || !std::isfinite(f)) throw std::invalid_argument("gen_tomo: f must be positive");
  if (!(side > 0) || !std::isfinite(side)) throw std::invalid_argument("gen_tomo: side must be positive");
  const auto rows = static_cast<Eigen::Index>(std::llround(f * n * n));
  if (rows < 1) throw std::invalid_argument("gen_tomo: f N^2 rounds to zero rows");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(rows,
                                                                                   static_cast<Eigen::Index>(n) * n);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    Ray ray;
    do {
      ray = random_boundary_ray(rng, side);
    } while (!(ray.length > kMinChord * side));
    for (const auto& [idx, len] : trace_ray(n, side, ray)) a(r, idx) += len;
  }
  return a;
}

inline MeasurementMatrix gen_tomo(int n, double f, std::uint64_t seed, double side = 1.0) {
  return MeasurementMatrix::from_dense(EnsembleKind::Tomo, gen_tomo_dense(n, f, seed, side), seed);
}

// ---------------------------------------------------------------------------
// MNIST IDX

/// Malformed IDX input; offset is the byte position where parsing failed.
class IdxParseError : public std::runtime_error {
 public:
  IdxParseError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(std::istream& is, std::uint64_t& offset, const char* field) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IdxParseError(std::string("truncated ") + field, offset);
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  os.write(b, 4);
}

}  // namespace detail

struct IdxImages {
  int rows = 0;
  int cols = 0;
  std::uint32_t declared_count = 0;
  std::vector<Vector> images;  // row-major, scaled to [0, 1]
};

/// Reads an IDX3 unsigned-byte image file. Reads at most max_images images
/// (all when negative).
inline IdxImages read_idx_images(const std::string& path, long max_images = -1) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open IDX file " + path);
  std::uint64_t offset = 0;
  IdxImages out;
  const std::uint32_t magic = detail::read_be32(is, offset, "magic");
  if (magic != kIdxImageMagic) throw IdxParseError("bad IDX image magic " + std::to_string(magic), 0);
  out.declared_count = detail::read_be32(is, offset, "image count");
  out.rows = static_cast<int>(detail::read_be32(is, offset, "row count"));
  out.cols = static_cast<int>(detail::read_be32(is, offset, "column count"));
  if (out.rows <= 0 || out.cols <= 0) throw IdxParseError("bad IDX image dimensions", 8);
  const std::uint64_t count =
      max_images < 0 ? out.declared_count
                     : std::min<std::uint64_t>(out.declared_count, static_cast<std::uint64_t>(max_images));
  const auto pixels = static_cast<std::size_t>(out.rows) * static_cast<std::size_t>(out.cols);
  std::vector<unsigned char> buf(pixels);
  out.images.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
      throw IdxParseError("truncated pixel data for image " + std::to_string(i), offset + is.gcount());
    offset += pixels;
    Vector v(static_cast<Eigen::Index>(pixels));
    for (std::size_t p = 0; p < pixels; ++p) v[static_cast<Eigen::Index>(p)] = buf[p] / 255.0;
    out.images.push_back(std::move(v));
  }
  return out;
}

/// 28 x 28 MNIST images from an IDX file.
inline std::vector<Vector> load_mnist(const std::string& path, long max_images = -1) {
  auto idx = read_idx_images(path, max_images);
  if (idx.rows != 28 || idx.cols != 28)
    throw IdxParseError("expected 28x28 images, got " + std::to_string(idx.rows) + "x" + std::to_string(idx.cols), 8);
  return std::move(idx.images);
}

/// Writes images (values in [0, 1], rounded to bytes) as an IDX3 file.
inline void write_idx_images(const std::string& path, const std::vector<Vector>& images, int rows, int cols) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  detail::write_be32(os, kIdxImageMagic);
  detail::write_be32(os, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(os, static_cast<std::uint32_t>(rows));
  detail::write_be32(os, static_cast<std::uint32_t>(cols));
  for (const auto& img : images) {
    if (img.size() != static_cast<Eigen::Index>(rows) * cols)
      throw std::invalid_argument("write_idx_images: image size mismatch");
    for (Eigen::Index p = 0; p < img.size(); ++p)
      os.put(static_cast<char>(std::lround(std::clamp(img[p], 0.0, 1.0) * 255.0)));
  }
  if (!os) throw std::runtime_error("write to " + path + " failed");
}

// ---------------------------------------------------------------------------
// Resizing

/// Bilinear resampling of a square row-major image to n x n with pixel
/// centres aligned (output centre i maps to source coordinate
/// (i + 0.5) * src / n - 0.5, clamped to the image).
inline Vector resize_to_grid(const Vector& img, int n) {
  if (n < 1) throw std::invalid_argument("resize_to_grid: N must be >= 1");
  const auto src = static_cast<int>(std::lround(std::sqrt(static_cast<double>(img.size()))));
  if (src < 1 || static_cast<Eigen::Index>(src) * src != img.size())
    throw std::invalid_argument("resize_to_grid: image is not square");
  const double scale = static_cast<double>(src) / n;
  auto coord = [&](int i, int& lo, int& hi, double& w) {
    const double c = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
    lo = static_cast<int>(std::floor(c));
    hi = std::min(lo + 1, src - 1);
    w = c - lo;
  };
  Vector out(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i) {
    int r0, r1;
    double wr;
    coord(i, r0, r1, wr);
    for (int j = 0; j < n; ++j) {
      int c0, c1;
      double wc;
      coord(j, c0, c1, wc);
      auto at = [&](int r, int c) { return img[static_cast<Eigen::Index>(r) * src + c]; };
      const double top = (1 - wc) * at(r0, c0) + wc * at(r0, c1);
      const double bottom = (1 - wc) * at(r1, c0) + wc * at(r1, c1);
      out[static_cast<Eigen::Index>(i) * n + j] = (1 - wr) * top + wr * bottom;
    }
  }
  return out;
}

}  // namespace algsel

#endif  // ALGSEL_TOMO_HPP
