#pragma once

// Linear measurement operators A: R^{n x n} -> R^p, A(X)_i = <A_i, X>_F, with
// Gaussian generation, noise injection and a small binary container.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "mwnn/core_linalg.hpp"
#include "mwnn/errors.hpp"
#include "mwnn/rng.hpp"

namespace mwnn {

/// Stack of p sensing matrices stored as a p x n^2 matrix whose i-th row is
/// vec(A_i) (column-major), so apply is a matrix-vector product.
class MeasurementOperator {
 public:
  MeasurementOperator() = default;

  MeasurementOperator(Index n, Matrix stacked, std::uint64_t seed = 0)
      : n_(n), stacked_(std::move(stacked)), seed_(seed) {
    if (n < 1) throw ArgumentError("MeasurementOperator: n must be positive");
    if (stacked_.rows() < 1) throw ArgumentError("MeasurementOperator: p must be positive");
    if (stacked_.cols() != n * n) throw ArgumentError("MeasurementOperator: stacked matrix must have n^2 columns");
    if (!stacked_.allFinite()) throw ArgumentError("MeasurementOperator: entries must be finite");
  }

  Index n() const noexcept { return n_; }
  Index p() const noexcept { return stacked_.rows(); }
  std::uint64_t seed() const noexcept { return seed_; }

  /// p x n^2 matrix with rows vec(A_i).
  const Matrix& stacked() const noexcept { return stacked_; }

  Vector apply(const Matrix& X) const {
    if (X.rows() != n_ || X.cols() != n_)
      throw ArgumentError("apply: expected a " + std::to_string(n_) + "x" + std::to_string(n_) + " matrix");
    return stacked_ * Eigen::Map<const Vector>(X.data(), n_ * n_);
  }

  Matrix adjoint(const Vector& y) const {
    if (y.size() != p()) throw ArgumentError("adjoint: expected a vector of length " + std::to_string(p()));
    Vector v = stacked_.transpose() * y;
    return Eigen::Map<const Matrix>(v.data(), n_, n_);
  }

  Matrix sensing_matrix(Index i) const {
    if (i < 0 || i >= p()) throw ArgumentError("sensing_matrix: index out of range");
    Vector row = stacked_.row(i).transpose();
    return Eigen::Map<const Matrix>(row.data(), n_, n_);
  }

 private:
  Index n_ = 0;
  Matrix stacked_;
  std::uint64_t seed_ = 0;
};

/// I.i.d. N(0, 1/p) entries; identical for identical (n, p, seed).
inline MeasurementOperator gaussian_operator(Index n, Index p, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("gaussian_operator: n must be at least 1");
  if (p < 1) throw ArgumentError("gaussian_operator: p must be at least 1");
  Rng rng(derive_seed(seed, {stream::kOperator}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  Matrix stacked(p, n * n);
  // Fill A_1, A_2, ... in turn so that a prefix of the stream is a valid
  // operator with fewer measurements (up to the variance scaling).
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < n * n; ++j) stacked(i, j) = scale * rng.normal();
  return MeasurementOperator(n, std::move(stacked), seed);
}

struct NoisyMeasurements {
  Vector y;
  double actual_norm = 0.0;
};

/// Adds a Gaussian direction scaled to norm exactly e.
inline NoisyMeasurements add_noise(const Vector& y, double e, std::uint64_t seed) {
  if (!(e >= 0.0)) throw ArgumentError("add_noise: noise radius must be non-negative");
  if (e == 0.0 || y.size() == 0) return {y, 0.0};
  Rng rng(derive_seed(seed, {stream::kNoise}));
  Vector z(y.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  z *= e / z.norm();
  return {y + z, z.norm()};
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct RipRatioSample {
  double min_ratio = 0.0;  ///< min ||A(X)||_2 / ||X||_F
  double max_ratio = 0.0;
  int samples = 0;
};

/// Ratios ||A(X)||_2 / ||X||_F over random rank-r matrices (a sanity check,
/// not a certificate).
inline RipRatioSample empirical_rip_ratio(const MeasurementOperator& A, Index r, int samples, std::uint64_t seed) {
  if (r < 1 || r > A.n()) throw ArgumentError("empirical_rip_ratio: rank out of range");
  if (samples < 1) throw ArgumentError("empirical_rip_ratio: need at least one sample");
  Rng rng(derive_seed(seed, {stream::kDiagnostic}));
  RipRatioSample out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  out.samples = samples;
  const Index n = A.n();
  for (int k = 0; k < samples; ++k) {
    Matrix L(n, r), R(n, r);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < r; ++j) {
        L(i, j) = rng.normal();
        R(i, j) = rng.normal();
      }
    const Matrix X = L * R.transpose();
    const double ratio = A.apply(X).norm() / X.norm();
    out.min_ratio = std::min(out.min_ratio, ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  return out;
}

/// Smallest delta with (1 - delta)||X||^2 <= ||A(X)||^2 <= (1 + delta)||X||^2
/// for every n x n matrix X, from the extreme singular values of the stacked
/// matrix. For rank k >= n this is exactly the rank-k RIP constant; for
/// smaller k it is an upper bound. Zero singular values (p < n^2) give 1.
inline double full_rank_isometry_constant(const MeasurementOperator& A) {
  const Matrix& M = A.stacked();
  const Eigen::JacobiSVD<Matrix> dec(M);
  const Vector& s = dec.singularValues();
  const double smax = s(0);
  const double smin = M.rows() >= M.cols() ? s(s.size() - 1) : 0.0;
  return std::max(smax * smax - 1.0, 1.0 - smin * smin);
}

// ---------------------------------------------------------------------------
// Binary container: "MWNNOP01", u64 n, u64 p, u64 seed, u8 has_payload,
// then p * n^2 little-endian doubles (rows vec(A_i)) when has_payload = 1.
// Without a payload the operator is regenerated from the seed.
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kOperatorMagic = {'M', 'W', 'N', 'N', 'O', 'P', '0', '1'};

namespace detail {
template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}
template <class T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw ArgumentError("operator file: unexpected end of data");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}
}  // namespace detail

inline void save_operator(std::ostream& os, const MeasurementOperator& A, bool with_payload) {
  os.write(kOperatorMagic.data(), kOperatorMagic.size());
  detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(A.n()));
  detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(A.p()));
  detail::write_le<std::uint64_t>(os, A.seed());
  detail::write_le<std::uint8_t>(os, with_payload ? 1 : 0);
  if (with_payload) {
    const Matrix& M = A.stacked();
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j) detail::write_le<double>(os, M(i, j));
  }
  if (!os) throw std::runtime_error("save_operator: write failed");
}

inline MeasurementOperator load_operator(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kOperatorMagic)
    throw ArgumentError("operator file: bad magic header");
  const auto n = static_cast<Index>(detail::read_le<std::uint64_t>(is));
  const auto p = static_cast<Index>(detail::read_le<std::uint64_t>(is));
  const auto seed = detail::read_le<std::uint64_t>(is);
  const auto payload = detail::read_le<std::uint8_t>(is);
  if (n < 1 || p < 1) throw ArgumentError("operator file: invalid dimensions");
  if (payload == 0) return gaussian_operator(n, p, seed);
  Matrix M(p, n * n);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < n * n; ++j) M(i, j) = detail::read_le<double>(is);
  return MeasurementOperator(n, std::move(M), seed);
}

}  // namespace mwnn
