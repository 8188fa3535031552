#pragma once

// Dense linear-algebra primitives: SVD, truncation, norms, principal angles and
// the aligned-basis construction that puts a truth/prior pair into canonical
// form (cross-Gram = [diag(cos theta) | 0]).

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "mwnn/errors.hpp"

namespace mwnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kReconstructionTol = 1e-9;

/// Orthonormal basis of a linear subspace of R^n.
class Subspace {
 public:
  Subspace() = default;

  /// Wraps a basis whose columns are already orthonormal; checks it.
  static Subspace from_orthonormal(Matrix basis, double tol = kOrthonormalTol) {
    if (!basis.allFinite()) throw ArgumentError("Subspace: basis has non-finite entries");
    const Index k = basis.cols();
    if (k > basis.rows()) throw ArgumentError("Subspace: more basis vectors than ambient dimension");
    const double err = (basis.transpose() * basis - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
    if (k > 0 && err > tol)
      throw ArgumentError("Subspace: basis columns are not orthonormal (error " + std::to_string(err) + ")");
    Subspace s;
    s.basis_ = std::move(basis);
    return s;
  }

  /// Orthonormalizes the columns of a full-column-rank matrix.
  static Subspace span_of(const Matrix& columns) {
    if (!columns.allFinite()) throw ArgumentError("Subspace: input has non-finite entries");
    Eigen::ColPivHouseholderQR<Matrix> qr(columns);
    qr.setThreshold(1e-12);
    if (qr.rank() < columns.cols()) throw ArgumentError("Subspace: columns are linearly dependent");
    Matrix q = qr.householderQ() * Matrix::Identity(columns.rows(), columns.cols());
    return from_orthonormal(std::move(q), 1e-9);
  }

  const Matrix& basis() const noexcept { return basis_; }
  Index ambient_dim() const noexcept { return basis_.rows(); }
  Index dim() const noexcept { return basis_.cols(); }
  Matrix projector() const { return basis_ * basis_.transpose(); }

 private:
  Matrix basis_;
};

struct SvdTriple {
  Matrix U;  ///< rows x k, orthonormal columns
  Vector S;  ///< k = min(rows, cols), non-increasing
  Matrix V;  ///< cols x k, orthonormal columns
};

/// Thin SVD with a reconstruction check.
inline SvdTriple svd(const Matrix& M) {
  if (M.size() == 0) throw ArgumentError("svd: empty matrix");
  if (!M.allFinite()) throw ArgumentError("svd: matrix has non-finite entries");
  const double scale = std::max(M.norm(), 1.0);
  auto residual_of = [&](const SvdTriple& t) {
    return (t.U * t.S.asDiagonal() * t.V.transpose() - M).norm() / scale;
  };
  Eigen::BDCSVD<Matrix> dec(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdTriple out;
  double residual = std::numeric_limits<double>::infinity();
  if (dec.info() == Eigen::Success) {
    out = {dec.matrixU(), dec.singularValues(), dec.matrixV()};
    residual = residual_of(out);
  }
  // BDCSVD in Eigen 3.4 is occasionally inaccurate after deflation; retry with Jacobi.
  if (!(residual <= 1e-10)) {
    Eigen::JacobiSVD<Matrix> jac(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out = {jac.matrixU(), jac.singularValues(), jac.matrixV()};
    residual = residual_of(out);
  }
  if (!(residual <= 1e-10))
    throw DecompositionError("svd: reconstruction check failed", residual);
  return out;
}

struct Truncation {
  Matrix head;  ///< best rank-r approximation X_r
  Matrix tail;  ///< X - X_r
};

inline Truncation truncate(const Matrix& M, Index r) {
  if (r < 1 || r > std::min(M.rows(), M.cols()))
    throw ArgumentError("truncate: rank " + std::to_string(r) + " outside [1, min(rows, cols)]");
  const SvdTriple t = svd(M);
  Matrix head = t.U.leftCols(r) * t.S.head(r).asDiagonal() * t.V.leftCols(r).transpose();
  Matrix tail = M - head;
  return {std::move(head), std::move(tail)};
}

inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return svd(M).S(0);
}

inline double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return svd(M).S.sum();
}

/// Orthonormal basis of the orthogonal complement of span(Q); Q must have
/// orthonormal columns.
inline Matrix orthonormal_complement(const Matrix& Q) {
  const Index n = Q.rows();
  const Index k = Q.cols();
  if (k == 0) return Matrix::Identity(n, n);
  Eigen::HouseholderQR<Matrix> qr(Q);
  Matrix full = qr.householderQ() * Matrix::Identity(n, n);
  return full.rightCols(n - k);
}

/// Principal angles (radians) between span(a) and span(b), dim a <= dim b.
///
/// Returned non-increasing: entry 0 is the largest angle. Large angles come from
/// the cosines (singular values of a^T b), small ones from the sines (singular
/// values of (I - P_b) a), which keeps both ends accurate to ~1e-15.
inline Vector principal_angles(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw ArgumentError("principal_angles: subspaces live in different ambient dimensions");
  if (a.dim() > b.dim()) throw ArgumentError("principal_angles: need dim(a) <= dim(b)");
  const Index r = a.dim();
  if (r == 0) return Vector();

  const Matrix cross = a.basis().transpose() * b.basis();
  Vector cosines = Eigen::JacobiSVD<Matrix>(cross).singularValues();  // non-increasing
  const Matrix residual = a.basis() - b.basis() * cross.transpose();
  Vector sines = Eigen::JacobiSVD<Matrix>(residual).singularValues();  // non-increasing

  // k-th smallest angle pairs the k-th largest cosine with the k-th smallest sine.
  Vector theta(r);
  for (Index k = 0; k < r; ++k) {
    const double c = std::min(cosines(k), 1.0);
    const double s = std::min(sines(r - 1 - k), 1.0);
    theta(r - 1 - k) = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
  }
  return theta;
}

/// Truth and prior bases rotated into canonical form.
///
/// U_r^T U_prior = [diag(cos theta_u) | 0] and V_r^T V_prior = [diag(cos theta_v) | 0]
/// with theta non-increasing; spans are unchanged.
struct AlignedBases {
  Subspace U_r;
  Subspace V_r;
  Subspace U_prior;
  Subspace V_prior;
  Vector theta_u;
  Vector theta_v;
};

namespace detail {

struct AlignedSide {
  Matrix truth;
  Matrix prior;
  Vector theta;
};

// Rotate `truth` (n x r) and `prior` (n x r') by the singular vectors of their
// cross-Gram so that the product becomes [diag(cos) | 0], ordered by
// decreasing angle.
inline AlignedSide align_side(const Matrix& truth, const Matrix& prior) {
  const Index r = truth.cols();
  const Index rp = prior.cols();
  const Matrix cross = truth.transpose() * prior;
  Eigen::JacobiSVD<Matrix> dec(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix left = dec.matrixU();   // r x r
  Matrix right = dec.matrixV();  // r' x r'
  // Singular values come non-increasing (angles non-decreasing); reverse the
  // first r pairs so the largest angle comes first.
  left = left.rowwise().reverse().eval();
  right.leftCols(r) = right.leftCols(r).rowwise().reverse().eval();

  AlignedSide out;
  out.truth = truth * left;
  out.prior = prior * right;
  // Fix signs so the diagonal of the cross-Gram is non-negative.
  for (Index i = 0; i < r; ++i) {
    if (out.truth.col(i).dot(out.prior.col(i)) < 0.0) out.prior.col(i) *= -1.0;
  }
  (void)rp;
  out.theta = principal_angles(Subspace::from_orthonormal(out.truth, 1e-9),
                               Subspace::from_orthonormal(out.prior, 1e-9));
  return out;
}

}  // namespace detail

/// Builds canonical truth/prior bases from a rank-`rank` matrix X_r and two
/// prior subspaces of common dimension r' >= rank.
inline AlignedBases aligned_bases(const Matrix& X_r, Index rank, const Subspace& prior_col,
                                  const Subspace& prior_row) {
  if (X_r.rows() != prior_col.ambient_dim() || X_r.cols() != prior_row.ambient_dim())
    throw ArgumentError("aligned_bases: prior dimensions do not match X_r");
  if (rank < 1 || rank > std::min(prior_col.dim(), prior_row.dim()))
    throw ArgumentError("aligned_bases: need 1 <= r <= r'");
  const SvdTriple t = svd(X_r);
  if (rank > t.S.size() || t.S(rank - 1) <= 1e-10 * std::max(t.S(0), 1e-300))
    throw ArgumentError("aligned_bases: X_r has rank below r = " + std::to_string(rank));

  auto col = detail::align_side(t.U.leftCols(rank), prior_col.basis());
  auto row = detail::align_side(t.V.leftCols(rank), prior_row.basis());
  return AlignedBases{Subspace::from_orthonormal(std::move(col.truth), 1e-9),
                      Subspace::from_orthonormal(std::move(row.truth), 1e-9),
                      Subspace::from_orthonormal(std::move(col.prior), 1e-9),
                      Subspace::from_orthonormal(std::move(row.prior), 1e-9),
                      std::move(col.theta), std::move(row.theta)};
}

}  // namespace mwnn
