#pragma once

// Weighting operators Q_U, Q_V and the structured four-block frame in which
// they become block upper-triangular: Q_U = B_L * O_L * L * B_L^T.
//
// Block sizes in B_L coordinates are (r, r, r'-r, n-r-r'):
//   B_L = [U_r, U'_1, U'_2, U'']   with   U_prior = B_L * [cos; -sin; -I; 0].

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mwnn/angles.hpp"
#include "mwnn/core_linalg.hpp"
#include "mwnn/errors.hpp"

namespace mwnn {

/// Lower bound on every weight; keeps Q and Delta invertible.
inline constexpr double kWeightFloor = 1e-6;

/// Diagonal weights on the prior directions (column side lambda, row side gamma).
/// lambda1/gamma1 have length r, lambda2/gamma2 have length r' - r.
struct WeightSpec {
  Vector lambda1;
  Vector lambda2;
  Vector gamma1;
  Vector gamma2;

  static WeightSpec ones(Index r, Index r_prime) { return uniform(r, r_prime, 1.0, 1.0); }

  /// Single weight per side: Lambda = lambda * I_{r'}, Gamma = gamma * I_{r'}.
  static WeightSpec uniform(Index r, Index r_prime, double lambda, double gamma) {
    if (r < 1 || r_prime < r) throw ArgumentError("WeightSpec: need 1 <= r <= r'");
    return {Vector::Constant(r, lambda), Vector::Constant(r_prime - r, lambda), Vector::Constant(r, gamma),
            Vector::Constant(r_prime - r, gamma)};
  }

  Index r() const noexcept { return lambda1.size(); }
  Index r_prime() const noexcept { return lambda1.size() + lambda2.size(); }

  /// Full diagonal of Lambda (length r').
  Vector lambda() const {
    Vector out(r_prime());
    out << lambda1, lambda2;
    return out;
  }
  Vector gamma() const {
    Vector out(gamma1.size() + gamma2.size());
    out << gamma1, gamma2;
    return out;
  }

  /// Throws ArgumentError naming the first offending field.
  void validate() const {
    if (lambda1.size() < 1) throw ArgumentError("WeightSpec: lambda1 must be non-empty");
    if (gamma1.size() != lambda1.size()) throw ArgumentError("WeightSpec: gamma1 length must equal lambda1 length");
    if (gamma2.size() != lambda2.size()) throw ArgumentError("WeightSpec: gamma2 length must equal lambda2 length");
    check_range(lambda1, "lambda1");
    check_range(lambda2, "lambda2");
    check_range(gamma1, "gamma1");
    check_range(gamma2, "gamma2");
    check_sorted(lambda1, "lambda1");
    check_sorted(gamma1, "gamma1");
  }

 private:
  static void check_range(const Vector& w, const char* name) {
    for (Index i = 0; i < w.size(); ++i) {
      if (!(w(i) >= kWeightFloor && w(i) <= 1.0))
        throw ArgumentError(std::string("WeightSpec: ") + name + " entries must lie in [1e-6, 1]");
    }
  }
  static void check_sorted(const Vector& w, const char* name) {
    for (Index i = 1; i < w.size(); ++i) {
      if (w(i) > w(i - 1) + 1e-12)
        throw ArgumentError(std::string("WeightSpec: ") + name + " must be non-increasing");
    }
  }
};

/// Q = U diag(w) U^T + (I - U U^T) for an orthonormal prior basis U.
inline Matrix build_Q(const Subspace& prior, const Vector& weights) {
  const Matrix& U = prior.basis();
  if (weights.size() != U.cols())
    throw ArgumentError("build_Q: expected " + std::to_string(U.cols()) + " weights, got " +
                        std::to_string(weights.size()));
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) > 0.0 && weights(i) <= 1.0))
      throw ArgumentError("build_Q: weights must lie in (0, 1]; entry " + std::to_string(i) + " is " +
                          std::to_string(weights(i)));
  }
  const Index n = U.rows();
  Matrix Q = Matrix::Identity(n, n);
  Q.noalias() += U * (weights.array() - 1.0).matrix().asDiagonal() * U.transpose();
  return Q;
}

/// One side (column or row) of the structured frame.
struct StructuredSide {
  Matrix B;      ///< n x n orthonormal frame [U_r, U'_1, U'_2, U'']
  Matrix O;      ///< n x n orthonormal, in frame coordinates
  Matrix T;      ///< n x n block upper-triangular factor (L or R)
  Matrix Q;      ///< weighting operator built directly from the prior
  Vector theta;  ///< principal angles (radians) read off the frame
};

struct StructuredBases {
  Matrix B_L, B_R;
  Matrix O_L, O_R;
  Matrix L, R;
  Matrix Q_U, Q_V;
  Vector theta_u, theta_v;
  Index r = 0;
  Index r_prime = 0;
};

namespace detail {

// Modified Gram-Schmidt on columns [first, end) against all earlier columns.
inline void reorthonormalize(Matrix& B, Index first) {
  for (Index j = first; j < B.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < j; ++k) B.col(j) -= B.col(k).dot(B.col(j)) * B.col(k);
    }
    B.col(j).normalize();
  }
}

// truth: n x r with U_r^T prior = [diag(cos) | 0]; prior: n x r'.
inline StructuredSide build_side(const Matrix& truth, const Matrix& prior, const Vector& w1, const Vector& w2) {
  const Index n = truth.rows();
  const Index r = truth.cols();
  const Index rp = prior.cols();
  if (n < r + rp)
    throw GeometryError("structured bases need n >= r + r' (n = " + std::to_string(n) + ", r = " +
                        std::to_string(r) + ", r' = " + std::to_string(rp) + ")");
  if (w1.size() != r || w2.size() != rp - r) throw ArgumentError("structured bases: weight lengths do not match (r, r')");

  Matrix B = Matrix::Zero(n, n);
  B.leftCols(r) = truth;
  B.middleCols(2 * r, rp - r) = -prior.rightCols(rp - r);

  // u'_i = -(u~_i - P_U u~_i) / |...|; missing directions (zero angle) are
  // filled from the orthogonal complement below.
  std::vector<Index> missing;
  for (Index i = 0; i < r; ++i) {
    Vector w = prior.col(i) - truth * (truth.transpose() * prior.col(i));
    const double norm = w.norm();
    if (norm > 1e-12) {
      B.col(r + i) = -w / norm;
    } else {
      missing.push_back(r + i);
    }
  }

  // Columns already fixed: everything except `missing` and the trailing block.
  std::vector<Index> fixed;
  for (Index j = 0; j < r + rp; ++j) {
    if (std::find(missing.begin(), missing.end(), j) == missing.end()) fixed.push_back(j);
  }
  Matrix known(n, static_cast<Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) known.col(static_cast<Index>(k)) = B.col(fixed[k]);
  const Matrix comp = orthonormal_complement(known);
  Index next = 0;
  for (Index j : missing) B.col(j) = comp.col(next++);
  B.rightCols(n - r - rp) = comp.rightCols(n - r - rp);

  const double orth_err = (B.transpose() * B - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (orth_err > 1e-12) reorthonormalize(B, r);

  StructuredSide side;
  side.B = std::move(B);
  Vector c(r), s(r);
  for (Index i = 0; i < r; ++i) {
    c(i) = std::clamp(side.B.col(i).dot(prior.col(i)), 0.0, 1.0);
    s(i) = std::clamp(-side.B.col(r + i).dot(prior.col(i)), 0.0, 1.0);
  }
  side.theta.resize(r);
  for (Index i = 0; i < r; ++i) side.theta(i) = std::atan2(s(i), c(i));

  side.O = Matrix::Identity(n, n);
  side.T = Matrix::Identity(n, n);
  for (Index i = 0; i < r; ++i) {
    const double lam = w1(i);
    const double delta = std::sqrt(lam * lam * c(i) * c(i) + s(i) * s(i));
    const double a = lam * c(i) * c(i) + s(i) * s(i);
    const double b = (1.0 - lam) * s(i) * c(i);
    side.O(i, i) = a / delta;
    side.O(i, r + i) = -b / delta;
    side.O(r + i, i) = b / delta;
    side.O(r + i, r + i) = a / delta;
    side.T(i, i) = delta;
    side.T(i, r + i) = (1.0 - lam * lam) * s(i) * c(i) / delta;
    side.T(r + i, r + i) = lam / delta;
  }
  for (Index j = 0; j < rp - r; ++j) side.T(2 * r + j, 2 * r + j) = w2(j);

  Vector w(rp);
  w << w1, w2;
  side.Q = build_Q(Subspace::from_orthonormal(prior, 1e-9), w);
  return side;
}

}  // namespace detail

/// Builds the frame for both sides from canonically aligned bases
/// (see aligned_bases); weights must match (r, r').
inline StructuredBases build_structured_bases(const AlignedBases& aligned, const WeightSpec& weights) {
  weights.validate();
  const Index r = aligned.U_r.dim();
  const Index rp = aligned.U_prior.dim();
  if (weights.r() != r || weights.r_prime() != rp)
    throw ArgumentError("build_structured_bases: weight shape does not match (r, r')");
  if (aligned.V_prior.dim() != rp || aligned.V_r.dim() != r)
    throw ArgumentError("build_structured_bases: row-side dimensions differ from column side");

  auto left = detail::build_side(aligned.U_r.basis(), aligned.U_prior.basis(), weights.lambda1, weights.lambda2);
  auto right = detail::build_side(aligned.V_r.basis(), aligned.V_prior.basis(), weights.gamma1, weights.gamma2);
  StructuredBases out;
  out.B_L = std::move(left.B);
  out.O_L = std::move(left.O);
  out.L = std::move(left.T);
  out.Q_U = std::move(left.Q);
  out.theta_u = std::move(left.theta);
  out.B_R = std::move(right.B);
  out.O_R = std::move(right.O);
  out.R = std::move(right.T);
  out.Q_V = std::move(right.Q);
  out.theta_v = std::move(right.theta);
  out.r = r;
  out.r_prime = rp;
  return out;
}

/// Reading of the ||L'||^2 direction term. The exact operator norm of the
/// assembled block is the default; the other two are the alternative printed
/// expressions, kept for comparison.
enum class DForm {
  operator_norm,  ///< (1-lambda^2)^2 c^2 s^2 / Delta^2 + (1 - lambda/Delta)^2
  printed_d1,     ///< (lambda/Delta - 1)^2 + (1-lambda)^2 c^2 s^2 / Delta^2
  appendix_c,     ///< 1 - lambda^2/Delta^2 + (1-lambda)^2 c^2 s^2 / Delta^2
};

struct Lemma4Norms {
  double l11 = 0.0;            ///< ||L11||
  double l12 = 0.0;            ///< ||L12||
  double i_minus_l22 = 0.0;    ///< ||I - L22||
  double l11_l12_row = 0.0;    ///< ||[L11 L12]||
  double lprime = 0.0;         ///< ||L'||
  double block_diag = 0.0;     ///< ||diag(I - L22, I - Lambda2)||
};

namespace detail {

// lambda^2 c^2 + s^2, exactly 1 at unit weight.
inline double delta_sq(double c, double s, double lam) { return lam == 1.0 ? 1.0 : lam * lam * c * c + s * s; }

inline double direction_term(double c, double s, double lam, DForm form) {
  const double delta2 = delta_sq(c, s, lam);
  const double delta = std::sqrt(delta2);
  switch (form) {
    case DForm::operator_norm: {
      const double off = (1.0 - lam * lam) * s * c / delta;
      const double diag = 1.0 - lam / delta;
      return off * off + diag * diag;
    }
    case DForm::printed_d1: {
      const double diag = lam / delta - 1.0;
      return diag * diag + (1.0 - lam) * (1.0 - lam) * c * c * s * s / delta2;
    }
    case DForm::appendix_c:
      return 1.0 - lam * lam / delta2 + (1.0 - lam) * (1.0 - lam) * c * c * s * s / delta2;
  }
  return 0.0;
}

inline void check_lemma4_inputs(const Vector& theta, const Vector& w1, const Vector& w2) {
  if (theta.size() != w1.size()) throw ArgumentError("lemma4_norms: theta and lambda1 lengths differ");
  for (Index i = 0; i < theta.size(); ++i) {
    if (!(theta(i) >= -1e-12 && theta(i) <= std::numbers::pi / 2 + 1e-12))
      throw ArgumentError("lemma4_norms: angles must lie in [0, 90] degrees");
    if (!(w1(i) > 0.0 && w1(i) <= 1.0)) throw ArgumentError("lemma4_norms: lambda1 entries must lie in (0, 1]");
  }
  for (Index i = 0; i < w2.size(); ++i) {
    if (!(w2(i) > 0.0 && w2(i) <= 1.0)) throw ArgumentError("lemma4_norms: lambda2 entries must lie in (0, 1]");
  }
}

}  // namespace detail

/// Closed-form operator norms of the sub-blocks of L (same formulas for R
/// with gamma in place of lambda).
inline Lemma4Norms lemma4_norms(const Vector& theta, const Vector& lambda1, const Vector& lambda2,
                                DForm form = DForm::operator_norm) {
  detail::check_lemma4_inputs(theta, lambda1, lambda2);
  Lemma4Norms out;
  double lprime2 = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    const double c = std::cos(theta(i));
    const double s = std::sin(theta(i));
    const double lam = lambda1(i);
    const double delta2 = detail::delta_sq(c, s, lam);
    const double delta = std::sqrt(delta2);
    out.l11 = std::max(out.l11, delta);
    out.l12 = std::max(out.l12, std::abs((1.0 - lam * lam) * c * s) / delta);
    out.i_minus_l22 = std::max(out.i_minus_l22, std::abs(1.0 - lam / delta));
    out.l11_l12_row = std::max(out.l11_l12_row, std::sqrt((lam * lam * lam * lam * c * c + s * s) / delta2));
    lprime2 = std::max(lprime2, detail::direction_term(c, s, lam, form));
  }
  out.block_diag = out.i_minus_l22;
  for (Index i = 0; i < lambda2.size(); ++i) {
    const double d = 1.0 - lambda2(i);
    lprime2 = std::max(lprime2, d * d);
    out.block_diag = std::max(out.block_diag, std::abs(d));
  }
  out.lprime = std::sqrt(lprime2);
  return out;
}

/// Orthogonal projections onto the support T of X_r and its complement.
class SupportProjector {
 public:
  SupportProjector(const Subspace& U_r, const Subspace& V_r) : P_U_(U_r.projector()), P_V_(V_r.projector()) {
    if (U_r.dim() != V_r.dim()) throw ArgumentError("SupportProjector: column and row ranks differ");
  }

  const Matrix& P_U() const noexcept { return P_U_; }
  const Matrix& P_V() const noexcept { return P_V_; }

  Matrix project_T(const Matrix& Z) const {
    check(Z);
    const Matrix PUZ = P_U_ * Z;
    return PUZ + Z * P_V_ - PUZ * P_V_;
  }

  Matrix project_Tperp(const Matrix& Z) const {
    check(Z);
    const Matrix left = Z - P_U_ * Z;
    return left - left * P_V_;
  }

 private:
  void check(const Matrix& Z) const {
    if (Z.rows() != P_U_.rows() || Z.cols() != P_V_.rows())
      throw ArgumentError("SupportProjector: matrix shape does not match the subspaces");
  }

  Matrix P_U_;
  Matrix P_V_;
};

inline Matrix project_T(const Matrix& Z, const SupportProjector& S) { return S.project_T(Z); }
inline Matrix project_Tperp(const Matrix& Z, const SupportProjector& S) { return S.project_Tperp(Z); }

/// Projection onto T~ (a subspace of T-perp): in frame coordinates keep the
/// blocks (2..4) x (2..4) except block (4,4).
inline Matrix project_Ttilde(const Matrix& Z, const StructuredBases& bases) {
  const Index n = bases.B_L.rows();
  if (Z.rows() != n || Z.cols() != bases.B_R.rows())
    throw ArgumentError("project_Ttilde: matrix shape does not match the frame");
  const Index r = bases.r;
  const Index tail = r + bases.r_prime;
  Matrix Zbar = bases.B_L.transpose() * Z * bases.B_R;
  Zbar.topRows(r).setZero();
  Zbar.leftCols(r).setZero();
  Zbar.bottomRightCorner(n - tail, n - tail).setZero();
  return bases.B_L * Zbar * bases.B_R.transpose();
}

}  // namespace mwnn
