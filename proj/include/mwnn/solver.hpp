#pragma once

// Weighted nuclear-norm minimization
//
//   minimize ||Q_U Z Q_V||_*   subject to   ||y - A(Z)||_2 <= e
//
// solved by ADMM on the substituted variable W = Q_U Z Q_V, for which the
// measurements become B(W) = A(Q_U^{-1} W Q_V^{-1}) with sensing matrices
// B_i = Q_U^{-T} A_i Q_V^{-T}. Two splittings are used:
//
//  * e = 0 and p <= n^2: W = V with V restricted to the affine set B(V) = y.
//    The projection uses a thin QR of B^T factored once per solve.
//  * otherwise: W = x and z = B(x) with z in the ball ||z - y|| <= e. The
//    x-update solves (I + B^T B) x = b, via Woodbury (I_p + B B^T) when p <= n^2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mwnn/core_linalg.hpp"
#include "mwnn/errors.hpp"
#include "mwnn/measure.hpp"

namespace mwnn {

struct SolverConfig {
  int max_iters = 2000;
  double abs_tol = 1e-7;
  double rel_tol = 1e-6;
  double rho = 1.0;
  double balance_trigger = 10.0;  ///< adapt rho when one residual exceeds the other by this ratio
  double balance_scale = 2.0;
  bool adapt_rho = true;
  bool keep_trace = false;

  void validate() const {
    if (max_iters < 1) throw ArgumentError("SolverConfig: max_iters must be at least 1");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ArgumentError("SolverConfig: tolerances must be positive");
    if (!(rho > 0.0)) throw ArgumentError("SolverConfig: rho must be positive");
    if (!(balance_trigger > 1.0) || !(balance_scale > 1.0))
      throw ArgumentError("SolverConfig: residual balancing factors must exceed 1");
  }
};

struct RecoveryResult {
  Matrix estimate;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double feasibility_gap = 0.0;  ///< max(||y - A(estimate)||_2 - e, 0)
  bool converged = false;
  double objective = 0.0;    ///< ||Q_U estimate Q_V||_*
  double q_condition = 1.0;  ///< cond(Q_U) * cond(Q_V)
  bool ill_conditioned = false;  ///< q_condition > 1e8
  std::vector<double> residual_trace;  ///< sqrt(primal^2 + dual^2) per iteration, if requested
};

/// Singular value soft-thresholding: U diag(max(s - tau, 0)) V^T.
inline Matrix svt(const Matrix& M, double tau) {
  if (!(tau >= 0.0)) throw ArgumentError("svt: threshold must be non-negative");
  if (tau == 0.0) return M;
  const SvdTriple t = svd(M);
  const Vector s = (t.S.array() - tau).cwiseMax(0.0).matrix();
  Index k = 0;
  while (k < s.size() && s(k) > 0.0) ++k;
  if (k == 0) return Matrix::Zero(M.rows(), M.cols());
  return t.U.leftCols(k) * s.head(k).asDiagonal() * t.V.leftCols(k).transpose();
}

namespace detail {

inline Vector vec(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }
inline Matrix unvec(const Vector& v, Index n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

struct QInverse {
  Matrix inv;
  double cond = 1.0;
  bool identity = false;
};

inline QInverse invert_weighting(const Matrix& Q, Index n, const char* name) {
  if (Q.rows() != n || Q.cols() != n)
    throw ArgumentError(std::string("solve: ") + name + " must be " + std::to_string(n) + "x" + std::to_string(n));
  if (!Q.allFinite()) throw ArgumentError(std::string("solve: ") + name + " has non-finite entries");
  QInverse out;
  if (Q.isIdentity(0.0)) {
    out.inv = Q;
    out.identity = true;
    return out;
  }
  const Vector s = Eigen::JacobiSVD<Matrix>(Q).singularValues();
  if (!(s(s.size() - 1) > 0.0) || s(s.size() - 1) < 1e-14 * s(0))
    throw ArgumentError(std::string("solve: ") + name + " is singular");
  out.cond = s(0) / s(s.size() - 1);
  out.inv = Q.fullPivLu().inverse();
  return out;
}

struct Tracker {
  double best_score = std::numeric_limits<double>::infinity();
  Matrix best_W;
};

}  // namespace detail

/// Solves the weighted problem for invertible Q_U, Q_V; Q = I gives standard
/// nuclear-norm minimization. Never throws on non-convergence: the iterate
/// with the smallest combined residual is returned with converged = false.
inline RecoveryResult solve(const MeasurementOperator& A, const Vector& y, const Matrix& Q_U, const Matrix& Q_V,
                            double e, const SolverConfig& cfg = {}) {
  cfg.validate();
  const Index n = A.n();
  const Index p = A.p();
  const Index N = n * n;
  if (y.size() != p) throw ArgumentError("solve: y must have length p = " + std::to_string(p));
  if (!y.allFinite()) throw ArgumentError("solve: y has non-finite entries");
  if (!(e >= 0.0)) throw ArgumentError("solve: noise radius e must be non-negative");
  const auto qu = detail::invert_weighting(Q_U, n, "Q_U");
  const auto qv = detail::invert_weighting(Q_V, n, "Q_V");

  RecoveryResult res;
  res.q_condition = qu.cond * qv.cond;
  res.ill_conditioned = res.q_condition > 1e8;

  // Sensing matrices in W-coordinates.
  Matrix B;
  if (qu.identity && qv.identity) {
    B = A.stacked();
  } else {
    B.resize(p, N);
    const Matrix left = qu.inv.transpose();
    const Matrix right = qv.inv.transpose();
    for (Index i = 0; i < p; ++i) {
      const Vector row = A.stacked().row(i).transpose();
      B.row(i) = detail::vec(left * detail::unvec(row, n) * right).transpose();
    }
  }

  auto to_estimate = [&](const Matrix& W) -> Matrix {
    if (qu.identity && qv.identity) return W;
    return qu.inv * W * qv.inv;
  };

  const double scale = y.norm();
  if (scale == 0.0) {
    res.estimate = Matrix::Zero(n, n);
    res.converged = true;
    return res;
  }
  // Work with unit-norm data so tolerances and rho are scale-free.
  const Vector yn = y / scale;
  const double en = e / scale;
  const double root_n = static_cast<double>(n);

  double rho = cfg.rho;
  detail::Tracker tracker;
  Matrix W = Matrix::Zero(n, n);
  int it = 0;
  double r_pri = 0.0, r_dual = 0.0;
  bool done = false;

  auto record = [&](const Matrix& candidate, double score) {
    if (score < tracker.best_score) {
      tracker.best_score = score;
      tracker.best_W = candidate;
    }
    if (cfg.keep_trace) res.residual_trace.push_back(score);
  };
  auto rebalance = [&](Vector& U1, Vector* U2) {
    if (!cfg.adapt_rho) return;
    if (r_pri > cfg.balance_trigger * r_dual) {
      rho *= cfg.balance_scale;
      U1 /= cfg.balance_scale;
      if (U2) *U2 /= cfg.balance_scale;
    } else if (r_dual > cfg.balance_trigger * r_pri) {
      rho /= cfg.balance_scale;
      U1 *= cfg.balance_scale;
      if (U2) *U2 *= cfg.balance_scale;
    }
  };

  if (en == 0.0 && p <= N) {
    // Affine projection: P(x) = x - Qb Qb^T x + x0 with B^T = Qb Rb.
    Eigen::HouseholderQR<Matrix> qr(B.transpose());
    const Matrix Qb = qr.householderQ() * Matrix::Identity(N, p);
    const Matrix Rb = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Vector diag = Rb.diagonal().cwiseAbs();
    if (diag.minCoeff() <= 1e-12 * std::max(diag.maxCoeff(), 1.0))
      throw ArgumentError("solve: measurement map is rank deficient; the equality constraint is degenerate");
    const Vector x0 = Qb * Rb.transpose().triangularView<Eigen::Lower>().solve(yn);
    auto project = [&](const Vector& x) -> Vector { return x - Qb * (Qb.transpose() * x) + x0; };

    Vector V = x0;
    Vector U = Vector::Zero(N);
    for (it = 1; it <= cfg.max_iters; ++it) {
      const Vector Wv = detail::vec(svt(detail::unvec(V - U, n), 1.0 / rho));
      const Vector V_new = project(Wv + U);
      U += Wv - V_new;
      r_pri = (Wv - V_new).norm();
      r_dual = rho * (V_new - V).norm();
      V = V_new;
      record(detail::unvec(V, n), std::hypot(r_pri, r_dual));
      const double eps_pri = root_n * cfg.abs_tol + cfg.rel_tol * std::max(Wv.norm(), V.norm());
      const double eps_dual = root_n * cfg.abs_tol + cfg.rel_tol * rho * U.norm();
      if (r_pri <= eps_pri && r_dual <= eps_dual) {
        done = true;
        break;
      }
      rebalance(U, nullptr);
    }
    W = detail::unvec(V, n);
  } else {
    // x-update system (I + B^T B) x = b.
    const bool woodbury = p <= N;
    Eigen::LLT<Matrix> chol;
    if (woodbury) {
      Matrix G = B * B.transpose();
      G.diagonal().array() += 1.0;
      chol.compute(G);
    } else {
      Matrix G = B.transpose() * B;
      G.diagonal().array() += 1.0;
      chol.compute(G);
    }
    if (chol.info() != Eigen::Success) throw DecompositionError("solve: Cholesky factorization failed", 0.0);
    auto solve_x = [&](const Vector& b) -> Vector {
      if (woodbury) return b - B.transpose() * chol.solve(B * b);
      return chol.solve(b);
    };
    auto project_ball = [&](const Vector& v) -> Vector {
      const Vector d = v - yn;
      const double nd = d.norm();
      if (nd <= en) return v;
      return yn + (en / nd) * d;
    };

    Vector Wv = Vector::Zero(N);
    Vector z = yn;
    Vector U1 = Vector::Zero(N);
    Vector U2 = Vector::Zero(p);
    Vector x = Vector::Zero(N);
    for (it = 1; it <= cfg.max_iters; ++it) {
      x = solve_x(Wv + U1 + B.transpose() * (z + U2));
      const Vector Bx = B * x;
      const Vector W_new = detail::vec(svt(detail::unvec(x - U1, n), 1.0 / rho));
      const Vector z_new = project_ball(Bx - U2);
      U1 += W_new - x;
      U2 += z_new - Bx;
      r_pri = std::sqrt((W_new - x).squaredNorm() + (z_new - Bx).squaredNorm());
      r_dual = rho * ((W_new - Wv) + B.transpose() * (z_new - z)).norm();
      Wv = W_new;
      z = z_new;
      record(detail::unvec(x, n), std::hypot(r_pri, r_dual));
      const double eps_pri =
          std::sqrt(static_cast<double>(N + p)) * cfg.abs_tol +
          cfg.rel_tol * std::max({x.norm(), Bx.norm(), std::sqrt(Wv.squaredNorm() + z.squaredNorm())});
      const double eps_dual = root_n * cfg.abs_tol + cfg.rel_tol * rho * (U1 + B.transpose() * U2).norm();
      if (r_pri <= eps_pri && r_dual <= eps_dual) {
        done = true;
        break;
      }
      Vector* u2 = &U2;
      rebalance(U1, u2);
    }
    if (!done) x = detail::vec(tracker.best_W);
    // Minimum-norm correction moving B(x) onto the nearest point of the ball.
    const Vector Bx = B * x;
    const Vector d = project_ball(Bx) - Bx;
    if (d.norm() > 0.0) {
      const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(B);
      x += cod.solve(d);
      // With p > rank(B) the ball point may be off range(B); walk toward the
      // least-squares point until the residual reaches the radius.
      const Vector r0 = B * x - yn;
      if (r0.norm() > en) {
        const Vector x_ls = cod.solve(yn);
        const Vector dr = B * x_ls - yn - r0;
        const double a = dr.squaredNorm(), b = r0.dot(dr), c = r0.squaredNorm() - en * en;
        const double disc = std::max(b * b - a * c, 0.0);
        const double t = a > 0.0 ? std::min((-b - std::sqrt(disc)) / a, 1.0) : 1.0;
        x += t * (x_ls - x);
      }
    }
    W = detail::unvec(x, n);
    tracker.best_W = W;
  }

  res.iterations = std::min(it, cfg.max_iters);
  if (!done) W = tracker.best_W;
  res.estimate = to_estimate(W) * scale;
  res.primal_residual = r_pri;
  res.dual_residual = r_dual;
  const double misfit = (y - A.apply(res.estimate)).norm();
  res.feasibility_gap = std::max(misfit - e, 0.0);
  res.objective = nuclear_norm(Q_U * res.estimate * Q_V);
  res.converged = done && res.feasibility_gap <= cfg.abs_tol * std::sqrt(static_cast<double>(p));
  return res;
}

/// Standard nuclear-norm minimization (Q_U = Q_V = I).
inline RecoveryResult solve_standard(const MeasurementOperator& A, const Vector& y, double e,
                                     const SolverConfig& cfg = {}) {
  const Matrix I = Matrix::Identity(A.n(), A.n());
  return solve(A, y, I, I, e, cfg);
}

}  // namespace mwnn
