#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mwnn/angles.hpp"
#include "mwnn/core_linalg.hpp"
#include "mwnn/errors.hpp"
#include "support.hpp"

using namespace mwnn;
using mwnn::testing::gaussian;
using mwnn::testing::max_abs;
using mwnn::testing::orthonormal;

namespace {

double power_iteration(const Matrix& M) {
  Vector v = Vector::Ones(M.cols()).normalized();
  double sigma = 0.0;
  for (int k = 0; k < 5000; ++k) {
    Vector w = M.transpose() * (M * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    const double next = std::sqrt(nw);
    const bool stop = std::abs(next - sigma) <= 1e-15 * next;
    sigma = next;
    v = w;
    if (stop) break;
  }
  return (M * v).norm();
}

Subspace line(double deg) {
  Matrix b(2, 1);
  b << std::cos(deg_to_rad(deg)), std::sin(deg_to_rad(deg));
  return Subspace::from_orthonormal(b);
}

}  // namespace

TEST(Svd, Identity) {
  const auto t = svd(Matrix::Identity(3, 3));
  EXPECT_LT((t.S - Vector::Ones(3)).norm(), 1e-14);
  EXPECT_LT(max_abs(t.U * t.S.asDiagonal() * t.V.transpose() - Matrix::Identity(3, 3)), 1e-14);
}

TEST(Svd, Diagonal) {
  Matrix D = Vector(Vector::LinSpaced(3, 1, 3)).asDiagonal();
  const auto t = svd(D);
  EXPECT_NEAR(t.S(0), 3.0, 1e-14);
  EXPECT_NEAR(t.S(1), 2.0, 1e-14);
  EXPECT_NEAR(t.S(2), 1.0, 1e-14);
}

TEST(Svd, RandomReconstructionAndOrdering) {
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    const Matrix M = gaussian(5, 5, rng);
    const auto t = svd(M);
    EXPECT_LE((t.U * t.S.asDiagonal() * t.V.transpose() - M).norm() / M.norm(), 1e-9);
    for (Index i = 1; i < t.S.size(); ++i) EXPECT_GE(t.S(i - 1), t.S(i));
    EXPECT_LT(max_abs(t.U.transpose() * t.U - Matrix::Identity(5, 5)), 1e-10);
  }
}

TEST(Svd, RejectsNonFinite) {
  Matrix M = Matrix::Identity(2, 2);
  M(0, 1) = std::nan("");
  EXPECT_THROW(svd(M), ArgumentError);
}

TEST(Truncate, ExactRankLeavesNoTail) {
  Rng rng(3);
  const Matrix M = mwnn::testing::rank_r(6, 2, rng);
  const auto t = truncate(M, 2);
  EXPECT_LE(t.tail.norm(), 1e-10 * M.norm());
  EXPECT_EQ(t.head + t.tail, M);
}

TEST(Truncate, Diagonal) {
  Matrix D = Matrix::Zero(3, 3);
  D.diagonal() << 3, 2, 1;
  const auto t = truncate(D, 1);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 3;
  EXPECT_LT(max_abs(t.head - expected), 1e-14);
  EXPECT_NEAR(nuclear_norm(t.tail), 3.0, 1e-12);
}

TEST(Truncate, TailMatchesTrailingSingularValues) {
  Rng rng(5);
  const Matrix M = gaussian(10, 10, rng);
  const auto s = svd(M).S;
  const auto t = truncate(M, 3);
  EXPECT_NEAR(t.tail.norm(), s.tail(7).norm(), 1e-10);
  EXPECT_THROW(truncate(M, 0), ArgumentError);
  EXPECT_THROW(truncate(M, 11), ArgumentError);
}

TEST(Truncate, BeatsEveryOtherChoiceOfKeptValues) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix M = gaussian(5, 5, rng);
    const auto t = svd(M);
    const double best = (M - truncate(M, 2).head).norm();
    std::vector<int> keep{1, 1, 0, 0, 0};
    std::sort(keep.begin(), keep.end());
    do {
      Vector s = t.S;
      for (int i = 0; i < 5; ++i)
        if (!keep[static_cast<std::size_t>(i)]) s(i) = 0.0;
      const Matrix alt = t.U * s.asDiagonal() * t.V.transpose();
      EXPECT_LE(best, (M - alt).norm() + 1e-12);
    } while (std::next_permutation(keep.begin(), keep.end()));
  }
}

TEST(SpectralNorm, Basics) {
  EXPECT_EQ(spectral_norm(Matrix::Zero(3, 3)), 0.0);
  Matrix D = Matrix::Zero(2, 2);
  D.diagonal() << 0.4, 0.9;
  EXPECT_NEAR(spectral_norm(D), 0.9, 1e-15);
}

TEST(SpectralNorm, MatchesPowerIteration) {
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    const Matrix M = gaussian(6, 4, rng);
    EXPECT_NEAR(spectral_norm(M), power_iteration(M), 1e-9);
  }
}

TEST(Subspace, RejectsNonOrthonormal) {
  Matrix b(2, 1);
  b << 1.0, 1.0;
  EXPECT_THROW(Subspace::from_orthonormal(b), ArgumentError);
  EXPECT_NEAR(Subspace::span_of(b).basis().norm(), 1.0, 1e-14);
}

TEST(PrincipalAngles, Examples) {
  Rng rng(1);
  const Subspace a = Subspace::from_orthonormal(orthonormal(6, 3, rng));
  EXPECT_LT(principal_angles(a, a).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_NEAR(rad_to_deg(principal_angles(line(0), line(90))(0)), 90.0, 1e-12);
  EXPECT_NEAR(rad_to_deg(principal_angles(line(0), line(30))(0)), 30.0, 1e-12);
}

TEST(PrincipalAngles, NonIncreasingAndInRange) {
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const Subspace a = Subspace::from_orthonormal(orthonormal(8, 3, rng));
    const Subspace b = Subspace::from_orthonormal(orthonormal(8, 5, rng));
    const Vector t = principal_angles(a, b);
    ASSERT_EQ(t.size(), 3);
    for (Index i = 0; i < t.size(); ++i) {
      EXPECT_GE(t(i), 0.0);
      EXPECT_LE(t(i), std::numbers::pi / 2);
      if (i) EXPECT_GE(t(i - 1), t(i));
    }
  }
}

TEST(PrincipalAngles, DimensionErrors) {
  Rng rng(4);
  const Subspace a = Subspace::from_orthonormal(orthonormal(5, 3, rng));
  const Subspace b = Subspace::from_orthonormal(orthonormal(5, 2, rng));
  const Subspace c = Subspace::from_orthonormal(orthonormal(6, 3, rng));
  EXPECT_THROW(principal_angles(a, b), ArgumentError);
  EXPECT_THROW(principal_angles(a, c), ArgumentError);
}

// Symmetry and invariance under a change of basis, 1000 random cases.
TEST(PrincipalAnglesProperty, SymmetricAndBasisInvariant) {
  Rng rng(1234);
  for (int k = 0; k < 1000; ++k) {
    const Index n = 3 + static_cast<Index>(rng.uniform() * 10);
    const Index r = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n - 1));
    const Matrix A = orthonormal(n, r, rng);
    const Matrix B = orthonormal(n, r, rng);
    const Subspace a = Subspace::from_orthonormal(A);
    const Subspace b = Subspace::from_orthonormal(B);
    const Vector ab = principal_angles(a, b);
    ASSERT_LT((ab - principal_angles(b, a)).cwiseAbs().maxCoeff(), 1e-8) << "case " << k;
    const Matrix R = orthonormal(r, r, rng);
    const Vector rotated =
        principal_angles(Subspace::from_orthonormal(A * R, 1e-9), Subspace::from_orthonormal(B * R.transpose(), 1e-9));
    ASSERT_LT((ab - rotated).cwiseAbs().maxCoeff(), 1e-8) << "case " << k;
  }
}

TEST(AlignedBases, PriorEqualToTruth) {
  Rng rng(9);
  const Matrix X = mwnn::testing::rank_r(8, 2, rng);
  const auto t = svd(X);
  const Subspace col = Subspace::from_orthonormal(t.U.leftCols(2), 1e-9);
  const Subspace row = Subspace::from_orthonormal(t.V.leftCols(2), 1e-9);
  const auto ab = aligned_bases(X, 2, col, row);
  EXPECT_LT(max_abs(ab.U_r.basis().transpose() * ab.U_prior.basis() - Matrix::Identity(2, 2)), 1e-9);
  EXPECT_LT(ab.theta_u.cwiseAbs().maxCoeff(), 1e-7);
}

TEST(AlignedBases, CanonicalCrossGramAndSpans) {
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    const Index n = 20, r = 3, rp = 7;
    const Matrix X = mwnn::testing::rank_r(n, r, rng);
    const Subspace col = Subspace::from_orthonormal(orthonormal(n, rp, rng));
    const Subspace row = Subspace::from_orthonormal(orthonormal(n, rp, rng));
    const auto ab = aligned_bases(X, r, col, row);

    const Matrix G = ab.U_r.basis().transpose() * ab.U_prior.basis();
    Matrix expected = Matrix::Zero(r, rp);
    expected.leftCols(r).diagonal() = ab.theta_u.array().cos().matrix();
    EXPECT_LT(max_abs(G - expected), 1e-9);
    const Matrix H = ab.V_r.basis().transpose() * ab.V_prior.basis();
    expected.leftCols(r).diagonal() = ab.theta_v.array().cos().matrix();
    EXPECT_LT(max_abs(H - expected), 1e-9);

    EXPECT_LT(max_abs(ab.U_prior.projector() - col.projector()), 1e-9);
    EXPECT_LT(max_abs(ab.V_prior.projector() - row.projector()), 1e-9);
    const Matrix PU = ab.U_r.projector();
    EXPECT_LT(max_abs(PU * X - X), 1e-9 * X.norm());

    // Angles agree with the direct computation (1e-8 degrees).
    const Vector direct = principal_angles(ab.U_r, col);
    EXPECT_LT(rad_to_deg((direct - ab.theta_u).cwiseAbs().maxCoeff()), 1e-8);
    for (Index i = 0; i < r; ++i) EXPECT_NEAR(std::cos(ab.theta_u(i)), G(i, i), 1e-9);
  }
}

TEST(AlignedBases, RankDeficientInputRejected) {
  Rng rng(12);
  const Matrix X = mwnn::testing::rank_r(8, 1, rng);
  const Subspace col = Subspace::from_orthonormal(orthonormal(8, 3, rng));
  EXPECT_THROW(aligned_bases(X, 2, col, col), ArgumentError);
}

TEST(Angles, ValidationAndOrdering) {
  const auto a = AnglePair::from_degrees({10, 30, 20}, {1, 2, 3});
  EXPECT_NEAR(a.theta_u_deg()[0], 30.0, 1e-12);
  EXPECT_NEAR(a.theta_u_deg()[2], 10.0, 1e-12);
  EXPECT_NEAR(a.theta_v_deg()[0], 3.0, 1e-12);
  EXPECT_THROW(AnglePair::from_degrees({-1}, {0}), ArgumentError);
  EXPECT_THROW(AnglePair::from_degrees({91}, {0}), ArgumentError);
  EXPECT_THROW(AnglePair::from_degrees({1, 2}, {0}), ArgumentError);
}
