#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mwnn/errors.hpp"
#include "mwnn/measure.hpp"
#include "support.hpp"

using namespace mwnn;
using mwnn::testing::gaussian;

TEST(GaussianOperator, Shape) {
  const auto A = gaussian_operator(2, 3, 0);
  EXPECT_EQ(A.n(), 2);
  EXPECT_EQ(A.p(), 3);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(A.sensing_matrix(i).rows(), 2);
    EXPECT_EQ(A.sensing_matrix(i).cols(), 2);
  }
  EXPECT_THROW(gaussian_operator(2, 0, 0), ArgumentError);
  EXPECT_THROW(gaussian_operator(0, 3, 0), ArgumentError);
}

TEST(GaussianOperator, Deterministic) {
  EXPECT_EQ(gaussian_operator(4, 9, 42).stacked(), gaussian_operator(4, 9, 42).stacked());
  EXPECT_NE(gaussian_operator(4, 9, 42).stacked(), gaussian_operator(4, 9, 43).stacked());
}

TEST(GaussianOperator, MomentsMatchVariance) {
  const Index n = 8, p = 10000;
  const auto A = gaussian_operator(n, p, 7);
  const Matrix& M = A.stacked();
  const double count = static_cast<double>(M.size());
  const double mean = M.sum() / count;
  const double var = (M.array() - mean).square().sum() / (count - 1);
  // Standard error of the mean is sqrt(1/p) / sqrt(p n^2).
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(count) / std::sqrt(static_cast<double>(p)));
  EXPECT_NEAR(var * p, 1.0, 0.05);
}

TEST(Apply, ZeroAndBasisVectors) {
  const auto A = gaussian_operator(3, 5, 1);
  EXPECT_EQ(A.apply(Matrix::Zero(3, 3)), Vector::Zero(5));
  for (Index i = 0; i < 5; ++i) EXPECT_EQ(A.adjoint(Vector::Unit(5, i)), A.sensing_matrix(i));
  Rng rng(3);
  const Matrix X = gaussian(3, 3, rng);
  for (Index i = 0; i < 5; ++i) EXPECT_NEAR(A.apply(X)(i), (A.sensing_matrix(i).array() * X.array()).sum(), 1e-12);
}

TEST(Apply, DimensionErrors) {
  const auto A = gaussian_operator(3, 5, 1);
  EXPECT_THROW(A.apply(Matrix::Zero(2, 3)), ArgumentError);
  EXPECT_THROW(A.adjoint(Vector::Zero(4)), ArgumentError);
  EXPECT_THROW(A.sensing_matrix(5), ArgumentError);
}

// Adjointness and linearity over random shapes, 1000 cases.
TEST(ApplyProperty, AdjointAndLinear) {
  Rng rng(55);
  for (int k = 0; k < 1000; ++k) {
    const Index n = 1 + static_cast<Index>(rng.uniform() * 32);
    const Index p = 1 + static_cast<Index>(rng.uniform() * 40);
    const auto A = gaussian_operator(n, p, static_cast<std::uint64_t>(k));
    const Matrix X = gaussian(n, n, rng), Y = gaussian(n, n, rng);
    const Vector y = gaussian(p, 1, rng);
    const double lhs = A.apply(X).dot(y);
    const double rhs = (X.array() * A.adjoint(y).array()).sum();
    ASSERT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs))) << "case " << k;
    const double a = rng.normal(), b = rng.normal();
    const Vector lin = A.apply(a * X + b * Y) - (a * A.apply(X) + b * A.apply(Y));
    ASSERT_LT(lin.cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, A.apply(X).norm() + A.apply(Y).norm())) << "case " << k;
  }
}

TEST(AddNoise, ExactRadius) {
  Rng rng(4);
  const Vector y = gaussian(30, 1, rng);
  EXPECT_EQ(add_noise(y, 0.0, 1).y, y);
  const auto noisy = add_noise(y, 1.0, 1);
  EXPECT_NEAR((noisy.y - y).norm(), 1.0, 1e-12);
  EXPECT_NEAR(noisy.actual_norm, 1.0, 1e-12);
  EXPECT_EQ(add_noise(y, 0.3, 9).y, add_noise(y, 0.3, 9).y);
  EXPECT_THROW(add_noise(y, -1.0, 1), ArgumentError);
}

TEST(EmpiricalRip, RatioWithinBand) {
  const Index n = 20, r = 3;
  const auto A = gaussian_operator(n, 5 * r * n, 11);
  const auto s = empirical_rip_ratio(A, r, 200, 1);
  EXPECT_GE(s.min_ratio, 0.4);
  EXPECT_LE(s.max_ratio, 1.6);
}

TEST(FullRankIsometry, UndersampledIsAtLeastOne) {
  EXPECT_GE(full_rank_isometry_constant(gaussian_operator(3, 5, 0)), 1.0);
  const double d = full_rank_isometry_constant(gaussian_operator(3, 4000, 0));
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, 0.3);
}

TEST(OperatorFile, RoundTripWithAndWithoutPayload) {
  const auto A = gaussian_operator(4, 6, 123);
  for (bool payload : {true, false}) {
    std::stringstream ss;
    save_operator(ss, A, payload);
    const auto B = load_operator(ss);
    EXPECT_EQ(B.n(), 4);
    EXPECT_EQ(B.p(), 6);
    EXPECT_EQ(B.seed(), 123u);
    EXPECT_EQ(B.stacked(), A.stacked());
  }
  std::stringstream bad("NOTANOP!");
  EXPECT_THROW(load_operator(bad), ArgumentError);
  std::stringstream truncated;
  save_operator(truncated, A, true);
  std::string bytes = truncated.str();
  bytes.resize(bytes.size() - 8);
  std::stringstream cut(bytes);
  EXPECT_THROW(load_operator(cut), ArgumentError);
}
