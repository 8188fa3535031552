#pragma once

#include <Eigen/Dense>

#include "mwnn/core_linalg.hpp"
#include "mwnn/rng.hpp"

namespace mwnn::testing {

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = rng.normal();
  return M;
}

inline Matrix orthonormal(Index n, Index k, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(n, k, rng));
  return qr.householderQ() * Matrix::Identity(n, k);
}

inline Matrix rank_r(Index n, Index r, Rng& rng) { return gaussian(n, r, rng) * gaussian(r, n, rng); }

inline double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace mwnn::testing
