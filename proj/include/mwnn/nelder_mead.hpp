#pragma once

// Derivative-free Nelder-Mead minimizer with a projection hook, used for the
// bound-constrained weight search.

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace mwnn {

struct NelderMeadOptions {
  int max_evals = 2000;
  double initial_step = 0.1;
  double f_tol = 1e-12;  ///< stop when the simplex's objective spread falls below this
  double x_tol = 1e-10;  ///< ... and its diameter falls below this
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
};

/// Minimizes `f` starting from `x0`. Every trial point is passed through
/// `project` before evaluation, so the search stays in the feasible set.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                    const std::function<void(Eigen::VectorXd&)>& project,
                                    const NelderMeadOptions& opt = {}) {
  using Vec = Eigen::VectorXd;
  const Eigen::Index d = x0.size();
  int evals = 0;
  auto eval = [&](Vec& x) {
    if (project) project(x);
    ++evals;
    return f(x);
  };

  std::vector<Vec> pts;
  std::vector<double> vals;
  pts.reserve(static_cast<std::size_t>(d + 1));
  pts.push_back(x0);
  vals.push_back(eval(pts.back()));
  for (Eigen::Index i = 0; i < d; ++i) {
    Vec x = pts.front();
    // Step inward if the coordinate sits at the upper end of a unit box.
    x(i) += (x(i) + opt.initial_step > 1.0) ? -opt.initial_step : opt.initial_step;
    vals.push_back(eval(x));
    pts.push_back(std::move(x));
  }

  std::vector<std::size_t> order(pts.size());
  while (evals < opt.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diam = 0.0;
    for (const auto& p : pts) diam = std::max(diam, (p - pts[best]).cwiseAbs().maxCoeff());
    if (vals[worst] - vals[best] <= opt.f_tol && diam <= opt.x_tol) break;

    Vec centroid = Vec::Zero(d);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(d);

    Vec xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      Vec xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = std::move(xe);
        vals[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = std::move(xr);
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = std::move(xc);
      vals[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      vals[k] = eval(pts[k]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  const auto idx = static_cast<std::size_t>(it - vals.begin());
  return {pts[idx], vals[idx], evals};
}

}  // namespace mwnn
