#pragma once

// Analytical quantities of the single-weight and multi-weight recovery
// guarantees: alpha constants, RIP bounds, error constants, and the search for
// weights that maximize the multi-weight RIP bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mwnn/angles.hpp"
#include "mwnn/basis.hpp"
#include "mwnn/errors.hpp"
#include "mwnn/nelder_mead.hpp"
#include "mwnn/rng.hpp"

namespace mwnn {

/// The guarantee splits the tail of the error into blocks of rank r_hat = 30 r
/// and needs RIP at rank r_tilde = 32 r. Since 2r / r_hat = 1/15 the bound
/// involves sqrt((alpha3^2 + alpha4^2) / 15), and C0 carries sqrt(30 r).
inline constexpr int kRhatPerRank = 30;
inline constexpr int kRtildePerRank = 32;
inline constexpr double kAlphaDivisor = kRhatPerRank / 2.0;  // 15

/// Single-weight bound constants: 0.9 and sqrt(30).
inline constexpr double kSingleNumerator = 0.9;

// ---------------------------------------------------------------------------
// Single weight
// ---------------------------------------------------------------------------

struct SingleWeightReport {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double delta_single = 0.0;
};

/// How max(alpha1, alpha2) enters the single-weight bound. `printed` is the
/// theorem as stated (m / sqrt(30)); `tabulated` uses 2 m / sqrt(30), which is
/// the reading that reproduces the published comparison table.
enum class SingleScaling { printed, tabulated };

namespace detail {
inline double ratio_term(double w, double c2, double s2) {
  return std::sqrt((w * w * w * w * c2 + s2) / (w * w * c2 + s2));
}
inline void check_weight(double w, const char* name) {
  if (!(w > 0.0 && w <= 1.0)) throw ArgumentError(std::string(name) + " must lie in (0, 1]");
}
inline void check_angle(double t, const char* name) {
  if (!(t >= -1e-12 && t <= std::numbers::pi / 2 + 1e-12))
    throw ArgumentError(std::string(name) + " must lie in [0, 90] degrees");
}
}  // namespace detail

/// alpha1, alpha2 for the largest principal angles (radians) and scalar weights.
inline std::pair<double, double> alpha12(double theta_u_max, double theta_v_max, double lambda, double gamma) {
  detail::check_angle(theta_u_max, "theta_u");
  detail::check_angle(theta_v_max, "theta_v");
  detail::check_weight(lambda, "lambda");
  detail::check_weight(gamma, "gamma");
  const double cu = std::cos(theta_u_max), su = std::sin(theta_u_max);
  const double cv = std::cos(theta_v_max), sv = std::sin(theta_v_max);
  const double cu2 = cu * cu, su2 = su * su, cv2 = cv * cv, sv2 = sv * sv;
  const double a1 = detail::ratio_term(lambda, cu2, su2) + detail::ratio_term(gamma, cv2, sv2);
  const double a2 = std::sqrt(2.0 * (1.0 - lambda * lambda) * su2 / (lambda * lambda * cu2 + su2)) +
                    std::sqrt(2.0 * (1.0 - gamma * gamma) * sv2 / (gamma * gamma * cv2 + sv2));
  return {a1, a2};
}

inline double rip_bound_single(double alpha1, double alpha2, SingleScaling scaling = SingleScaling::printed) {
  const double factor = scaling == SingleScaling::tabulated ? 2.0 : 1.0;
  const double m = factor * std::max(alpha1, alpha2) / std::sqrt(static_cast<double>(kRhatPerRank));
  return (kSingleNumerator - m) / (kSingleNumerator + m);
}

inline SingleWeightReport single_weight_report(const AnglePair& angles, double lambda, double gamma,
                                               SingleScaling scaling = SingleScaling::printed) {
  const auto [a1, a2] = alpha12(angles.theta_u()(0), angles.theta_v()(0), lambda, gamma);
  return {a1, a2, rip_bound_single(a1, a2, scaling)};
}

// ---------------------------------------------------------------------------
// Multi weight
// ---------------------------------------------------------------------------

struct Alpha34 {
  double alpha3 = 0.0;
  double alpha4 = 0.0;
};

inline Alpha34 alpha34(const AnglePair& angles, const WeightSpec& w, DForm form = DForm::operator_norm) {
  const Index r = angles.rank();
  if (w.lambda1.size() != r || w.gamma1.size() != r)
    throw ArgumentError("alpha34: lambda1/gamma1 must have length r = " + std::to_string(r));
  if (w.lambda2.size() != w.gamma2.size()) throw ArgumentError("alpha34: lambda2 and gamma2 lengths differ");
  const Lemma4Norms u = lemma4_norms(angles.theta_u(), w.lambda1, w.lambda2, form);
  const Lemma4Norms v = lemma4_norms(angles.theta_v(), w.gamma1, w.gamma2, form);
  return {u.l11_l12_row + v.l11_l12_row, u.lprime + v.lprime};
}

/// sqrt((alpha3^2 + alpha4^2) / 15).
inline double alpha_slack(double alpha3, double alpha4) {
  return std::sqrt((alpha3 * alpha3 + alpha4 * alpha4) / kAlphaDivisor);
}

inline double rip_bound_multi(double alpha3, double alpha4) {
  const double s = alpha_slack(alpha3, alpha4);
  return (1.0 - s) / (1.0 + s);
}

struct ErrorConstants {
  double C0 = 0.0;
  double C1 = 0.0;
};

/// C0, C1 of the multi-weight error bound at RIP constant `delta` (rank 32 r).
inline ErrorConstants error_constants(double delta, double alpha3, double alpha4, Index r) {
  if (r < 1) throw ArgumentError("error_constants: r must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw ArgumentError("error_constants: delta must lie in [0, 1)");
  const double s = alpha_slack(alpha3, alpha4);
  const double denom = 1.0 - (1.0 + delta) / (1.0 - delta) * s;
  if (!(denom > 0.0))
    throw InfeasibleBoundError("error_constants: bound denominator is not positive at delta = " +
                                   std::to_string(delta),
                               delta);
  const double c0 = 4.0 / ((1.0 - delta) * std::sqrt(static_cast<double>(kRhatPerRank * r))) / denom;
  const double c1 = 2.0 / (1.0 - delta) * (1.0 + s) / denom;
  return {c0, c1};
}

struct BoundReport {
  double alpha3 = 0.0;
  double alpha4 = 0.0;
  double delta_multi = 0.0;
  bool feasible = false;  ///< some delta >= 0 makes the error-bound denominator positive
  double delta_eval = 0.0;  ///< RIP constant at which C0, C1 were evaluated
  std::optional<double> C0;
  std::optional<double> C1;
};

/// Full report for given weights. C0, C1 are evaluated at `delta_eval`
/// (default 0, the smallest constants) and are absent when infeasible there.
inline BoundReport bound_report(const AnglePair& angles, const WeightSpec& w, Index r, double delta_eval = 0.0,
                                DForm form = DForm::operator_norm) {
  const Alpha34 a = alpha34(angles, w, form);
  BoundReport rep;
  rep.alpha3 = a.alpha3;
  rep.alpha4 = a.alpha4;
  rep.delta_multi = rip_bound_multi(a.alpha3, a.alpha4);
  rep.delta_eval = delta_eval;
  rep.feasible = rep.delta_multi > 0.0 && delta_eval < rep.delta_multi;
  if (rep.feasible) {
    const ErrorConstants c = error_constants(delta_eval, a.alpha3, a.alpha4, r);
    rep.C0 = c.C0;
    rep.C1 = c.C1;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Weight search
// ---------------------------------------------------------------------------

struct OptimizeOptions {
  int budget = 10000;  ///< objective evaluations in total
  std::uint64_t seed = 0;
  DForm form = DForm::operator_norm;
};

struct OptimizedWeights {
  WeightSpec weights;
  BoundReport report;
  double objective = 0.0;  ///< sqrt(alpha3^2 + alpha4^2)
  int evaluations = 0;
  int winning_start = -1;  ///< index of the start that produced the result; -1 for a fallback
};

namespace detail {

inline double multi_objective(const AnglePair& a, const WeightSpec& w, DForm form) {
  const Alpha34 al = alpha34(a, w, form);
  return std::sqrt(al.alpha3 * al.alpha3 + al.alpha4 * al.alpha4);
}

// Packing x = [lambda1, lambda2, gamma1, gamma2].
inline WeightSpec unpack(const Vector& x, Index r, Index rp) {
  const Index k = rp - r;
  return {x.segment(0, r), x.segment(r, k), x.segment(rp, r), x.segment(rp + r, k)};
}

inline Vector pack(const WeightSpec& w) {
  Vector x(2 * w.r_prime());
  x << w.lambda1, w.lambda2, w.gamma1, w.gamma2;
  return x;
}

inline void project_weights(Vector& x, Index r, Index rp) {
  x = x.cwiseMax(kWeightFloor).cwiseMin(1.0);
  std::sort(x.data(), x.data() + r, std::greater<>());
  std::sort(x.data() + rp, x.data() + rp + r, std::greater<>());
}

inline std::vector<double> weight_grid(int points) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g.push_back(kWeightFloor + (1.0 - kWeightFloor) * i / (points - 1));
  return g;
}

inline void check_shape(const AnglePair& angles, Index r, Index rp) {
  if (angles.rank() != r)
    throw ArgumentError("weight search: angle vectors have length " + std::to_string(angles.rank()) +
                        " but r = " + std::to_string(r));
  if (rp < r) throw ArgumentError("weight search: need r' >= r");
}

inline OptimizedWeights finish(const AnglePair& angles, WeightSpec w, Index r, double obj, int evals, int start,
                               DForm form) {
  OptimizedWeights out;
  out.report = bound_report(angles, w, r, 0.0, form);
  out.weights = std::move(w);
  out.objective = obj;
  out.evaluations = evals;
  out.winning_start = start;
  return out;
}

}  // namespace detail

/// Best single weight per side (Lambda = lambda I, Gamma = gamma I) for the
/// multi-weight bound: grid search over (lambda, gamma), then a Nelder-Mead
/// polish of the best grid point.
inline OptimizedWeights optimize_uniform_weights(const AnglePair& angles, Index r, Index r_prime,
                                                 const OptimizeOptions& opt = {}) {
  detail::check_shape(angles, r, r_prime);
  const auto grid = detail::weight_grid(41);
  int evals = 0;
  double best = std::numeric_limits<double>::infinity();
  double bl = 1.0, bg = 1.0;
  auto f = [&](double l, double g) {
    ++evals;
    return detail::multi_objective(angles, WeightSpec::uniform(r, r_prime, l, g), opt.form);
  };
  for (double l : grid) {
    for (double g : grid) {
      const double v = f(l, g);
      if (v < best) {
        best = v;
        bl = l;
        bg = g;
      }
    }
  }
  NelderMeadOptions nm;
  nm.max_evals = 400;
  nm.initial_step = 0.02;
  Vector x0(2);
  x0 << bl, bg;
  const auto res = nelder_mead([&](const Vector& x) { return detail::multi_objective(angles, WeightSpec::uniform(r, r_prime, x(0), x(1)), opt.form); },
                               x0, [](Vector& x) { x = x.cwiseMax(kWeightFloor).cwiseMin(1.0); }, nm);
  evals += res.evals;
  if (res.f < best) {
    best = res.f;
    bl = res.x(0);
    bg = res.x(1);
  }
  return detail::finish(angles, WeightSpec::uniform(r, r_prime, bl, bg), r, best, evals, 0, opt.form);
}

/// Minimizes sqrt(alpha3^2 + alpha4^2) over all weight specs (equivalently
/// maximizes the multi-weight RIP bound).
///
/// Eight Nelder-Mead starts: all-ones, the weight floor, the best uniform grid
/// point, and five seeded random points. Every trial point is clamped to
/// [1e-6, 1] and lambda1, gamma1 are re-sorted non-increasing. The all-ones and
/// best-uniform points are kept as fallbacks, so the result is never worse.
/// Deterministic for a given seed; exact ties go to the lowest start index.
inline OptimizedWeights optimize_weights(const AnglePair& angles, Index r, Index r_prime,
                                         const OptimizeOptions& opt = {}) {
  detail::check_shape(angles, r, r_prime);
  if (opt.budget < 1000) throw ArgumentError("optimize_weights: budget must be at least 1000 evaluations");
  const Index dim = 2 * r_prime;
  int evals = 0;
  auto objective = [&](const Vector& x) {
    return detail::multi_objective(angles, detail::unpack(x, r, r_prime), opt.form);
  };

  // Fallback 1: all ones.
  WeightSpec best_w = WeightSpec::ones(r, r_prime);
  double best = detail::multi_objective(angles, best_w, opt.form);
  ++evals;
  int best_start = -1;

  // Fallback 2: best uniform weight on a 1-D grid (lambda = gamma).
  WeightSpec uni_w = best_w;
  double uni = best;
  for (double l : detail::weight_grid(101)) {
    WeightSpec w = WeightSpec::uniform(r, r_prime, l, l);
    const double v = detail::multi_objective(angles, w, opt.form);
    ++evals;
    if (v < uni) {
      uni = v;
      uni_w = std::move(w);
    }
  }
  if (uni < best) {
    best = uni;
    best_w = uni_w;
  }

  std::vector<Vector> starts;
  starts.push_back(Vector::Ones(dim));
  starts.push_back(Vector::Constant(dim, kWeightFloor));
  starts.push_back(detail::pack(uni_w));
  Rng rng(derive_seed(opt.seed, {stream::kOptimizer}));
  for (int k = 0; k < 5; ++k) {
    Vector x(dim);
    for (Index i = 0; i < dim; ++i) x(i) = kWeightFloor + (1.0 - kWeightFloor) * rng.uniform();
    starts.push_back(std::move(x));
  }

  const int per_start = std::max(50, (opt.budget - evals) / static_cast<int>(starts.size()));
  NelderMeadOptions nm;
  nm.max_evals = per_start;
  nm.initial_step = 0.1;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    Vector x0 = starts[k];
    const auto res = nelder_mead(objective, x0, [&](Vector& x) { detail::project_weights(x, r, r_prime); }, nm);
    evals += res.evals;
    if (res.f < best) {
      best = res.f;
      best_w = detail::unpack(res.x, r, r_prime);
      best_start = static_cast<int>(k);
    }
  }
  return detail::finish(angles, std::move(best_w), r, best, evals, best_start, opt.form);
}

struct OptimizedSingleWeight {
  double lambda = 1.0;
  double gamma = 1.0;
  SingleWeightReport report;
};

/// Scalar weights maximizing the single-weight RIP bound.
inline OptimizedSingleWeight optimize_single_weight(const AnglePair& angles,
                                                    SingleScaling scaling = SingleScaling::printed) {
  const double tu = angles.theta_u()(0), tv = angles.theta_v()(0);
  auto neg_delta = [&](double l, double g) {
    const auto [a1, a2] = alpha12(tu, tv, l, g);
    return -rip_bound_single(a1, a2, scaling);
  };
  double best = std::numeric_limits<double>::infinity();
  double bl = 1.0, bg = 1.0;
  const auto grid = detail::weight_grid(201);
  for (double l : grid) {
    for (double g : grid) {
      const double v = neg_delta(l, g);
      if (v < best) {
        best = v;
        bl = l;
        bg = g;
      }
    }
  }
  NelderMeadOptions nm;
  nm.max_evals = 400;
  nm.initial_step = 0.005;
  Vector x0(2);
  x0 << bl, bg;
  const auto res = nelder_mead([&](const Vector& x) { return neg_delta(x(0), x(1)); }, x0,
                               [](Vector& x) { x = x.cwiseMax(kWeightFloor).cwiseMin(1.0); }, nm);
  if (res.f < best) {
    bl = res.x(0);
    bg = res.x(1);
  }
  OptimizedSingleWeight out;
  out.lambda = bl;
  out.gamma = bg;
  out.report = single_weight_report(angles, bl, bg, scaling);
  return out;
}

}  // namespace mwnn
