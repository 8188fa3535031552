#pragma once

// Experiment protocol: synthetic instances with prescribed principal angles,
// NRE / success statistics, paired Monte-Carlo sweeps over the measurement
// count, the RIP comparison table and the null-space diagnostic.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "mwnn/angles.hpp"
#include "mwnn/basis.hpp"
#include "mwnn/bounds.hpp"
#include "mwnn/core_linalg.hpp"
#include "mwnn/measure.hpp"
#include "mwnn/rng.hpp"
#include "mwnn/solver.hpp"

namespace mwnn {

inline constexpr double kSuccessThreshold = 1e-4;

struct ProblemInstance {
  Matrix X;       ///< X_r + X_tail
  Matrix X_r;     ///< exact rank r, unit Frobenius norm
  Matrix X_tail;  ///< supported on the complements of span(U_r), span(V_r)
  Index r = 0;
  Index r_prime = 0;
  AlignedBases bases;  ///< truth and prior bases in canonical form
  AnglePair target;
  AnglePair measured;
  std::uint64_t seed = 0;
};

namespace detail {

inline Matrix random_orthogonal(Index n, Rng& rng) {
  Matrix G(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) G(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign fix makes the draw Haar distributed.
  const Vector d = qr.matrixQR().diagonal();
  for (Index j = 0; j < n; ++j)
    if (d(j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

// Truth basis and prior basis with U_r^T U_prior = [diag(cos theta) | 0].
inline std::pair<Matrix, Matrix> synthesize_side(Index n, Index r, Index rp, const Vector& theta, Rng& rng) {
  const Matrix G = random_orthogonal(n, rng);
  Matrix truth = G.leftCols(r);
  Matrix prior(n, rp);
  for (Index i = 0; i < r; ++i)
    prior.col(i) = std::cos(theta(i)) * G.col(i) - std::sin(theta(i)) * G.col(r + i);
  prior.rightCols(rp - r) = -G.middleCols(2 * r, rp - r);
  return {std::move(truth), std::move(prior)};
}

}  // namespace detail

/// Synthesizes X = X_r + X_tail with rank(X_r) = r and r'-dimensional priors
/// whose principal angles to span(X_r), span(X_r^T) are exactly `target`.
/// `tail_scale` in [0, 1) sets ||X_tail|| relative to the smallest singular
/// value of X_r, so X_r stays the best rank-r approximation of X.
inline ProblemInstance make_instance(Index n, Index r, Index r_prime, const AnglePair& target, std::uint64_t seed,
                                     double tail_scale = 0.0) {
  if (r < 1 || r_prime < r) throw ArgumentError("make_instance: need 1 <= r <= r'");
  if (n < r + r_prime)
    throw GeometryError("make_instance: need n >= r + r' (n = " + std::to_string(n) + ", r + r' = " +
                        std::to_string(r + r_prime) + ")");
  if (target.rank() != r)
    throw ArgumentError("make_instance: target angle vectors must have length r = " + std::to_string(r) + ", got " +
                        std::to_string(target.rank()));
  if (!(tail_scale >= 0.0 && tail_scale < 1.0)) throw ArgumentError("make_instance: tail_scale must lie in [0, 1)");

  Rng rng(derive_seed(seed, {stream::kInstance}));
  auto [U, Ut] = detail::synthesize_side(n, r, r_prime, target.theta_u(), rng);
  auto [V, Vt] = detail::synthesize_side(n, r, r_prime, target.theta_v(), rng);

  Matrix core(r, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < r; ++i) core(i, j) = rng.normal();
  Vector core_s = Eigen::JacobiSVD<Matrix>(core).singularValues();
  if (core_s(r - 1) <= 1e-8 * core_s(0)) core += Matrix::Identity(r, r);  // measure-zero event
  ProblemInstance inst;
  inst.X_r = U * core * V.transpose();
  inst.X_r /= inst.X_r.norm();
  inst.X_tail = Matrix::Zero(n, n);
  if (tail_scale > 0.0) {
    Matrix K(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) K(i, j) = rng.normal();
    K -= U * (U.transpose() * K);
    K -= (K * V) * V.transpose();
    const double sigma_r = svd(inst.X_r).S(r - 1);
    inst.X_tail = tail_scale * sigma_r * K / spectral_norm(K);
  }
  inst.X = inst.X_r + inst.X_tail;
  inst.r = r;
  inst.r_prime = r_prime;
  inst.target = target;
  inst.seed = seed;
  inst.bases = AlignedBases{Subspace::from_orthonormal(U, 1e-9), Subspace::from_orthonormal(V, 1e-9),
                            Subspace::from_orthonormal(Ut, 1e-9), Subspace::from_orthonormal(Vt, 1e-9),
                            target.theta_u(), target.theta_v()};
  inst.measured = AnglePair(principal_angles(inst.bases.U_r, inst.bases.U_prior),
                            principal_angles(inst.bases.V_r, inst.bases.V_prior));
  return inst;
}

inline double nre(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ArgumentError("nre: estimate and truth shapes differ");
  const double t = truth.norm();
  if (t == 0.0) throw ArgumentError("nre: truth is the zero matrix");
  return (estimate - truth).norm() / t;
}

// ---------------------------------------------------------------------------
// Methods and weights
// ---------------------------------------------------------------------------

enum class Method { standard, uniform, multi };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::standard: return "standard";
    case Method::uniform: return "uniform";
    case Method::multi: return "multi";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "standard") return Method::standard;
  if (s == "uniform") return Method::uniform;
  if (s == "multi") return Method::multi;
  throw ArgumentError("unknown method '" + s + "' (expected standard, uniform or multi)");
}

/// Weights each method uses on an instance: all ones, the best uniform pair,
/// or the full multi-weight optimum, all chosen from the known angles.
inline WeightSpec method_weights(Method m, const ProblemInstance& inst, const OptimizeOptions& opt = {}) {
  switch (m) {
    case Method::standard: return WeightSpec::ones(inst.r, inst.r_prime);
    case Method::uniform: return optimize_uniform_weights(inst.measured, inst.r, inst.r_prime, opt).weights;
    case Method::multi: return optimize_weights(inst.measured, inst.r, inst.r_prime, opt).weights;
  }
  throw ArgumentError("method_weights: unknown method");
}

struct WeightingOperators {
  Matrix Q_U;
  Matrix Q_V;
};

inline WeightingOperators weighting_operators(const ProblemInstance& inst, const WeightSpec& w) {
  return {build_Q(inst.bases.U_prior, w.lambda()), build_Q(inst.bases.V_prior, w.gamma())};
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Noise radius per trial: absolute, or relative to ||A(X)||_2.
struct NoiseSpec {
  enum class Mode { none, absolute, relative } mode = Mode::none;
  double value = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec absolute(double e) { return {Mode::absolute, e}; }
  static NoiseSpec relative(double f) { return {Mode::relative, f}; }

  double radius(const Vector& clean) const {
    switch (mode) {
      case Mode::none: return 0.0;
      case Mode::absolute: return value;
      case Mode::relative: return value * clean.norm();
    }
    return 0.0;
  }
};

struct SweepConfig {
  std::vector<Method> methods{Method::standard, Method::uniform, Method::multi};
  std::vector<Index> p_grid;
  int trials = 50;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  unsigned threads = 0;  ///< 0 = hardware concurrency
  SolverConfig solver;
  OptimizeOptions optimizer;
};

struct SweepPoint {
  Index p = 0;
  int trials = 0;
  int successes = 0;
  int nonconverged = 0;
  double success_rate = 0.0;
  double mean_nre = 0.0;
  double std_nre = 0.0;
  std::vector<double> nres;
};

struct SweepResult {
  Method method = Method::standard;
  WeightSpec weights;
  std::vector<SweepPoint> points;
};

inline std::uint64_t trial_seed(std::uint64_t master, Index p, int trial) {
  return derive_seed(master, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(trial)});
}

/// Runs every method on the same operator and noise at each (p, trial).
/// Results do not depend on the number of worker threads.
inline std::vector<SweepResult> sweep(const ProblemInstance& inst, const SweepConfig& cfg) {
  if (cfg.trials < 1) throw ArgumentError("sweep: trials must be at least 1");
  if (cfg.methods.empty()) throw ArgumentError("sweep: no methods selected");
  if (cfg.p_grid.empty()) throw ArgumentError("sweep: empty p grid");
  for (Index p : cfg.p_grid)
    if (p < 1) throw ArgumentError("sweep: every p must be at least 1");
  cfg.solver.validate();

  const Index n = inst.X.rows();
  std::vector<SweepResult> results;
  std::vector<WeightingOperators> ops;
  for (Method m : cfg.methods) {
    SweepResult r;
    r.method = m;
    r.weights = method_weights(m, inst, cfg.optimizer);
    ops.push_back(weighting_operators(inst, r.weights));
    r.points.resize(cfg.p_grid.size());
    for (std::size_t k = 0; k < cfg.p_grid.size(); ++k) {
      r.points[k].p = cfg.p_grid[k];
      r.points[k].trials = cfg.trials;
      r.points[k].nres.assign(static_cast<std::size_t>(cfg.trials), 0.0);
    }
    results.push_back(std::move(r));
  }
  std::vector<std::vector<std::uint8_t>> converged(
      results.size(), std::vector<std::uint8_t>(cfg.p_grid.size() * static_cast<std::size_t>(cfg.trials), 0));

  const std::size_t tasks = cfg.p_grid.size() * static_cast<std::size_t>(cfg.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t task = next++; task < tasks; task = next++) {
      const std::size_t k = task / static_cast<std::size_t>(cfg.trials);
      const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
      const Index p = cfg.p_grid[k];
      const std::uint64_t s = trial_seed(cfg.seed, p, trial);
      const MeasurementOperator A = gaussian_operator(n, p, s);
      const Vector clean = A.apply(inst.X);
      const double e = cfg.noise.radius(clean);
      const Vector y = add_noise(clean, e, s).y;
      for (std::size_t m = 0; m < results.size(); ++m) {
        const RecoveryResult rr = solve(A, y, ops[m].Q_U, ops[m].Q_V, e, cfg.solver);
        results[m].points[k].nres[static_cast<std::size_t>(trial)] = nre(rr.estimate, inst.X);
        converged[m][task] = rr.converged ? 1 : 0;
      }
    }
  };
  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, tasks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t m = 0; m < results.size(); ++m) {
    for (std::size_t k = 0; k < cfg.p_grid.size(); ++k) {
      SweepPoint& pt = results[m].points[k];
      double sum = 0.0;
      for (int t = 0; t < cfg.trials; ++t) {
        const double v = pt.nres[static_cast<std::size_t>(t)];
        const bool conv = converged[m][k * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)] != 0;
        // Non-converged solves count as failures.
        if (conv && v <= kSuccessThreshold) ++pt.successes;
        if (!conv) ++pt.nonconverged;
        sum += v;
      }
      pt.success_rate = static_cast<double>(pt.successes) / cfg.trials;
      pt.mean_nre = sum / cfg.trials;
      double ss = 0.0;
      for (double v : pt.nres) ss += (v - pt.mean_nre) * (v - pt.mean_nre);
      pt.std_nre = cfg.trials > 1 ? std::sqrt(ss / (cfg.trials - 1)) : 0.0;
    }
  }
  return results;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepResult>& results) {
  os << "method,p,trials,successes,success_rate,mean_nre,std_nre\n";
  for (const auto& r : results) {
    for (const auto& pt : r.points) {
      os << to_string(r.method) << ',' << pt.p << ',' << pt.trials << ',' << pt.successes << ','
         << format_double(pt.success_rate) << ',' << format_double(pt.mean_nre) << ',' << format_double(pt.std_nre)
         << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// RIP comparison table
// ---------------------------------------------------------------------------

struct Table1Row {
  AnglePair angles;
  double delta_standard = 0.0;       ///< multi-weight bound at all-ones weights
  double delta_uniform = 0.0;        ///< multi-weight bound, best uniform weights
  double delta_multi = 0.0;          ///< multi-weight bound, optimized weights
  double delta_uniform_thm1 = 0.0;   ///< single-weight bound (tabulated scaling), best weights
  double delta_standard_thm1 = 0.0;  ///< single-weight bound (tabulated scaling), unit weights
  WeightSpec multi_weights;
  WeightSpec uniform_weights;
};

/// The four published angle configurations (degrees, r = 3).
inline std::vector<AnglePair> published_table_rows() {
  return {AnglePair::from_degrees({2.26, 2.98, 3.10}, {1.91, 2.87, 3.40}),
          AnglePair::from_degrees({23.1, 24.54, 27.56}, {20.95, 20.06, 34.03}),
          AnglePair::from_degrees({2.10, 21.39, 27.07}, {3.49, 18.17, 24.68}),
          AnglePair::from_degrees({50.31, 58.63, 68.75}, {54.36, 66.41, 72.14})};
}

inline std::vector<Table1Row> table1(const std::vector<AnglePair>& rows, Index r, Index r_prime, Index n,
                                     const OptimizeOptions& opt = {}) {
  if (n < r + r_prime) throw GeometryError("table1: need n >= r + r'");
  std::vector<Table1Row> out;
  for (const auto& a : rows) {
    if (a.rank() != r) throw ArgumentError("table1: every angle vector must have length r");
    Table1Row row;
    row.angles = a;
    row.delta_standard = bound_report(a, WeightSpec::ones(r, r_prime), r).delta_multi;
    const auto uni = optimize_uniform_weights(a, r, r_prime, opt);
    const auto multi = optimize_weights(a, r, r_prime, opt);
    row.delta_uniform = uni.report.delta_multi;
    row.delta_multi = multi.report.delta_multi;
    row.uniform_weights = uni.weights;
    row.multi_weights = multi.weights;
    row.delta_uniform_thm1 = optimize_single_weight(a, SingleScaling::tabulated).report.delta_single;
    row.delta_standard_thm1 = single_weight_report(a, 1.0, 1.0, SingleScaling::tabulated).delta_single;
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string join_degrees(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v[i]);
    if (i) s += ' ';
    s += buf;
  }
  return s;
}

inline void write_table1_csv(std::ostream& os, const std::vector<Table1Row>& rows) {
  os << "theta_u_deg,theta_v_deg,delta_standard,delta_uniform,delta_multi,delta_uniform_thm1,delta_standard_thm1\n";
  for (const auto& r : rows) {
    os << join_degrees(r.angles.theta_u_deg()) << ',' << join_degrees(r.angles.theta_v_deg()) << ','
       << format_double(r.delta_standard) << ',' << format_double(r.delta_uniform) << ','
       << format_double(r.delta_multi) << ',' << format_double(r.delta_uniform_thm1) << ','
       << format_double(r.delta_standard_thm1) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Null-space diagnostic
// ---------------------------------------------------------------------------

struct NullSpaceReport {
  double lhs = 0.0;  ///< ||P_Tperp(H)||_*
  double rhs = 0.0;  ///< alpha3 ||P_T(H)||_* + alpha4 ||P_Ttilde(H)||_* + 2 ||X_tail||_*
  double alpha3 = 0.0;
  double alpha4 = 0.0;
  bool satisfied = false;
};

/// Evaluates both sides of the null-space inequality for an error H = X_hat - X.
inline NullSpaceReport null_space_check(const Matrix& H, const ProblemInstance& inst, const WeightSpec& w,
                                        double slack = 1e-6) {
  const StructuredBases sb = build_structured_bases(inst.bases, w);
  const SupportProjector S(inst.bases.U_r, inst.bases.V_r);
  const AnglePair frame_angles(sb.theta_u, sb.theta_v);
  const Alpha34 a = alpha34(frame_angles, w);
  NullSpaceReport rep;
  rep.alpha3 = a.alpha3;
  rep.alpha4 = a.alpha4;
  rep.lhs = nuclear_norm(S.project_Tperp(H));
  rep.rhs = a.alpha3 * nuclear_norm(S.project_T(H)) + a.alpha4 * nuclear_norm(project_Ttilde(H, sb)) +
            2.0 * nuclear_norm(inst.X_tail);
  rep.satisfied = rep.lhs <= rep.rhs + slack;
  return rep;
}

}  // namespace mwnn
