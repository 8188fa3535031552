#pragma once

// Command-line front end. `run` parses arguments, resolves the configuration
// (inline flags, then an optional JSON config file that overrides them),
// validates it, executes one subcommand and writes its outputs plus a run
// manifest. Exit codes: 0 success, 1 solver non-convergence, 2 usage/config
// error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mwnn/angles.hpp"
#include "mwnn/basis.hpp"
#include "mwnn/bounds.hpp"
#include "mwnn/experiments.hpp"
#include "mwnn/measure.hpp"
#include "mwnn/solver.hpp"

#ifndef MWNN_VERSION
#define MWNN_VERSION "0.0.0"
#endif

namespace mwnn::app {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 1;
inline constexpr int kExitUsage = 2;

/// Configuration error; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config access helpers
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T field(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("missing field '" + key + "'");
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& cfg, const std::string& key, T fallback) {
  return cfg.contains(key) ? field<T>(cfg, key) : fallback;
}

inline void check_keys(const json& cfg, const std::vector<std::string>& allowed) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown field '" + it.key() + "'");
  }
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline AnglePair angles_from(const json& cfg, const std::string& ku = "theta_u", const std::string& kv = "theta_v") {
  const auto u = field<std::vector<double>>(cfg, ku);
  const auto v = field<std::vector<double>>(cfg, kv);
  if (u.empty()) throw ConfigError("field '" + ku + "' must be non-empty");
  if (u.size() != v.size()) throw ConfigError("fields '" + ku + "' and '" + kv + "' must have the same length");
  for (double d : u)
    if (!(d >= 0.0 && d <= 90.0)) throw ConfigError("field '" + ku + "' entries must lie in [0, 90] degrees");
  for (double d : v)
    if (!(d >= 0.0 && d <= 90.0)) throw ConfigError("field '" + kv + "' entries must lie in [0, 90] degrees");
  return AnglePair::from_degrees(u, v);
}

// Synthetic experiments default to the good-prior angle set.
inline const std::vector<double> kDefaultThetaU{1.0, 1.6, 2.0};
inline const std::vector<double> kDefaultThetaV{1.0, 1.4, 1.5};

inline AnglePair angles_or_default(const json& cfg) {
  if (cfg.contains("theta_u") || cfg.contains("theta_v")) return angles_from(cfg);
  return AnglePair::from_degrees(kDefaultThetaU, kDefaultThetaV);
}

inline std::vector<long long> default_p_grid() {
  std::vector<long long> g;
  for (long long p = 40; p <= 240; p += 20) g.push_back(p);
  return g;
}

inline Index positive_index(const json& cfg, const std::string& key, long long fallback) {
  const long long v = field_or<long long>(cfg, key, fallback);
  if (v < 1) throw ConfigError("field '" + key + "' must be a positive integer");
  return static_cast<Index>(v);
}

inline NoiseSpec noise_from(const json& cfg) {
  if (!cfg.contains("noise")) return NoiseSpec::none();
  const json& nz = cfg.at("noise");
  if (!nz.is_object()) throw ConfigError("field 'noise' must be an object {mode, value}");
  const auto mode = field_or<std::string>(nz, "mode", "none");
  const double value = field_or<double>(nz, "value", 0.0);
  if (!(value >= 0.0)) throw ConfigError("field 'noise.value' must be non-negative");
  if (mode == "none") return NoiseSpec::none();
  if (mode == "absolute") return NoiseSpec::absolute(value);
  if (mode == "relative") return NoiseSpec::relative(value);
  throw ConfigError("field 'noise.mode' must be none, absolute or relative");
}

inline json noise_to_json(const std::string& text) {
  if (text == "none") return {{"mode", "none"}, {"value", 0.0}};
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("flag --noise expects none, rel:<f> or abs:<e>");
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  try {
    value = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("flag --noise has a malformed value");
  }
  if (kind == "rel") return {{"mode", "relative"}, {"value", value}};
  if (kind == "abs") return {{"mode", "absolute"}, {"value", value}};
  throw ConfigError("flag --noise expects none, rel:<f> or abs:<e>");
}

inline SolverConfig solver_from(const json& cfg) {
  SolverConfig s;
  if (!cfg.contains("solver")) return s;
  const json& j = cfg.at("solver");
  check_keys(j, {"max_iters", "abs_tol", "rel_tol", "rho"});
  s.max_iters = field_or<int>(j, "max_iters", s.max_iters);
  s.abs_tol = field_or<double>(j, "abs_tol", s.abs_tol);
  s.rel_tol = field_or<double>(j, "rel_tol", s.rel_tol);
  s.rho = field_or<double>(j, "rho", s.rho);
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("field 'solver': ") + e.what());
  }
  return s;
}

inline WeightSpec weights_from(const json& cfg, Index r, Index rp) {
  WeightSpec w = WeightSpec::ones(r, rp);
  if (!cfg.contains("weights")) return w;
  const json& j = cfg.at("weights");
  check_keys(j, {"lambda1", "lambda2", "gamma1", "gamma2"});
  auto get = [&](const char* key, Vector& dst, Index len) {
    if (!j.contains(key)) return;
    const auto v = field<std::vector<double>>(j, key);
    if (static_cast<Index>(v.size()) != len)
      throw ConfigError(std::string("field 'weights.") + key + "' must have length " + std::to_string(len));
    dst = to_vector(v);
  };
  get("lambda1", w.lambda1, r);
  get("lambda2", w.lambda2, rp - r);
  get("gamma1", w.gamma1, r);
  get("gamma2", w.gamma2, rp - r);
  try {
    w.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("field 'weights': ") + e.what());
  }
  return w;
}

inline json weights_to_json(const WeightSpec& w) {
  return {{"lambda1", to_std(w.lambda1)},
          {"lambda2", to_std(w.lambda2)},
          {"gamma1", to_std(w.gamma1)},
          {"gamma2", to_std(w.gamma2)}};
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json report_to_json(const BoundReport& b) {
  json j{{"alpha3", b.alpha3},     {"alpha4", b.alpha4},     {"delta_multi", b.delta_multi},
         {"feasible", b.feasible}, {"delta_eval", b.delta_eval}};
  j["C0"] = b.C0 ? json(*b.C0) : json(nullptr);
  j["C1"] = b.C1 ? json(*b.C1) : json(nullptr);
  return j;
}

inline bool is_constant(const Vector& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Run context
// ---------------------------------------------------------------------------

struct Context {
  std::string command;
  json config;  ///< resolved configuration (inline flags merged with the file)
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  std::filesystem::path output(const std::string& name) {
    const auto path = out_dir / name;
    outputs.push_back(path.string());
    return path;
  }
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file " + path.string());
  return os;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto os = open_output(path);
  os << j.dump(2) << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands. Each validates the whole config, then does the work.
// ---------------------------------------------------------------------------

inline int cmd_bounds(Context& ctx) {
  const json& c = ctx.config;
  detail::check_keys(c, {"theta_u", "theta_v", "r", "r_prime", "weights", "delta", "dform", "seed"});
  const AnglePair angles = detail::angles_from(c);
  const Index r = detail::positive_index(c, "r", angles.rank());
  if (r != angles.rank()) throw ConfigError("field 'r' must equal the length of theta_u");
  const Index rp = detail::positive_index(c, "r_prime", std::max<Index>(7, r));
  if (rp < r) throw ConfigError("field 'r_prime' must be at least r");
  const WeightSpec w = detail::weights_from(c, r, rp);
  const double delta = detail::field_or<double>(c, "delta", 0.0);
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("field 'delta' must lie in [0, 1)");
  const auto dform_name = detail::field_or<std::string>(c, "dform", "operator_norm");
  DForm form = DForm::operator_norm;
  if (dform_name == "printed_d1") form = DForm::printed_d1;
  else if (dform_name == "appendix_c") form = DForm::appendix_c;
  else if (dform_name != "operator_norm") throw ConfigError("field 'dform' must be operator_norm, printed_d1 or appendix_c");

  const BoundReport rep = bound_report(angles, w, r, delta, form);
  json j = detail::report_to_json(rep);
  j["weights"] = detail::weights_to_json(w);
  if (detail::is_constant(w.lambda()) && detail::is_constant(w.gamma())) {
    const auto single = single_weight_report(angles, w.lambda1(0), w.gamma1(0));
    j["alpha1"] = single.alpha1;
    j["alpha2"] = single.alpha2;
    j["delta_single"] = single.delta_single;
    j["delta_single_tabulated"] = rip_bound_single(single.alpha1, single.alpha2, SingleScaling::tabulated);
  }
  detail::write_json(ctx.output("bounds.json"), j);
  auto& out = *ctx.out;
  out << "alpha3 = " << format_double(rep.alpha3) << "\nalpha4 = " << format_double(rep.alpha4)
      << "\ndelta_multi = " << format_double(rep.delta_multi) << "\nfeasible = " << (rep.feasible ? "yes" : "no")
      << '\n';
  if (rep.C0) out << "C0 = " << format_double(*rep.C0) << "\nC1 = " << format_double(*rep.C1) << '\n';
  if (j.contains("alpha1"))
    out << "alpha1 = " << format_double(j["alpha1"].get<double>()) << "\nalpha2 = "
        << format_double(j["alpha2"].get<double>()) << "\ndelta_single = "
        << format_double(j["delta_single"].get<double>()) << '\n';
  return kExitOk;
}

inline int cmd_optimize_weights(Context& ctx) {
  const json& c = ctx.config;
  detail::check_keys(c, {"theta_u", "theta_v", "r", "r_prime", "budget", "seed"});
  const AnglePair angles = detail::angles_from(c);
  const Index r = detail::positive_index(c, "r", angles.rank());
  if (r != angles.rank()) throw ConfigError("field 'r' must equal the length of theta_u");
  const Index rp = detail::positive_index(c, "r_prime", std::max<Index>(7, r));
  if (rp < r) throw ConfigError("field 'r_prime' must be at least r");
  const int budget = detail::field_or<int>(c, "budget", 10000);
  if (budget < 1000) throw ConfigError("field 'budget' must be at least 1000");

  OptimizeOptions opt;
  opt.budget = budget;
  opt.seed = ctx.seed;
  const auto multi = optimize_weights(angles, r, rp, opt);
  const auto uni = optimize_uniform_weights(angles, r, rp, opt);
  json j{{"multi", {{"weights", detail::weights_to_json(multi.weights)},
                    {"report", detail::report_to_json(multi.report)},
                    {"objective", multi.objective},
                    {"evaluations", multi.evaluations}}},
         {"uniform", {{"weights", detail::weights_to_json(uni.weights)}, {"report", detail::report_to_json(uni.report)}}},
         {"standard", detail::report_to_json(bound_report(angles, WeightSpec::ones(r, rp), r))}};
  detail::write_json(ctx.output("weights.json"), j);
  auto& out = *ctx.out;
  auto list = [](const Vector& v) {
    std::string s;
    for (Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
    return s;
  };
  out << "lambda1 = " << list(multi.weights.lambda1) << "\nlambda2 = " << list(multi.weights.lambda2)
      << "\ngamma1 = " << list(multi.weights.gamma1) << "\ngamma2 = " << list(multi.weights.gamma2)
      << "\ndelta_multi = " << format_double(multi.report.delta_multi)
      << "\ndelta_uniform = " << format_double(uni.report.delta_multi) << '\n';
  return kExitOk;
}

inline int cmd_recover(Context& ctx) {
  const json& c = ctx.config;
  detail::check_keys(c, {"n", "r", "r_prime", "theta_u", "theta_v", "p", "method", "noise", "tail_scale", "seed",
                         "budget", "solver", "save_operator"});
  const Index n = detail::positive_index(c, "n", 20);
  const AnglePair angles = detail::angles_or_default(c);
  const Index r = detail::positive_index(c, "r", angles.rank());
  if (r != angles.rank()) throw ConfigError("field 'r' must equal the length of theta_u");
  const Index rp = detail::positive_index(c, "r_prime", std::max<Index>(7, r));
  if (rp < r) throw ConfigError("field 'r_prime' must be at least r");
  if (n < r + rp) throw ConfigError("field 'n' must be at least r + r_prime");
  const Index p = detail::positive_index(c, "p", n * n);
  Method method;
  try {
    method = parse_method(detail::field_or<std::string>(c, "method", "multi"));
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("field 'method': ") + e.what());
  }
  const NoiseSpec noise = detail::noise_from(c);
  const double tail = detail::field_or<double>(c, "tail_scale", 0.0);
  if (!(tail >= 0.0 && tail < 1.0)) throw ConfigError("field 'tail_scale' must lie in [0, 1)");
  const SolverConfig scfg = detail::solver_from(c);
  const bool save_op = detail::field_or<bool>(c, "save_operator", false);
  OptimizeOptions opt;
  opt.budget = detail::field_or<int>(c, "budget", 10000);
  if (opt.budget < 1000) throw ConfigError("field 'budget' must be at least 1000");
  opt.seed = ctx.seed;

  const ProblemInstance inst = make_instance(n, r, rp, angles, ctx.seed, tail);
  const WeightSpec w = method_weights(method, inst, opt);
  const auto q = weighting_operators(inst, w);
  const std::uint64_t s = trial_seed(ctx.seed, p, 0);
  const MeasurementOperator A = gaussian_operator(n, p, s);
  const Vector clean = A.apply(inst.X);
  const double e = noise.radius(clean);
  const Vector y = add_noise(clean, e, s).y;
  const RecoveryResult res = solve(A, y, q.Q_U, q.Q_V, e, scfg);
  const double err = nre(res.estimate, inst.X);

  json j{{"method", to_string(method)},
         {"nre", err},
         {"success", err <= kSuccessThreshold},
         {"converged", res.converged},
         {"iterations", res.iterations},
         {"primal_residual", res.primal_residual},
         {"dual_residual", res.dual_residual},
         {"feasibility_gap", res.feasibility_gap},
         {"objective", res.objective},
         {"q_condition", res.q_condition},
         {"noise_radius", e},
         {"weights", detail::weights_to_json(w)}};
  detail::write_json(ctx.output("recovery.json"), j);
  if (save_op) {
    auto os = detail::open_output(ctx.output("operator.bin"));
    save_operator(os, A, false);
  }
  *ctx.out << "method = " << to_string(method) << "\nnre = " << format_double(err)
           << "\nconverged = " << (res.converged ? "yes" : "no") << "\niterations = " << res.iterations << '\n';
  if (res.ill_conditioned) *ctx.err << "warning: weighting operators are ill-conditioned\n";
  return res.converged ? kExitOk : kExitNotConverged;
}

inline int cmd_sweep(Context& ctx) {
  const json& c = ctx.config;
  detail::check_keys(c, {"n", "r", "r_prime", "theta_u", "theta_v", "p_grid", "trials", "noise", "methods",
                         "tail_scale", "seed", "budget", "solver", "threads"});
  const Index n = detail::positive_index(c, "n", 20);
  const AnglePair angles = detail::angles_or_default(c);
  const Index r = detail::positive_index(c, "r", angles.rank());
  if (r != angles.rank()) throw ConfigError("field 'r' must equal the length of theta_u");
  const Index rp = detail::positive_index(c, "r_prime", std::max<Index>(7, r));
  if (rp < r) throw ConfigError("field 'r_prime' must be at least r");
  if (n < r + rp) throw ConfigError("field 'n' must be at least r + r_prime");
  SweepConfig cfg;
  const auto grid = detail::field_or<std::vector<long long>>(c, "p_grid", detail::default_p_grid());
  if (grid.empty()) throw ConfigError("field 'p_grid' must be non-empty");
  for (long long p : grid) {
    if (p < 1) throw ConfigError("field 'p_grid' entries must be positive");
    cfg.p_grid.push_back(static_cast<Index>(p));
  }
  cfg.trials = detail::field_or<int>(c, "trials", 50);
  if (cfg.trials < 1) throw ConfigError("field 'trials' must be at least 1");
  cfg.noise = detail::noise_from(c);
  cfg.methods.clear();
  for (const auto& m : detail::field_or<std::vector<std::string>>(c, "methods", {"standard", "uniform", "multi"})) {
    try {
      cfg.methods.push_back(parse_method(m));
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("field 'methods': ") + e.what());
    }
  }
  if (cfg.methods.empty()) throw ConfigError("field 'methods' must be non-empty");
  const double tail = detail::field_or<double>(c, "tail_scale", 0.0);
  if (!(tail >= 0.0 && tail < 1.0)) throw ConfigError("field 'tail_scale' must lie in [0, 1)");
  cfg.solver = detail::solver_from(c);
  cfg.optimizer.budget = detail::field_or<int>(c, "budget", 10000);
  if (cfg.optimizer.budget < 1000) throw ConfigError("field 'budget' must be at least 1000");
  cfg.optimizer.seed = ctx.seed;
  cfg.seed = ctx.seed;
  cfg.threads = ctx.threads;

  const ProblemInstance inst = make_instance(n, r, rp, angles, ctx.seed, tail);
  const auto results = sweep(inst, cfg);
  {
    auto os = detail::open_output(ctx.output("sweep.csv"));
    write_sweep_csv(os, results);
  }
  int nonconverged = 0;
  for (const auto& res : results)
    for (const auto& pt : res.points) nonconverged += pt.nonconverged;
  write_sweep_csv(*ctx.out, results);
  if (nonconverged > 0) *ctx.err << "note: " << nonconverged << " solves did not converge (counted as failures)\n";
  return kExitOk;
}

inline int cmd_table1(Context& ctx) {
  const json& c = ctx.config;
  detail::check_keys(c, {"rows", "r", "r_prime", "n", "budget", "seed"});
  std::vector<AnglePair> rows;
  if (c.contains("rows")) {
    if (!c.at("rows").is_array() || c.at("rows").empty()) throw ConfigError("field 'rows' must be a non-empty array");
    for (const auto& row : c.at("rows")) rows.push_back(detail::angles_from(row));
  } else {
    rows = published_table_rows();
  }
  const Index r = detail::positive_index(c, "r", 3);
  const Index rp = detail::positive_index(c, "r_prime", 7);
  const Index n = detail::positive_index(c, "n", 30);
  if (rp < r) throw ConfigError("field 'r_prime' must be at least r");
  if (n < r + rp) throw ConfigError("field 'n' must be at least r + r_prime");
  for (const auto& a : rows)
    if (a.rank() != r) throw ConfigError("field 'rows': every angle vector must have length r");
  OptimizeOptions opt;
  opt.budget = detail::field_or<int>(c, "budget", 10000);
  if (opt.budget < 1000) throw ConfigError("field 'budget' must be at least 1000");
  opt.seed = ctx.seed;

  const auto table = table1(rows, r, rp, n, opt);
  {
    auto os = detail::open_output(ctx.output("table1.csv"));
    write_table1_csv(os, table);
  }
  write_table1_csv(*ctx.out, table);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

namespace detail {

struct InlineFlags {
  std::string config_path;
  std::string out_dir = "mwnn-out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<double> theta_u, theta_v;
  std::optional<long long> n, r, r_prime, p, trials, budget, max_iters;
  std::vector<long long> p_grid;
  std::vector<std::string> methods;
  std::vector<double> lambda1, lambda2, gamma1, gamma2;
  std::string method, noise, dform;
  std::optional<double> delta, tail_scale;
};

inline void add_common(CLI::App* sub, InlineFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (overrides inline flags)");
  sub->add_option("--out-dir", f.out_dir, "Directory for output files and the run manifest");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--threads", f.threads, "Worker threads (default: machine parallelism)");
}

inline void add_angles(CLI::App* sub, InlineFlags& f) {
  sub->add_option("--theta-u", f.theta_u, "Column-space angles, comma-separated degrees")->delimiter(',');
  sub->add_option("--theta-v", f.theta_v, "Row-space angles, comma-separated degrees")->delimiter(',');
  sub->add_option("--r", f.r, "Rank r");
  sub->add_option("--r-prime", f.r_prime, "Prior dimension r'");
}

// Inline flags as a config object holding only what the user actually set.
inline json inline_config(const InlineFlags& f) {
  json j = json::object();
  if (!f.theta_u.empty()) j["theta_u"] = f.theta_u;
  if (!f.theta_v.empty()) j["theta_v"] = f.theta_v;
  if (f.n) j["n"] = *f.n;
  if (f.r) j["r"] = *f.r;
  if (f.r_prime) j["r_prime"] = *f.r_prime;
  if (f.p) j["p"] = *f.p;
  if (!f.p_grid.empty()) j["p_grid"] = f.p_grid;
  if (f.trials) j["trials"] = *f.trials;
  if (f.budget) j["budget"] = *f.budget;
  if (!f.methods.empty()) j["methods"] = f.methods;
  if (!f.method.empty()) j["method"] = f.method;
  if (!f.noise.empty()) j["noise"] = noise_to_json(f.noise);
  if (!f.dform.empty()) j["dform"] = f.dform;
  if (f.delta) j["delta"] = *f.delta;
  if (f.tail_scale) j["tail_scale"] = *f.tail_scale;
  if (f.max_iters) j["solver"] = {{"max_iters", *f.max_iters}};
  json w = json::object();
  if (!f.lambda1.empty()) w["lambda1"] = f.lambda1;
  if (!f.lambda2.empty()) w["lambda2"] = f.lambda2;
  if (!f.gamma1.empty()) w["gamma1"] = f.gamma1;
  if (!f.gamma2.empty()) w["gamma2"] = f.gamma2;
  if (!w.empty()) j["weights"] = w;
  if (f.seed) j["seed"] = *f.seed;
  if (f.threads) j["threads"] = *f.threads;
  return j;
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Multi-weight nuclear norm minimization: bounds, weights, recovery and experiments"};
  cli.set_version_flag("--version", MWNN_VERSION);
  cli.require_subcommand(1);
  detail::InlineFlags f;

  auto* bounds = cli.add_subcommand("bounds", "RIP bounds and error constants for given angles and weights");
  detail::add_common(bounds, f);
  detail::add_angles(bounds, f);
  bounds->add_option("--lambda1", f.lambda1, "Weights on the first r column prior directions")->delimiter(',');
  bounds->add_option("--lambda2", f.lambda2, "Weights on the remaining r'-r column prior directions")->delimiter(',');
  bounds->add_option("--gamma1", f.gamma1, "Weights on the first r row prior directions")->delimiter(',');
  bounds->add_option("--gamma2", f.gamma2, "Weights on the remaining r'-r row prior directions")->delimiter(',');
  bounds->add_option("--delta", f.delta, "RIP constant at which C0, C1 are evaluated (default 0)");
  bounds->add_option("--dform", f.dform, "operator_norm (default), printed_d1 or appendix_c");

  auto* optw = cli.add_subcommand("optimize-weights", "Weights maximizing the multi-weight RIP bound");
  detail::add_common(optw, f);
  detail::add_angles(optw, f);
  optw->add_option("--budget", f.budget, "Objective evaluations (default 10000)");

  auto* recover = cli.add_subcommand("recover", "One synthetic recovery");
  detail::add_common(recover, f);
  detail::add_angles(recover, f);
  recover->add_option("--n", f.n, "Matrix size");
  recover->add_option("--p", f.p, "Number of measurements (default n^2)");
  recover->add_option("--method", f.method, "standard, uniform or multi (default multi)");
  recover->add_option("--noise", f.noise, "none, rel:<fraction of ||A(X)||> or abs:<radius>");
  recover->add_option("--tail-scale", f.tail_scale, "Tail size relative to the smallest kept singular value");
  recover->add_option("--max-iters", f.max_iters, "Solver iteration cap");
  recover->add_option("--budget", f.budget, "Weight optimizer evaluations");

  auto* sw = cli.add_subcommand("sweep", "Monte-Carlo success-rate sweep over p");
  detail::add_common(sw, f);
  detail::add_angles(sw, f);
  sw->add_option("--n", f.n, "Matrix size");
  sw->add_option("--p-grid", f.p_grid, "Measurement counts, comma-separated")->delimiter(',');
  sw->add_option("--trials", f.trials, "Trials per p (default 50)");
  sw->add_option("--methods", f.methods, "Comma-separated subset of standard,uniform,multi")->delimiter(',');
  sw->add_option("--noise", f.noise, "none, rel:<fraction of ||A(X)||> or abs:<radius>");
  sw->add_option("--tail-scale", f.tail_scale, "Tail size relative to the smallest kept singular value");
  sw->add_option("--max-iters", f.max_iters, "Solver iteration cap");
  sw->add_option("--budget", f.budget, "Weight optimizer evaluations");

  auto* tab = cli.add_subcommand("table1", "RIP bound comparison table (published angle rows by default)");
  detail::add_common(tab, f);
  tab->add_option("--r", f.r, "Rank r (default 3)");
  tab->add_option("--r-prime", f.r_prime, "Prior dimension r' (default 7)");
  tab->add_option("--n", f.n, "Matrix size (default 30)");
  tab->add_option("--budget", f.budget, "Optimizer evaluations per row (default 10000)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.command = cli.get_subcommands().front()->get_name();
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();

  try {
    json cfg = detail::inline_config(f);
    if (!f.config_path.empty()) {
      std::ifstream is(f.config_path);
      if (!is) throw ConfigError("cannot read config file '" + f.config_path + "'");
      json file;
      try {
        file = json::parse(is, nullptr, true, true);
      } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + f.config_path + "' is not valid JSON: " + e.what());
      }
      if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (cfg.contains(it.key()) && cfg[it.key()] != it.value())
          err << "warning: config file overrides inline flag for '" << it.key() << "'\n";
        cfg[it.key()] = it.value();
      }
    }
    ctx.seed = detail::field_or<std::uint64_t>(cfg, "seed", 0);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    ctx.threads = detail::field_or<unsigned>(cfg, "threads", hw);
    if (ctx.threads < 1) throw ConfigError("field 'threads' must be positive");
    cfg["seed"] = ctx.seed;
    json work = cfg;
    work.erase("threads");  // not an input to any computation
    ctx.config = work;
    ctx.out_dir = f.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + f.out_dir + "'");

    int code = kExitOk;
    if (ctx.command == "bounds") code = cmd_bounds(ctx);
    else if (ctx.command == "optimize-weights") code = cmd_optimize_weights(ctx);
    else if (ctx.command == "recover") code = cmd_recover(ctx);
    else if (ctx.command == "sweep") code = cmd_sweep(ctx);
    else code = cmd_table1(ctx);

    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"command", ctx.command},
                  {"config", cfg},
                  {"seed", ctx.seed},
                  {"version", MWNN_VERSION},
                  {"started_at", detail::utc_timestamp(started)},
                  {"finished_at", detail::utc_timestamp(std::chrono::system_clock::now())},
                  {"wall_seconds", elapsed},
                  {"exit_code", code},
                  {"outputs", ctx.outputs}};
    detail::write_json(ctx.out_dir / "manifest.json", manifest);
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace mwnn::app
