#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mwnn/app.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mwnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = mwnn::app::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mwnn-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub = "out") const { return (dir_ / sub).string(); }

  static json read_json(const fs::path& p) {
    std::ifstream is(p);
    return json::parse(is);
  }
  static std::string read_text(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
  }
  fs::path write_config(const json& j) const {
    const auto p = dir_ / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, BoundsStandardCaseForTableRow) {
  const auto r = run({"bounds", "--theta-u", "2.26,2.98,3.10", "--theta-v", "1.91,2.87,3.40", "--r-prime", "7",
                      "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "bounds.json");
  EXPECT_NEAR(j["delta_multi"].get<double>(), 0.32, 0.005);
  EXPECT_NE(r.out.find("delta_multi"), std::string::npos);
}

TEST_F(Cli, BoundsZeroAnglesUnitWeights) {
  const auto r = run({"bounds", "--theta-u", "0,0", "--theta-v", "0,0", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "bounds.json");
  EXPECT_DOUBLE_EQ(j["alpha3"].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(j["alpha4"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["alpha1"].get<double>(), 2.0);
}

TEST_F(Cli, BoundsWithWeights) {
  const auto r = run({"bounds", "--theta-u", "10,15,19", "--theta-v", "8,10,15", "--r-prime", "4", "--lambda1",
                      "0.5,0.4,0.3", "--lambda2", "1", "--gamma1", "0.6,0.5,0.4", "--gamma2", "1", "--delta", "0.1",
                      "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "bounds.json");
  EXPECT_FALSE(j.contains("alpha1"));  // weights are not constant per side
  EXPECT_DOUBLE_EQ(j["delta_eval"].get<double>(), 0.1);
  EXPECT_TRUE(j["C0"].is_number());
}

TEST_F(Cli, NegativeAngleIsUsageError) {
  const auto r = run({"bounds", "--theta-u=-5,1,2", "--theta-v", "1,2,3", "--out-dir", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("theta_u"), std::string::npos);
  EXPECT_FALSE(fs::exists(fs::path(out()) / "manifest.json"));
}

TEST_F(Cli, MalformedInputsNameTheField) {
  EXPECT_NE(run({"bounds", "--theta-u", "1,2", "--theta-v", "1", "--out-dir", out()}).err.find("theta_v"),
            std::string::npos);
  EXPECT_NE(run({"recover", "--method", "best", "--out-dir", out()}).err.find("method"), std::string::npos);
  EXPECT_NE(run({"recover", "--noise", "loud", "--out-dir", out()}).err.find("noise"), std::string::npos);
  EXPECT_NE(run({"sweep", "--p-grid", "0,20", "--out-dir", out()}).err.find("p_grid"), std::string::npos);
  EXPECT_NE(run({"sweep", "--trials", "0", "--out-dir", out()}).err.find("trials"), std::string::npos);
  EXPECT_NE(run({"recover", "--n", "9", "--out-dir", out()}).err.find("'n'"), std::string::npos);
  const auto bad = write_config({{"theta_u", {1.0}}, {"theta_v", {1.0}}, {"colour", "red"}});
  const auto r = run({"bounds", "--config", bad.string(), "--out-dir", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"bounds", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"bounds", "--help"}).code, 0);
}

TEST_F(Cli, ConfigOverridesInlineFlagsWithWarning) {
  const auto cfg = write_config({{"theta_u", {0.0, 0.0}}, {"theta_v", {0.0, 0.0}}});
  const auto r = run({"bounds", "--theta-u", "40,50", "--theta-v", "40,50", "--config", cfg.string(), "--out-dir",
                      out()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_NE(r.err.find("theta_u"), std::string::npos);
  const json m = read_json(fs::path(out()) / "manifest.json");
  EXPECT_EQ(m["config"]["theta_u"], json::array({0.0, 0.0}));
}

TEST_F(Cli, ManifestContents) {
  const auto r = run({"bounds", "--theta-u", "5", "--theta-v", "6", "--seed", "42", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = read_json(fs::path(out()) / "manifest.json");
  EXPECT_EQ(m["command"], "bounds");
  EXPECT_EQ(m["seed"], 42);
  EXPECT_EQ(m["config"]["seed"], 42);
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("started_at"));
  EXPECT_TRUE(m.contains("finished_at"));
  EXPECT_TRUE(m.contains("wall_seconds"));
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_TRUE(fs::exists(m["outputs"][0].get<std::string>()));
}

TEST_F(Cli, OptimizeWeights) {
  const auto r = run({"optimize-weights", "--theta-u", "23.1,24.54,27.56", "--theta-v", "20.95,20.06,34.03",
                      "--r-prime", "7", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "weights.json");
  EXPECT_NEAR(j["multi"]["report"]["delta_multi"].get<double>(), 0.39, 0.02);
  EXPECT_EQ(j["multi"]["weights"]["lambda1"].size(), 3u);
  EXPECT_EQ(run({"optimize-weights", "--theta-u", "1", "--theta-v", "1", "--budget", "10", "--out-dir", out()}).code,
            2);
}

TEST_F(Cli, RecoverFullSampling) {
  const auto r = run({"recover", "--n", "10", "--r", "2", "--r-prime", "4", "--theta-u", "5,10", "--theta-v", "4,8",
                      "--method", "standard", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "recovery.json");
  EXPECT_LE(j["nre"].get<double>(), 1e-6);
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST_F(Cli, RecoverDefaults) {
  const auto r = run({"recover", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(fs::path(out()) / "recovery.json");
  EXPECT_EQ(j["method"], "multi");
  EXPECT_LE(j["nre"].get<double>(), 1e-6);
}

TEST_F(Cli, RecoverNonConvergenceExitsOne) {
  const auto r = run({"recover", "--n", "10", "--r", "2", "--r-prime", "4", "--theta-u", "5,10", "--theta-v", "4,8",
                      "--p", "40", "--max-iters", "2", "--out-dir", out()});
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_TRUE(fs::exists(fs::path(out()) / "manifest.json"));
}

TEST_F(Cli, SweepShapeAndDeterminism) {
  const std::vector<std::string> args{"sweep", "--n", "8", "--r", "1", "--r-prime", "2", "--theta-u", "10",
                                      "--theta-v", "15", "--p-grid", "20,30", "--trials", "1", "--budget", "1000",
                                      "--noise", "rel:0.05", "--seed", "3"};
  auto a = args;
  a.insert(a.end(), {"--out-dir", out("a"), "--threads", "1"});
  auto b = args;
  b.insert(b.end(), {"--out-dir", out("b"), "--threads", "2"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  const auto ca = read_text(fs::path(out("a")) / "sweep.csv");
  EXPECT_EQ(ca, read_text(fs::path(out("b")) / "sweep.csv"));
  std::istringstream is(ca);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 1 + 3 * 2);
}

TEST_F(Cli, SweepFromConfigFile) {
  const auto cfg = write_config({{"n", 8},
                                 {"r", 1},
                                 {"r_prime", 2},
                                 {"theta_u", {10.0}},
                                 {"theta_v", {15.0}},
                                 {"p_grid", {64}},
                                 {"trials", 2},
                                 {"methods", {"standard", "multi"}},
                                 {"budget", 1000},
                                 {"noise", {{"mode", "none"}, {"value", 0.0}}}});
  const auto r = run({"sweep", "--config", cfg.string(), "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = read_text(fs::path(out()) / "sweep.csv");
  EXPECT_NE(text.find("standard,64,2,2,1,"), std::string::npos) << text;
  EXPECT_NE(text.find("multi,64,2,2,1,"), std::string::npos) << text;
}

TEST_F(Cli, Table1Defaults) {
  const auto r = run({"table1", "--out-dir", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(read_text(fs::path(out()) / "table1.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "theta_u_deg,theta_v_deg,delta_standard,delta_uniform,delta_multi,delta_uniform_thm1,"
                  "delta_standard_thm1");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u);
    EXPECT_NEAR(std::stod(cells[2]), 0.32, 0.02);
  }
  EXPECT_EQ(rows, 4);
}

TEST_F(Cli, FailsFastOnMalformedInput) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run({"sweep", "--theta-u", "1,2,3", "--theta-v", "1,2,3", "--p-grid", "100", "--trials", "0",
                      "--out-dir", out()});
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.code, 2);
  EXPECT_LT(ms, 100.0);
}
