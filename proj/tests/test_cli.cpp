#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hnoma/ess_solver.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hnoma_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string config(const std::string& name) { return std::string(HNOMA_CONFIG_DIR) + "/" + name; }

int run(const std::string& args) {
  const std::string cmd = std::string(HNOMA_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("hnoma_cli_cfg_" + name + ".json");
  std::ofstream(p) << body;
  return p;
}

void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++files;
  }
  EXPECT_EQ(files, static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{})));
}

}  // namespace

TEST(Cli, EssReportAndThresholds) {
  const auto out = scratch("ess");
  ASSERT_EQ(run("--config " + config("ess_c2.json") + " --out " + out.string() + " ess"), 0);
  const json r = json::parse(slurp(out / "ess.json"));
  EXPECT_TRUE(r["valid"].get<bool>());
  EXPECT_NEAR(r["state"][0].get<double>(), 0.036052393378, 1e-9);
  EXPECT_NEAR(r["state"][2].get<double>(), 0.549522709904, 1e-9);
  EXPECT_NEAR(r["tau"].get<double>(), 10.0 * std::log(1.0 / (1.0 - 0.549522709904)), 1e-6);
  EXPECT_EQ(r["meta"]["command"], "ess");
  EXPECT_TRUE(fs::exists(out / "ess.csv"));
  EXPECT_TRUE(fs::exists(out / "config.json"));
}

TEST(Cli, DecibelInputsConvertAtTheBoundary) {
  const auto out = scratch("ess_db");
  ASSERT_EQ(run("--config " + config("ess_db_units.json") + " --out " + out.string() + " ess"), 0);
  const json r = json::parse(slurp(out / "ess.json"));
  const auto p = hnoma::GameParams::snr_scaled(1.0, 2.0, std::pow(10.0, 0.6), 10.0);
  const auto s = hnoma::solve_snr_cost(p);
  EXPECT_NEAR(r["state"][0].get<double>(), s.state.x1(), 1e-12);
}

TEST(Cli, FixedCostNoTransmissionWarns) {
  const auto out = scratch("ess_c");
  ASSERT_EQ(run("--config " + config("ess_fixed_no_transmission.json") + " --out " + out.string() + " ess"), 0);
  const json r = json::parse(slurp(out / "ess.json"));
  EXPECT_EQ(r["regime"], "C");
  EXPECT_EQ(r["warnings"][0], "no transmission regime");
}

TEST(Cli, InvalidSolutionExitsTwo) {
  const auto cfg = write_config("collapse", R"({"R": 1, "c": 0.01, "gamma_linear": 4, "gbar_linear": 10})");
  EXPECT_EQ(run("--config " + cfg.string() + " --out " + scratch("collapse").string() + " ess"), 2);
}

TEST(Cli, ConfigErrorsExitOneWithoutOutput) {
  const std::vector<std::string> bad{
      R"({"R": 1, "c": 2, "gamma_linear": 4, "gbar_linear": 10, "extra": 1})",
      R"({"R": 1, "c": 2, "gamma_linear": 4, "gamma_db": 6, "gbar_linear": 10})",
      R"({"R": 1, "c": 2, "gbar_linear": 10})",
      R"({"R": 1, "c": 2, "C1": 2, "C2": 1, "gamma_linear": 4, "gbar_linear": 10})",
      R"({"R": 1, "c": 2, "gamma_linear": 4, "gbar_linear": 10, "replicator": {"steps": 3}})",
      R"({"R": 1, "c": 2, "gamma_linear": 4, "gbar_linear": 10)",
      R"({"R": -1, "c": 2, "gamma_linear": 4, "gbar_linear": 10})",
  };
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const auto cfg = write_config("bad" + std::to_string(i), bad[i]);
    const auto out = scratch("bad" + std::to_string(i));
    EXPECT_EQ(run("--config " + cfg.string() + " --out " + out.string() + " replicator"), 1) << bad[i];
    EXPECT_FALSE(fs::exists(out)) << bad[i];
  }
  EXPECT_EQ(run("--config /nonexistent.json ess"), 1);
  EXPECT_EQ(run("ess"), 1);
  EXPECT_EQ(run("--config " + config("ess_c2.json") + " --format xml ess"), 1);
}

TEST(Cli, SimulationNeedsASeed) {
  const auto cfg = write_config("noseed", R"({"R": 1, "c": 1, "gamma_linear": 4, "gbar_linear": 10,
                                              "simulate": {"blocks": 2, "slots": 10}})");
  const auto out = scratch("noseed");
  EXPECT_EQ(run("--config " + cfg.string() + " --out " + out.string() + " simulate"), 1);
  EXPECT_EQ(run("--config " + cfg.string() + " --seed 4 --out " + out.string() + " simulate"), 0);
  const json r = json::parse(slurp(out / "sim_stats.json"));
  EXPECT_EQ(r["meta"]["seed"], 4);
}

TEST(Cli, UnwritableOutputFailsBeforeWork) {
  EXPECT_EQ(run("--config " + config("simulate_ess.json") + " --out /proc/hnoma_no_such_dir simulate"), 1);
}

TEST(Cli, ReplicatorTrajectoryEndsAtTheEss) {
  const auto out = scratch("rep");
  ASSERT_EQ(run("--config " + config("replicator_c2.json") + " --out " + out.string() + " replicator"), 0);
  const std::string csv = slurp(out / "trajectory.csv");
  EXPECT_EQ(csv.rfind("# tool: hnoma", 0), 0u);
  EXPECT_NE(csv.find("iter,x1,x2,x3,payoff\n"), std::string::npos);
  const json r = json::parse(slurp(out / "replicator.json"));
  EXPECT_TRUE(r["converged"].get<bool>());
  EXPECT_LT(r["distance_to_ess"].get<double>(), 1e-6);
}

TEST(Cli, JsonFormatWritesRecords) {
  const auto out = scratch("rep_json");
  ASSERT_EQ(run("--config " + config("replicator_c2.json") + " --format json --out " + out.string() +
                " replicator"),
            0);
  const json t = json::parse(slurp(out / "trajectory.json"));
  EXPECT_EQ(t["columns"][0], "iter");
  EXPECT_FALSE(t["rows"].empty());
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, WorkersDoNotChangeAnyOutputByte) {
  for (const auto& [cfg, cmd] : std::vector<std::pair<std::string, std::string>>{
           {"simulate_trace.json", "simulate"}, {"sweep_c.json", "sweep"}, {"su_u_constant.json", "adaptive"}}) {
    const auto a = scratch("w1_" + cmd);
    const auto b = scratch("w4_" + cmd);
    ASSERT_EQ(run("--config " + config(cfg) + " --workers 1 --out " + a.string() + " " + cmd), 0);
    ASSERT_EQ(run("--config " + config(cfg) + " --workers 4 --out " + b.string() + " " + cmd), 0);
    expect_same_tree(a, b);
  }
}

TEST(Cli, StoredConfigReproducesTheRun) {
  const auto a = scratch("stored_a");
  const auto b = scratch("stored_b");
  ASSERT_EQ(run("--config " + config("simulate_ess.json") + " --seed 9 --out " + a.string() + " simulate"), 0);
  ASSERT_EQ(run("--config " + (a / "config.json").string() + " --out " + b.string() + " simulate"), 0);
  expect_same_tree(a, b);
}

TEST(Cli, AdaptiveProtocolArgument) {
  const auto out = scratch("adaptive");
  ASSERT_EQ(run("--config " + config("su_bs_constant.json") + " --out " + out.string() + " adaptive su-u"), 0);
  const json r = json::parse(slurp(out / "adaptive_summary.json"));
  EXPECT_EQ(r["protocol"], "su-u");
  EXPECT_TRUE(fs::exists(out / "users.json"));
  const std::string csv = slurp(out / "adaptive_trajectory.csv");
  EXPECT_NE(csv.find("block,x1,x2,x3,c,est_payoff1,est_payoff2\n"), std::string::npos);
  EXPECT_EQ(run("--config " + config("su_bs_constant.json") + " --out " + out.string() + " adaptive su-x"), 1);
}

TEST(Cli, SweepSummaryHasTheCrossover) {
  const auto out = scratch("sweep");
  ASSERT_EQ(run("--config " + config("sweep_c.json") + " --out " + out.string() + " sweep"), 0);
  const json r = json::parse(slurp(out / "sweep_summary.json"));
  ASSERT_EQ(r["crossovers"].size(), 1u);
  EXPECT_NEAR(r["crossovers"][0]["at"].get<double>(), 0.4, 0.1);
  EXPECT_TRUE(fs::exists(out / "sweep_c.csv"));
}

TEST(Cli, ThroughputTable) {
  const auto out = scratch("throughput");
  ASSERT_EQ(run("--config " + config("throughput.json") + " --out " + out.string() + " throughput"), 0);
  const json r = json::parse(slurp(out / "throughput_summary.json"));
  EXPECT_DOUBLE_EQ(r["states"][0]["eta_hnoma"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(r["efficiency"]["oma"].get<double>(), 0.3);
}
