#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "pdeloop/pdeloop.hpp"

using namespace pdeloop;
namespace fs = std::filesystem;

namespace {
const std::string exe = PDELOOPGAIN_EXE;
const std::string configs = PDELOOP_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pdeloop_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const int rc = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string write_config(const fs::path& dir, const std::string& name, const std::string& body) {
  const auto p = (dir / name).string();
  write_file(p, body);
  return p;
}

const char* kLoopBIncompatible = R"({
  "model": {"family": "loop_b", "params": {"diffusion": 1.0, "transport_speed": 1.0, "robin_q": 0.0, "reaction": -1.0,
    "boundary_gain": 0.5, "kernel": {"kind": "expr", "name": "zero"}}},
  "initial": {"u1": {"kind": "robin_mode", "mode": 1}, "u2": {"kind": "constant", "value": 1.0}}
})";
}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(run_cli("certify --config " + configs + "/chemical_certify.json --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "certificate.json"));
  EXPECT_EQ(run_cli("certify --config " + write_config(dir, "empty.json", "{}")), 1);
  EXPECT_EQ(run_cli("certify --config " + write_config(dir, "broken.json", "{\"model\": ")), 1);
  EXPECT_EQ(run_cli("certify --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("frobnicate --config " + configs + "/chemical_certify.json"), 1);
  const auto failing = write_config(dir, "fail.json", R"({
    "model": {"family": "loop_a", "params": {"K": 0.0, "r": 1.0, "a_tilde": 20.0, "b_tilde": 1.0}}})");
  EXPECT_EQ(run_cli("certify --config " + failing + " --out " + dir.string()), 2);
  const auto cert = json::parse(read_file((dir / "certificate.json").string()));
  EXPECT_FALSE(cert.dump().empty());
}

TEST(Cli, Diagnostics) {
  const auto incompatible = validate(json::parse(kLoopBIncompatible), "simulate");
  ASSERT_FALSE(incompatible.empty());
  EXPECT_NE(incompatible[0].find("u2_0(0) = k*u1_0(1)"), std::string::npos) << incompatible[0];

  const auto bad_b = validate(
      json::parse(R"({"model": {"family": "loop_a", "params": {"K": 1, "r": 1, "a_tilde": 1, "b_tilde": -1}}})"),
      "certify");
  ASSERT_FALSE(bad_b.empty());
  EXPECT_NE(bad_b[0].find("b_tilde > 0"), std::string::npos);

  const auto ok = json::parse(read_file(configs + "/loop_a_verify.json"));
  EXPECT_TRUE(validate(ok, "verify").empty());
  EXPECT_FALSE(validate(ok, "certify").empty());
}

TEST(Cli, GainCurveMinimumRow) {
  const auto dir = scratch("gain");
  ASSERT_EQ(run_cli("gain-curve --config " + configs + "/gain_curve.json --out " + dir.string()), 0);
  const auto rows = detail::parse_csv(read_file((dir / "gain_curve.csv").string()), "s,g");
  ASSERT_EQ(rows.size(), 201u);
  std::size_t best = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i][1] < rows[best][1]) best = i;
  EXPECT_EQ(rows[best][0], 0.0);
  EXPECT_NEAR(rows[best][1], 1.0, 1e-6);
}

TEST(Cli, TrajectoryRoundTrip) {
  const auto dir = scratch("traj");
  ASSERT_EQ(run_cli("simulate --config " + configs + "/loop_a_simulate.json --full-profiles --out " + dir.string()), 0);
  const auto loaded = load_trajectory_csv(read_file((dir / "trajectory.csv").string()),
                                          read_file((dir / "profiles.csv").string()));
  const auto cfg = parse_config(json::parse(read_file(configs + "/loop_a_simulate.json"))).config;
  const auto direct = simulate_config(cfg);
  ASSERT_EQ(loaded.size(), direct.size());
  for (std::size_t j = 0; j < direct.size(); ++j) {
    EXPECT_EQ(loaded.t[j], direct.t[j]);
    EXPECT_EQ(loaded.sup_u1[j], direct.sup_u1[j]);
    EXPECT_EQ(loaded.sup_u2[j], direct.sup_u2[j]);
  }
  ASSERT_EQ(loaded.u1.size(), direct.u1.size());
  EXPECT_EQ(loaded.u1.back(), direct.u1.back());
}

TEST(Cli, ByteDeterminism) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(run_cli("simulate --config " + configs + "/loop_a_simulate.json --out " + dir.string()), 0);
    ASSERT_EQ(run_cli("certify --config " + configs + "/loop_b_certify.json --out " + dir.string()), 0);
  }
  for (const char* f : {"trajectory.csv", "certificate.json", "eigensystem.csv"})
    EXPECT_EQ(read_file((a / f).string()), read_file((b / f).string())) << f;
}
