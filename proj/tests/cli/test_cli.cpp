#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "pam/green.hpp"
#include "pam/potentials.hpp"
#include "pam/snapshot.hpp"
#include "pam/solver.hpp"
#include "pam/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("pam_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  static int run_pam(std::vector<std::string> args) {
    args.insert(args.begin(), "pam");
    return pam::cli::run(args);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(cell);
      rows.push_back(row);
    }
    return rows;
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, SolveWritesManifestSnapshotsAndTable) {
  ASSERT_EQ(run_pam({"solve", "--d", "1", "--t", "1", "--out", dir("s")}), 0);
  for (const char* f : {"manifest.json", "config.json", "mass.csv", "xi.snap", "u_000.snap"})
    EXPECT_TRUE(fs::exists(root_ / "s" / f)) << f;
  const json m = json::parse(slurp(root_ / "s" / "manifest.json"));
  EXPECT_EQ(m["subcommand"], "solve");
  EXPECT_EQ(m["tool"], "pam");
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(csv(root_ / "s" / "mass.csv")[0], (std::vector<std::string>{"t", "U", "logU", "log_u_center"}));
}

TEST_F(Cli, SameSeedGivesByteIdenticalTables) {
  ASSERT_EQ(run_pam({"moments", "--n", "10", "--bootstrap", "20", "--seed", "4", "--out", dir("a")}), 0);
  ASSERT_EQ(run_pam({"moments", "--n", "10", "--bootstrap", "20", "--seed", "4", "--out", dir("b")}), 0);
  EXPECT_EQ(slurp(root_ / "a" / "moments.csv"), slurp(root_ / "b" / "moments.csv"));
  const json ma = json::parse(slurp(root_ / "a" / "manifest.json"));
  const json mb = json::parse(slurp(root_ / "b" / "manifest.json"));
  EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
}

TEST_F(Cli, ThreadCountDoesNotChangeResults) {
  ASSERT_EQ(run_pam({"moments", "--n", "12", "--bootstrap", "20", "--threads", "1", "--out", dir("a")}), 0);
  ASSERT_EQ(run_pam({"moments", "--n", "12", "--bootstrap", "20", "--threads", "3", "--out", dir("b")}), 0);
  EXPECT_EQ(slurp(root_ / "a" / "moments.csv"), slurp(root_ / "b" / "moments.csv"));
}

TEST_F(Cli, InvalidGammaIsRejectedByName) {
  ::testing::internal::CaptureStderr();
  const int rc = run_pam({"solve", "--potential", R"({"family":"bounded_tail","params":{"D":1,"gamma":1.5}})",
                      "--out", dir("bad")});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, pam::cli::kConfigError);
  EXPECT_NE(err.find("gamma"), std::string::npos) << err;
}

TEST_F(Cli, UnknownConfigKeysAreRejected) {
  std::ofstream(root_ / "c.json") << R"({"d": 1, "wavelength": 3})";
  ::testing::internal::CaptureStderr();
  const int rc = run_pam({"solve", "--config", (root_ / "c.json").string(), "--out", dir("x")});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, pam::cli::kConfigError);
  EXPECT_NE(err.find("wavelength"), std::string::npos);
}

TEST_F(Cli, ConfigFileIsMergedUnderCommandLine) {
  std::ofstream(root_ / "c.json") << R"({"t": [1, 2], "n": 5, "bootstrap": 0, "seed": 3})";
  ASSERT_EQ(run_pam({"moments", "--config", (root_ / "c.json").string(), "--n", "6", "--out", dir("m")}), 0);
  const json cfg = json::parse(slurp(root_ / "m" / "config.json"));
  EXPECT_EQ(cfg["n"], 6);
  EXPECT_EQ(cfg["seed"], 3);
  EXPECT_EQ(cfg["t"].size(), 2u);
}

TEST_F(Cli, NumericFailureExitCode) {
  ::testing::internal::CaptureStderr();
  const int rc = run_pam({"solve", "--stepper", "explicit", "--dt", "0.9", "--out", dir("x")});
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, pam::cli::kNumericError);
}

TEST_F(Cli, LowEffectiveSampleSizeIsInconclusive) {
  ::testing::internal::CaptureStderr();
  const int rc = run_pam({"check", "annealed", "--n", "3", "--t", "2,4", "--chi", "1.5", "--out", dir("x")});
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, pam::cli::kInconclusive);
  EXPECT_TRUE(fs::exists(root_ / "x" / "annealed.csv"));
}

TEST_F(Cli, MuMatchesModuleCall) {
  ASSERT_EQ(run_pam({"mu", "--d", "1", "--r", "0.5,2", "--out", dir("mu")}), 0);
  const auto rows = csv(root_ / "mu" / "mu.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(std::stod(rows[1][1]), pam::mu_of_r(0.5, 1).mu);
  EXPECT_EQ(std::stod(rows[2][1]), pam::mu_of_r(2.0, 1).mu);
}

TEST_F(Cli, EigenOnSavedFieldMatchesModuleCall) {
  pam::Field V = pam::sample_field(pam::PotentialSpec::double_exponential(1.0), pam::Box(2, 4), 3);
  pam::save_field(V, root_ / "v.snap");
  ASSERT_EQ(run_pam({"eigen", "--field", (root_ / "v.snap").string(), "--kappa", "0.5", "--out", dir("e")}), 0);
  const json e = json::parse(slurp(root_ / "e" / "eigen.json"));
  EXPECT_EQ(e["lambda"].get<double>(), pam::principal_eigen(V, 0.5).lambda);
}

TEST_F(Cli, SolveMatchesModuleCall) {
  ASSERT_EQ(run_pam({"solve", "--t", "1.5", "--R", "6", "--seed", "7", "--out", dir("s")}), 0);
  const auto spec = pam::PotentialSpec::double_exponential(1.0);
  const pam::Box box(1, 6);
  const pam::Field xi = pam::sample_field(spec, box, 7);
  pam::Field u0(box);
  u0[box.center_index()] = 1.0;
  pam::EvolutionConfig cfg;
  cfg.t_end = 1.5;
  const auto m = pam::total_mass(pam::evolve(xi, u0, cfg).snapshots.back());
  const auto rows = csv(root_ / "s" / "mass.csv");
  EXPECT_EQ(std::stod(rows.back()[2]), m.log_U);
}

TEST_F(Cli, ReportConcatenatesRunsWithProvenance) {
  ASSERT_EQ(run_pam({"moments", "--n", "5", "--bootstrap", "0", "--t", "1,2", "--seed", "1", "--out", dir("a")}), 0);
  ASSERT_EQ(run_pam({"moments", "--n", "5", "--bootstrap", "0", "--t", "1,2", "--seed", "2", "--out", dir("b")}), 0);
  ASSERT_EQ(run_pam({"report", "--inputs", dir("a") + "," + dir("b"), "--out", dir("r")}), 0);
  const auto rows = csv(root_ / "r" / "moments.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 4u);
  EXPECT_EQ(rows[0][0], "run");
  EXPECT_EQ(rows[0][1], "run_seed");
  EXPECT_EQ(rows[0][2], "run_config_hash");
  EXPECT_EQ(rows[1][1], "1");
  EXPECT_EQ(rows.back()[1], "2");
  EXPECT_NE(rows[1][2], rows.back()[2]);
}

TEST_F(Cli, ReportOfNothingIsHeaderOnly) {
  ASSERT_EQ(run_pam({"report", "--kind", "moments", "--out", dir("r")}), 0);
  const auto rows = csv(root_ / "r" / "moments.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].size(), 3u + 8u);
}

TEST_F(Cli, ReportRejectsMixedSubcommands) {
  ASSERT_EQ(run_pam({"mu", "--out", dir("a")}), 0);
  ASSERT_EQ(run_pam({"scaling", "--out", dir("b")}), 0);
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_pam({"report", "--inputs", dir("a") + "," + dir("b"), "--out", dir("r")}), pam::cli::kConfigError);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(Cli, ReportListsDivergentColumns) {
  ASSERT_EQ(run_pam({"mu", "--out", dir("a")}), 0);
  ASSERT_EQ(run_pam({"mu", "--out", dir("b")}), 0);
  std::ofstream(root_ / "b" / "mu.csv") << "r,mu,flavour\n1,0,x\n";
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_pam({"report", "--inputs", dir("a") + "," + dir("b"), "--out", dir("r")}), pam::cli::kConfigError);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("flavour"), std::string::npos);
  EXPECT_NE(err.find("residual"), std::string::npos);
}

TEST_F(Cli, IslandsReadASolveRun) {
  ASSERT_EQ(run_pam({"solve", "--t", "4", "--R", "40", "--potential",
                 R"({"family":"double_exponential","params":{"rho":8}})", "--out", dir("s")}),
            0);
  ASSERT_EQ(run_pam({"islands", "--run", dir("s"), "--delta_min", "1", "--shapes_R", "8", "--out", dir("i")}), 0);
  const json rep = json::parse(slurp(root_ / "i" / "islands.json"));
  EXPECT_GE(rep["count"].get<int>(), 1);
  EXPECT_LE(rep["captured_fraction"].get<double>(), 1.0 + 1e-12);
}

TEST_F(Cli, ScalingAndVariationalRun) {
  ASSERT_EQ(run_pam({"scaling", "--eta", "power:0", "--d", "1", "--t", "1e6", "--out", dir("sc")}), 0);
  const auto rows = csv(root_ / "sc" / "scaling.csv");
  EXPECT_NEAR(std::stod(rows[1][1]), 100.0, 1e-6);
  ASSERT_EQ(run_pam({"variational", "--which", "chitilde", "--rho", "inf", "--R", "3", "--out", dir("v")}), 0);
  const json v = json::parse(slurp(root_ / "v" / "variational.json"));
  EXPECT_EQ(v["value"].get<double>(), 2.0);
}

TEST_F(Cli, CatalyticWritesBothRoutesAndPrediction) {
  ASSERT_EQ(run_pam({"catalytic", "--t", "0.5,1", "--n", "20", "--paths", "100", "--out", dir("c")}), 0);
  const auto rows = csv(root_ / "c" / "catalytic.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "route", "estimate", "se"}));
  EXPECT_EQ(rows.size(), 5u);
  const json p = json::parse(slurp(root_ / "c" / "prediction.json"));
  EXPECT_NEAR(p["lambda_star"].get<double>(), std::sqrt(5.0) - 2.0, 1e-9);
  EXPECT_TRUE(p["kappa_limits"].contains("regime_error"));
}

TEST_F(Cli, MissingSubcommandIsAConfigError) {
  ::testing::internal::CaptureStderr();
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run_pam({}), pam::cli::kConfigError);
  EXPECT_EQ(run_pam({"frobnicate"}), pam::cli::kConfigError);
  ::testing::internal::GetCapturedStdout();
  ::testing::internal::GetCapturedStderr();
}

TEST(Fnv, KnownVector) { EXPECT_EQ(pam::cli::fnv1a("a"), 0xaf63dc4c8601ec8cULL); }
