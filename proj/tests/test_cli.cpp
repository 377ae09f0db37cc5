#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "latentdlm/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = LATENTDLM_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latentdlm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, SimulateWritesDatasetAndTruth) {
  const auto dir = scratch("sim");
  ASSERT_EQ(run("simulate --n 50 --tau 5 --out " + (dir / "d.csv").string()), 0);
  const auto t = latentdlm::read_csv((dir / "d.csv").string());
  EXPECT_EQ(t.rows.size(), 55u);
  const auto truth = latentdlm::truth_from_json(latentdlm::read_json((dir / "d.csv.truth.json").string()));
  EXPECT_EQ(truth.n, 50u);
  EXPECT_EQ(truth.tau, 5u);
}

TEST(Cli, BinaryPositiveFraction) {
  const auto dir = scratch("simbin");
  ASSERT_EQ(run("simulate --kind binary --n 250 --tau 5 --seed 3 --out " + (dir / "b.csv").string()), 0);
  const auto y = latentdlm::read_csv((dir / "b.csv").string()).numeric("y");
  double pos = 0.0;
  for (std::size_t i = 5; i < y.size(); ++i) pos += y[i];
  EXPECT_GE(pos / 250.0, 0.03);
  EXPECT_LE(pos / 250.0, 0.20);
}

TEST(Cli, FitDiagnoseLagResponse) {
  const auto dir = scratch("fit");
  const auto data = (dir / "d.csv").string();
  ASSERT_EQ(run("simulate --n 80 --tau 5 --out " + data), 0);
  const auto out = (dir / "out").string();
  ASSERT_EQ(run("fit " + data + " --tau 5 --knots 1 --iterations 240 --burn-in 20 --thin 2 --chains 2 --out " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "chain_2.csv"));
  ASSERT_EQ(run("diagnose " + out + "/chain_1.csv " + out + "/chain_2.csv --out " + (dir / "r.csv").string()), 0);
  const auto report = latentdlm::read_csv((dir / "r.csv").string());
  EXPECT_EQ(report.header.size(), 5u);
  EXPECT_GT(report.rows.size(), 0u);
  ASSERT_EQ(run("lag-response " + out + " --out " + (dir / "lag.csv").string()), 0);
  EXPECT_EQ(latentdlm::read_csv((dir / "lag.csv").string()).rows.size(), 18u);
}

TEST(Cli, ConfigFileAndSetOverride) {
  const auto dir = scratch("cfg");
  const auto data = (dir / "d.csv").string();
  ASSERT_EQ(run("simulate --kind binary --n 60 --tau 4 --out " + data), 0);
  std::ofstream(dir / "run.cfg") << "model = bqr\ntau = 4\nknots = 0\niterations = 20\nchains = 1\n";
  ASSERT_EQ(run("fit " + data + " --config " + (dir / "run.cfg").string() + " --set q=0.5 --out " +
                (dir / "out").string()),
            0);
  const auto manifest = slurp(dir / "out" / "manifest.txt");
  EXPECT_NE(manifest.find("model = bqr"), std::string::npos);
  EXPECT_NE(manifest.find("q = 0.5"), std::string::npos);
}

TEST(Cli, ByteIdenticalSerialAndParallel) {
  const auto dir = scratch("det");
  ASSERT_EQ(run("simulate --n 60 --tau 4 --seed 7 --out " + (dir / "a.csv").string()), 0);
  ASSERT_EQ(run("simulate --n 60 --tau 4 --seed 7 --out " + (dir / "b.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  const std::string common = " --tau 4 --knots 1 --iterations 40 --thin 1 --chains 3 --seed 9 ";
  const auto data = (dir / "a.csv").string();
  ASSERT_EQ(run("fit " + data + common + "--threads 1 --out " + (dir / "s").string()), 0);
  ASSERT_EQ(run("fit " + data + common + "--threads 3 --out " + (dir / "p").string()), 0);
  for (const char* f : {"manifest.txt", "design.json", "chain_1.csv", "chain_2.csv", "chain_3.csv", "summary.csv",
                        "summary.json", "inclusion.csv", "lag_response.csv"})
    EXPECT_EQ(slurp(dir / "s" / f), slurp(dir / "p" / f)) << f;
}

TEST(Cli, ValidationExitCodes) {
  const auto dir = scratch("bad");
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("simulate --kind poisson --out " + (dir / "x.csv").string()), 2);
  EXPECT_EQ(run("fit " + (dir / "missing.csv").string()), 2);
  EXPECT_EQ(run("simulate --n 30 --tau 3 --out " + (dir / "d.csv").string()), 0);
  EXPECT_EQ(run("fit " + (dir / "d.csv").string() + " --tau 3 --set nonsense=1"), 2);
  EXPECT_EQ(run("fit " + (dir / "d.csv").string() + " --tau 3 --model bqr --out " + (dir / "o").string()), 2);
  EXPECT_EQ(run("diagnose " + (dir / "d.csv").string()), 2);
}

TEST(Cli, DichotomizedCounts) {
  const auto dir = scratch("dich");
  const auto data = (dir / "d.csv").string();
  ASSERT_EQ(run("simulate --n 60 --tau 4 --out " + data), 0);
  EXPECT_EQ(run("fit " + data + " --model bqr --dichotomize 20 --tau 4 --knots 0 --iterations 10 --chains 1 --out " +
                (dir / "o").string()),
            0);
}
