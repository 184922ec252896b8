#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "pidon/io.hpp"

using namespace pidon;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pidon_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(PIDON_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Cli, ExactDecayRollout) {
  const auto dir = scratch("decay");
  ASSERT_EQ(cli("rollout --checkpoint exact:decay --ic 1 --T 20 --dt 1 --out " + dir.string()), 0);
  const auto rows = csv_rows(dir / "rollout.csv");
  ASSERT_EQ(rows.size(), 201u);
  for (const auto& r : rows) EXPECT_NEAR(r[1], std::exp(-r[0]), 1e-12);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, ExactReferenceEvaluatesToZero) {
  const auto dir = scratch("eval");
  ASSERT_EQ(cli("eval --checkpoint exact:reference --problem pendulum --testset random:3:1 --T 2,4 --out " +
                dir.string()),
            0);
  const auto rows = csv_rows(dir / "error_vs_horizon.csv");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_EQ(r[1], 0.0);
}

TEST(Cli, TrainTwiceGivesIdenticalCheckpoints) {
  const auto dir = scratch("train");
  const json cfg = {{"problem", "pendulum"},
                    {"N", 8},
                    {"Q", 6},
                    {"network", {{"branch", {{"depth", 1}, {"width", 6}}}, {"trunk", {{"depth", 1}, {"width", 6}}}, {"q", 4}}},
                    {"train", {{"iters", 20}, {"batch_size", 2}, {"log_every", 5}}}};
  write_file_atomic(dir / "config.json", cfg.dump());
  for (const char* run : {"a", "b"})
    ASSERT_EQ(cli("train --config " + (dir / "config.json").string() + " --seed 3 --out " + (dir / run).string()), 0);
  for (const char* f : {"model.ckpt.json", "model.ckpt.bin", "train_log.csv"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  ASSERT_EQ(cli("rollout --checkpoint " + (dir / "a" / "model.ckpt.json").string() + " --ic 0.5,0.5 --T 3 --out " +
                (dir / "roll").string()),
            0);
  EXPECT_EQ(csv_rows(dir / "roll" / "rollout.csv").size(), 31u);
}

TEST(Cli, FailuresExitNonzero) {
  const auto dir = scratch("fail");
  EXPECT_NE(cli("no-such-command"), 0);
  EXPECT_NE(cli(""), 0);
  EXPECT_EQ(cli("rollout --checkpoint " + (dir / "missing.ckpt.json").string() + " --ic 1 --T 1 --out " +
                (dir / "never").string()),
            2);
  EXPECT_FALSE(fs::exists(dir / "never"));
  write_file_atomic(dir / "bad.json", "{\"problem\": \"heat\"}");
  EXPECT_NE(cli("train --config " + (dir / "bad.json").string()), 0);
}
