/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "georoute/artifacts.hpp"
#include "georoute/cli.hpp"

namespace georoute {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("georoute_cli_" + std::to_string(std::random_device{}()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    config_ = (dir_ / "tiny.json").string();
    write_text_file(config_, R"({
  "total_depth": 8, "num_tokens": 8, "raw_width": 6, "width": 8, "num_tasks": 2,
  "planted_layers": [5, 7], "m": 4, "single_layer": 7, "backbone_blocks": 1,
  "backbone_hidden": 8, "steps": 10, "batch_size": 2, "eval_batches": 2
})");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::string config_;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--seed", "abc"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", out("missing.json")}).code, kExitUsage);
  CliRun r = run({"frobnicate"});
  EXPECT_NE(r.err.find("Subcommands"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  CliRun r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("route-dump"), std::string::npos);
  EXPECT_EQ(run({"train", "--help"}).code, kExitOk);
}

TEST_F(CliTest, ConfigErrorExitsTwoAndNamesKey) {
  write_text_file(out("bad.json"), R"({"k": 5, "m": 4})");
  CliRun r = run({"train", "--config", out("bad.json"), "--out", out("o")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("'k'"), std::string::npos);
}

TEST_F(CliTest, GradcheckPasses) {
  CliRun r = run({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("gradient suite passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, TrainIsReproducibleForFixedSeed) {
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "7", "--out", out("a")}).code, kExitOk);
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "7", "--out", out("b")}).code, kExitOk);
  ASSERT_EQ(run({"train", "--config", config_, "--seed", "8", "--out", out("c")}).code, kExitOk);
  const auto a = read_file(out("a/checkpoint.galn"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read_file(out("b/checkpoint.galn")));
  EXPECT_NE(a, read_file(out("c/checkpoint.galn")));
  EXPECT_EQ(read_file(out("a/loss.csv")), read_file(out("b/loss.csv")));
  const std::string loss = read_file(out("a/loss.csv"));
  EXPECT_EQ(loss.rfind("step,lr,loss\n", 0), 0u);
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 11);
}

TEST_F(CliTest, EvalAndRouteDumpWriteArtifacts) {
  ASSERT_EQ(run({"train", "--config", config_, "--out", out("run")}).code, kExitOk);
  CliRun e = run({"eval", "--config", config_, "--out", out("run")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("layer preference recovery"), std::string::npos);
  const std::string results = read_file(out("run/results.csv"));
  EXPECT_EQ(results.rfind("variant,task0_mse,task1_mse,aggregate_mse\nDynamic,", 0), 0u);
  EXPECT_EQ(read_file(out("run/routing.csv")).rfind("token_index,layer_index_global,weight\n", 0), 0u);
  EXPECT_FALSE(read_file(out("run/routing_summary.json")).empty());

  CliRun d = run({"route-dump", "--config", config_, "--checkpoint", out("run/checkpoint.galn"), "--out", out("dump")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  const std::string csv = read_file(out("dump/routing.csv"));
  // Two evaluation sequences of 8 tokens, two selected layers each.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 16);
  EXPECT_EQ(read_file(out("dump/routing.csv")), read_file(out("run/routing.csv")));
}

TEST_F(CliTest, EvalFailures) {
  EXPECT_EQ(run({"eval", "--config", config_, "--out", out("empty")}).code, kExitCheckFailed);
  ASSERT_EQ(run({"train", "--config", config_, "--out", out("run")}).code, kExitOk);
  std::string bytes = read_file(out("run/checkpoint.galn"));
  bytes[bytes.size() / 2] ^= 1;
  write_text_file(out("run/checkpoint.galn"), bytes);
  CliRun r = run({"eval", "--config", config_, "--out", out("run")});
  EXPECT_EQ(r.code, kExitCheckFailed);
  EXPECT_NE(r.err.find("checksum"), std::string::npos);
}

TEST_F(CliTest, RouteDumpRejectsNonRoutingVariant) {
  write_text_file(out("mean.json"), R"({"variant": "Mean", "total_depth": 8, "num_tokens": 8, "raw_width": 6,
    "width": 8, "num_tasks": 2, "planted_layers": [5, 7], "m": 4, "single_layer": 7})");
  CliRun r = run({"route-dump", "--config", out("mean.json"), "--out", out("x")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("variant"), std::string::npos);
}

TEST_F(CliTest, AblateWritesTableAndVerdict) {
  write_text_file(out("grid.json"), R"({
  "total_depth": 8, "num_tokens": 8, "raw_width": 6, "width": 8, "num_tasks": 2,
  "planted_layers": [5, 7], "m": 4, "single_layer": 7, "backbone_blocks": 1,
  "backbone_hidden": 8, "steps": 5, "batch_size": 2, "eval_batches": 1,
  "grid": ["Single", "Dynamic"]
})");
  CliRun r = run({"ablate", "--config", out("grid.json"), "--out", out("abl")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const std::string table = read_file(out("abl/results.csv"));
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_NE(table.find("\nSingle,"), std::string::npos);
  EXPECT_NE(table.find("\nDynamic,"), std::string::npos);
}

}  // namespace
}  // namespace georoute
