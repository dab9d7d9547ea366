/*
 * Copyright 2026 The riskverse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;  // stdout and stderr
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string(RISKVERSE_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("riskverse_cli_" + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, ValidateFullPreset) {
  const auto o = cli("validate --config configs/full.json");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("scenarios: 594 (model 33 × data 6 × population 3)"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("work units: 178200"), std::string::npos) << o.out;
}

TEST(Cli, ValidateMinimal) {
  const auto o = cli("validate --config configs/minimal.json");
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("scenarios: 1 "), std::string::npos) << o.out;
}

TEST(Cli, ConfigErrorsExitTwoAndNameTheKey) {
  auto o = cli("validate --config tests/data/empty_population.json");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.out.find("grid.populations"), std::string::npos) << o.out;
  o = cli("validate --config tests/data/unknown_keys.json");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.out.find("replicas: unknown key"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("test.sise: unknown key"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("grid.learners[1]"), std::string::npos) << o.out;
  EXPECT_EQ(cli("validate").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("report --store /nonexistent --view sideways").code, 3);
}

TEST(Cli, IncompleteStoreIsARuntimeError) {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  const auto o = cli("report --store " + dir.string());
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.out.find("incomplete"), std::string::npos) << o.out;
  EXPECT_EQ(cli("plot --store " + dir.string()).code, 3);
  fs::remove_all(dir);
}

TEST(Cli, MinimalRunReportPlot) {
  const auto dir = scratch("minimal");
  auto o = cli("run --config configs/minimal.json --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("5/5 work units"), std::string::npos);
  const auto manifest = slurp(dir / "manifest.json");

  o = cli("run --config configs/minimal.json --out " + dir.string());
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("already complete"), std::string::npos);
  EXPECT_EQ(slurp(dir / "manifest.json"), manifest);

  o = cli("report --store " + dir.string());
  EXPECT_EQ(o.code, 0) << o.out;
  const auto headline = slurp(dir / "report" / "headline.csv");
  const auto sources = slurp(dir / "report" / "sources.csv");
  EXPECT_NE(sources.find("\nestimation,"), std::string::npos);
  EXPECT_EQ(sources.find("\nmodel,"), std::string::npos);
  EXPECT_NE(o.out.find("skipped model"), std::string::npos) << o.out;
  ASSERT_EQ(cli("report --store " + dir.string()).code, 0);
  EXPECT_EQ(slurp(dir / "report" / "headline.csv"), headline);
  EXPECT_EQ(slurp(dir / "report" / "sources.csv"), sources);

  o = cli("report --store " + dir.string() + " --view population");
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.out.find("population view needs at least two"), std::string::npos) << o.out;

  o = cli("plot --store " + dir.string() + " --view estimation --size 400");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("100 patients × 5 models"), std::string::npos) << o.out;
  EXPECT_TRUE(fs::exists(dir / "plots" / "plot_estimation_n400.svg"));
  EXPECT_EQ(cli("plot --store " + dir.string() + " --size 123").code, 3);
  fs::remove_all(dir);
}
