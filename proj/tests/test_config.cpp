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

#include <filesystem>

#include "riskverse/config.hpp"
#include "riskverse/error.hpp"

namespace rv = riskverse;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    rv::parse_experiment_config(doc);
  } catch (const rv::ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ExperimentConfig, EmptyDocumentIsFullPreset) {
  const auto c = rv::parse_experiment_config(json::object()).run;
  EXPECT_EQ(c.to_json(), rv::full_config().to_json());
  EXPECT_EQ(rv::enumerate_grid(c).size(), 594u);
}

TEST(ExperimentConfig, ShippedPresets) {
  const auto full = rv::load_experiment_config("configs/full.json").run;
  EXPECT_EQ(full.to_json(), rv::full_config().to_json());
  const auto desk = rv::load_experiment_config("configs/desk.json").run;
  const auto units = rv::enumerate_grid(desk).size() * desk.replicates * desk.train_sizes.size();
  EXPECT_EQ(rv::enumerate_grid(desk).size(), 12u);
  EXPECT_EQ(units, 120u);
  EXPECT_EQ(rv::enumerate_grid(rv::load_experiment_config("configs/minimal.json").run).size(), 1u);
}

TEST(ExperimentConfig, EchoRoundTrips) {
  for (const char* path : {"configs/full.json", "configs/desk.json", "configs/minimal.json"}) {
    const auto c = rv::load_experiment_config(path).run;
    const auto again = rv::parse_experiment_config(c.to_json()).run;
    EXPECT_EQ(again.to_json(), c.to_json()) << path;
  }
}

TEST(ExperimentConfig, UnknownKeysListedWithPaths) {
  const std::string msg = config_error(json::parse(R"({
    "replicas": 3,
    "test": {"population": "leuven", "sise": 100},
    "forest": {"trees": 10, "depth": 3},
    "populations": {"leuven": {"generator": "leuven", "n": 100, "colour": "red"}}
  })"));
  EXPECT_NE(msg.find("replicas: unknown key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("test.sise: unknown key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("forest.depth: unknown key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("populations.leuven.colour: unknown key"), std::string::npos) << msg;
}

TEST(ExperimentConfig, TypeAndValueErrors) {
  EXPECT_NE(config_error(json::parse(R"({"grid": {"populations": []}})")).find("grid.populations: axis is empty"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"sizes": [400, -1]})")).find("sizes[1]"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"replicates": "ten"})")).find("replicates: expected an integer"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"grid": {"learners": ["lr_mfp_none_ridge"]}})")).find("grid.learners[0]"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"grid": {"imputations": ["mean"]}})")).find("grid.imputations[0]"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"resampling": "bootstrap"})")).find("resampling"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"populations": {"x": {"generator": "leuven"}}})")).find("populations.x.n"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"populations": {"x": {"generator": "mars", "n": 5}}})"))
                .find("populations.x.generator"),
            std::string::npos);
  EXPECT_FALSE(config_error(json::parse("[1, 2]")).empty());
  // A grid population needs a source.
  EXPECT_NE(config_error(json::parse(R"({"grid": {"populations": ["oslo"]}})")).find("oslo"), std::string::npos);
}

TEST(ExperimentConfig, CsvPathsResolveAgainstConfigDirectory) {
  const auto c = rv::parse_experiment_config(json::parse(R"({
    "grid": {"populations": ["site"]},
    "populations": {"site": {"csv": "cohorts/site.csv"}, "leuven": {"generator": "leuven", "n": 500}}
  })"),
                                             "/data/exp")
                     .run;
  ASSERT_EQ(c.sources.size(), 2u);
  const auto& site = c.sources[0].name == "site" ? c.sources[0] : c.sources[1];
  EXPECT_EQ(site.csv, std::filesystem::path("/data/exp/cohorts/site.csv"));
}

TEST(ExperimentConfig, UnreadableOrMalformedFile) {
  EXPECT_THROW(rv::load_experiment_config("configs/does-not-exist.json"), rv::ConfigError);
  EXPECT_THROW(rv::load_experiment_config("CMakeLists.txt"), rv::ConfigError);
}
