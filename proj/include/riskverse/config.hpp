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

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "riskverse/multiverse.hpp"

namespace riskverse {

// Textual experiment configuration (UTF-8 JSON, schema in
// docs/config.schema.json). Every key is optional; omitted keys take the
// full-grid preset's value:
//
//   seed          20240607
//   sizes         [400, 2000, 10000]
//   replicates    100
//   threshold     0.1
//   resampling    "with-replacement" | "without-replacement"
//   workers       0 (hardware concurrency)
//   grid          {learners: "all" | [ids], size_definitions, imputations, populations}
//   populations   {name: {generator, n, synthesize} | {csv, synthesize}}
//   test          {population: "leuven", size: 100}
//   forest        {trees: 500, cv_trees: 50, folds: 5}
//
// A "populations" object replaces the preset sources wholesale. CSV paths are
// resolved against the config file's directory.
struct ExperimentConfig {
  RunConfig run;
  std::filesystem::path source;  // file the config came from, if any
};

// Throws ConfigError listing every problem with its key path, e.g.
// "grid.populations: axis is empty" or "test.sise: unknown key".
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace riskverse
