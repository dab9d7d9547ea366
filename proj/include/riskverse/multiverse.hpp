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

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskverse/data_model.hpp"
#include "riskverse/learners.hpp"
#include "riskverse/metrics.hpp"

namespace riskverse {

// ---------------------------------------------------------------------------
// Configuration

enum class Resampling { kWithReplacement, kWithoutReplacement };
const char* resampling_name(Resampling r);

// Where a population's training pool comes from: the reference generator or
// a cohort CSV, optionally replaced by a synthetic pool fitted on it.
struct PopulationSource {
  std::string name;
  std::string generator;      // preset name; empty when csv is set
  std::filesystem::path csv;  // resolved path
  std::size_t n = 0;          // generated cohort size
  std::size_t synthesize = 0; // synthetic pool size, 0 = train on the pool itself
};

struct GridAxes {
  std::vector<LearnerSpec> learners;
  std::vector<SizeDefinition> size_definitions;
  std::vector<ImputeStrategy> imputations;
  std::vector<std::string> populations;
};

// All 33 learner variations: 27 logistic and 6 tree-based.
std::vector<LearnerSpec> all_learners();

struct RunConfig {
  Seed seed = 20240607;
  std::vector<int> train_sizes = {400, 2000, 10000};
  int replicates = 100;
  ThresholdPolicy policy;
  GridAxes grid;
  std::vector<PopulationSource> sources;
  std::string test_population = "leuven";
  std::size_t test_size = 100;
  Resampling resampling = Resampling::kWithReplacement;
  ForestOptions forest;
  int workers = 0;  // 0 = hardware concurrency

  // Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

// The full grid: 33 learners, 2 size definitions x 3 imputations, three
// populations with generator pools and 100,000-row synthetic training pools.
RunConfig full_config();

// ---------------------------------------------------------------------------
// Grid

struct Scenario {
  std::string id;
  LearnerSpec learner;
  SizeDefinition size = SizeDefinition::kDiameter;
  ImputeStrategy impute = ImputeStrategy::kRegression;
  std::string population;
};

// "<population>__<size>__<imputation>__<learner>".
std::string scenario_id(const LearnerSpec& learner, SizeDefinition size, ImputeStrategy impute,
                        const std::string& population);

// Sorted by id. ConfigError on an empty axis.
std::vector<Scenario> enumerate_grid(const RunConfig& config);

// Counter-based: splitmix64 over the FNV-1a hash of the id, the replicate
// and the size, keyed by the master seed.
Seed derive_seed(Seed master, const std::string& scenario_id, int replicate, int n_train);

// ConfigError if two planned work units (or training samples) would share a seed.
void check_seed_collisions(const RunConfig& config, const std::vector<Scenario>& grid);

// ---------------------------------------------------------------------------
// Work units

struct UnitKey {
  std::string scenario_id;
  int replicate = 0;
  int n_train = 0;

  auto operator<=>(const UnitKey&) const = default;
  std::string file_stem() const;
};

struct UnitResult {
  UnitKey key;
  bool failed = false;
  std::vector<std::string> flags;  // "separation", "nonconverged", "failed"
  std::string failure;             // message when failed
  std::vector<double> risks;       // one per test patient unless failed
  ModelMetrics metrics;
  nlohmann::json pipeline;         // audit summary of the fitted pipeline
};

// The cohorts every unit reads: one training pool per population and the
// fixed labeled test set.
struct Cohorts {
  std::map<std::string, Cohort> pools;
  Cohort test;
};

// With `synthesize` false the pools are the real (or generated) cohorts even
// for sources configured with a synthetic pool.
Cohorts prepare_cohorts(const RunConfig& config, bool synthesize = true);

// The synthetic pool a source trains on, fitted on its real pool.
Cohort synthesize_pool(const RunConfig& config, const std::string& population, const Cohort& real);

// Steps: draw the training sample from the pool (the sample depends only on
// population, replicate and size, so it is shared across model and data
// variations), impute, fit, impute the test set, predict.
UnitResult run_one(const Scenario& scenario, const Cohort& pool, const Cohort& test, int n_train, int replicate,
                   const RunConfig& config);

// ---------------------------------------------------------------------------
// Result store

extern const char* const kCodeVersion;

struct ResultStore {
  nlohmann::json manifest;
  std::vector<int> test_labels;
  std::vector<Scenario> grid;
  std::vector<UnitResult> units;  // sorted by key

  const Scenario* scenario(const std::string& id) const;
};

struct RunOptions {
  // Randomizes the execution order of work units (the store is unaffected).
  std::optional<Seed> shuffle_seed;
  // Stop after this many newly completed units, leaving a resumable store.
  std::optional<std::size_t> stop_after;
  std::function<void(std::size_t done, std::size_t total)> progress;
  // Set from another thread to stop early.
  const std::atomic<bool>* cancel = nullptr;
};

struct RunSummary {
  std::size_t total = 0;
  std::size_t executed = 0;  // this invocation
  std::size_t resumed = 0;   // already checkpointed
  bool complete = false;
};

// Executes every (scenario, replicate, size) unit not yet checkpointed under
// `dir`, then writes manifest.json, risks.csv, model_metrics.csv and
// pipelines.jsonl. ConfigError if `dir` holds a store of a different config.
RunSummary run_all(const RunConfig& config, const std::filesystem::path& dir, const RunOptions& options = {});

// DataError if the store is missing or incomplete.
ResultStore load_store(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Decomposition

enum class Source { kEstimation, kModel, kData, kPopulation, kAll };
const char* source_name(Source s);
Source parse_source(const std::string& name);

// The scenario single-source views hold fixed: logistic with 3-knot splines,
// no selection or penalty, diameter, regression imputation, on the test
// population; otherwise the first scenario of the grid.
const Scenario& main_scenario(const ResultStore& store);

// Column indices (into the units with risks at `n_train`) a view selects.
// Single-source views fix replicate 0.
std::vector<std::size_t> select_columns(const ResultStore& store, Source source, int n_train,
                                        const std::string& subset = "all");

// Builds the risk matrix of completed units at one size, in store order.
struct SizeSlice {
  RiskMatrix matrix;
  std::vector<const UnitResult*> units;
  std::vector<ModelMetrics> metrics;
};
SizeSlice slice_at(const ResultStore& store, int n_train);

// Summary rows for one source at every stored size. The model and all views
// add logistic-only and tree-only subsets. DataError when the store cannot
// support the view.
std::vector<SummaryRow> decompose(const ResultStore& store, Source source, const ThresholdPolicy& policy);

}  // namespace riskverse
