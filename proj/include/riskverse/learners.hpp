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

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "riskverse/data_model.hpp"
#include "riskverse/logistic.hpp"
#include "riskverse/preprocess.hpp"
#include "riskverse/trees.hpp"

namespace riskverse {

enum class LearnerFamily { kLogistic, kRandomForest, kBoostedTrees };
enum class Selection { kNone, kBackward001, kBackward020 };
enum class Penalty { kNone, kRidgeAic };

const char* family_name(LearnerFamily f);
const char* selection_name(Selection s);
const char* penalty_name(Penalty p);
// 1.0 for no selection.
double selection_alpha(Selection s);

struct LearnerSpec {
  LearnerFamily family = LearnerFamily::kLogistic;
  // Logistic only.
  ContinuousHandling handling = ContinuousHandling::kRcs3;
  Selection selection = Selection::kNone;
  Penalty penalty = Penalty::kNone;
  // Trees only: forest node size 2/20/tuned, boosting depth 2/20/tuned.
  TreeMode tree_mode = TreeMode::kTuned;

  // Filename-safe identifier, e.g. "lr_rcs3_none_none", "rf_node2", "xgb_tuned".
  std::string id() const;
  static LearnerSpec parse(const std::string& id);
  // Throws ConfigError for ridge combined with fractional polynomials.
  void validate() const;

  bool operator==(const LearnerSpec&) const = default;
};

// Tree families see raw features: age, size, solid proportion, log CA125,
// bilateral, papflow.
Eigen::MatrixXd tree_features(const Cohort& cohort, SizeDefinition size);

struct PipelineDiagnostics {
  bool separation = false;
  bool converged = true;
  int iterations = 0;
  double ridge_lambda = 0;
  std::vector<int> kept_groups;
  std::vector<std::string> dropped_columns;  // constant or collinear in training
};

struct FittedPipeline {
  LearnerSpec learner;
  SizeDefinition size = SizeDefinition::kDiameter;
  FittedImputer imputer;
  FittedTransform transform;

  // Logistic: kept columns of apply_transform's output, their training
  // center/scale, and coefficients on the standardized columns.
  std::vector<int> columns;
  std::vector<std::string> column_names;
  Eigen::VectorXd center, scale;
  Eigen::VectorXd beta;

  std::shared_ptr<const RandomForest> forest;
  std::shared_ptr<const BoostedTrees> booster;

  PipelineDiagnostics diag;

  bool flagged() const { return diag.separation || !diag.converged; }
};

// Steps 2 and 3 of the training procedure: impute the training sample, then
// fit transform and predictor on it.
FittedPipeline fit_pipeline(const LearnerSpec& learner, SizeDefinition size, const ImputeSpec& impute,
                            const Cohort& train, Seed seed, const ForestOptions& forest_options = {});

// Imputes (only when CA125 is missing), transforms and predicts; clipped to
// [1e-6, 1 - 1e-6].
double predict_risk(const FittedPipeline& p, const PatientRecord& record);
std::vector<double> predict_risks(const FittedPipeline& p, const Cohort& cohort);

// Audit summary of the frozen parameters (no tree bodies).
nlohmann::json describe_pipeline(const FittedPipeline& p);

}  // namespace riskverse
