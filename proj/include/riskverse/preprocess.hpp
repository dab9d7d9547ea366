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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "riskverse/data_model.hpp"

namespace riskverse {

enum class ContinuousHandling {
  kLinear,
  kDichotomizeMedian,
  kQuartileCategories,
  kFractionalPolynomial,
  kRcs3,
};
enum class SizeDefinition { kDiameter, kVolume };
enum class ImputeStrategy { kRegression, kOutcomeConditionalMedian, kUnconditionalMedian };

const char* handling_name(ContinuousHandling h);
const char* size_definition_name(SizeDefinition s);
const char* impute_strategy_name(ImputeStrategy s);

struct TransformSpec {
  ContinuousHandling continuous = ContinuousHandling::kRcs3;
  SizeDefinition size = SizeDefinition::kDiameter;
};

struct ImputeSpec {
  ImputeStrategy strategy = ImputeStrategy::kRegression;
};

// The six model predictors. The first four are continuous.
enum Predictor : int {
  kPredAge = 0,
  kPredSize = 1,
  kPredSolid = 2,
  kPredCa125 = 3,
  kPredBilateral = 4,
  kPredPapflow = 5,
};
inline constexpr int kNumPredictors = 6;
inline constexpr int kNumContinuous = 4;

std::string predictor_name(int predictor);

// Offset added before taking log of the size variable. Volumes can be 0.
double size_log_offset(SizeDefinition size);

// Continuous predictors on the scale every handling starts from:
// age, log(size + offset), solid proportion, log(CA125). CA125 must be present.
std::array<double, kNumContinuous> base_continuous(const PatientRecord& r, SizeDefinition size);

struct RcsKnots {
  double t1 = 0, t2 = 0, t3 = 0;
};

// Restricted cubic spline basis with three knots, truncated-power form scaled
// by (t3 - t1)^2. Returns (x, nonlinear term).
std::pair<double, double> rcs_basis(double x, const RcsKnots& knots);

// Design matrix without intercept. `group[j]` is the predictor (0..5) that
// column j belongs to.
struct FeatureMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  std::vector<int> group;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

// Per-continuous-variable parameters. Only the fields relevant to the chosen
// handling are meaningful.
struct VariableTransform {
  double log_offset = 0;
  // dichotomize-median
  double median = 0;
  bool strict_upper = false;  // true when median == training minimum
  // quartile-categories: strictly increasing unique cut points
  std::vector<double> cuts;
  // rcs-3-knots
  RcsKnots knots;
  // fractional polynomial: x' = max(x + shift, floor) / scale
  std::vector<double> fp_powers{1.0};  // empty => variable excluded
  double fp_shift = 0;
  double fp_scale = 1;
  double fp_floor = 0;
};

struct FittedTransform {
  TransformSpec spec;
  std::array<VariableTransform, kNumContinuous> vars;
};

// Fits on training data only. For the fractional-polynomial handling this
// computes the shift/scale and leaves every variable linear; the selected
// powers are installed with with_fp_powers (fitted by mfp_fit).
FittedTransform fit_transform(const Cohort& train, const TransformSpec& spec);

FittedTransform with_fp_powers(FittedTransform t,
                               const std::array<std::vector<double>, kNumContinuous>& powers);

// One FP column value; power 0 means log.
double fp_term(double x, double power);

// Maps a continuous base value to its shifted/scaled FP argument.
double fp_argument(const VariableTransform& v, double base_value);

FeatureMatrix apply_transform(const FittedTransform& t, const Cohort& cohort);

// ---------------------------------------------------------------------------

struct FittedImputer {
  ImputeStrategy strategy = ImputeStrategy::kRegression;
  SizeDefinition size = SizeDefinition::kDiameter;
  // Regression of log(CA125) on [1, age, log(size+offset), solid, bilateral, papflow].
  Eigen::VectorXd coefficients;
  double pooled_median = 0;
  double median_event = 0;
  double median_nonevent = 0;
};

enum class ImputePhase {
  kTraining,    // outcome-conditional medians use the record's own outcome
  kDeployment,  // outcome unknown: pooled median
};

FittedImputer fit_imputer(const Cohort& train, const ImputeSpec& spec, SizeDefinition size);

// Imputed CA125 for one record (ignores any observed value).
double impute_value(const FittedImputer& imp, const PatientRecord& r, ImputePhase phase);

Cohort apply_imputer(const FittedImputer& imp, const Cohort& cohort,
                     ImputePhase phase = ImputePhase::kDeployment);

}  // namespace riskverse
