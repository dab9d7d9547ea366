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
#include <vector>

#include <Eigen/Dense>

#include "riskverse/preprocess.hpp"

namespace riskverse {

struct IrlsOptions {
  double ridge_lambda = 0.0;
  double tolerance = 1e-8;  // relative change in penalized deviance
  int max_iterations = 50;
  double separation_eta = 15.0;
};

// Coefficients are on the scale of the supplied columns; beta(0) is the
// intercept, which is added internally and never penalized.
struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double deviance = 0;
  double penalized_deviance = 0;
  double df_effective = 0;  // trace of the hat matrix, intercept included
  int iterations = 0;
  bool converged = false;
  bool separation = false;
  // Penalized deviance at the start value and after every accepted step.
  std::vector<double> deviance_trace;

  double linear_predictor(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

// Penalized IRLS maximizing loglik - lambda * ||beta without intercept||^2.
// Throws FitError for single-class labels and CollinearityError (with the
// offending column pair, -1 meaning the intercept) for exact collinearity.
LogisticFit fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const IrlsOptions& options = {});

inline LogisticFit fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     double ridge_lambda) {
  IrlsOptions o;
  o.ridge_lambda = ridge_lambda;
  return fit_logistic_irls(x, y, o);
}

// Binomial deviance of a probability vector.
double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

std::vector<double> default_ridge_grid();

struct RidgeTuning {
  double lambda = 0;
  std::vector<double> grid;
  std::vector<double> aic;
};

// AIC(lambda) = deviance + 2 * df_effective; argmin with ties going to the
// larger lambda.
RidgeTuning ridge_aic_tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const std::vector<double>& lambda_grid);

struct BackwardResult {
  std::vector<int> kept_groups;     // ascending
  std::vector<int> removed_groups;  // in removal order
};

// Removes, one at a time, the group of columns whose likelihood-ratio p-value
// is largest and above alpha. `group[j]` labels column j.
BackwardResult backward_eliminate(const Eigen::MatrixXd& x, const std::vector<int>& group,
                                  const Eigen::VectorXd& y, double alpha);

// Column indices of x whose group is in `groups`.
std::vector<int> columns_in_groups(const std::vector<int>& group, const std::vector<int>& groups);

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& cols);

inline constexpr std::array<double, 8> kFpPowers = {-2, -1, -0.5, 0, 0.5, 1, 2, 3};

struct MfpOptions {
  double select_alpha = 0.05;  // null vs FP2, and binary inclusion
  double fp_alpha = 0.05;      // FP2 vs linear, FP2 vs FP1
  int max_cycles = 5;
};

struct MfpResult {
  // Empty = excluded, {1} = linear, one or two powers otherwise.
  std::array<std::vector<double>, kNumContinuous> powers;
  std::array<bool, 2> binary_included{true, true};
  int cycles = 0;
  bool converged = false;
};

// Multivariable fractional polynomial selection. `t` carries the per-variable
// shift and scale from fit_transform; `train` must have complete CA125.
MfpResult mfp_fit(const FittedTransform& t, const Cohort& train, const MfpOptions& options = {});

}  // namespace riskverse
