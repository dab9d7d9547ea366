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

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "riskverse/rng.hpp"

namespace riskverse {

// Quantizes each feature into at most `max_bins` ordered bins. A split
// "bin <= k" is the same as "value <= thresholds[f][k]".
struct BinMapper {
  std::vector<std::vector<double>> thresholds;

  static BinMapper fit(const Eigen::MatrixXd& x, int max_bins = 255);
  int bin_count(int feature) const { return static_cast<int>(thresholds[feature].size()) + 1; }
  std::uint8_t bin_of(int feature, double value) const;
};

// Row-major bin codes.
struct BinnedMatrix {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> codes;

  const std::uint8_t* row(int r) const {
    return codes.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
  }
  std::uint8_t at(int r, int col) const { return row(r)[col]; }
};

BinnedMatrix bin_matrix(const BinMapper& m, const Eigen::MatrixXd& x);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  int bin = 0;
  double threshold = 0;
  int left = -1, right = -1;
  int count = 0;     // training rows reaching the node
  double value = 0;  // event frequency (forest) or shrunk leaf weight (boosting)
};

struct Tree {
  std::vector<TreeNode> nodes;

  // Descends while the node is split and holds at least `min_node` rows.
  const TreeNode& leaf(const double* row, int stride, int min_node = 0) const;
  const TreeNode& leaf_binned(const BinnedMatrix& b, int row, int min_node = 0) const;
  std::size_t leaf_count(int min_node = 0) const;
};

// Small / large / tuned: node size 2 / 20 / tuned for forests, depth 2 / 20 /
// tuned for boosting.
enum class TreeMode { kSmall, kLarge, kTuned };
const char* tree_mode_name(TreeMode m);

inline constexpr double kRiskFloor = 1e-6;
double clip_risk(double p);

// ---------------------------------------------------------------------------
// Random forest of probability trees

struct ForestParams {
  int trees = 500;
  int min_node = 2;
  double sample_fraction = 1.0;  // drawn with replacement
  int mtry = 2;
};

struct ForestOptions {
  int trees = 500;
  int cv_trees = 50;
  int folds = 5;
};

struct RandomForest {
  ForestParams params;
  std::vector<Tree> trees;
  double cv_logloss = 0;  // tuned mode only

  double tree_prediction(std::size_t t, const double* row, int stride) const;
  // Clipped mean of tree predictions.
  double predict(const double* row, int stride) const;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
};

RandomForest fit_random_forest_params(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const ForestParams& params, Seed seed);

RandomForest fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, TreeMode mode,
                               Seed seed, const ForestOptions& options = {});

// ---------------------------------------------------------------------------
// Second-order gradient boosting with logistic loss

double logistic_loss(double y, double margin);
double logistic_gradient(double y, double margin);
double logistic_hessian(double margin);

struct BoostParams {
  int max_depth = 6;
  double eta = 0.3;
  double subsample = 1.0;
  int max_rounds = 200;
  int patience = 20;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double holdout_fraction = 0.2;  // 0 disables early stopping
};

struct BoostedTrees {
  BoostParams params;
  double base_score = 0;  // margin
  std::vector<Tree> trees;
  std::vector<double> train_loss;  // mean training loss after each round
  double cv_logloss = 0;

  double margin(const double* row, int stride) const;
  double predict(const double* row, int stride) const;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
};

BoostedTrees fit_boosted_params(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const BoostParams& params, Seed seed);

BoostedTrees fit_boosted_trees(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, TreeMode mode,
                               Seed seed);

// Mean clipped log-loss.
double mean_log_loss(const std::vector<double>& risks, const Eigen::VectorXd& y);

}  // namespace riskverse
