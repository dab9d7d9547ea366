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
#include <iosfwd>
#include <string>
#include <vector>

#include "riskverse/data_model.hpp"
#include "riskverse/rng.hpp"

namespace riskverse {

struct CartOptions {
  int min_leaf = 5;
  int min_split = 15;
  int max_depth = 16;
  // A split must reduce impurity by more than this fraction of the root impurity.
  double complexity = 1e-8;
};

// Regression (or, for 0/1 targets, Gini) tree whose leaves keep the sorted
// training targets as donors. A node holding both missing (NaN) and observed
// values of a predictor first splits on that missingness, so rows with and
// without the value never share donors. When one side would be smaller than
// a leaf, missing values are left out of split scoring instead and routed by
// surrogate splits, falling back to the larger child.
class DonorTree {
 public:
  struct Surrogate {
    int feature = 0;
    double threshold = 0;
    bool low_goes_left = true;
  };
  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0;
    bool on_missing = false;  // missing goes left, observed right
    int left = -1, right = -1;
    bool missing_left = true;
    std::uint32_t surrogate_begin = 0, surrogate_end = 0;
    std::uint32_t donor_begin = 0, donor_end = 0;
  };
  static constexpr int kMaxSurrogates = 5;

  // x is row-major, rows x features.
  static DonorTree fit(const std::vector<double>& x, int features, const std::vector<double>& y, bool binary,
                       const CartOptions& options);

  const Node& leaf(const double* row) const;
  double draw(const double* row, Rng& rng) const;
  std::size_t leaf_count() const;
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<double>& donors() const { return donors_; }

 private:
  friend class TreeBuilder;
  bool goes_left(const Node& n, const double* row) const;

  std::vector<Node> nodes_;
  std::vector<Surrogate> surrogates_;
  std::vector<double> donors_;
};

struct SynthStage {
  Column column;
  bool binary = false;
  // Optional variables: whether missingness is modeled, or always missing.
  bool has_missing_model = false;
  bool always_missing = false;
  DonorTree missing_model;  // draws 1 for missing
  DonorTree value_model;    // fitted on rows where the value is observed
};

struct Synthesizer {
  std::vector<SynthStage> stages;  // stage k conditions on stages 0..k-1
  ColumnSet columns = ColumnSet::none();
  std::string source_name;
};

// Default order: age, dmax, volume, solid (diameter), solid (volume),
// bilateral, papflow, CA125, outcome.
std::vector<Column> default_synth_order();

// DataError on an empty cohort; ConfigError if `order` is not exactly the
// cohort's columns, each once.
Synthesizer fit_synthesizer(const Cohort& cohort, const std::vector<Column>& order = default_synth_order(),
                            const CartOptions& options = {});

Cohort sample_synthetic(const Synthesizer& s, std::size_t n, Seed seed);

struct CoefficientRow {
  std::string term;
  bool linear = false;
  double real = 0, real_se = 0;
  double synth = 0, synth_se = 0;
  // (synth - real) / sqrt(real_se^2 + synth_se^2)
  double z() const;
};

struct FidelityReport {
  std::vector<std::string> variables;
  std::vector<double> ks;  // observed values per variable
  std::vector<double> missing_real, missing_synth;
  // Pairwise-complete Spearman correlations, variables x variables, row-major.
  std::vector<double> spearman_real, spearman_synth;
  double max_correlation_gap = 0;
  std::vector<CoefficientRow> coefficients;
};

// Coefficients come from the main logistic strategy: regression imputation,
// 3-knot splines, maximum diameter. DataError on mismatched columns.
FidelityReport fidelity_report(const Cohort& real, const Cohort& synth);

// Long format: section,name,other,real,synth,real_se,synth_se,value.
void write_fidelity_csv(std::ostream& out, const FidelityReport& report);

}  // namespace riskverse
