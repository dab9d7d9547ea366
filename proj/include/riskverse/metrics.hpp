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

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskverse {

// Risk >= threshold means "operate".
struct ThresholdPolicy {
  double threshold = 0.1;

  void validate() const;  // ConfigError unless 0 < threshold < 1
  bool operate(double risk) const { return risk >= threshold; }
};

struct PrevalenceContext {
  std::size_t events = 0;
  std::size_t nonevents = 0;

  static PrevalenceContext from_labels(std::span<const int> labels);
  std::size_t n() const { return events + nonevents; }
  double prevalence() const;
};

// Mann-Whitney estimate with ties counted as half. DataError on single-class
// labels or labels outside {0, 1}.
double auroc(std::span<const double> risks, std::span<const int> labels);

// Mean squared gap between the risks and a recalibration curve fitted as a
// logistic regression of the labels on logit(risk) and logit(risk)^2.
// Empty if the recalibration fit fails.
std::optional<double> eci(std::span<const double> risks, std::span<const int> labels);

double net_benefit(std::span<const double> risks, std::span<const int> labels, const ThresholdPolicy& policy);
double nb_treat_all(const PrevalenceContext& ctx, const ThresholdPolicy& policy);
// Empty when prevalence <= max(0, nb_ta).
std::optional<double> relative_utility(double nb, double nb_ta, const PrevalenceContext& ctx);

// Per-patient measures over that patient's J risks.
double risk_range_95(std::span<const double> risks);  // DataError if J < 2
double decision_uncertainty(std::span<const double> risks, const ThresholdPolicy& policy);

struct ModelMetrics {
  double auroc = 0;
  std::optional<double> eci;
  double nb = 0;
  std::optional<double> ru;
};

ModelMetrics evaluate_model(std::span<const double> risks, std::span<const int> labels,
                            const ThresholdPolicy& policy);

struct ColumnMeta {
  std::string scenario_id;
  int replicate = 0;
  int n_train = 0;

  auto operator<=>(const ColumnMeta&) const = default;
};

// N patients by J models, stored column-major.
class RiskMatrix {
 public:
  explicit RiskMatrix(std::vector<int> labels);

  // DataError on wrong length, risks outside [0, 1] or duplicate metadata.
  void add_column(ColumnMeta meta, std::span<const double> risks);

  std::size_t patients() const { return labels_.size(); }
  std::size_t models() const { return meta_.size(); }
  std::span<const int> labels() const { return labels_; }
  std::span<const double> column(std::size_t j) const;
  const ColumnMeta& meta(std::size_t j) const { return meta_[j]; }
  double at(std::size_t i, std::size_t j) const { return data_[j * labels_.size() + i]; }

 private:
  std::vector<int> labels_;
  std::vector<double> data_;
  std::vector<ColumnMeta> meta_;
};

struct Spread {
  double centre = 0;  // mean, or median for RU
  double min = 0;
  double max = 0;
};

struct SummaryRow {
  std::string source;
  std::string subset;
  int n_train = 0;
  std::size_t models = 0;
  std::optional<Spread> auroc, eci, ru, r95, du;
};

// Summarizes the given columns. `per_model` holds one entry per matrix column
// (evaluate_model of that column); pass empty to compute on the fly.
SummaryRow summarize(const RiskMatrix& matrix, std::span<const std::size_t> columns,
                     const ThresholdPolicy& policy, std::string source, std::string subset, int n_train,
                     std::span<const ModelMetrics> per_model = {});

extern const char* const kSummaryCsvHeader;
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace riskverse
