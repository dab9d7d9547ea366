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

#include <ostream>
#include <string>
#include <vector>

#include "riskverse/multiverse.hpp"

namespace riskverse {

// Threshold the store was run with.
ThresholdPolicy store_policy(const ResultStore& store);

// Estimation-only against all sources, one pair of rows per stored size.
std::vector<SummaryRow> headline_rows(const ResultStore& store);

// Rows for the given views. Views the store cannot support are skipped and
// their reason appended to `skipped`.
std::vector<SummaryRow> source_rows(const ResultStore& store, const std::vector<Source>& views,
                                    std::vector<std::string>* skipped);

struct PlotPoint {
  std::size_t rank = 0;  // 1-based x position
  std::size_t patient = 0;
  std::size_t column = 0;  // index into SizeSlice columns
  double risk = 0;
};

struct PlotData {
  Source view = Source::kAll;
  int n_train = 0;
  std::size_t patients = 0;
  std::size_t models = 0;
  std::vector<PlotPoint> points;  // rank-major, then column order
  std::vector<std::string> column_labels;
};

// Patients are ranked by their mean risk over every completed column at
// `n_train` (ties by patient index), for every view alike.
PlotData plot_data(const ResultStore& store, Source view, int n_train);

void write_plot_csv(std::ostream& out, const PlotData& d);
void write_plot_svg(std::ostream& out, const PlotData& d);

}  // namespace riskverse
