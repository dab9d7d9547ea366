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

#include <span>
#include <vector>

namespace riskverse {

// Empirical quantile by linear interpolation between order statistics
// (Hyndman-Fan type 7, the R default). `sorted` must be ascending and
// nonempty; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

// Convenience wrapper that copies and sorts.
double quantile(std::span<const double> values, double p);

double median(std::span<const double> values);

double mean(std::span<const double> values);

double logistic(double eta) noexcept;
double logit(double p) noexcept;

double normal_cdf(double z);
double normal_quantile(double p);

// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double statistic, double df);

// Average ranks (ties share the mean rank), 1-based.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation. Returns 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// Two-sample Kolmogorov-Smirnov statistic sup|F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

}  // namespace riskverse
