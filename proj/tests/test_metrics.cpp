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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "riskverse/error.hpp"
#include "riskverse/metrics.hpp"
#include "riskverse/rng.hpp"

namespace rv = riskverse;

namespace {

double auroc_pairs(const std::vector<double>& r, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      wins += r[i] > r[j] ? 1.0 : r[i] == r[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

double r95_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(v.size()) - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return q(0.975) - q(0.025);
}

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_EQ(rv::auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(rv::auroc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{0, 1, 0}), 0.5);
  EXPECT_EQ(rv::auroc(std::vector<double>{0.2, 0.8, 0.6}, std::vector<int>{0, 1, 0}), 1.0);
  EXPECT_THROW(rv::auroc(std::vector<double>{0.2, 0.8}, std::vector<int>{1, 1}), rv::DataError);
}

TEST(Auroc, MatchesExhaustivePairCount) {
  rv::Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> r(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values force ties.
      r[i] = std::round(rng.uniform() * 20) / 20;
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(rv::auroc(r, y), auroc_pairs(r, y), 1e-12);
  }
}

TEST(Eci, ConstantAtEventRateIsZero) {
  std::vector<int> y(200, 0);
  std::fill(y.begin(), y.begin() + 50, 1);
  const std::vector<double> r(200, 0.25);
  EXPECT_NEAR(*rv::eci(r, y), 0.0, 1e-10);
}

TEST(Eci, ConstantMiscalibratedRisk) {
  rv::Rng rng(2);
  std::vector<int> y(10000);
  for (auto& v : y) v = rng.bernoulli(0.5) ? 1 : 0;
  const std::vector<double> r(10000, 0.9);
  // Direct oracle: the recalibrated curve is the observed rate.
  const double rate = std::accumulate(y.begin(), y.end(), 0.0) / 10000;
  const double e = *rv::eci(r, y);
  EXPECT_NEAR(e, (0.9 - rate) * (0.9 - rate), 1e-9);
  EXPECT_NEAR(e, 0.16, 0.02);
}

TEST(Eci, CalibratedByConstructionIsSmall) {
  rv::Rng rng(3);
  std::vector<int> y(20000);
  std::vector<double> r(20000);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = 0.05 + 0.9 * rng.uniform();
    y[i] = rng.bernoulli(r[i]) ? 1 : 0;
  }
  EXPECT_LT(*rv::eci(r, y), 0.005);
}

TEST(Eci, TwoValuedRisksAndRangeCheck) {
  const std::vector<double> r = {0.2, 0.2, 0.2, 0.2, 0.7, 0.7, 0.7, 0.7};
  const std::vector<int> y = {0, 0, 0, 1, 1, 1, 0, 1};
  // Two distinct risks: the curve hits the group rates 0.25 and 0.75.
  EXPECT_NEAR(*rv::eci(r, y), (0.05 * 0.05 + 0.05 * 0.05) / 2, 1e-9);
  EXPECT_THROW(rv::eci(std::vector<double>{0.0, 0.5}, std::vector<int>{0, 1}), rv::DataError);
}

TEST(NetBenefit, Examples) {
  const rv::ThresholdPolicy p;
  std::vector<double> r(100, 0.05);
  std::vector<int> y(100, 0);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = 1;
  EXPECT_EQ(rv::net_benefit(r, y, p), 0.0);
  // 17 true and 20 false positives.
  for (int i = 0; i < 17; ++i) r[static_cast<std::size_t>(i)] = 0.5;
  for (int i = 40; i < 60; ++i) r[static_cast<std::size_t>(i)] = 0.1;
  EXPECT_NEAR(rv::net_benefit(r, y, p), 0.17 - 0.20 / 9, 1e-12);
  EXPECT_NEAR(rv::net_benefit(r, y, p), 0.14778, 1e-5);
  rv::ThresholdPolicy tiny{1e-12};
  EXPECT_NEAR(rv::net_benefit(r, y, tiny), 0.30, 1e-9);
  EXPECT_THROW(rv::net_benefit(r, y, rv::ThresholdPolicy{1.0}), rv::ConfigError);
}

TEST(NetBenefit, TreatAllConsistency) {
  const rv::ThresholdPolicy p;
  EXPECT_NEAR(rv::nb_treat_all({49, 51}, p), 0.49 - 0.51 / 9, 1e-12);
  EXPECT_NEAR(rv::nb_treat_all({49, 51}, p), 0.43333, 1e-5);
  EXPECT_NEAR(rv::nb_treat_all({17, 83}, p), 0.07778, 1e-5);
  EXPECT_NEAR(rv::nb_treat_all({10, 90}, p), 0.0, 1e-15);
  rv::Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> y(1 + rng.below(300));
    for (auto& v : y) v = rng.bernoulli(0.3) ? 1 : 0;
    const std::vector<double> all(y.size(), 0.99);
    const rv::ThresholdPolicy q{0.05 + 0.9 * rng.uniform()};
    EXPECT_EQ(rv::net_benefit(all, y, q), rv::nb_treat_all(rv::PrevalenceContext::from_labels(y), q));
  }
}

TEST(RelativeUtility, Examples) {
  const rv::PrevalenceContext c{17, 83};
  EXPECT_NEAR(*rv::relative_utility(0.17, rv::nb_treat_all(c, {}), c), 1.0, 1e-12);
  EXPECT_NEAR(*rv::relative_utility(0.07778, 0.07778, c), 0.0, 1e-12);
  EXPECT_NEAR(*rv::relative_utility(0.14778, 0.07778, c), 0.759, 1e-3);
  // Negative treat-all benefit floors at zero.
  const rv::PrevalenceContext rare{5, 95};
  EXPECT_NEAR(*rv::relative_utility(0.02, rv::nb_treat_all(rare, {}), rare), 0.4, 1e-12);
  EXPECT_FALSE(rv::relative_utility(0.1, 0.2, c).has_value());
}

TEST(RiskRange, Examples) {
  EXPECT_EQ(rv::risk_range_95(std::vector<double>(10, 0.3)), 0.0);
  std::vector<double> grid(1001);
  for (int k = 0; k <= 1000; ++k) grid[static_cast<std::size_t>(k)] = k * 0.001;
  EXPECT_NEAR(rv::risk_range_95(grid), 0.95, 1e-12);
  EXPECT_THROW(rv::risk_range_95(std::vector<double>{0.5}), rv::DataError);
}

TEST(RiskRange, MatchesOracleAndIsOrderFree) {
  rv::Rng rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(2 + rng.below(300));
    for (auto& x : v) x = rng.uniform();
    const double r = rv::risk_range_95(v);
    EXPECT_NEAR(r, r95_oracle(v), 1e-12);
    std::reverse(v.begin(), v.end());
    EXPECT_EQ(rv::risk_range_95(v), r);
  }
}

TEST(DecisionUncertainty, Examples) {
  const rv::ThresholdPolicy p;
  std::vector<double> r(100, 0.05);
  std::fill(r.begin(), r.begin() + 30, 0.4);
  EXPECT_DOUBLE_EQ(rv::decision_uncertainty(r, p), 0.3);
  EXPECT_EQ(rv::decision_uncertainty(std::vector<double>(7, 0.2), p), 0.0);
  std::fill(r.begin(), r.begin() + 50, 0.4);
  EXPECT_EQ(rv::decision_uncertainty(r, p), 0.5);
  // Ties at the threshold operate.
  EXPECT_EQ(rv::decision_uncertainty(std::vector<double>{0.1, 0.1, 0.09}, p), 1.0 / 3);
}

TEST(DecisionUncertainty, InvariantToMonotonePerturbationWithinSides) {
  rv::Rng rng(6);
  const rv::ThresholdPolicy p;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + rng.below(100));
    for (auto& x : v) x = rng.uniform() * 0.3;
    const double du = rv::decision_uncertainty(v, p);
    for (auto& x : v) x = x >= 0.1 ? 0.1 + std::sqrt(x - 0.1) * 0.5 : 0.1 * std::pow(x / 0.1, 3.0);
    EXPECT_EQ(rv::decision_uncertainty(v, p), du);
  }
}

namespace {

rv::RiskMatrix random_matrix(std::size_t n, std::size_t j, rv::Seed seed) {
  rv::Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = rng.bernoulli(0.4) ? 1 : 0;
  y[0] = 1;
  y[1] = 0;
  rv::RiskMatrix m(y);
  for (std::size_t c = 0; c < j; ++c) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = std::clamp(0.6 * y[i] + 0.4 * rng.uniform() - 0.1, 0.01, 0.99);
    m.add_column({"s" + std::to_string(c), 0, 400}, r);
  }
  return m;
}

}  // namespace

TEST(RiskMatrixTest, RejectsBadColumns) {
  rv::RiskMatrix m(std::vector<int>{0, 1});
  m.add_column({"a", 0, 400}, std::vector<double>{0.1, 0.2});
  EXPECT_THROW(m.add_column({"a", 0, 400}, std::vector<double>{0.1, 0.2}), rv::DataError);
  EXPECT_THROW(m.add_column({"b", 0, 400}, std::vector<double>{0.1}), rv::DataError);
  EXPECT_THROW(m.add_column({"c", 0, 400}, std::vector<double>{0.1, 1.2}), rv::DataError);
  EXPECT_THROW(rv::RiskMatrix(std::vector<int>{0, 2}), rv::DataError);
}

TEST(Summary, SingletonAndIdenticalColumns) {
  rv::RiskMatrix m(std::vector<int>{0, 1, 0, 1});
  const std::vector<double> r = {0.05, 0.6, 0.2, 0.9};
  m.add_column({"a", 0, 400}, r);
  m.add_column({"a", 1, 400}, r);
  const std::vector<std::size_t> one = {0}, two = {0, 1};
  const auto s1 = rv::summarize(m, one, {}, "estimation", "lr", 400);
  EXPECT_FALSE(s1.r95.has_value());
  EXPECT_EQ(s1.du->max, 0.0);
  const auto s2 = rv::summarize(m, two, {}, "estimation", "lr", 400);
  EXPECT_EQ(s2.r95->max, 0.0);
  EXPECT_EQ(s2.du->max, 0.0);
  EXPECT_EQ(s2.models, 2u);
  EXPECT_THROW(rv::summarize(m, std::vector<std::size_t>{}, {}, "x", "y", 400), rv::DataError);
}

TEST(Summary, ColumnPermutationLeavesSummariesUnchanged) {
  const auto m = random_matrix(60, 25, 7);
  std::vector<std::size_t> cols(25);
  std::iota(cols.begin(), cols.end(), 0);
  const auto a = rv::summarize(m, cols, {}, "all", "all", 400);
  rv::Rng rng(8);
  for (std::size_t k = cols.size() - 1; k > 0; --k) std::swap(cols[k], cols[rng.below(k + 1)]);
  const auto b = rv::summarize(m, cols, {}, "all", "all", 400);
  EXPECT_DOUBLE_EQ(a.r95->centre, b.r95->centre);
  EXPECT_EQ(a.r95->max, b.r95->max);
  EXPECT_DOUBLE_EQ(a.du->centre, b.du->centre);
  EXPECT_DOUBLE_EQ(a.auroc->centre, b.auroc->centre);
  EXPECT_EQ(a.ru->centre, b.ru->centre);
}

TEST(Summary, PrecomputedMetricsMatchOnTheFly) {
  const auto m = random_matrix(50, 8, 9);
  std::vector<rv::ModelMetrics> per;
  for (std::size_t j = 0; j < m.models(); ++j) per.push_back(rv::evaluate_model(m.column(j), m.labels(), {}));
  const std::vector<std::size_t> cols = {1, 3, 5, 7};
  const auto a = rv::summarize(m, cols, {}, "s", "t", 1000);
  const auto b = rv::summarize(m, cols, {}, "s", "t", 1000, per);
  EXPECT_EQ(a.auroc->centre, b.auroc->centre);
  EXPECT_EQ(a.eci->max, b.eci->max);
  EXPECT_EQ(a.ru->min, b.ru->min);
}

TEST(Summary, CsvHasExactHeaderAndBlankMissing) {
  rv::RiskMatrix m(std::vector<int>{0, 1});
  m.add_column({"a", 0, 400}, std::vector<double>{0.2, 0.7});
  const std::vector<rv::SummaryRow> rows = {rv::summarize(m, std::vector<std::size_t>{0}, {}, "model", "lr", 400)};
  std::ostringstream out;
  rv::write_summary_csv(out, rows);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header,
            "source,subset,n_train,J,auroc_mean,auroc_min,auroc_max,eci_mean,eci_min,eci_max,ru_median,ru_min,"
            "ru_max,r95_mean,r95_min,r95_max,du_mean,du_min,du_max");
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 18);
  EXPECT_EQ(line.rfind("model,lr,400,1,1,1,1,", 0), 0u);
  EXPECT_NE(line.find(",,,0,0,0"), std::string::npos);
}
