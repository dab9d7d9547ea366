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

#include <filesystem>
#include <map>
#include <sstream>

#include "riskverse/error.hpp"
#include "riskverse/report.hpp"

namespace rv = riskverse;
namespace fs = std::filesystem;

namespace {

rv::RunConfig tiny(std::vector<std::string> learners, std::vector<std::string> pops, int replicates) {
  rv::RunConfig c = rv::full_config();
  c.grid.learners.clear();
  for (const auto& id : learners) c.grid.learners.push_back(rv::LearnerSpec::parse(id));
  c.grid.size_definitions = {rv::SizeDefinition::kDiameter};
  c.grid.imputations = {rv::ImputeStrategy::kRegression};
  c.grid.populations = pops;
  for (auto& s : c.sources) s.synthesize = 0;
  c.train_sizes = {300, 1200};
  c.replicates = replicates;
  c.forest.trees = 20;
  c.workers = 1;
  return c;
}

class ReportTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "riskverse_report_store";
    fs::remove_all(dir_);
    rv::run_all(tiny({"lr_rcs3_none_none", "lr_linear_none_none", "rf_node20"}, {"leuven", "rome"}, 3), dir_);
    store_ = new rv::ResultStore(rv::load_store(dir_));
  }
  static void TearDownTestSuite() {
    delete store_;
    fs::remove_all(dir_);
  }
  static inline fs::path dir_;
  static inline rv::ResultStore* store_ = nullptr;
};

}  // namespace

TEST_F(ReportTest, HeadlineRowsPairEstimationWithAll) {
  const auto rows = rv::headline_rows(*store_);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].source, "estimation");
  EXPECT_EQ(rows[0].n_train, 300);
  EXPECT_EQ(rows[0].models, 3u);
  EXPECT_EQ(rows[1].source, "all");
  EXPECT_EQ(rows[1].models, 18u);
  EXPECT_EQ(rows[3].n_train, 1200);
}

TEST_F(ReportTest, SourceRowsSkipUnsupportedViews) {
  std::vector<std::string> skipped;
  const auto rows = rv::source_rows(
      *store_, {rv::Source::kModel, rv::Source::kData, rv::Source::kPopulation}, &skipped);
  ASSERT_EQ(skipped.size(), 1u);  // one data variation only
  EXPECT_NE(skipped[0].find("data"), std::string::npos);
  EXPECT_EQ(rows.size(), 2u * 3 + 2u);
}

TEST_F(ReportTest, PlotPointCountIsPatientsTimesModels) {
  for (auto v : {rv::Source::kEstimation, rv::Source::kModel, rv::Source::kPopulation, rv::Source::kAll}) {
    const auto d = rv::plot_data(*store_, v, 300);
    EXPECT_EQ(d.points.size(), 100u * d.models);
    std::ostringstream csv;
    rv::write_plot_csv(csv, d);
    const std::string text = csv.str();
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 1 + d.points.size());
  }
  EXPECT_EQ(rv::plot_data(*store_, rv::Source::kEstimation, 300).models, 3u);
  EXPECT_EQ(rv::plot_data(*store_, rv::Source::kAll, 1200).models, 18u);
}

TEST_F(ReportTest, PatientsOrderedByMeanRiskUnderAllView) {
  const auto all = rv::plot_data(*store_, rv::Source::kAll, 300);
  std::vector<double> sum(all.patients, 0.0);
  std::vector<std::size_t> patient_at(all.patients + 1);
  for (const auto& p : all.points) {
    sum[p.rank - 1] += p.risk;
    patient_at[p.rank] = p.patient;
  }
  for (std::size_t r = 1; r < all.patients; ++r) EXPECT_LE(sum[r - 1], sum[r] + 1e-12);
  // Every view shares the x-axis.
  const auto est = rv::plot_data(*store_, rv::Source::kEstimation, 300);
  for (const auto& p : est.points) EXPECT_EQ(p.patient, patient_at[p.rank]);
}

TEST_F(ReportTest, EmissionIsBytewiseRepeatableAndSelfContained) {
  const auto d = rv::plot_data(*store_, rv::Source::kAll, 300);
  std::ostringstream a, b, c, e;
  rv::write_plot_svg(a, d);
  rv::write_plot_svg(b, rv::plot_data(rv::load_store(dir_), rv::Source::kAll, 300));
  EXPECT_EQ(a.str(), b.str());
  rv::write_plot_csv(c, d);
  rv::write_plot_csv(e, d);
  EXPECT_EQ(c.str(), e.str());
  const std::string svg = a.str();
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_EQ(svg.find("<image"), std::string::npos);
  EXPECT_EQ(svg.find("<script"), std::string::npos);
  EXPECT_NE(svg.find("ordered by mean risk"), std::string::npos);
  std::size_t circles = 0;
  for (auto at = svg.find("<circle"); at != std::string::npos; at = svg.find("<circle", at + 1)) ++circles;
  EXPECT_EQ(circles, d.points.size());
}

TEST(Report, SingleModelStoreHasNoVerticalSpread) {
  const fs::path dir = fs::temp_directory_path() / "riskverse_single_model";
  fs::remove_all(dir);
  auto c = tiny({"lr_linear_none_none"}, {"leuven"}, 1);
  c.train_sizes = {500};
  rv::run_all(c, dir);
  const auto st = rv::load_store(dir);
  const auto d = rv::plot_data(st, rv::Source::kAll, 500);
  ASSERT_EQ(d.models, 1u);
  std::map<std::size_t, std::vector<double>> by_rank;
  for (const auto& p : d.points) by_rank[p.rank].push_back(p.risk);
  for (const auto& [rank, risks] : by_rank) {
    EXPECT_EQ(*std::max_element(risks.begin(), risks.end()), *std::min_element(risks.begin(), risks.end()));
  }
  const auto rows = rv::headline_rows(st);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].r95.has_value());
  EXPECT_THROW(rv::decompose(st, rv::Source::kModel, rv::store_policy(st)), rv::DataError);
  fs::remove_all(dir);
}
