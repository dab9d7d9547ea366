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

#include <cmath>
#include <numeric>

#include "riskverse/data_model.hpp"
#include "riskverse/error.hpp"
#include "riskverse/learners.hpp"
#include "riskverse/stats.hpp"

namespace rv = riskverse;

namespace {

struct Xy {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Generator predictors on the scale of the outcome model.
Xy generator_design(const rv::Cohort& c) {
  Xy d;
  d.x.resize(static_cast<Eigen::Index>(c.size()), 6);
  d.y.resize(d.x.rows());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& r = c.records[i];
    const auto k = static_cast<Eigen::Index>(i);
    d.x.row(k) << r.age, std::log(r.lesion_dmax), r.solid_prop_diam, r.bilateral ? 1.0 : 0.0,
        r.papflow ? 1.0 : 0.0, std::log(*r.ca125);
    d.y(k) = *r.outcome ? 1.0 : 0.0;
  }
  return d;
}

rv::Cohort complete(const rv::GeneratorSpec& base, std::size_t n, rv::Seed seed) {
  auto spec = base;
  spec.ca125_missing_rate = 0.0;
  return rv::generate_reference_cohort(spec, n, seed);
}

Xy noise_data(int n, int p, rv::Seed seed, double signal_age = 0.0) {
  rv::Rng rng(seed);
  Xy d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = rng.bernoulli(rv::logistic(-0.3 + signal_age * d.x(i, 0))) ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

TEST(Irls, InterceptOnlyIsLogitOfMean) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  y.head(37).setOnes();
  const auto fit = rv::fit_logistic_irls(Eigen::MatrixXd(100, 0), y);
  EXPECT_NEAR(fit.beta(0), std::log(0.37 / 0.63), 1e-10);
  EXPECT_NEAR(fit.beta(0), -0.5322, 1e-4);
  EXPECT_NEAR(fit.df_effective, 1.0, 1e-12);
}

TEST(Irls, HugePenaltyShrinksToInterceptOnly) {
  const auto d = noise_data(400, 4, 3, 1.0);
  const auto fit = rv::fit_logistic_irls(d.x, d.y, 1e12);
  EXPECT_LT(fit.beta.tail(4).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(fit.beta(0), rv::logit(d.y.mean()), 1e-4);
}

TEST(Irls, ScoreEquationsAndMonotoneDeviance) {
  for (rv::Seed seed = 1; seed <= 5; ++seed) {
    const auto d = generator_design(complete(rv::leuven_preset(), 1500, seed));
    const auto fit = rv::fit_logistic_irls(d.x, d.y);
    ASSERT_FALSE(fit.separation);
    ASSERT_TRUE(fit.converged);
    Eigen::VectorXd p(d.y.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rv::logistic(fit.linear_predictor(d.x.row(i)));
    EXPECT_LE(std::abs((d.y - p).sum()), 1e-6);
    EXPECT_LE((d.x.transpose() * (d.y - p)).cwiseAbs().maxCoeff(), 1e-6);
    for (std::size_t k = 1; k < fit.deviance_trace.size(); ++k) {
      EXPECT_LE(fit.deviance_trace[k], fit.deviance_trace[k - 1]);
    }
  }
}

TEST(Irls, PenalizedDevianceMonotoneWithRidge) {
  const auto d = noise_data(300, 5, 9, 0.8);
  const auto fit = rv::fit_logistic_irls(d.x, d.y, 3.0);
  for (std::size_t k = 1; k < fit.deviance_trace.size(); ++k) {
    EXPECT_LE(fit.deviance_trace[k], fit.deviance_trace[k - 1]);
  }
  const double pen = fit.beta.tail(5).squaredNorm() * 2 * 3.0;
  EXPECT_NEAR(fit.penalized_deviance, fit.deviance + pen, 1e-8 * fit.penalized_deviance);
}

TEST(Irls, RecoversGeneratorCoefficientsAtHundredThousand) {
  const auto spec = rv::leuven_preset();
  const auto d = generator_design(complete(spec, 100000, 20240607));
  const auto fit = rv::fit_logistic_irls(d.x, d.y);
  const auto& o = spec.outcome;
  const double truth[] = {o.intercept, o.age, o.log_dmax, o.solid_prop, o.bilateral, o.papflow, o.log_ca125};
  for (int k = 0; k < 7; ++k) {
    EXPECT_NEAR(fit.beta(k), truth[k], 0.05 * std::abs(truth[k])) << "coefficient " << k;
  }
}

TEST(Irls, SingleClassRejected) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  EXPECT_THROW(rv::fit_logistic_irls(x, Eigen::VectorXd::Zero(10)), rv::FitError);
}

TEST(Irls, CollinearityReportsPair) {
  auto d = noise_data(200, 3, 5, 1.0);
  Eigen::MatrixXd x(200, 4);
  x << d.x, 2.0 * d.x.col(1);
  try {
    rv::fit_logistic_irls(x, d.y);
    FAIL();
  } catch (const rv::CollinearityError& e) {
    EXPECT_EQ(e.first(), 1);
    EXPECT_EQ(e.second(), 3);
  }
  x.col(3).setConstant(2.0);
  try {
    rv::fit_logistic_irls(x, d.y);
    FAIL();
  } catch (const rv::CollinearityError& e) {
    EXPECT_EQ(e.first(), -1);
    EXPECT_EQ(e.second(), 3);
  }
}

TEST(Irls, SeparationFlagged) {
  Eigen::MatrixXd x(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i;
    y(i) = i >= 20 ? 1 : 0;
  }
  const auto fit = rv::fit_logistic_irls(x, y);
  EXPECT_TRUE(fit.separation);
}

TEST(Ridge, SingleValueGrid) {
  const auto d = noise_data(200, 3, 1);
  EXPECT_EQ(rv::ridge_aic_tune(d.x, d.y, {0.7}).lambda, 0.7);
}

TEST(Ridge, DfAtZeroIsColumnCountPlusIntercept) {
  const auto d = noise_data(300, 5, 2);
  EXPECT_NEAR(rv::fit_logistic_irls(d.x, d.y, 0.0).df_effective, 6.0, 1e-9);
}

TEST(Ridge, PureNoiseTunesToBruteForceAicMinimum) {
  const auto grid = rv::default_ridge_grid();
  int at_max = 0;
  for (rv::Seed seed = 1; seed <= 10; ++seed) {
    const auto d = noise_data(500, 5, seed);
    const auto t = rv::ridge_aic_tune(d.x, d.y, grid);
    double best = 1e300, arg = -1;
    for (double l : grid) {
      const auto f = rv::fit_logistic_irls(d.x, d.y, l);
      const double aic = f.deviance + 2 * f.df_effective;
      if (aic <= best) {
        best = aic;
        arg = l;
      }
    }
    EXPECT_EQ(t.lambda, arg);
    at_max += t.lambda == grid.back() ? 1 : 0;
    if (seed == 1) EXPECT_EQ(t.lambda, grid.back());
  }
  // Chance fit in noise columns moves a minority of samples off the maximum.
  EXPECT_GE(at_max, 6);
}

TEST(Ridge, EmptyGridRejected) {
  const auto d = noise_data(50, 2, 4);
  EXPECT_THROW(rv::ridge_aic_tune(d.x, d.y, {}), rv::FitError);
}

TEST(Backward, AlphaOneKeepsEverythingAlphaZeroDropsNoise) {
  const auto d = noise_data(400, 6, 12);
  const std::vector<int> g = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(rv::backward_eliminate(d.x, g, d.y, 1.0).kept_groups.size(), 6u);
  EXPECT_TRUE(rv::backward_eliminate(d.x, g, d.y, 0.0).kept_groups.empty());
}

TEST(Backward, StrongAgeEffectRetainedNoiseRemoved) {
  const auto d = noise_data(2000, 6, 21, 1.2);
  const std::vector<int> g = {0, 1, 2, 3, 4, 5};
  const auto r = rv::backward_eliminate(d.x, g, d.y, 0.01);
  ASSERT_FALSE(r.kept_groups.empty());
  EXPECT_EQ(r.kept_groups.front(), 0);
  EXPECT_GE(r.removed_groups.size(), 3u);
}

TEST(Backward, GroupsDroppedTogetherAndOrderInvariant) {
  const auto d = noise_data(800, 6, 33, 0.9);
  // Two columns per group for groups 0..2.
  const std::vector<int> g = {0, 0, 1, 1, 2, 2};
  const auto r = rv::backward_eliminate(d.x, g, d.y, 0.05);
  // Reverse the column order and relabel nothing: same groups survive.
  Eigen::MatrixXd xr = d.x.rowwise().reverse();
  const std::vector<int> gr(g.rbegin(), g.rend());
  const auto r2 = rv::backward_eliminate(xr, gr, d.y, 0.05);
  EXPECT_EQ(r.kept_groups, r2.kept_groups);
  EXPECT_EQ(r.removed_groups, r2.removed_groups);
  EXPECT_EQ(r.kept_groups.front(), 0);
}

namespace {

// Cohort with the outcome replaced by a model in the named base variables.
rv::Cohort relabel(rv::Cohort c, rv::Seed seed, double age_slope, double ca_slope) {
  rv::Rng rng(seed);
  for (auto& r : c.records) {
    const double eta = -0.5 + age_slope * (r.age - 50.0) + ca_slope * (std::log(*r.ca125) - 3.5);
    r.outcome = rng.bernoulli(rv::logistic(eta));
  }
  return c;
}

}  // namespace

TEST(Mfp, LinearAgeEffectSelectedAsLinear) {
  int linear = 0;
  for (rv::Seed rep = 0; rep < 20; ++rep) {
    const auto c = relabel(complete(rv::leuven_preset(), 5000, 100 + rep), 500 + rep, 0.05, 0.0);
    const auto t = rv::fit_transform(c, {rv::ContinuousHandling::kFractionalPolynomial, rv::SizeDefinition::kDiameter});
    const auto m = rv::mfp_fit(t, c);
    linear += m.powers[rv::kPredAge] == std::vector<double>{1.0} ? 1 : 0;
  }
  EXPECT_GE(linear, 18);
}

TEST(Mfp, IndependentVariableEliminated) {
  int eliminated = 0;
  for (rv::Seed rep = 0; rep < 20; ++rep) {
    const auto c = relabel(complete(rv::leuven_preset(), 2000, 200 + rep), 700 + rep, 0.05, 0.6);
    const auto t = rv::fit_transform(c, {rv::ContinuousHandling::kFractionalPolynomial, rv::SizeDefinition::kDiameter});
    const auto m = rv::mfp_fit(t, c);
    eliminated += m.powers[rv::kPredSize].empty() ? 1 : 0;
  }
  EXPECT_GE(eliminated, 17);
}

TEST(Mfp, NoSelectionKeepsEveryVariable) {
  const auto c = relabel(complete(rv::leuven_preset(), 1000, 17), 4, 0.05, 0.0);
  const auto t = rv::fit_transform(c, {rv::ContinuousHandling::kFractionalPolynomial, rv::SizeDefinition::kDiameter});
  rv::MfpOptions o;
  o.select_alpha = 1.0;
  const auto m = rv::mfp_fit(t, c, o);
  for (const auto& p : m.powers) EXPECT_FALSE(p.empty());
  EXPECT_TRUE(m.binary_included[0] && m.binary_included[1]);
}

TEST(Mfp, CurvedEffectGetsNonlinearPowers) {
  auto c = complete(rv::leuven_preset(), 5000, 18);
  rv::Rng rng(6);
  for (auto& r : c.records) {
    const double lc = std::log(*r.ca125);
    r.outcome = rng.bernoulli(rv::logistic(-1.0 + 0.15 * (lc - 3.5) * (lc - 3.5)));
  }
  const auto t = rv::fit_transform(c, {rv::ContinuousHandling::kFractionalPolynomial, rv::SizeDefinition::kDiameter});
  const auto m = rv::mfp_fit(t, c);
  EXPECT_NE(m.powers[rv::kPredCa125], std::vector<double>{1.0});
  EXPECT_FALSE(m.powers[rv::kPredCa125].empty());
}

// ---------------------------------------------------------------------------

TEST(Forest, PureDuplicatedPatternsGiveClippedRisks) {
  Eigen::MatrixXd x(40, 2);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i % 2;
    x(i, 1) = 3.0;
    y(i) = i % 2;
  }
  rv::ForestParams p;
  p.trees = 50;
  p.mtry = 2;
  const auto rf = rv::fit_random_forest_params(x, y, p, 1);
  const auto r = rf.predict(x);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(r[static_cast<std::size_t>(i)], i % 2 ? 1 - 1e-6 : 1e-6);
}

TEST(Forest, LargerNodeSizeHasFewerLeaves) {
  const auto d = generator_design(complete(rv::leuven_preset(), 400, 3));
  rv::ForestParams small, large;
  small.trees = large.trees = 20;
  large.min_node = 20;
  const auto a = rv::fit_random_forest_params(d.x, d.y, small, 4);
  const auto b = rv::fit_random_forest_params(d.x, d.y, large, 4);
  for (int t = 0; t < 20; ++t) EXPECT_LT(b.trees[t].leaf_count(20), a.trees[t].leaf_count(2));
}

TEST(Forest, PrunedTraversalMatchesGrowingWithLargerNodeSize) {
  const auto d = generator_design(complete(rv::leuven_preset(), 500, 5));
  rv::ForestParams p2, p10;
  p2.trees = p10.trees = 10;
  p10.min_node = 10;
  const auto a = rv::fit_random_forest_params(d.x, d.y, p2, 8);
  const auto b = rv::fit_random_forest_params(d.x, d.y, p10, 8);
  const int stride = static_cast<int>(d.x.rows());
  for (int t = 0; t < 10; ++t) {
    EXPECT_EQ(a.trees[t].leaf_count(10), b.trees[t].leaf_count(0));
    for (int i = 0; i < 50; ++i) {
      EXPECT_EQ(a.trees[t].leaf(d.x.data() + i, stride, 10).value, b.trees[t].leaf(d.x.data() + i, stride).value);
    }
  }
}

TEST(Forest, PredictionIsExactMeanOfTrees) {
  const auto d = generator_design(complete(rv::leuven_preset(), 300, 6));
  const auto rf = rv::fit_random_forest(d.x, d.y, rv::TreeMode::kSmall, 2);
  EXPECT_EQ(rf.trees.size(), 500u);
  const int stride = static_cast<int>(d.x.rows());
  for (int i = 0; i < 10; ++i) {
    double s = 0;
    for (std::size_t t = 0; t < rf.trees.size(); ++t) s += rf.tree_prediction(t, d.x.data() + i, stride);
    EXPECT_EQ(rf.predict(d.x.data() + i, stride), rv::clip_risk(s / 500.0));
  }
}

TEST(Forest, TunedNoWorseThanDefaultOnValidation) {
  const auto train = generator_design(complete(rv::leuven_preset(), 600, 40));
  const auto val = generator_design(complete(rv::leuven_preset(), 3000, 41));
  const auto tuned = rv::fit_random_forest(train.x, train.y, rv::TreeMode::kTuned, 3);
  const auto plain = rv::fit_random_forest(train.x, train.y, rv::TreeMode::kSmall, 3);
  EXPECT_LE(rv::mean_log_loss(tuned.predict(val.x), val.y), rv::mean_log_loss(plain.predict(val.x), val.y) + 0.01);
}

TEST(Forest, SingleClassRejected) {
  EXPECT_THROW(rv::fit_random_forest(Eigen::MatrixXd::Random(10, 2), Eigen::VectorXd::Ones(10), rv::TreeMode::kSmall, 1),
               rv::FitError);
}

TEST(Boosting, GradientMatchesFiniteDifferences) {
  rv::Rng rng(77);
  for (int k = 0; k < 200; ++k) {
    const double m = 12.0 * (rng.uniform() - 0.5);
    const double y = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double h = 1e-5;
    const double fd = (rv::logistic_loss(y, m + h) - rv::logistic_loss(y, m - h)) / (2 * h);
    const double g = rv::logistic_gradient(y, m);
    EXPECT_LE(std::abs(fd - g), 1e-6 * std::max(1.0, std::abs(g))) << m;
    const double fd2 = (rv::logistic_gradient(y, m + h) - rv::logistic_gradient(y, m - h)) / (2 * h);
    EXPECT_NEAR(fd2, rv::logistic_hessian(m), 1e-6);
  }
}

TEST(Boosting, ZeroEtaPredictsBaseScore) {
  const auto d = generator_design(complete(rv::leuven_preset(), 400, 9));
  rv::BoostParams p;
  p.eta = 0.0;
  const auto b = rv::fit_boosted_params(d.x, d.y, p, 1);
  const auto r = b.predict(d.x);
  for (double v : r) EXPECT_DOUBLE_EQ(v, rv::logistic(b.base_score));
}

TEST(Boosting, StumpsLearnThresholdRule) {
  rv::Rng rng(5);
  const int n = 2000;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 18 + 70 * rng.uniform();
    x(i, 1) = rng.normal();
    y(i) = x(i, 0) > 55 ? 1 : 0;
  }
  rv::BoostParams p;
  p.max_depth = 1;
  p.eta = 0.3;
  const auto b = rv::fit_boosted_params(x, y, p, 2);
  Eigen::MatrixXd xv(500, 2);
  Eigen::VectorXd yv(500);
  for (int i = 0; i < 500; ++i) {
    xv(i, 0) = 18 + 70 * rng.uniform();
    xv(i, 1) = rng.normal();
    yv(i) = xv(i, 0) > 55 ? 1 : 0;
  }
  EXPECT_LT(rv::mean_log_loss(b.predict(xv), yv), 0.1);
}

TEST(Boosting, TrainingLossNonIncreasing) {
  const auto d = generator_design(complete(rv::leuven_preset(), 800, 10));
  rv::BoostParams p;
  p.max_depth = 3;
  p.holdout_fraction = 0;
  p.max_rounds = 100;
  const auto b = rv::fit_boosted_params(d.x, d.y, p, 3);
  ASSERT_EQ(b.train_loss.size(), 100u);
  for (std::size_t k = 1; k < b.train_loss.size(); ++k) EXPECT_LE(b.train_loss[k], b.train_loss[k - 1] + 1e-15);
}

TEST(Boosting, TunedModesFitAndPredictInRange) {
  const auto d = generator_design(complete(rv::leuven_preset(), 300, 11));
  for (auto mode : {rv::TreeMode::kSmall, rv::TreeMode::kLarge, rv::TreeMode::kTuned}) {
    const auto b = rv::fit_boosted_trees(d.x, d.y, mode, 4);
    if (mode == rv::TreeMode::kSmall) EXPECT_EQ(b.params.max_depth, 2);
    if (mode == rv::TreeMode::kLarge) EXPECT_EQ(b.params.max_depth, 20);
    for (double r : b.predict(d.x)) {
      EXPECT_GE(r, 1e-6);
      EXPECT_LE(r, 1 - 1e-6);
    }
  }
}

// ---------------------------------------------------------------------------

TEST(LearnerSpec, RidgeWithFpInvalidAndIdsRoundTrip) {
  rv::LearnerSpec l;
  l.handling = rv::ContinuousHandling::kFractionalPolynomial;
  l.penalty = rv::Penalty::kRidgeAic;
  EXPECT_THROW(l.validate(), rv::ConfigError);
  for (const char* id : {"lr_rcs3_none_none", "lr_quartile_bw20_ridge", "lr_mfp_bw01_none", "rf_tuned", "xgb_depth20"}) {
    EXPECT_EQ(rv::LearnerSpec::parse(id).id(), id);
  }
  EXPECT_THROW(rv::LearnerSpec::parse("svm"), rv::ConfigError);
}

TEST(Pipeline, LinearRiskMatchesHandComputation) {
  const auto train = rv::generate_reference_cohort(rv::leuven_preset(), 600, 12);
  rv::LearnerSpec l;
  l.handling = rv::ContinuousHandling::kLinear;
  const auto p = rv::fit_pipeline(l, rv::SizeDefinition::kDiameter, {}, train, 1);
  ASSERT_EQ(p.columns.size(), 6u);
  rv::PatientRecord r;
  r.age = 62;
  r.lesion_dmax = 85;
  r.lesion_volume = 150;
  r.solid_prop_diam = 0.35;
  r.solid_prop_vol = 0.2;
  r.ca125 = 80;
  r.bilateral = true;
  r.papflow = false;
  const double raw[] = {62, std::log(85.0), 0.35, std::log(80.0), 1, 0};
  double eta = p.beta(0);
  for (int k = 0; k < 6; ++k) eta += p.beta(k + 1) * (raw[p.columns[static_cast<std::size_t>(k)]] - p.center(k)) / p.scale(k);
  EXPECT_NEAR(rv::predict_risk(p, r), 1.0 / (1.0 + std::exp(-eta)), 1e-12);
  EXPECT_EQ(rv::predict_risk(p, r), rv::predict_risk(p, r));
}

TEST(Pipeline, ObservedCa125NotImputed) {
  const auto train = rv::generate_reference_cohort(rv::leuven_preset(), 400, 13);
  const auto p = rv::fit_pipeline({}, rv::SizeDefinition::kDiameter, {rv::ImputeStrategy::kUnconditionalMedian}, train, 1);
  auto r = train.records[0];
  r.ca125 = 1234.5;
  auto m = r;
  m.ca125.reset();
  auto filled = r;
  filled.ca125 = p.imputer.pooled_median;
  EXPECT_NE(rv::predict_risk(p, r), rv::predict_risk(p, m));
  EXPECT_EQ(rv::predict_risk(p, m), rv::predict_risk(p, filled));
}

TEST(Pipeline, EveryLearnerProducesClippedRisks) {
  const auto all = rv::generate_reference_cohort(rv::rome_preset(), 500, 14);
  const auto split = rv::split_fixed_test(all, 100, 3);
  const std::vector<std::string> ids = {"lr_linear_none_none", "lr_median_bw01_ridge", "lr_quartile_bw20_none",
                                        "lr_mfp_bw20_none", "lr_rcs3_none_ridge", "rf_node20", "xgb_depth2"};
  for (const auto& id : ids) {
    for (auto size : {rv::SizeDefinition::kDiameter, rv::SizeDefinition::kVolume}) {
      const auto p = rv::fit_pipeline(rv::LearnerSpec::parse(id), size, {rv::ImputeStrategy::kOutcomeConditionalMedian},
                                      split.train_pool, 5);
      const auto r = rv::predict_risks(p, split.test);
      ASSERT_EQ(r.size(), 100u);
      for (double v : r) {
        EXPECT_GE(v, 1e-6) << id;
        EXPECT_LE(v, 1 - 1e-6) << id;
      }
      EXPECT_FALSE(rv::describe_pipeline(p).dump().empty());
    }
  }
}

TEST(Pipeline, SingleClassTrainingSampleFails) {
  auto train = rv::generate_reference_cohort(rv::leuven_preset(), 50, 15);
  for (auto& r : train.records) r.outcome = false;
  EXPECT_THROW(rv::fit_pipeline({}, rv::SizeDefinition::kDiameter, {}, train, 1), rv::FitError);
}
