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

#include "riskverse/learners.hpp"

#include <algorithm>
#include <cmath>

#include "riskverse/error.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

const char* family_name(LearnerFamily f) {
  switch (f) {
    case LearnerFamily::kLogistic: return "logistic";
    case LearnerFamily::kRandomForest: return "random-forest";
    case LearnerFamily::kBoostedTrees: return "boosted-trees";
  }
  return "?";
}

const char* selection_name(Selection s) {
  switch (s) {
    case Selection::kNone: return "none";
    case Selection::kBackward001: return "backward-0.01";
    case Selection::kBackward020: return "backward-0.20";
  }
  return "?";
}

const char* penalty_name(Penalty p) { return p == Penalty::kNone ? "none" : "ridge-aic"; }

double selection_alpha(Selection s) {
  switch (s) {
    case Selection::kNone: return 1.0;
    case Selection::kBackward001: return 0.01;
    case Selection::kBackward020: return 0.20;
  }
  return 1.0;
}

namespace {

const char* handling_token(ContinuousHandling h) {
  switch (h) {
    case ContinuousHandling::kLinear: return "linear";
    case ContinuousHandling::kDichotomizeMedian: return "median";
    case ContinuousHandling::kQuartileCategories: return "quartile";
    case ContinuousHandling::kFractionalPolynomial: return "mfp";
    case ContinuousHandling::kRcs3: return "rcs3";
  }
  return "?";
}

const char* selection_token(Selection s) {
  switch (s) {
    case Selection::kNone: return "none";
    case Selection::kBackward001: return "bw01";
    case Selection::kBackward020: return "bw20";
  }
  return "?";
}

}  // namespace

std::string LearnerSpec::id() const {
  switch (family) {
    case LearnerFamily::kLogistic:
      return std::string("lr_") + handling_token(handling) + "_" + selection_token(selection) + "_" +
             (penalty == Penalty::kNone ? "none" : "ridge");
    case LearnerFamily::kRandomForest:
      return tree_mode == TreeMode::kSmall   ? "rf_node2"
             : tree_mode == TreeMode::kLarge ? "rf_node20"
                                             : "rf_tuned";
    case LearnerFamily::kBoostedTrees:
      return tree_mode == TreeMode::kSmall   ? "xgb_depth2"
             : tree_mode == TreeMode::kLarge ? "xgb_depth20"
                                             : "xgb_tuned";
  }
  return "?";
}

LearnerSpec LearnerSpec::parse(const std::string& id) {
  for (auto h : {ContinuousHandling::kLinear, ContinuousHandling::kDichotomizeMedian,
                 ContinuousHandling::kQuartileCategories, ContinuousHandling::kFractionalPolynomial,
                 ContinuousHandling::kRcs3}) {
    for (auto s : {Selection::kNone, Selection::kBackward001, Selection::kBackward020}) {
      for (auto p : {Penalty::kNone, Penalty::kRidgeAic}) {
        LearnerSpec l;
        l.handling = h;
        l.selection = s;
        l.penalty = p;
        if (l.id() == id) return l;
      }
    }
  }
  for (auto f : {LearnerFamily::kRandomForest, LearnerFamily::kBoostedTrees}) {
    for (auto m : {TreeMode::kSmall, TreeMode::kLarge, TreeMode::kTuned}) {
      LearnerSpec l;
      l.family = f;
      l.tree_mode = m;
      if (l.id() == id) return l;
    }
  }
  throw ConfigError("unknown learner '" + id + "'");
}

void LearnerSpec::validate() const {
  if (family == LearnerFamily::kLogistic && handling == ContinuousHandling::kFractionalPolynomial &&
      penalty == Penalty::kRidgeAic) {
    throw ConfigError("learner " + id() + ": ridge penalty is not combined with fractional polynomials");
  }
}

Eigen::MatrixXd tree_features(const Cohort& cohort, SizeDefinition size) {
  const bool diam = size == SizeDefinition::kDiameter;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cohort.size()), kNumPredictors);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort.records[i];
    if (!r.ca125) throw DataError("tree features: CA125 missing after imputation");
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = r.age;
    x(row, 1) = diam ? r.lesion_dmax : r.lesion_volume;
    x(row, 2) = diam ? r.solid_prop_diam : r.solid_prop_vol;
    x(row, 3) = std::log(*r.ca125);
    x(row, 4) = r.bilateral ? 1.0 : 0.0;
    x(row, 5) = r.papflow ? 1.0 : 0.0;
  }
  return x;
}

namespace {

Eigen::VectorXd labels(const Cohort& c) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.records[i].outcome) throw DataError("training record " + std::to_string(i) + " has no outcome");
    y(static_cast<Eigen::Index>(i)) = *c.records[i].outcome ? 1.0 : 0.0;
  }
  return y;
}

void fit_logistic_part(FittedPipeline& p, const Cohort& imputed, const Eigen::VectorXd& y) {
  const LearnerSpec& l = p.learner;
  p.transform = fit_transform(imputed, {l.handling, p.size});
  std::vector<int> allowed_groups = {0, 1, 2, 3, 4, 5};
  const bool fp = l.handling == ContinuousHandling::kFractionalPolynomial;
  if (fp) {
    MfpOptions mo;
    mo.select_alpha = selection_alpha(l.selection);
    const auto mfp = mfp_fit(p.transform, imputed, mo);
    p.transform = with_fp_powers(p.transform, mfp.powers);
    allowed_groups.clear();
    for (int v = 0; v < kNumContinuous; ++v) {
      if (!mfp.powers[v].empty()) allowed_groups.push_back(v);
    }
    for (int b = 0; b < 2; ++b) {
      if (mfp.binary_included[b]) allowed_groups.push_back(kNumContinuous + b);
    }
    p.diag.converged = mfp.converged;
  }
  const FeatureMatrix fm = apply_transform(p.transform, imputed);

  std::vector<int> cols;
  for (Eigen::Index j = 0; j < fm.cols(); ++j) {
    const int g = fm.group[static_cast<std::size_t>(j)];
    if (std::find(allowed_groups.begin(), allowed_groups.end(), g) == allowed_groups.end()) continue;
    const auto c = fm.x.col(j);
    if (c.maxCoeff() == c.minCoeff()) {
      p.diag.dropped_columns.push_back(fm.names[static_cast<std::size_t>(j)]);
      continue;
    }
    cols.push_back(static_cast<int>(j));
  }

  for (;;) {
    Eigen::MatrixXd z(fm.rows(), static_cast<Eigen::Index>(cols.size()));
    Eigen::VectorXd center(static_cast<Eigen::Index>(cols.size())), scale(center.size());
    std::vector<int> group;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto col = fm.x.col(cols[k]);
      const auto kk = static_cast<Eigen::Index>(k);
      center(kk) = col.mean();
      scale(kk) = std::sqrt((col.array() - center(kk)).square().mean());
      z.col(kk) = (col.array() - center(kk)) / scale(kk);
      group.push_back(fm.group[static_cast<std::size_t>(cols[k])]);
    }
    try {
      std::vector<int> use(cols.size());
      for (std::size_t k = 0; k < cols.size(); ++k) use[k] = static_cast<int>(k);
      if (!fp && l.selection != Selection::kNone) {
        const auto bw = backward_eliminate(z, group, y, selection_alpha(l.selection));
        use = columns_in_groups(group, bw.kept_groups);
      }
      const Eigen::MatrixXd zs = select_columns(z, use);
      double lambda = 0;
      if (l.penalty == Penalty::kRidgeAic) lambda = ridge_aic_tune(zs, y, default_ridge_grid()).lambda;
      const auto fit = fit_logistic_irls(zs, y, lambda);

      p.columns.clear();
      p.column_names.clear();
      p.center.resize(static_cast<Eigen::Index>(use.size()));
      p.scale.resize(p.center.size());
      p.diag.kept_groups.clear();
      for (std::size_t k = 0; k < use.size(); ++k) {
        const int src = cols[static_cast<std::size_t>(use[k])];
        p.columns.push_back(src);
        p.column_names.push_back(fm.names[static_cast<std::size_t>(src)]);
        p.center(static_cast<Eigen::Index>(k)) = center(use[k]);
        p.scale(static_cast<Eigen::Index>(k)) = scale(use[k]);
        const int g = fm.group[static_cast<std::size_t>(src)];
        if (p.diag.kept_groups.empty() || p.diag.kept_groups.back() != g) p.diag.kept_groups.push_back(g);
      }
      p.beta = fit.beta;
      p.diag.ridge_lambda = lambda;
      p.diag.separation = fit.separation;
      p.diag.converged = p.diag.converged && fit.converged;
      p.diag.iterations = fit.iterations;
      return;
    } catch (const CollinearityError& e) {
      // Drop the later column of the offending pair and refit.
      const int bad = e.second();
      if (bad < 0 || bad >= static_cast<int>(cols.size())) throw;
      p.diag.dropped_columns.push_back(fm.names[static_cast<std::size_t>(cols[static_cast<std::size_t>(bad)])]);
      cols.erase(cols.begin() + bad);
    }
  }
}

}  // namespace

FittedPipeline fit_pipeline(const LearnerSpec& learner, SizeDefinition size, const ImputeSpec& impute,
                            const Cohort& train, Seed seed, const ForestOptions& forest_options) {
  learner.validate();
  require_columns(train, {Column::kOutcome}, "fit_pipeline");
  FittedPipeline p;
  p.learner = learner;
  p.size = size;
  p.imputer = fit_imputer(train, impute, size);
  const Cohort imputed = apply_imputer(p.imputer, train, ImputePhase::kTraining);
  const Eigen::VectorXd y = labels(imputed);
  switch (learner.family) {
    case LearnerFamily::kLogistic:
      fit_logistic_part(p, imputed, y);
      break;
    case LearnerFamily::kRandomForest:
      p.forest = std::make_shared<RandomForest>(
          fit_random_forest(tree_features(imputed, size), y, learner.tree_mode, seed, forest_options));
      break;
    case LearnerFamily::kBoostedTrees:
      p.booster = std::make_shared<BoostedTrees>(
          fit_boosted_trees(tree_features(imputed, size), y, learner.tree_mode, seed));
      break;
  }
  return p;
}

std::vector<double> predict_risks(const FittedPipeline& p, const Cohort& cohort) {
  const Cohort ready = apply_imputer(p.imputer, cohort, ImputePhase::kDeployment);
  std::vector<double> out(ready.size());
  if (p.learner.family == LearnerFamily::kLogistic) {
    const FeatureMatrix fm = apply_transform(p.transform, ready);
    for (Eigen::Index i = 0; i < fm.rows(); ++i) {
      double eta = p.beta(0);
      for (std::size_t k = 0; k < p.columns.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        eta += p.beta(kk + 1) * (fm.x(i, p.columns[k]) - p.center(kk)) / p.scale(kk);
      }
      out[static_cast<std::size_t>(i)] = clip_risk(logistic(eta));
    }
    return out;
  }
  const Eigen::MatrixXd x = tree_features(ready, p.size);
  return p.forest ? p.forest->predict(x) : p.booster->predict(x);
}

double predict_risk(const FittedPipeline& p, const PatientRecord& record) {
  Cohort one;
  one.records.push_back(record);
  return predict_risks(p, one).front();
}

nlohmann::json describe_pipeline(const FittedPipeline& p) {
  using nlohmann::json;
  json j;
  j["learner"] = p.learner.id();
  j["size"] = size_definition_name(p.size);
  json imp;
  imp["strategy"] = impute_strategy_name(p.imputer.strategy);
  imp["pooled_median"] = p.imputer.pooled_median;
  if (p.imputer.strategy == ImputeStrategy::kOutcomeConditionalMedian) {
    imp["median_event"] = p.imputer.median_event;
    imp["median_nonevent"] = p.imputer.median_nonevent;
  }
  if (p.imputer.strategy == ImputeStrategy::kRegression) {
    imp["coefficients"] = std::vector<double>(p.imputer.coefficients.data(),
                                              p.imputer.coefficients.data() + p.imputer.coefficients.size());
  }
  j["imputer"] = imp;
  j["flags"] = {{"separation", p.diag.separation}, {"converged", p.diag.converged}};
  if (p.learner.family == LearnerFamily::kLogistic) {
    json vars = json::array();
    for (int v = 0; v < kNumContinuous; ++v) {
      const auto& vt = p.transform.vars[v];
      json o;
      o["name"] = predictor_name(v);
      switch (p.transform.spec.continuous) {
        case ContinuousHandling::kLinear: break;
        case ContinuousHandling::kDichotomizeMedian: o["median"] = vt.median; break;
        case ContinuousHandling::kQuartileCategories: o["cuts"] = vt.cuts; break;
        case ContinuousHandling::kRcs3: o["knots"] = {vt.knots.t1, vt.knots.t2, vt.knots.t3}; break;
        case ContinuousHandling::kFractionalPolynomial:
          o["powers"] = vt.fp_powers;
          o["shift"] = vt.fp_shift;
          o["scale"] = vt.fp_scale;
          break;
      }
      vars.push_back(o);
    }
    j["transform"] = {{"handling", handling_name(p.transform.spec.continuous)}, {"variables", vars}};
    j["columns"] = p.column_names;
    j["center"] = std::vector<double>(p.center.data(), p.center.data() + p.center.size());
    j["scale"] = std::vector<double>(p.scale.data(), p.scale.data() + p.scale.size());
    j["beta"] = std::vector<double>(p.beta.data(), p.beta.data() + p.beta.size());
    j["ridge_lambda"] = p.diag.ridge_lambda;
    j["kept_groups"] = p.diag.kept_groups;
    j["dropped_columns"] = p.diag.dropped_columns;
    j["iterations"] = p.diag.iterations;
  } else if (p.forest) {
    j["forest"] = {{"trees", p.forest->params.trees},
                   {"min_node", p.forest->params.min_node},
                   {"sample_fraction", p.forest->params.sample_fraction},
                   {"mtry", p.forest->params.mtry}};
  } else if (p.booster) {
    j["boosting"] = {{"max_depth", p.booster->params.max_depth},
                     {"eta", p.booster->params.eta},
                     {"subsample", p.booster->params.subsample},
                     {"rounds", p.booster->trees.size()},
                     {"base_score", p.booster->base_score}};
  }
  return j;
}

}  // namespace riskverse
