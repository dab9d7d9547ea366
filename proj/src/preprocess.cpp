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

#include "riskverse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "riskverse/error.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

namespace {

std::vector<double> column_values(const Cohort& c, int var, SizeDefinition size) {
  std::vector<double> v;
  v.reserve(c.size());
  for (const auto& r : c.records) v.push_back(base_continuous(r, size)[var]);
  return v;
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

std::string fp_power_label(double p) {
  if (p == 0.0) return "log";
  std::ostringstream os;
  os << p;
  return os.str();
}

[[noreturn]] void degenerate(int var, const char* handling) {
  throw DataError("fit_transform: variable '" + predictor_name(var) +
                  "' is degenerate (all training values equal) under " + handling + " handling");
}

}  // namespace

const char* handling_name(ContinuousHandling h) {
  switch (h) {
    case ContinuousHandling::kLinear: return "linear";
    case ContinuousHandling::kDichotomizeMedian: return "dichotomize-median";
    case ContinuousHandling::kQuartileCategories: return "quartile-categories";
    case ContinuousHandling::kFractionalPolynomial: return "fractional-polynomial";
    case ContinuousHandling::kRcs3: return "rcs-3-knots";
  }
  return "?";
}

const char* size_definition_name(SizeDefinition s) {
  return s == SizeDefinition::kDiameter ? "diameter" : "volume";
}

const char* impute_strategy_name(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::kRegression: return "regression";
    case ImputeStrategy::kOutcomeConditionalMedian: return "outcome-conditional-median";
    case ImputeStrategy::kUnconditionalMedian: return "unconditional-median";
  }
  return "?";
}

std::string predictor_name(int predictor) {
  static constexpr std::array<const char*, kNumPredictors> names = {
      "age", "size", "solid", "log_ca125", "bilateral", "papflow"};
  return names.at(static_cast<std::size_t>(predictor));
}

double size_log_offset(SizeDefinition size) {
  return size == SizeDefinition::kVolume ? 1.0 : 0.0;
}

std::array<double, kNumContinuous> base_continuous(const PatientRecord& r, SizeDefinition size) {
  if (!r.ca125) throw DataError("CA125 missing; imputation must run before feature construction");
  const bool diam = size == SizeDefinition::kDiameter;
  const double raw_size = diam ? r.lesion_dmax : r.lesion_volume;
  return {r.age, std::log(raw_size + size_log_offset(size)),
          diam ? r.solid_prop_diam : r.solid_prop_vol, std::log(*r.ca125)};
}

std::pair<double, double> rcs_basis(double x, const RcsKnots& k) {
  if (!(k.t1 < k.t2 && k.t2 < k.t3)) {
    throw DataError("rcs_basis: knots must be strictly increasing");
  }
  auto cube = [](double v) { return v > 0 ? v * v * v : 0.0; };
  const double nonlinear = cube(x - k.t1) - cube(x - k.t2) * (k.t3 - k.t1) / (k.t3 - k.t2) +
                           cube(x - k.t3) * (k.t2 - k.t1) / (k.t3 - k.t2);
  return {x, nonlinear / ((k.t3 - k.t1) * (k.t3 - k.t1))};
}

double fp_term(double x, double power) {
  return power == 0.0 ? std::log(x) : std::pow(x, power);
}

double fp_argument(const VariableTransform& v, double base_value) {
  return std::max(base_value + v.fp_shift, v.fp_floor) / v.fp_scale;
}

FittedTransform fit_transform(const Cohort& train, const TransformSpec& spec) {
  if (train.empty()) throw DataError("fit_transform: empty training cohort");
  const bool diam = spec.size == SizeDefinition::kDiameter;
  require_columns(train,
                  {Column::kAge, diam ? Column::kLesionDmax : Column::kLesionVolume,
                   diam ? Column::kSolidPropDiam : Column::kSolidPropVol, Column::kCa125},
                  "fit_transform");
  FittedTransform t;
  t.spec = spec;
  for (int var = 0; var < kNumContinuous; ++var) {
    auto& vt = t.vars[var];
    vt.log_offset = var == kPredSize ? size_log_offset(spec.size) : 0.0;
    auto values = column_values(train, var, spec.size);
    std::sort(values.begin(), values.end());
    const bool constant = values.front() == values.back();
    switch (spec.continuous) {
      case ContinuousHandling::kLinear:
        break;
      case ContinuousHandling::kDichotomizeMedian: {
        if (constant) degenerate(var, "dichotomize-median");
        vt.median = quantile_sorted(values, 0.5);
        vt.strict_upper = vt.median <= values.front();
        break;
      }
      case ContinuousHandling::kQuartileCategories: {
        if (constant) degenerate(var, "quartile-categories");
        std::vector<double> cuts = {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
                                    quantile_sorted(values, 0.75)};
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        // A cut at the maximum would leave its upper category empty.
        while (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();
        vt.cuts = cuts;
        break;
      }
      case ContinuousHandling::kRcs3: {
        if (constant) degenerate(var, "rcs-3-knots");
        std::vector<double> knots = {quantile_sorted(values, 0.10), quantile_sorted(values, 0.50),
                                     quantile_sorted(values, 0.90)};
        if (!strictly_increasing(knots)) {
          // Heavy ties: place knots on the distinct values instead.
          const auto u = sorted_unique(values);
          if (u.size() < 3) degenerate(var, "rcs-3-knots (fewer than 3 distinct values)");
          knots = {quantile_sorted(u, 0.10), quantile_sorted(u, 0.50), quantile_sorted(u, 0.90)};
        }
        vt.knots = {knots[0], knots[1], knots[2]};
        break;
      }
      case ContinuousHandling::kFractionalPolynomial: {
        if (constant) degenerate(var, "fractional-polynomial");
        const auto u = sorted_unique(values);
        if (u.front() <= 0.0) {
          double gap = std::numeric_limits<double>::infinity();
          for (std::size_t i = 1; i < u.size(); ++i) gap = std::min(gap, u[i] - u[i - 1]);
          vt.fp_shift = -u.front() + gap;
        }
        const double range = u.back() - u.front();
        const double lrange = std::log10(range);
        vt.fp_scale = std::pow(10.0, std::copysign(std::floor(std::abs(lrange)), lrange));
        vt.fp_floor = 0.5 * (u.front() + vt.fp_shift);
        vt.fp_powers = {1.0};
        break;
      }
    }
  }
  return t;
}

FittedTransform with_fp_powers(FittedTransform t,
                               const std::array<std::vector<double>, kNumContinuous>& powers) {
  if (t.spec.continuous != ContinuousHandling::kFractionalPolynomial) {
    throw DataError("with_fp_powers: transform is not fractional-polynomial");
  }
  for (int v = 0; v < kNumContinuous; ++v) {
    if (powers[v].size() > 2) throw DataError("with_fp_powers: at most two powers per variable");
    t.vars[v].fp_powers = powers[v];
  }
  return t;
}

FeatureMatrix apply_transform(const FittedTransform& t, const Cohort& cohort) {
  const bool diam = t.spec.size == SizeDefinition::kDiameter;
  require_columns(cohort,
                  {Column::kAge, diam ? Column::kLesionDmax : Column::kLesionVolume,
                   diam ? Column::kSolidPropDiam : Column::kSolidPropVol, Column::kCa125,
                   Column::kBilateral, Column::kPapflow},
                  "apply_transform");
  FeatureMatrix fm;
  // Column layout first.
  for (int var = 0; var < kNumContinuous; ++var) {
    const auto& vt = t.vars[var];
    const std::string base = predictor_name(var);
    switch (t.spec.continuous) {
      case ContinuousHandling::kLinear:
        fm.names.push_back(base);
        fm.group.push_back(var);
        break;
      case ContinuousHandling::kDichotomizeMedian:
        fm.names.push_back(base + ">=median");
        fm.group.push_back(var);
        break;
      case ContinuousHandling::kQuartileCategories:
        for (std::size_t k = 1; k <= vt.cuts.size(); ++k) {
          fm.names.push_back(base + "[q" + std::to_string(k + 1) + "]");
          fm.group.push_back(var);
        }
        break;
      case ContinuousHandling::kRcs3:
        fm.names.push_back(base);
        fm.names.push_back(base + "'");
        fm.group.push_back(var);
        fm.group.push_back(var);
        break;
      case ContinuousHandling::kFractionalPolynomial:
        for (std::size_t k = 0; k < vt.fp_powers.size(); ++k) {
          const bool repeated = k == 1 && vt.fp_powers[1] == vt.fp_powers[0];
          fm.names.push_back(base + "^" + fp_power_label(vt.fp_powers[k]) + (repeated ? "*log" : ""));
          fm.group.push_back(var);
        }
        break;
    }
  }
  fm.names.push_back("bilateral");
  fm.group.push_back(kPredBilateral);
  fm.names.push_back("papflow");
  fm.group.push_back(kPredPapflow);

  fm.x.resize(static_cast<Eigen::Index>(cohort.size()), static_cast<Eigen::Index>(fm.names.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort.records[i];
    const auto base = base_continuous(r, t.spec.size);
    Eigen::Index j = 0;
    const auto row = static_cast<Eigen::Index>(i);
    for (int var = 0; var < kNumContinuous; ++var) {
      const auto& vt = t.vars[var];
      const double x = base[var];
      switch (t.spec.continuous) {
        case ContinuousHandling::kLinear:
          fm.x(row, j++) = x;
          break;
        case ContinuousHandling::kDichotomizeMedian:
          fm.x(row, j++) = (vt.strict_upper ? x > vt.median : x >= vt.median) ? 1.0 : 0.0;
          break;
        case ContinuousHandling::kQuartileCategories: {
          const auto cat = static_cast<std::size_t>(
              std::count_if(vt.cuts.begin(), vt.cuts.end(), [&](double c) { return x > c; }));
          for (std::size_t k = 1; k <= vt.cuts.size(); ++k) fm.x(row, j++) = cat == k ? 1.0 : 0.0;
          break;
        }
        case ContinuousHandling::kRcs3: {
          const auto [b1, b2] = rcs_basis(x, vt.knots);
          fm.x(row, j++) = b1;
          fm.x(row, j++) = b2;
          break;
        }
        case ContinuousHandling::kFractionalPolynomial: {
          const double z = fp_argument(vt, x);
          for (std::size_t k = 0; k < vt.fp_powers.size(); ++k) {
            const bool repeated = k == 1 && vt.fp_powers[1] == vt.fp_powers[0];
            double term = fp_term(z, vt.fp_powers[k]);
            if (repeated) term *= std::log(z);
            fm.x(row, j++) = term;
          }
          break;
        }
      }
    }
    fm.x(row, j++) = r.bilateral ? 1.0 : 0.0;
    fm.x(row, j++) = r.papflow ? 1.0 : 0.0;
  }
  return fm;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::Matrix<double, 6, 1> imputation_row(const PatientRecord& r, SizeDefinition size) {
  const bool diam = size == SizeDefinition::kDiameter;
  Eigen::Matrix<double, 6, 1> x;
  x << 1.0, r.age, std::log((diam ? r.lesion_dmax : r.lesion_volume) + size_log_offset(size)),
      diam ? r.solid_prop_diam : r.solid_prop_vol, r.bilateral ? 1.0 : 0.0, r.papflow ? 1.0 : 0.0;
  return x;
}

void require_imputer_columns(const Cohort& c, SizeDefinition size, const char* ctx) {
  const bool diam = size == SizeDefinition::kDiameter;
  require_columns(c,
                  {Column::kAge, diam ? Column::kLesionDmax : Column::kLesionVolume,
                   diam ? Column::kSolidPropDiam : Column::kSolidPropVol, Column::kBilateral,
                   Column::kPapflow, Column::kCa125},
                  ctx);
}

}  // namespace

FittedImputer fit_imputer(const Cohort& train, const ImputeSpec& spec, SizeDefinition size) {
  require_imputer_columns(train, size, "fit_imputer");
  FittedImputer imp;
  imp.strategy = spec.strategy;
  imp.size = size;

  std::vector<double> all, events, nonevents;
  for (const auto& r : train.records) {
    if (!r.ca125) continue;
    all.push_back(*r.ca125);
    if (r.outcome) (*r.outcome ? events : nonevents).push_back(*r.ca125);
  }
  if (all.empty()) throw DataError("fit_imputer: every CA125 value is missing in the training data");
  if (spec.strategy == ImputeStrategy::kOutcomeConditionalMedian) {
    require_columns(train, {Column::kOutcome}, "fit_imputer");
  }
  imp.pooled_median = median(all);
  imp.median_event = events.empty() ? imp.pooled_median : median(events);
  imp.median_nonevent = nonevents.empty() ? imp.pooled_median : median(nonevents);

  if (spec.strategy == ImputeStrategy::kRegression) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(all.size()), 6);
    Eigen::VectorXd y(static_cast<Eigen::Index>(all.size()));
    Eigen::Index i = 0;
    for (const auto& r : train.records) {
      if (!r.ca125) continue;
      x.row(i) = imputation_row(r, size).transpose();
      y(i) = std::log(*r.ca125);
      ++i;
    }
    imp.coefficients = x.colPivHouseholderQr().solve(y);
    for (Eigen::Index k = 0; k < imp.coefficients.size(); ++k) {
      if (!std::isfinite(imp.coefficients(k))) imp.coefficients(k) = 0.0;
    }
  }
  return imp;
}

double impute_value(const FittedImputer& imp, const PatientRecord& r, ImputePhase phase) {
  switch (imp.strategy) {
    case ImputeStrategy::kRegression:
      return std::exp(imputation_row(r, imp.size).dot(imp.coefficients));
    case ImputeStrategy::kOutcomeConditionalMedian:
      if (phase == ImputePhase::kTraining && r.outcome) {
        return *r.outcome ? imp.median_event : imp.median_nonevent;
      }
      return imp.pooled_median;
    case ImputeStrategy::kUnconditionalMedian:
      return imp.pooled_median;
  }
  return imp.pooled_median;
}

Cohort apply_imputer(const FittedImputer& imp, const Cohort& cohort, ImputePhase phase) {
  require_imputer_columns(cohort, imp.size, "apply_imputer");
  Cohort out = cohort;
  for (auto& r : out.records) {
    if (!r.ca125) r.ca125 = impute_value(imp, r, phase);
  }
  return out;
}

}  // namespace riskverse
