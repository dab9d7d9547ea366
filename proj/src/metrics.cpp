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

#include "riskverse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/Dense>

#include "riskverse/error.hpp"
#include "riskverse/logistic.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

void ThresholdPolicy::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie strictly inside (0, 1), got " + std::to_string(threshold));
  }
}

PrevalenceContext PrevalenceContext::from_labels(std::span<const int> labels) {
  PrevalenceContext c;
  for (int y : labels) {
    if (y == 1) {
      ++c.events;
    } else if (y == 0) {
      ++c.nonevents;
    } else {
      throw DataError("labels must be 0 or 1, got " + std::to_string(y));
    }
  }
  return c;
}

double PrevalenceContext::prevalence() const {
  if (n() == 0) throw DataError("prevalence of an empty label set");
  return static_cast<double>(events) / static_cast<double>(n());
}

namespace {

void check_lengths(std::span<const double> risks, std::span<const int> labels, const char* what) {
  if (risks.size() != labels.size()) {
    throw DataError(std::string(what) + ": " + std::to_string(risks.size()) + " risks for " +
                    std::to_string(labels.size()) + " labels");
  }
}

PrevalenceContext both_classes(std::span<const int> labels, const char* what) {
  const auto c = PrevalenceContext::from_labels(labels);
  if (c.events == 0 || c.nonevents == 0) throw DataError(std::string(what) + " needs both outcome classes");
  return c;
}

}  // namespace

double auroc(std::span<const double> risks, std::span<const int> labels) {
  check_lengths(risks, labels, "auroc");
  const auto c = both_classes(labels, "auroc");
  // Rank-sum form of the pair count; average ranks give ties half a win.
  const auto ranks = average_ranks(risks);
  double sum = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) sum += ranks[i];
  }
  const double e = static_cast<double>(c.events);
  const double ne = static_cast<double>(c.nonevents);
  return (sum - e * (e + 1) / 2) / (e * ne);
}

std::optional<double> eci(std::span<const double> risks, std::span<const int> labels) {
  check_lengths(risks, labels, "eci");
  both_classes(labels, "eci");
  const auto n = static_cast<Eigen::Index>(risks.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = risks[static_cast<std::size_t>(i)];
    if (!(r > 0.0 && r < 1.0)) throw DataError("eci: risks must lie strictly inside (0, 1)");
    const double l = logit(r);
    x(i, 0) = l;
    x(i, 1) = l * l;
    y(i) = labels[static_cast<std::size_t>(i)];
  }
  // Constant or two-valued risks leave fewer usable terms; drop them as the fit reports.
  std::vector<Eigen::Index> keep = {0, 1};
  LogisticFit fit;
  for (;;) {
    Eigen::MatrixXd xs(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) xs.col(static_cast<Eigen::Index>(k)) = x.col(keep[k]);
    try {
      fit = fit_logistic_irls(xs, y);
      break;
    } catch (const CollinearityError& e) {
      if (e.second() < 0 || keep.empty()) return std::nullopt;
      keep.erase(keep.begin() + e.second());
    } catch (const FitError&) {
      return std::nullopt;
    }
  }
  double sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = fit.beta(0);
    for (std::size_t k = 0; k < keep.size(); ++k) eta += fit.beta(static_cast<Eigen::Index>(k + 1)) * x(i, keep[k]);
    const double gap = risks[static_cast<std::size_t>(i)] - logistic(eta);
    sum += gap * gap;
  }
  const double v = sum / static_cast<double>(n);
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

double net_benefit(std::span<const double> risks, std::span<const int> labels, const ThresholdPolicy& policy) {
  check_lengths(risks, labels, "net_benefit");
  policy.validate();
  if (risks.empty()) throw DataError("net_benefit of an empty test set");
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (!policy.operate(risks[i])) continue;
    (labels[i] == 1 ? tp : fp) += 1;
  }
  const double n = static_cast<double>(risks.size());
  const double t = policy.threshold;
  return static_cast<double>(tp) / n - static_cast<double>(fp) / n * t / (1.0 - t);
}

double nb_treat_all(const PrevalenceContext& ctx, const ThresholdPolicy& policy) {
  policy.validate();
  if (ctx.n() == 0) throw DataError("treat-all net benefit of an empty label set");
  // Same arithmetic as net_benefit with every patient operated.
  const double n = static_cast<double>(ctx.n());
  const double t = policy.threshold;
  return static_cast<double>(ctx.events) / n - static_cast<double>(ctx.nonevents) / n * t / (1.0 - t);
}

std::optional<double> relative_utility(double nb, double nb_ta, const PrevalenceContext& ctx) {
  const double floor = std::max(0.0, nb_ta);
  const double denom = ctx.prevalence() - floor;
  if (!(denom > 0)) return std::nullopt;
  return (nb - floor) / denom;
}

double risk_range_95(std::span<const double> risks) {
  if (risks.size() < 2) throw DataError("95% range needs at least two risk estimates");
  std::vector<double> s(risks.begin(), risks.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, 0.975) - quantile_sorted(s, 0.025);
}

double decision_uncertainty(std::span<const double> risks, const ThresholdPolicy& policy) {
  if (risks.empty()) throw DataError("decision uncertainty needs at least one risk estimate");
  std::size_t up = 0;
  for (double r : risks) up += policy.operate(r) ? 1 : 0;
  return static_cast<double>(std::min(up, risks.size() - up)) / static_cast<double>(risks.size());
}

ModelMetrics evaluate_model(std::span<const double> risks, std::span<const int> labels,
                            const ThresholdPolicy& policy) {
  ModelMetrics m;
  m.auroc = auroc(risks, labels);
  m.eci = eci(risks, labels);
  m.nb = net_benefit(risks, labels, policy);
  const auto ctx = PrevalenceContext::from_labels(labels);
  m.ru = relative_utility(m.nb, nb_treat_all(ctx, policy), ctx);
  return m;
}

// ---------------------------------------------------------------------------

RiskMatrix::RiskMatrix(std::vector<int> labels) : labels_(std::move(labels)) {
  PrevalenceContext::from_labels(labels_);
}

void RiskMatrix::add_column(ColumnMeta meta, std::span<const double> risks) {
  if (risks.size() != labels_.size()) {
    throw DataError("risk column " + meta.scenario_id + " has " + std::to_string(risks.size()) + " entries, expected " +
                    std::to_string(labels_.size()));
  }
  for (double r : risks) {
    if (!(r >= 0.0 && r <= 1.0)) throw DataError("risk column " + meta.scenario_id + " has a value outside [0, 1]");
  }
  if (std::find(meta_.begin(), meta_.end(), meta) != meta_.end()) {
    throw DataError("duplicate risk column " + meta.scenario_id + " replicate " + std::to_string(meta.replicate) +
                    " n_train " + std::to_string(meta.n_train));
  }
  data_.insert(data_.end(), risks.begin(), risks.end());
  meta_.push_back(std::move(meta));
}

std::span<const double> RiskMatrix::column(std::size_t j) const {
  return std::span<const double>(data_).subspan(j * labels_.size(), labels_.size());
}

namespace {

std::optional<Spread> spread(std::vector<double> v, bool use_median) {
  if (v.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  Spread s{0, *lo, *hi};
  s.centre = use_median ? median(v) : mean(v);
  return s;
}

}  // namespace

SummaryRow summarize(const RiskMatrix& matrix, std::span<const std::size_t> columns, const ThresholdPolicy& policy,
                     std::string source, std::string subset, int n_train, std::span<const ModelMetrics> per_model) {
  if (columns.empty()) throw DataError("summary subset " + source + "/" + subset + " selects no models");
  if (!per_model.empty() && per_model.size() != matrix.models()) {
    throw DataError("per-model metrics do not match the risk matrix");
  }
  SummaryRow row;
  row.source = std::move(source);
  row.subset = std::move(subset);
  row.n_train = n_train;
  row.models = columns.size();

  std::vector<double> au, ec, ru;
  for (std::size_t j : columns) {
    if (j >= matrix.models()) throw DataError("summary column index out of range");
    const ModelMetrics m = per_model.empty() ? evaluate_model(matrix.column(j), matrix.labels(), policy) : per_model[j];
    au.push_back(m.auroc);
    if (m.eci) ec.push_back(*m.eci);
    if (m.ru) ru.push_back(*m.ru);
  }
  row.auroc = spread(std::move(au), false);
  row.eci = spread(std::move(ec), false);
  row.ru = spread(std::move(ru), true);

  std::vector<double> r95, du, patient(columns.size());
  for (std::size_t i = 0; i < matrix.patients(); ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) patient[k] = matrix.at(i, columns[k]);
    if (patient.size() >= 2) r95.push_back(risk_range_95(patient));
    du.push_back(decision_uncertainty(patient, policy));
  }
  row.r95 = spread(std::move(r95), false);
  row.du = spread(std::move(du), false);
  return row;
}

const char* const kSummaryCsvHeader =
    "source,subset,n_train,J,auroc_mean,auroc_min,auroc_max,eci_mean,eci_min,eci_max,ru_median,ru_min,ru_max,"
    "r95_mean,r95_min,r95_max,du_mean,du_min,du_max";

namespace {

void put(std::ostream& out, const std::optional<Spread>& s) {
  char buf[96];
  if (!s) {
    out << ",,,";
    return;
  }
  std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g", s->centre, s->min, s->max);
  out << buf;
}

}  // namespace

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.source << ',' << r.subset << ',' << r.n_train << ',' << r.models;
    put(out, r.auroc);
    put(out, r.eci);
    put(out, r.ru);
    put(out, r.r95);
    put(out, r.du);
    out << '\n';
  }
}

}  // namespace riskverse
