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

#include "riskverse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "riskverse/error.hpp"
#include "riskverse/logistic.hpp"
#include "riskverse/preprocess.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

namespace {

const double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_binary(Column c) { return c == Column::kBilateral || c == Column::kPapflow || c == Column::kOutcome; }

std::optional<double> get(const PatientRecord& r, Column c) {
  switch (c) {
    case Column::kAge: return r.age;
    case Column::kLesionDmax: return r.lesion_dmax;
    case Column::kLesionVolume: return r.lesion_volume;
    case Column::kSolidPropDiam: return r.solid_prop_diam;
    case Column::kSolidPropVol: return r.solid_prop_vol;
    case Column::kCa125: return r.ca125;
    case Column::kBilateral: return r.bilateral ? 1.0 : 0.0;
    case Column::kPapflow: return r.papflow ? 1.0 : 0.0;
    case Column::kOutcome:
      if (!r.outcome) return std::nullopt;
      return *r.outcome ? 1.0 : 0.0;
  }
  return std::nullopt;
}

void set(PatientRecord& r, Column c, std::optional<double> v) {
  switch (c) {
    case Column::kAge: r.age = *v; break;
    case Column::kLesionDmax: r.lesion_dmax = *v; break;
    case Column::kLesionVolume: r.lesion_volume = *v; break;
    case Column::kSolidPropDiam: r.solid_prop_diam = *v; break;
    case Column::kSolidPropVol: r.solid_prop_vol = *v; break;
    case Column::kCa125: r.ca125 = v; break;
    case Column::kBilateral: r.bilateral = *v > 0.5; break;
    case Column::kPapflow: r.papflow = *v > 0.5; break;
    case Column::kOutcome:
      if (v) {
        r.outcome = *v > 0.5;
      } else {
        r.outcome.reset();
      }
      break;
  }
}

}  // namespace

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& x, int features, const std::vector<double>& y, bool binary,
              const CartOptions& o, DonorTree& tree)
      : x_(x), f_(features), y_(y), binary_(binary), o_(o), tree_(tree) {}

  void run(std::vector<std::uint32_t> rows) {
    root_impurity_ = impurity(rows);
    build(std::move(rows), 0);
  }

 private:
  double impurity_of(double n, double sum, double sumsq) const {
    if (n <= 0) return 0;
    if (binary_) return 2.0 * sum * (n - sum) / n;
    return std::max(0.0, sumsq - sum * sum / n);
  }

  double impurity(const std::vector<std::uint32_t>& rows) const {
    double s = 0, ss = 0;
    for (auto r : rows) {
      s += y_[r];
      ss += y_[r] * y_[r];
    }
    return impurity_of(static_cast<double>(rows.size()), s, ss);
  }

  double xv(std::uint32_t r, int f) const { return x_[static_cast<std::size_t>(r) * f_ + f]; }

  int build(std::vector<std::uint32_t> rows, int depth) {
    auto& nodes = tree_.nodes_;
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const auto n = rows.size();

    const auto min_leaf = static_cast<std::size_t>(o_.min_leaf);
    if (depth < o_.max_depth) {
      for (int f = 0; f < f_; ++f) {
        std::size_t miss = 0;
        for (auto r : rows) miss += std::isnan(xv(r, f)) ? 1 : 0;
        if (miss < min_leaf || n - miss < min_leaf) continue;
        std::vector<std::uint32_t> left, right;
        for (auto r : rows) (std::isnan(xv(r, f)) ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        DonorTree::Node split;
        split.feature = f;
        split.on_missing = true;
        split.surrogate_begin = split.surrogate_end = static_cast<std::uint32_t>(tree_.surrogates_.size());
        nodes[static_cast<std::size_t>(id)] = split;
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
      }
    }

    int best_f = -1;
    double best_t = 0, best_gain = o_.complexity * root_impurity_;
    std::vector<std::uint32_t> order;
    if (static_cast<int>(n) >= o_.min_split && depth < o_.max_depth && impurity(rows) > 0) {
      for (int f = 0; f < f_; ++f) {
        // Score on rows where the feature is observed. Sorting on (x, y)
        // makes the scan independent of row order.
        order.clear();
        for (auto r : rows) {
          if (!std::isnan(xv(r, f))) order.push_back(r);
        }
        const auto m = order.size();
        if (m < 2 * min_leaf) continue;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) {
          const double xa = xv(a, f), xb = xv(b, f);
          return xa < xb || (xa == xb && y_[a] < y_[b]);
        });
        double total = 0, total_sq = 0;
        for (auto r : order) {
          total += y_[r];
          total_sq += y_[r] * y_[r];
        }
        const double parent = impurity_of(static_cast<double>(m), total, total_sq);
        double ls = 0, lss = 0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
          ls += y_[order[i]];
          lss += y_[order[i]] * y_[order[i]];
          const std::size_t nl = i + 1;
          if (nl < min_leaf) continue;
          if (m - nl < min_leaf) break;
          const double a = xv(order[i], f), b = xv(order[i + 1], f);
          if (!(a < b)) continue;
          const double child = impurity_of(static_cast<double>(nl), ls, lss) +
                               impurity_of(static_cast<double>(m - nl), total - ls, total_sq - lss);
          const double gain = parent - child;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_t = 0.5 * (a + b);
          }
        }
      }
    }

    if (best_f < 0) {
      std::vector<double> vals;
      vals.reserve(n);
      for (auto r : rows) vals.push_back(y_[r]);
      std::sort(vals.begin(), vals.end());
      auto& node = nodes[static_cast<std::size_t>(id)];
      node.donor_begin = static_cast<std::uint32_t>(tree_.donors_.size());
      tree_.donors_.insert(tree_.donors_.end(), vals.begin(), vals.end());
      node.donor_end = static_cast<std::uint32_t>(tree_.donors_.size());
      return id;
    }

    DonorTree::Node split;
    split.feature = best_f;
    split.threshold = best_t;
    add_surrogates(rows, split);
    std::vector<std::uint32_t> left, right;
    for (auto r : rows) (tree_.goes_left(split, &x_[static_cast<std::size_t>(r) * f_]) ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes[static_cast<std::size_t>(id)] = split;
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  // Ranks splits on other features by how many rows they send the same way
  // as the primary split; only those beating the majority rule are kept.
  void add_surrogates(const std::vector<std::uint32_t>& rows, DonorTree::Node& split) {
    std::size_t n_left = 0, n_right = 0;
    bool any_missing = false;
    for (auto r : rows) {
      const double v = xv(r, split.feature);
      if (std::isnan(v)) {
        any_missing = true;
      } else {
        (v <= split.threshold ? n_left : n_right) += 1;
      }
    }
    split.missing_left = n_left >= n_right;
    split.surrogate_begin = split.surrogate_end = static_cast<std::uint32_t>(tree_.surrogates_.size());
    if (!any_missing) return;

    struct Candidate {
      DonorTree::Surrogate s;
      std::size_t agree;
    };
    std::vector<Candidate> found;
    std::vector<std::pair<double, int>> pts;
    for (int g = 0; g < f_; ++g) {
      if (g == split.feature) continue;
      pts.clear();
      for (auto r : rows) {
        const double p = xv(r, split.feature), q = xv(r, g);
        if (!std::isnan(p) && !std::isnan(q)) pts.emplace_back(q, p <= split.threshold ? 1 : 0);
      }
      if (pts.size() < 2) continue;
      std::sort(pts.begin(), pts.end());
      std::size_t total_left = 0;
      for (const auto& pt : pts) total_left += static_cast<std::size_t>(pt.second);
      const std::size_t m = pts.size();
      const std::size_t majority = std::max(total_left, m - total_left);
      Candidate best{{g, 0, true}, majority};
      std::size_t low_left = 0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        low_left += static_cast<std::size_t>(pts[i].second);
        if (!(pts[i].first < pts[i + 1].first)) continue;
        const std::size_t low = i + 1;
        const std::size_t same = low_left + (m - low - (total_left - low_left));
        const std::size_t flipped = (low - low_left) + (total_left - low_left);
        const double t = 0.5 * (pts[i].first + pts[i + 1].first);
        if (same > best.agree) best = {{g, t, true}, same};
        if (flipped > best.agree) best = {{g, t, false}, flipped};
      }
      if (best.agree > majority) found.push_back(best);
    }
    std::stable_sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) { return a.agree > b.agree; });
    if (found.size() > DonorTree::kMaxSurrogates) found.resize(DonorTree::kMaxSurrogates);
    for (const auto& c : found) tree_.surrogates_.push_back(c.s);
    split.surrogate_end = static_cast<std::uint32_t>(tree_.surrogates_.size());
  }

  const std::vector<double>& x_;
  int f_;
  const std::vector<double>& y_;
  bool binary_;
  const CartOptions& o_;
  DonorTree& tree_;
  double root_impurity_ = 0;
};

DonorTree DonorTree::fit(const std::vector<double>& x, int features, const std::vector<double>& y, bool binary,
                         const CartOptions& options) {
  if (y.empty()) throw DataError("cannot fit a donor tree on zero rows");
  if (x.size() != y.size() * static_cast<std::size_t>(features)) throw DataError("donor tree: shape mismatch");
  DonorTree t;
  std::vector<std::uint32_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), 0u);
  TreeBuilder(x, features, y, binary, options, t).run(std::move(rows));
  return t;
}

bool DonorTree::goes_left(const Node& n, const double* row) const {
  const double v = row[n.feature];
  if (n.on_missing) return std::isnan(v);
  if (!std::isnan(v)) return v <= n.threshold;
  for (auto k = n.surrogate_begin; k < n.surrogate_end; ++k) {
    const auto& s = surrogates_[k];
    const double w = row[s.feature];
    if (!std::isnan(w)) return (w <= s.threshold) == s.low_goes_left;
  }
  return n.missing_left;
}

const DonorTree::Node& DonorTree::leaf(const double* row) const {
  const Node* n = &nodes_[0];
  while (n->feature >= 0) n = &nodes_[static_cast<std::size_t>(goes_left(*n, row) ? n->left : n->right)];
  return *n;
}

double DonorTree::draw(const double* row, Rng& rng) const {
  const Node& n = leaf(row);
  return donors_[n.donor_begin + rng.below(n.donor_end - n.donor_begin)];
}

std::size_t DonorTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

std::vector<Column> default_synth_order() {
  return {Column::kAge,      Column::kLesionDmax, Column::kLesionVolume, Column::kSolidPropDiam, Column::kSolidPropVol,
          Column::kBilateral, Column::kPapflow,   Column::kCa125,        Column::kOutcome};
}

Synthesizer fit_synthesizer(const Cohort& cohort, const std::vector<Column>& order, const CartOptions& options) {
  if (cohort.empty()) throw DataError("cannot fit a synthesizer on an empty cohort");
  ColumnSet seen = ColumnSet::none();
  for (Column c : order) {
    if (!cohort.columns.has(c)) {
      throw ConfigError(std::string("synthesis order names column '") + column_name(c) + "' absent from the cohort");
    }
    if (seen.has(c)) throw ConfigError(std::string("synthesis order repeats column '") + column_name(c) + "'");
    seen.add(c);
  }
  for (Column c : kAllColumns) {
    if (cohort.columns.has(c) && !seen.has(c)) {
      throw ConfigError(std::string("synthesis order omits column '") + column_name(c) + "'");
    }
  }

  const std::size_t n = cohort.size();
  const std::size_t k_all = order.size();
  std::vector<double> values(n * k_all);
  std::vector<char> missing(n * k_all, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_all; ++k) {
      const auto v = get(cohort.records[i], order[k]);
      values[i * k_all + k] = v ? *v : kMissing;
      missing[i * k_all + k] = v ? 0 : 1;
    }
  }

  Synthesizer s;
  s.columns = seen;
  s.source_name = cohort.name;
  for (std::size_t k = 0; k < k_all; ++k) {
    SynthStage st;
    st.column = order[k];
    st.binary = is_binary(order[k]);
    std::vector<double> x_all, miss_y, x_obs, y_obs;
    x_all.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &values[i * k_all];
      x_all.insert(x_all.end(), row, row + k);
      const bool m = missing[i * k_all + k] != 0;
      miss_y.push_back(m ? 1.0 : 0.0);
      if (!m) {
        x_obs.insert(x_obs.end(), row, row + k);
        y_obs.push_back(row[k]);
      }
    }
    const auto kf = static_cast<int>(k);
    if (y_obs.empty()) {
      st.always_missing = true;
    } else {
      if (y_obs.size() < n) {
        st.has_missing_model = true;
        st.missing_model = DonorTree::fit(x_all, kf, miss_y, true, options);
      }
      st.value_model = DonorTree::fit(x_obs, kf, y_obs, st.binary, options);
    }
    s.stages.push_back(std::move(st));
  }
  return s;
}

Cohort sample_synthetic(const Synthesizer& s, std::size_t n, Seed seed) {
  Cohort out;
  out.name = s.source_name.empty() ? "synthetic" : s.source_name + "-synthetic";
  out.provenance = Provenance::kSynthesized;
  out.columns = s.columns;
  out.records.reserve(n);
  Rng rng(seed);
  std::vector<double> row(s.stages.size());
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord r;
    for (std::size_t k = 0; k < s.stages.size(); ++k) {
      const auto& st = s.stages[k];
      bool is_missing = st.always_missing;
      if (!is_missing && st.has_missing_model) is_missing = st.missing_model.draw(row.data(), rng) > 0.5;
      if (is_missing) {
        row[k] = kMissing;
        set(r, st.column, std::nullopt);
      } else {
        row[k] = st.value_model.draw(row.data(), rng);
        set(r, st.column, row[k]);
      }
    }
    out.records.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

double CoefficientRow::z() const { return (synth - real) / std::sqrt(real_se * real_se + synth_se * synth_se); }

namespace {

struct MainFit {
  std::vector<std::string> names;
  LogisticFit fit;
};

MainFit fit_main_model(const Cohort& c) {
  Cohort labeled = c;
  std::erase_if(labeled.records, [](const PatientRecord& r) { return !r.outcome; });
  const auto imp = fit_imputer(labeled, {ImputeStrategy::kRegression}, SizeDefinition::kDiameter);
  const Cohort filled = apply_imputer(imp, labeled, ImputePhase::kTraining);
  const auto t = fit_transform(filled, {ContinuousHandling::kRcs3, SizeDefinition::kDiameter});
  const auto fm = apply_transform(t, filled);
  Eigen::VectorXd y(static_cast<Eigen::Index>(filled.size()));
  for (std::size_t i = 0; i < filled.size(); ++i) y(static_cast<Eigen::Index>(i)) = *filled.records[i].outcome ? 1 : 0;
  return {fm.names, fit_logistic_irls(fm.x, y)};
}

}  // namespace

FidelityReport fidelity_report(const Cohort& real, const Cohort& synth) {
  if (!(real.columns == synth.columns)) throw DataError("fidelity report: cohorts carry different columns");
  if (real.empty() || synth.empty()) throw DataError("fidelity report: empty cohort");
  FidelityReport rep;
  std::vector<Column> cols;
  for (Column c : kAllColumns) {
    if (real.columns.has(c)) cols.push_back(c);
  }
  const std::size_t v = cols.size();
  auto observed = [](const Cohort& c, Column col) {
    std::vector<double> out;
    for (const auto& r : c.records) {
      if (auto x = get(r, col)) out.push_back(*x);
    }
    return out;
  };
  for (Column c : cols) {
    rep.variables.emplace_back(column_name(c));
    const auto a = observed(real, c), b = observed(synth, c);
    rep.ks.push_back(a.empty() || b.empty() ? (a.empty() && b.empty() ? 0.0 : 1.0) : ks_statistic(a, b));
    rep.missing_real.push_back(1.0 - static_cast<double>(a.size()) / static_cast<double>(real.size()));
    rep.missing_synth.push_back(1.0 - static_cast<double>(b.size()) / static_cast<double>(synth.size()));
  }
  auto correlations = [&](const Cohort& c) {
    std::vector<double> m(v * v, 1.0);
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = a + 1; b < v; ++b) {
        std::vector<double> xa, xb;
        for (const auto& r : c.records) {
          const auto p = get(r, cols[a]), q = get(r, cols[b]);
          if (p && q) {
            xa.push_back(*p);
            xb.push_back(*q);
          }
        }
        m[a * v + b] = m[b * v + a] = xa.size() < 2 ? 0.0 : spearman(xa, xb);
      }
    }
    return m;
  };
  rep.spearman_real = correlations(real);
  rep.spearman_synth = correlations(synth);
  for (std::size_t k = 0; k < v * v; ++k) {
    rep.max_correlation_gap = std::max(rep.max_correlation_gap, std::abs(rep.spearman_real[k] - rep.spearman_synth[k]));
  }

  const bool modelable = std::all_of(kAllColumns.begin(), kAllColumns.end(), [&](Column c) {
    return c == Column::kLesionVolume || c == Column::kSolidPropVol || real.columns.has(c);
  });
  if (modelable) {
    const auto a = fit_main_model(real);
    const auto b = fit_main_model(synth);
    for (std::size_t k = 0; k <= a.names.size(); ++k) {
      CoefficientRow row;
      const auto idx = static_cast<Eigen::Index>(k);
      row.term = k == 0 ? "intercept" : a.names[k - 1];
      row.linear = k > 0 && row.term.find('\'') == std::string::npos;
      row.real = a.fit.beta(idx);
      row.real_se = a.fit.se(idx);
      row.synth = b.fit.beta(idx);
      row.synth_se = b.fit.se(idx);
      rep.coefficients.push_back(row);
    }
  }
  return rep;
}

void write_fidelity_csv(std::ostream& out, const FidelityReport& r) {
  char buf[256];
  out << "section,name,other,real,synth,real_se,synth_se,value\n";
  for (std::size_t k = 0; k < r.variables.size(); ++k) {
    std::snprintf(buf, sizeof buf, "ks,%s,,,,,,%.10g\n", r.variables[k].c_str(), r.ks[k]);
    out << buf;
    std::snprintf(buf, sizeof buf, "missing,%s,,%.10g,%.10g,,,%.10g\n", r.variables[k].c_str(), r.missing_real[k],
                  r.missing_synth[k], r.missing_synth[k] - r.missing_real[k]);
    out << buf;
  }
  const std::size_t v = r.variables.size();
  for (std::size_t a = 0; a < v; ++a) {
    for (std::size_t b = a + 1; b < v; ++b) {
      const double x = r.spearman_real[a * v + b], y = r.spearman_synth[a * v + b];
      std::snprintf(buf, sizeof buf, "spearman,%s,%s,%.10g,%.10g,,,%.10g\n", r.variables[a].c_str(),
                    r.variables[b].c_str(), x, y, y - x);
      out << buf;
    }
  }
  for (const auto& c : r.coefficients) {
    std::snprintf(buf, sizeof buf, "coefficient,%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n", c.term.c_str(),
                  c.term == "intercept" ? "intercept" : c.linear ? "linear" : "nonlinear", c.real, c.synth, c.real_se, c.synth_se, c.z());
    out << buf;
  }
}

}  // namespace riskverse
