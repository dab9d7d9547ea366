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

#include "riskverse/trees.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "riskverse/error.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

BinMapper BinMapper::fit(const Eigen::MatrixXd& x, int max_bins) {
  BinMapper m;
  m.thresholds.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::vector<double> v(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(v.begin(), v.end());
    std::vector<double> uniq = v;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& thr = m.thresholds[static_cast<std::size_t>(f)];
    if (static_cast<int>(uniq.size()) <= max_bins) {
      for (std::size_t i = 1; i < uniq.size(); ++i) thr.push_back(0.5 * (uniq[i - 1] + uniq[i]));
    } else {
      // Cut between the distinct values bracketing each quantile.
      for (int k = 1; k < max_bins; ++k) {
        const double q = quantile_sorted(v, static_cast<double>(k) / max_bins);
        auto it = std::upper_bound(uniq.begin(), uniq.end(), q);
        if (it == uniq.end() || it == uniq.begin()) continue;
        const double t = 0.5 * (*(it - 1) + *it);
        if (thr.empty() || t > thr.back()) thr.push_back(t);
      }
    }
  }
  return m;
}

std::uint8_t BinMapper::bin_of(int feature, double value) const {
  const auto& thr = thresholds[static_cast<std::size_t>(feature)];
  return static_cast<std::uint8_t>(std::lower_bound(thr.begin(), thr.end(), value) - thr.begin());
}

BinnedMatrix bin_matrix(const BinMapper& m, const Eigen::MatrixXd& x) {
  BinnedMatrix b;
  b.rows = static_cast<int>(x.rows());
  b.cols = static_cast<int>(x.cols());
  b.codes.resize(static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols));
  for (int f = 0; f < b.cols; ++f) {
    for (int i = 0; i < b.rows; ++i) {
      b.codes[static_cast<std::size_t>(i) * static_cast<std::size_t>(b.cols) + static_cast<std::size_t>(f)] =
          m.bin_of(f, x(i, f));
    }
  }
  return b;
}

const TreeNode& Tree::leaf(const double* row, int stride, int min_node) const {
  const TreeNode* node = &nodes[0];
  while (node->feature >= 0 && node->count >= min_node) {
    node = &nodes[static_cast<std::size_t>(row[static_cast<std::ptrdiff_t>(node->feature) * stride] <= node->threshold
                                               ? node->left
                                               : node->right)];
  }
  return *node;
}

const TreeNode& Tree::leaf_binned(const BinnedMatrix& b, int row, int min_node) const {
  const TreeNode* node = &nodes[0];
  while (node->feature >= 0 && node->count >= min_node) {
    node = &nodes[static_cast<std::size_t>(b.at(row, node->feature) <= node->bin ? node->left : node->right)];
  }
  return *node;
}

std::size_t Tree::leaf_count(int min_node) const {
  std::size_t leaves = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const auto& n = nodes[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.feature >= 0 && n.count >= min_node) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    } else {
      ++leaves;
    }
  }
  return leaves;
}

const char* tree_mode_name(TreeMode m) {
  switch (m) {
    case TreeMode::kSmall: return "small";
    case TreeMode::kLarge: return "large";
    case TreeMode::kTuned: return "tuned";
  }
  return "?";
}

double clip_risk(double p) { return std::clamp(p, kRiskFloor, 1.0 - kRiskFloor); }

double mean_log_loss(const std::vector<double>& risks, const Eigen::VectorXd& y) {
  double s = 0;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    const double p = clip_risk(risks[i]);
    s -= y(static_cast<Eigen::Index>(i)) > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return s / static_cast<double>(risks.size());
}

namespace {

void require_two_classes(const Eigen::VectorXd& y, const char* who) {
  const double e = y.sum();
  if (y.size() == 0 || e < 0.5 || e > static_cast<double>(y.size()) - 0.5) {
    throw FitError(std::string(who) + ": labels contain a single class");
  }
}

inline constexpr int kDenseRows = 96;
inline constexpr std::size_t kBinSlots = 256;

// Histogram scratch for small nodes: only the bins touched are visited and
// reset.
struct Scratch {
  std::array<double, kBinSlots> a{};
  std::array<double, kBinSlots> b{};
  std::array<int, kBinSlots> c{};
  std::vector<int> touched;

  void add(int bin, double va, double vb) {
    const auto k = static_cast<std::size_t>(bin);
    if (c[k] == 0) touched.push_back(bin);
    c[k] += 1;
    a[k] += va;
    b[k] += vb;
  }
  // Visits non-empty bins in ascending order, then resets them.
  template <class Fn>
  void drain(Fn&& fn) {
    std::sort(touched.begin(), touched.end());
    for (int bin : touched) {
      const auto k = static_cast<std::size_t>(bin);
      fn(bin, c[k], a[k], b[k]);
      a[k] = 0;
      b[k] = 0;
      c[k] = 0;
    }
    touched.clear();
  }
};

// Grows one probability tree on the multiset of rows in `idx` (duplicates
// allowed). Node randomness is keyed by the node's path so that stopping
// earlier never changes the splits above.
Tree grow_forest_tree(const BinnedMatrix& b, const BinMapper& bm, const Eigen::VectorXd& y,
                      std::vector<int> idx, int min_node, int mtry, Seed seed) {
  Tree tree;
  struct Pending {
    int node, lo, hi;
    Seed key;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, static_cast<int>(idx.size()), seed});
  Scratch s;
  std::vector<double> dense_n(static_cast<std::size_t>(b.cols) * kBinSlots, 0.0);
  std::vector<double> dense_e(dense_n.size(), 0.0);
  std::vector<int> features(static_cast<std::size_t>(b.cols));
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const int n = cur.hi - cur.lo;
    double events = 0;
    for (int k = cur.lo; k < cur.hi; ++k) events += y(idx[static_cast<std::size_t>(k)]);
    {
      auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
      node.count = n;
      node.value = n > 0 ? events / n : 0.0;
    }
    if (n < min_node || n < 2 || events == 0 || events == n) continue;

    Rng rng(cur.key);
    std::iota(features.begin(), features.end(), 0);
    const int m = std::min(mtry, b.cols);
    for (int k = 0; k < m; ++k) {
      const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(b.cols - k)));
      std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(j)]);
    }
    std::sort(features.begin(), features.begin() + m);

    const double parent = events * (n - events) / n;
    double best_gain = 1e-12;
    int best_f = -1, best_bin = 0;
    auto consider = [&](int f, int bin, double nl, double el) {
      if (nl >= n) return;
      const double nr = n - nl, er = events - el;
      const double gain = parent - el * (nl - el) / nl - er * (nr - er) / nr;
      if (gain > best_gain) {
        best_gain = gain;
        best_f = f;
        best_bin = bin;
      }
    };
    if (n >= kDenseRows) {
      // One pass over the rows fills the histograms of all candidate features.
      for (int k = cur.lo; k < cur.hi; ++k) {
        const int r = idx[static_cast<std::size_t>(k)];
        const std::uint8_t* code = b.row(r);
        const double yv = y(r);
        for (int fi = 0; fi < m; ++fi) {
          const std::size_t slot = static_cast<std::size_t>(fi) * kBinSlots + code[features[static_cast<std::size_t>(fi)]];
          dense_n[slot] += 1;
          dense_e[slot] += yv;
        }
      }
      for (int fi = 0; fi < m; ++fi) {
        const int f = features[static_cast<std::size_t>(fi)];
        double nl = 0, el = 0;
        for (int bin = 0, nb = bm.bin_count(f); bin < nb; ++bin) {
          const std::size_t slot = static_cast<std::size_t>(fi) * kBinSlots + static_cast<std::size_t>(bin);
          if (dense_n[slot] == 0) continue;
          nl += dense_n[slot];
          el += dense_e[slot];
          dense_n[slot] = 0;
          dense_e[slot] = 0;
          consider(f, bin, nl, el);
        }
      }
    } else {
      for (int fi = 0; fi < m; ++fi) {
        const int f = features[static_cast<std::size_t>(fi)];
        for (int k = cur.lo; k < cur.hi; ++k) {
          const int r = idx[static_cast<std::size_t>(k)];
          s.add(b.at(r, f), y(r), 0.0);
        }
        double nl = 0, el = 0;
        s.drain([&](int bin, int cnt, double ev, double) {
          nl += cnt;
          el += ev;
          consider(f, bin, nl, el);
        });
      }
    }
    if (best_f < 0) continue;

    auto mid = std::partition(idx.begin() + cur.lo, idx.begin() + cur.hi,
                              [&](int r) { return b.at(r, best_f) <= best_bin; });
    const int split = static_cast<int>(mid - idx.begin());
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = best_f;
    node.bin = best_bin;
    node.threshold = bm.thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_bin)];
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split, cur.hi, combine_seed(cur.key, 2)});
    stack.push_back({left, cur.lo, split, combine_seed(cur.key, 1)});
  }
  return tree;
}

std::vector<int> bootstrap(const std::vector<int>& rows, double fraction, Rng& rng) {
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * rows.size())));
  std::vector<int> out(m);
  for (auto& r : out) r = rows[rng.below(rows.size())];
  return out;
}

std::vector<int> fold_assignment(std::size_t n, int folds, Seed seed) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<int> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[static_cast<std::size_t>(perm[k])] = static_cast<int>(k % folds);
  return fold;
}

}  // namespace

double RandomForest::tree_prediction(std::size_t t, const double* row, int stride) const {
  return trees[t].leaf(row, stride, params.min_node).value;
}

double RandomForest::predict(const double* row, int stride) const {
  double s = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) s += tree_prediction(t, row, stride);
  return clip_risk(s / static_cast<double>(trees.size()));
}

std::vector<double> RandomForest::predict(const Eigen::MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(x.data() + i, static_cast<int>(x.rows()));
  return out;
}

RandomForest fit_random_forest_params(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const ForestParams& params, Seed seed) {
  require_two_classes(y, "random forest");
  if (x.cols() < 1 || x.cols() > 255) throw FitError("random forest: unsupported feature count");
  const auto bm = BinMapper::fit(x);
  const auto b = bin_matrix(bm, x);
  std::vector<int> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  RandomForest rf;
  rf.params = params;
  rf.trees.reserve(static_cast<std::size_t>(params.trees));
  for (int t = 0; t < params.trees; ++t) {
    const Seed ts = combine_seed(seed, static_cast<Seed>(t));
    Rng rng(ts);
    rf.trees.push_back(grow_forest_tree(b, bm, y, bootstrap(rows, params.sample_fraction, rng),
                                        params.min_node, params.mtry, combine_seed(ts, 0x7eee)));
  }
  return rf;
}

RandomForest fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, TreeMode mode,
                               Seed seed, const ForestOptions& options) {
  require_two_classes(y, "random forest");
  ForestParams p;
  p.trees = options.trees;
  p.mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
  if (mode == TreeMode::kSmall) return fit_random_forest_params(x, y, p, seed);
  if (mode == TreeMode::kLarge) {
    p.min_node = 20;
    return fit_random_forest_params(x, y, p, seed);
  }

  // Trees grown with node size 2 give every larger node size by stopping the
  // descent early, so the node-size axis costs nothing extra.
  static constexpr std::array<int, 4> kNodes = {2, 5, 10, 20};
  static constexpr std::array<double, 4> kFractions = {0.5, 0.632, 0.8, 1.0};
  const int p_features = static_cast<int>(x.cols());
  const auto n = static_cast<std::size_t>(x.rows());
  const auto bm = BinMapper::fit(x);
  const auto b = bin_matrix(bm, x);
  const auto fold = fold_assignment(n, options.folds, combine_seed(seed, fnv1a64("rf-folds")));

  // loss[node][fraction][mtry-1]
  std::vector<double> loss(kNodes.size() * kFractions.size() * static_cast<std::size_t>(p_features), 0.0);
  auto slot = [&](std::size_t ni, std::size_t fi, int mtry) {
    return (ni * kFractions.size() + fi) * static_cast<std::size_t>(p_features) + static_cast<std::size_t>(mtry - 1);
  };
  for (int k = 0; k < options.folds; ++k) {
    std::vector<int> train, val;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == k ? val : train).push_back(static_cast<int>(i));
    Eigen::VectorXd ytrain(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) ytrain(static_cast<Eigen::Index>(i)) = y(train[i]);
    const double e = ytrain.sum();
    if (e < 0.5 || e > static_cast<double>(train.size()) - 0.5) throw FitError("random forest: single-class fold");
    for (std::size_t fi = 0; fi < kFractions.size(); ++fi) {
      for (int mtry = 1; mtry <= p_features; ++mtry) {
        std::vector<double> sums(val.size() * kNodes.size(), 0.0);
        for (int t = 0; t < options.cv_trees; ++t) {
          const Seed ts = combine_seed(combine_seed(seed, 0xcf00 + static_cast<Seed>(k)),
                                       (static_cast<Seed>(fi) << 32) ^ (static_cast<Seed>(mtry) << 16) ^ static_cast<Seed>(t));
          Rng rng(ts);
          const Tree tree = grow_forest_tree(b, bm, y, bootstrap(train, kFractions[fi], rng), 2, mtry,
                                             combine_seed(ts, 0x7eee));
          for (std::size_t v = 0; v < val.size(); ++v) {
            // Node counts shrink along the path, so the largest node size
            // stops first; one descent serves every node size.
            const TreeNode* node = &tree.nodes[0];
            std::size_t pending = kNodes.size();
            for (;;) {
              while (pending > 0 && (node->feature < 0 || node->count < kNodes[pending - 1])) {
                sums[v * kNodes.size() + pending - 1] += node->value;
                --pending;
              }
              if (pending == 0) break;
              node = &tree.nodes[static_cast<std::size_t>(b.at(val[v], node->feature) <= node->bin ? node->left
                                                                                                    : node->right)];
            }
          }
        }
        for (std::size_t v = 0; v < val.size(); ++v) {
          const double yv = y(val[v]);
          for (std::size_t ni = 0; ni < kNodes.size(); ++ni) {
            const double pr = clip_risk(sums[v * kNodes.size() + ni] / options.cv_trees);
            loss[slot(ni, fi, mtry)] -= yv > 0.5 ? std::log(pr) : std::log1p(-pr);
          }
        }
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t ni = 0; ni < kNodes.size(); ++ni) {
    for (std::size_t fi = 0; fi < kFractions.size(); ++fi) {
      for (int mtry = 1; mtry <= p_features; ++mtry) {
        const double l = loss[slot(ni, fi, mtry)] / static_cast<double>(n);
        if (l < best) {
          best = l;
          p.min_node = kNodes[ni];
          p.sample_fraction = kFractions[fi];
          p.mtry = mtry;
        }
      }
    }
  }
  auto rf = fit_random_forest_params(x, y, p, seed);
  rf.cv_logloss = best;
  return rf;
}

// ---------------------------------------------------------------------------

double logistic_loss(double y, double margin) {
  const double sp = margin > 0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
  return sp - y * margin;
}

double logistic_gradient(double y, double margin) { return logistic(margin) - y; }

double logistic_hessian(double margin) {
  const double p = logistic(margin);
  return p * (1.0 - p);
}

namespace {

// One boosting run over a fixed set of training rows, advanced a round at a
// time so cross-validation folds can move in lockstep.
class BoostRun {
 public:
  BoostRun(const BinnedMatrix& b, const BinMapper& bm, const Eigen::VectorXd& y, std::vector<int> train,
           std::vector<int> val, const BoostParams& params, Seed seed)
      : b_(b), bm_(bm), y_(y), train_(std::move(train)), val_(std::move(val)), params_(params), seed_(seed) {
    double e = 0;
    for (int r : train_) e += y_(r);
    const double rate = e / static_cast<double>(train_.size());
    if (rate <= 0.0 || rate >= 1.0) throw FitError("boosting: labels contain a single class");
    base_ = logit(rate);
    train_margin_.assign(train_.size(), base_);
    val_margin_.assign(val_.size(), base_);
    grad_.resize(static_cast<std::size_t>(b_.rows));
    hess_.resize(static_cast<std::size_t>(b_.rows));
  }

  double base() const { return base_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::vector<Tree>& trees() { return trees_; }

  double train_loss_sum() const {
    double s = 0;
    for (std::size_t i = 0; i < train_.size(); ++i) s += logistic_loss(y_(train_[i]), train_margin_[i]);
    return s;
  }
  double val_loss_sum() const {
    double s = 0;
    for (std::size_t i = 0; i < val_.size(); ++i) s += logistic_loss(y_(val_[i]), val_margin_[i]);
    return s;
  }

  void step() {
    const int round = static_cast<int>(trees_.size());
    std::vector<int> rows;
    rows.reserve(train_.size());
    Rng rng(combine_seed(seed_, static_cast<Seed>(round)));
    for (std::size_t i = 0; i < train_.size(); ++i) {
      const int r = train_[i];
      const double pr = logistic(train_margin_[i]);
      grad_[static_cast<std::size_t>(r)] = pr - y_(r);
      hess_[static_cast<std::size_t>(r)] = pr * (1.0 - pr);
      if (params_.subsample >= 1.0 || rng.uniform() < params_.subsample) rows.push_back(r);
    }
    trees_.push_back(grow(rows));
    const Tree& t = trees_.back();
    for (std::size_t i = 0; i < train_.size(); ++i) train_margin_[i] += t.leaf_binned(b_, train_[i]).value;
    for (std::size_t i = 0; i < val_.size(); ++i) val_margin_[i] += t.leaf_binned(b_, val_[i]).value;
  }

 private:
  // Gradient and hessian sums per (feature, bin).
  struct Hist {
    std::vector<double> g, h;
    std::vector<int> c;
    explicit Hist(int features)
        : g(static_cast<std::size_t>(features) * kBinSlots, 0.0), h(g.size(), 0.0), c(g.size(), 0) {}
  };

  std::shared_ptr<Hist> build_hist(const std::vector<int>& idx, int lo, int hi) const {
    auto hist = std::make_shared<Hist>(b_.cols);
    for (int k = lo; k < hi; ++k) {
      const auto r = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
      const std::uint8_t* code = b_.row(static_cast<int>(r));
      const double gr = grad_[r], hr = hess_[r];
      for (int f = 0; f < b_.cols; ++f) {
        const std::size_t slot = static_cast<std::size_t>(f) * kBinSlots + code[f];
        hist->g[slot] += gr;
        hist->h[slot] += hr;
        hist->c[slot] += 1;
      }
    }
    return hist;
  }

  Tree grow(std::vector<int>& idx) {
    Tree tree;
    tree.nodes.emplace_back();
    struct Pending {
      int node, lo, hi, depth;
      std::shared_ptr<Hist> hist;
    };
    std::vector<Pending> level;
    level.push_back({0, 0, static_cast<int>(idx.size()), 0, nullptr});
    Scratch s;
    const double lambda = params_.lambda;
    while (!level.empty()) {
      std::vector<Pending> next;
      for (Pending& cur : level) {
        const int nn = cur.hi - cur.lo;
        double g = 0, h = 0;
        for (int k = cur.lo; k < cur.hi; ++k) {
          const auto r = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
          g += grad_[r];
          h += hess_[r];
        }
        {
          auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
          node.count = nn;
          node.value = -g / (h + lambda) * params_.eta;
        }
        if (cur.depth >= params_.max_depth || nn < 2) continue;
        const double parent = g * g / (h + lambda);
        double best_gain = 1e-12;
        int best_f = -1, best_bin = 0;
        auto consider = [&](int f, int bin, int nl, double gl, double hl) {
          if (nl >= nn) return;
          const double gr = g - gl, hr = h - hl;
          if (hl < params_.min_child_weight || hr < params_.min_child_weight) return;
          const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_bin = bin;
          }
        };
        if (!cur.hist && nn >= kDenseRows) cur.hist = build_hist(idx, cur.lo, cur.hi);
        if (cur.hist) {
          const Hist& hs = *cur.hist;
          for (int f = 0; f < b_.cols; ++f) {
            double gl = 0, hl = 0;
            int nl = 0;
            for (int bin = 0, nb = bm_.bin_count(f); bin < nb; ++bin) {
              const std::size_t slot = static_cast<std::size_t>(f) * kBinSlots + static_cast<std::size_t>(bin);
              if (hs.c[slot] == 0) continue;
              nl += hs.c[slot];
              gl += hs.g[slot];
              hl += hs.h[slot];
              consider(f, bin, nl, gl, hl);
            }
          }
        } else {
          for (int f = 0; f < b_.cols; ++f) {
            for (int k = cur.lo; k < cur.hi; ++k) {
              const int r = idx[static_cast<std::size_t>(k)];
              s.add(b_.at(r, f), grad_[static_cast<std::size_t>(r)], hess_[static_cast<std::size_t>(r)]);
            }
            double gl = 0, hl = 0;
            int nl = 0;
            s.drain([&](int bin, int cnt, double ga, double ha) {
              nl += cnt;
              gl += ga;
              hl += ha;
              consider(f, bin, nl, gl, hl);
            });
          }
        }
        if (best_f < 0) continue;
        auto mid = std::partition(idx.begin() + cur.lo, idx.begin() + cur.hi,
                                  [&](int r) { return b_.at(r, best_f) <= best_bin; });
        const int split = static_cast<int>(mid - idx.begin());
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
        node.feature = best_f;
        node.bin = best_bin;
        node.threshold = bm_.thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_bin)];
        node.left = left;
        node.right = left + 1;
        std::shared_ptr<Hist> hist_left, hist_right;
        const int n_left = split - cur.lo, n_right = cur.hi - split;
        if (cur.hist && std::max(n_left, n_right) >= kDenseRows) {
          // Build the smaller child and obtain the larger one by subtraction.
          const bool left_small = n_left <= n_right;
          auto small = left_small ? build_hist(idx, cur.lo, split) : build_hist(idx, split, cur.hi);
          Hist& large = *cur.hist;
          for (std::size_t k = 0; k < large.g.size(); ++k) {
            large.g[k] -= small->g[k];
            large.h[k] -= small->h[k];
            large.c[k] -= small->c[k];
          }
          (left_small ? hist_left : hist_right) = small;
          (left_small ? hist_right : hist_left) = cur.hist;
        }
        next.push_back({left, cur.lo, split, cur.depth + 1, hist_left});
        next.push_back({left + 1, split, cur.hi, cur.depth + 1, hist_right});
      }
      level = std::move(next);
    }
    return tree;
  }

  const BinnedMatrix& b_;
  const BinMapper& bm_;
  const Eigen::VectorXd& y_;
  std::vector<int> train_, val_;
  BoostParams params_;
  Seed seed_;
  double base_ = 0;
  std::vector<double> train_margin_, val_margin_;
  std::vector<double> grad_, hess_;
  std::vector<Tree> trees_;
};

struct CurveResult {
  int best_round = 0;
  double best_loss = 0;
};

// Early stopping over the pooled validation loss of several runs.
CurveResult run_lockstep(std::vector<BoostRun>& runs, const BoostParams& params, double val_rows,
                         std::vector<double>* train_curve) {
  auto pooled = [&] {
    double s = 0;
    for (const auto& r : runs) s += r.val_loss_sum();
    return s / val_rows;
  };
  CurveResult c;
  c.best_loss = pooled();
  for (int round = 1; round <= params.max_rounds; ++round) {
    for (auto& r : runs) r.step();
    if (train_curve) train_curve->push_back(runs.front().train_loss_sum());
    const double l = pooled();
    if (l < c.best_loss - 1e-12) {
      c.best_loss = l;
      c.best_round = round;
    }
    if (round - c.best_round >= params.patience) break;
  }
  return c;
}

}  // namespace

double BoostedTrees::margin(const double* row, int stride) const {
  double m = base_score;
  for (const auto& t : trees) m += t.leaf(row, stride).value;
  return m;
}

double BoostedTrees::predict(const double* row, int stride) const { return clip_risk(logistic(margin(row, stride))); }

std::vector<double> BoostedTrees::predict(const Eigen::MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(x.data() + i, static_cast<int>(x.rows()));
  return out;
}

BoostedTrees fit_boosted_params(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const BoostParams& params,
                                Seed seed) {
  require_two_classes(y, "boosting");
  const auto bm = BinMapper::fit(x);
  const auto b = bin_matrix(bm, x);
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> train, val;
  if (params.holdout_fraction > 0) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(combine_seed(seed, fnv1a64("holdout")));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto nval = static_cast<std::size_t>(std::llround(params.holdout_fraction * static_cast<double>(n)));
    val.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nval));
    train.assign(perm.begin() + static_cast<std::ptrdiff_t>(nval), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
  } else {
    train.resize(n);
    std::iota(train.begin(), train.end(), 0);
  }
  BoostedTrees out;
  out.params = params;
  std::vector<BoostRun> runs;
  runs.emplace_back(b, bm, y, train, val, params, seed);
  const auto ntrain = static_cast<double>(train.size());
  if (val.empty()) {
    for (int round = 0; round < params.max_rounds; ++round) {
      runs[0].step();
      out.train_loss.push_back(runs[0].train_loss_sum() / ntrain);
    }
    out.trees = std::move(runs[0].trees());
  } else {
    std::vector<double> curve;
    const auto c = run_lockstep(runs, params, static_cast<double>(val.size()), &curve);
    for (double v : curve) out.train_loss.push_back(v / ntrain);
    auto& trees = runs[0].trees();
    trees.resize(static_cast<std::size_t>(c.best_round));
    out.trees = std::move(trees);
  }
  out.base_score = runs[0].base();
  return out;
}

BoostedTrees fit_boosted_trees(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, TreeMode mode, Seed seed) {
  require_two_classes(y, "boosting");
  std::vector<int> depths;
  switch (mode) {
    case TreeMode::kSmall: depths = {2}; break;
    case TreeMode::kLarge: depths = {20}; break;
    case TreeMode::kTuned: depths = {1, 2, 3, 4, 6}; break;
  }
  static constexpr std::array<double, 3> kEtas = {0.05, 0.1, 0.3};
  static constexpr std::array<double, 3> kSubsamples = {0.6, 0.8, 1.0};
  constexpr int kFolds = 5;
  const auto bm = BinMapper::fit(x);
  const auto b = bin_matrix(bm, x);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto fold = fold_assignment(n, kFolds, combine_seed(seed, fnv1a64("xgb-folds")));
  std::array<std::vector<int>, kFolds> tr, va;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kFolds; ++k) (fold[i] == k ? va[k] : tr[k]).push_back(static_cast<int>(i));
  }
  BoostParams best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int depth : depths) {
    for (double eta : kEtas) {
      for (double sub : kSubsamples) {
        BoostParams p;
        p.max_depth = depth;
        p.eta = eta;
        p.subsample = sub;
        std::vector<BoostRun> runs;
        runs.reserve(kFolds);
        for (int k = 0; k < kFolds; ++k) {
          runs.emplace_back(b, bm, y, tr[k], va[k], p, combine_seed(seed, 0xb00 + static_cast<Seed>(k)));
        }
        const auto c = run_lockstep(runs, p, static_cast<double>(n), nullptr);
        if (c.best_loss < best_loss) {
          best_loss = c.best_loss;
          best = p;
        }
      }
    }
  }
  auto out = fit_boosted_params(x, y, best, seed);
  out.cv_logloss = best_loss;
  return out;
}

}  // namespace riskverse
