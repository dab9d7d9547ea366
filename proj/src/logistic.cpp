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

#include "riskverse/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "riskverse/error.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double deviance_from_eta(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double d = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) d += softplus(y(i) > 0.5 ? -eta(i) : eta(i));
  return 2.0 * d;
}

// Column k of the design [1 Z] lying in the span of columns 0..k-1 is
// reported together with the earlier column that explains most of it.
void check_collinearity(const Eigen::MatrixXd& a) {
  const Eigen::Index q = a.cols();
  const double n = static_cast<double>(a.rows());
  const Eigen::MatrixXd gram = a.transpose() * a / n;
  for (Eigen::Index k = 1; k < q; ++k) {
    const Eigen::MatrixXd sub = gram.topLeftCorner(k, k);
    const Eigen::VectorXd gk = gram.col(k).head(k);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
    const Eigen::VectorXd coef = ldlt.solve(gk);
    const double resid = gram(k, k) - gk.dot(coef);
    if (resid < 1e-9 * std::max(1.0, gram(k, k))) {
      Eigen::Index partner = 0;
      Eigen::VectorXd weight = coef.cwiseAbs();
      // Intercept loadings are not comparable to standardized columns; prefer a
      // real column whenever one contributes.
      if (k > 1 && weight.tail(k - 1).maxCoeff() > 1e-6) {
        weight.tail(k - 1).maxCoeff(&partner);
        partner += 1;
      }
      const int first = static_cast<int>(partner) - 1;
      const int second = static_cast<int>(k) - 1;
      throw CollinearityError(first, second,
                              "logistic fit: column " + std::to_string(second) + " is collinear with " +
                                  (first < 0 ? std::string("the intercept") : "column " + std::to_string(first)));
    }
  }
}

}  // namespace

double LogisticFit::linear_predictor(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return beta(0) + x.dot(beta.tail(beta.size() - 1));
}

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  double d = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p(i), 1e-15, 1.0 - 1e-15);
    d += y(i) > 0.5 ? -std::log(pi) : -std::log1p(-pi);
  }
  return 2.0 * d;
}

LogisticFit fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const IrlsOptions& opt) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw FitError("logistic fit: label count does not match rows");
  if (n == 0) throw FitError("logistic fit: no rows");
  if (!(opt.ridge_lambda >= 0)) throw FitError("logistic fit: ridge lambda must be >= 0");
  const double events = y.sum();
  if (events < 0.5 || events > static_cast<double>(n) - 0.5) {
    throw FitError("logistic fit: labels contain a single class");
  }

  // Work on centered and scaled columns; the penalty is mapped exactly.
  Eigen::VectorXd mean = x.colwise().mean().transpose();
  Eigen::VectorXd scale(p);
  Eigen::MatrixXd a(n, p + 1);
  a.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double sd = std::sqrt((x.col(j).array() - mean(j)).square().mean());
    if (!(sd > 0)) {
      throw CollinearityError(-1, static_cast<int>(j),
                              "logistic fit: column " + std::to_string(j) + " is constant");
    }
    scale(j) = sd;
    a.col(j + 1) = (x.col(j).array() - mean(j)) / sd;
  }
  if (opt.ridge_lambda == 0.0) check_collinearity(a);

  Eigen::VectorXd pen = Eigen::VectorXd::Zero(p + 1);
  for (Eigen::Index j = 0; j < p; ++j) pen(j + 1) = 2.0 * opt.ridge_lambda / (scale(j) * scale(j));

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p + 1);
  gamma(0) = logit(events / static_cast<double>(n));
  Eigen::VectorXd eta = a * gamma;
  auto penalized = [&](const Eigen::VectorXd& g, const Eigen::VectorXd& e) {
    return deviance_from_eta(y, e) + g.cwiseProduct(g).dot(pen);
  };

  LogisticFit fit;
  double pd = penalized(gamma, eta);
  fit.deviance_trace.push_back(pd);
  Eigen::VectorXd prob(n), w(n);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = logistic(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = a.transpose() * (y - prob) - pen.cwiseProduct(gamma);
    Eigen::MatrixXd h = a.transpose() * w.asDiagonal() * a;
    h.diagonal() += pen;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite()) throw FitError("logistic fit: singular information matrix");

    double t = 1.0;
    Eigen::VectorXd cand, cand_eta;
    double cand_pd = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int half = 0; half < 30; ++half, t *= 0.5) {
      cand = gamma + t * step;
      cand_eta = a * cand;
      cand_pd = penalized(cand, cand_eta);
      if (cand_pd <= pd) {
        accepted = true;
        break;
      }
    }
    fit.iterations = it;
    if (!accepted) {
      // No descent possible at machine precision: we are at the optimum.
      fit.converged = true;
      break;
    }
    const double change = std::abs(pd - cand_pd) / (std::abs(cand_pd) + 0.1);
    const double moved = t * step.cwiseAbs().maxCoeff();
    gamma = cand;
    eta = cand_eta;
    pd = cand_pd;
    fit.deviance_trace.push_back(pd);
    // A flat deviance alone can stop one Newton step short of the score equations.
    if (change < opt.tolerance && moved < 1e-6) {
      fit.converged = true;
      break;
    }
  }

  // Near the optimum the deviance cannot resolve the remaining score error, so
  // the line search stalls on ties. Plain Newton steps finish the job; they
  // are not traced.
  for (int polish = 0; fit.converged && polish < 3 && eta.cwiseAbs().maxCoeff() <= opt.separation_eta; ++polish) {
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = logistic(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = a.transpose() * (y - prob) - pen.cwiseProduct(gamma);
    Eigen::MatrixXd h = a.transpose() * w.asDiagonal() * a;
    h.diagonal() += pen;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    const double size = step.cwiseAbs().maxCoeff();
    if (!step.allFinite() || size > 1e-4) break;
    gamma += step;
    eta = a * gamma;
    if (size < 1e-14) break;
  }
  pd = penalized(gamma, eta);

  for (Eigen::Index i = 0; i < n; ++i) {
    prob(i) = logistic(eta(i));
    w(i) = prob(i) * (1.0 - prob(i));
  }
  const Eigen::MatrixXd info = a.transpose() * w.asDiagonal() * a;
  Eigen::MatrixXd h = info;
  h.diagonal() += pen;
  const Eigen::MatrixXd hinv = h.ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));

  Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(p + 1, p + 1);
  tmat(0, 0) = 1.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    tmat(0, j + 1) = -mean(j) / scale(j);
    tmat(j + 1, j + 1) = 1.0 / scale(j);
  }
  fit.beta = tmat * gamma;
  const Eigen::MatrixXd cov = tmat * hinv * tmat.transpose();
  fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.deviance = deviance_from_eta(y, eta);
  fit.penalized_deviance = pd;
  fit.df_effective = (hinv * info).trace();
  fit.separation = eta.cwiseAbs().maxCoeff() > opt.separation_eta;
  return fit;
}

std::vector<double> default_ridge_grid() {
  std::vector<double> g{0.0};
  for (int k = 0; k <= 28; ++k) g.push_back(std::pow(10.0, -2.0 + 0.25 * k));
  return g;
}

RidgeTuning ridge_aic_tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty()) throw FitError("ridge_aic_tune: empty lambda grid");
  RidgeTuning out;
  out.grid = lambda_grid;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : lambda_grid) {
    const auto fit = fit_logistic_irls(x, y, lambda);
    const double aic = fit.deviance + 2.0 * fit.df_effective;
    out.aic.push_back(aic);
    if (aic < best || (aic == best && lambda > out.lambda)) {
      best = aic;
      out.lambda = lambda;
    }
  }
  return out;
}

std::vector<int> columns_in_groups(const std::vector<int>& group, const std::vector<int>& groups) {
  std::vector<int> cols;
  for (std::size_t j = 0; j < group.size(); ++j) {
    if (std::find(groups.begin(), groups.end(), group[j]) != groups.end()) cols.push_back(static_cast<int>(j));
  }
  return cols;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
  return out;
}

BackwardResult backward_eliminate(const Eigen::MatrixXd& x, const std::vector<int>& group,
                                  const Eigen::VectorXd& y, double alpha) {
  if (static_cast<Eigen::Index>(group.size()) != x.cols()) {
    throw FitError("backward_eliminate: grouping does not cover every column");
  }
  std::set<int> uniq(group.begin(), group.end());
  BackwardResult out;
  out.kept_groups.assign(uniq.begin(), uniq.end());
  while (!out.kept_groups.empty()) {
    const auto full_cols = columns_in_groups(group, out.kept_groups);
    const double dev_full = fit_logistic_irls(select_columns(x, full_cols), y).deviance;
    double worst_p = -1;
    int worst = -1;
    for (int g : out.kept_groups) {
      std::vector<int> rest;
      for (int h : out.kept_groups) {
        if (h != g) rest.push_back(h);
      }
      const auto cols = columns_in_groups(group, rest);
      const double dev = fit_logistic_irls(select_columns(x, cols), y).deviance;
      const auto df = static_cast<double>(full_cols.size() - cols.size());
      const double pval = chi_square_sf(dev - dev_full, df);
      // Ascending group order: strict '>' keeps the lowest index on ties.
      if (pval > worst_p) {
        worst_p = pval;
        worst = g;
      }
    }
    if (!(worst_p > alpha)) break;
    out.removed_groups.push_back(worst);
    out.kept_groups.erase(std::find(out.kept_groups.begin(), out.kept_groups.end(), worst));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct MfpData {
  std::array<Eigen::VectorXd, kNumContinuous> z;  // shifted and scaled
  std::array<Eigen::VectorXd, 2> binary;
  Eigen::VectorXd y;
};

void append_fp_columns(const Eigen::VectorXd& z, const std::vector<double>& powers,
                       std::vector<Eigen::VectorXd>& cols) {
  for (std::size_t k = 0; k < powers.size(); ++k) {
    Eigen::VectorXd c(z.size());
    const bool repeated = k == 1 && powers[1] == powers[0];
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      c(i) = fp_term(z(i), powers[k]) * (repeated ? std::log(z(i)) : 1.0);
    }
    cols.push_back(std::move(c));
  }
}

double fit_deviance(const std::vector<Eigen::VectorXd>& cols, const Eigen::VectorXd& y) {
  Eigen::MatrixXd x(y.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = cols[k];
  IrlsOptions o;
  o.tolerance = 1e-9;
  try {
    return fit_logistic_irls(x, y, o).deviance;
  } catch (const FitError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

MfpResult mfp_fit(const FittedTransform& t, const Cohort& train, const MfpOptions& opt) {
  if (t.spec.continuous != ContinuousHandling::kFractionalPolynomial) {
    throw FitError("mfp_fit: transform is not fractional-polynomial");
  }
  const auto n = static_cast<Eigen::Index>(train.size());
  MfpData d;
  for (auto& z : d.z) z.resize(n);
  for (auto& b : d.binary) b.resize(n);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    if (!r.outcome) throw DataError("mfp_fit: training record without outcome");
    const auto base = base_continuous(r, t.spec.size);
    for (int v = 0; v < kNumContinuous; ++v) {
      const double shifted = base[v] + t.vars[v].fp_shift;
      if (!(shifted > 0)) throw DataError("mfp_fit: non-positive value after shift for " + predictor_name(v));
      d.z[v](i) = fp_argument(t.vars[v], base[v]);
    }
    d.binary[0](i) = r.bilateral ? 1.0 : 0.0;
    d.binary[1](i) = r.papflow ? 1.0 : 0.0;
    d.y(i) = *r.outcome ? 1.0 : 0.0;
  }

  MfpResult res;
  for (auto& pw : res.powers) pw = {1.0};

  auto model_columns = [&](int skip) {
    std::vector<Eigen::VectorXd> cols;
    for (int v = 0; v < kNumContinuous; ++v) {
      if (v != skip) append_fp_columns(d.z[v], res.powers[v], cols);
    }
    for (int b = 0; b < 2; ++b) {
      if (kNumContinuous + b != skip && res.binary_included[b]) cols.push_back(d.binary[b]);
    }
    return cols;
  };

  // Visit predictors from most to least significant in the full linear model.
  std::vector<std::pair<double, int>> order;
  {
    const double dev_full = fit_deviance(model_columns(-1), d.y);
    for (int v = 0; v < kNumPredictors; ++v) {
      const double dev = fit_deviance(model_columns(v), d.y);
      order.emplace_back(chi_square_sf(dev - dev_full, 1.0), v);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
  }

  const bool selecting = opt.select_alpha < 1.0;
  for (int cycle = 1; cycle <= opt.max_cycles; ++cycle) {
    res.cycles = cycle;
    bool changed = false;
    for (const auto& [p_unused, v] : order) {
      (void)p_unused;
      auto others = model_columns(v);
      const double dev_null = fit_deviance(others, d.y);
      if (v >= kNumContinuous) {
        const int b = v - kNumContinuous;
        bool include = true;
        if (selecting) {
          others.push_back(d.binary[b]);
          const double dev_with = fit_deviance(others, d.y);
          include = chi_square_sf(dev_null - dev_with, 1.0) <= opt.select_alpha;
        }
        changed |= include != res.binary_included[b];
        res.binary_included[b] = include;
        continue;
      }
      auto dev_with = [&](const std::vector<double>& powers) {
        auto cols = others;
        append_fp_columns(d.z[v], powers, cols);
        return fit_deviance(cols, d.y);
      };
      const double dev_lin = dev_with({1.0});
      double dev_fp1 = std::numeric_limits<double>::infinity();
      std::vector<double> best_fp1{1.0};
      for (double pw : kFpPowers) {
        const double dev = dev_with({pw});
        if (dev < dev_fp1) {
          dev_fp1 = dev;
          best_fp1 = {pw};
        }
      }
      double dev_fp2 = std::numeric_limits<double>::infinity();
      std::vector<double> best_fp2 = best_fp1;
      for (std::size_t i = 0; i < kFpPowers.size(); ++i) {
        for (std::size_t j = i; j < kFpPowers.size(); ++j) {
          const double dev = dev_with({kFpPowers[i], kFpPowers[j]});
          if (dev < dev_fp2) {
            dev_fp2 = dev;
            best_fp2 = {kFpPowers[i], kFpPowers[j]};
          }
        }
      }
      std::vector<double> chosen{1.0};
      if (std::isfinite(dev_fp2)) {
        if (selecting && chi_square_sf(dev_null - dev_fp2, 4.0) > opt.select_alpha) {
          chosen.clear();
        } else if (chi_square_sf(dev_lin - dev_fp2, 3.0) > opt.fp_alpha) {
          chosen = {1.0};
        } else if (chi_square_sf(dev_fp1 - dev_fp2, 2.0) > opt.fp_alpha) {
          chosen = best_fp1;
        } else {
          chosen = best_fp2;
        }
      }
      changed |= chosen != res.powers[v];
      res.powers[v] = chosen;
    }
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace riskverse
