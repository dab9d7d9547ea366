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

#include "riskverse/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "riskverse/error.hpp"

namespace riskverse {

ThresholdPolicy store_policy(const ResultStore& store) {
  ThresholdPolicy p;
  p.threshold = store.manifest.at("config").at("threshold").get<double>();
  return p;
}

std::vector<SummaryRow> headline_rows(const ResultStore& store) {
  const auto policy = store_policy(store);
  auto est = decompose(store, Source::kEstimation, policy);
  auto all = decompose(store, Source::kAll, policy);
  std::erase_if(all, [](const SummaryRow& r) { return r.subset != "all"; });
  std::vector<SummaryRow> rows;
  for (std::size_t k = 0; k < est.size(); ++k) {
    rows.push_back(est[k]);
    for (const auto& r : all) {
      if (r.n_train == est[k].n_train) rows.push_back(r);
    }
  }
  return rows;
}

std::vector<SummaryRow> source_rows(const ResultStore& store, const std::vector<Source>& views,
                                    std::vector<std::string>* skipped) {
  const auto policy = store_policy(store);
  std::vector<SummaryRow> rows;
  for (Source v : views) {
    try {
      auto part = decompose(store, v, policy);
      rows.insert(rows.end(), part.begin(), part.end());
    } catch (const DataError& e) {
      if (!skipped) throw;
      skipped->push_back(std::string(source_name(v)) + ": " + e.what());
    }
  }
  return rows;
}

PlotData plot_data(const ResultStore& store, Source view, int n_train) {
  const auto slice = slice_at(store, n_train);
  const std::size_t n = store.test_labels.size();
  if (slice.matrix.models() == 0) throw DataError("no completed models at n_train " + std::to_string(n_train));

  std::vector<double> mean(n, 0.0);
  for (std::size_t j = 0; j < slice.matrix.models(); ++j) {
    const auto col = slice.matrix.column(j);
    for (std::size_t i = 0; i < n; ++i) mean[i] += col[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] < mean[b]; });

  PlotData d;
  d.view = view;
  d.n_train = n_train;
  d.patients = n;
  const auto cols = select_columns(store, view, n_train);
  if (cols.empty()) {
    throw DataError(std::string("the ") + source_name(view) + " view selects no completed models at n_train " +
                    std::to_string(n_train));
  }
  d.models = cols.size();
  for (std::size_t j : cols) {
    const auto& k = slice.units[j]->key;
    d.column_labels.push_back(k.scenario_id + "#" + std::to_string(k.replicate));
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      d.points.push_back({r + 1, order[r], c, slice.matrix.at(order[r], cols[c])});
    }
  }
  return d;
}

void write_plot_csv(std::ostream& out, const PlotData& d) {
  out << "rank,patient_id,model,risk\n";
  char buf[40];
  for (const auto& p : d.points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.risk);
    out << p.rank << ',' << p.patient << ',' << d.column_labels[p.column] << ',' << buf << '\n';
  }
}

void write_plot_svg(std::ostream& out, const PlotData& d) {
  constexpr double kWidth = 960, kHeight = 540, kLeft = 70, kRight = 20, kTop = 50, kBottom = 60;
  constexpr double kRadius = 1.6, kAlpha = 0.25;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x = [&](double rank) {
    return kLeft + (d.patients > 1 ? (rank - 1) / static_cast<double>(d.patients - 1) : 0.5) * pw;
  };
  auto y = [&](double risk) { return kTop + (1 - risk) * ph; };
  char buf[160];

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "%s view, n_train %d: %zu models; patients ordered by mean risk over all models",
                source_name(d.view), d.n_train, d.models);
  out << "<title>" << buf << "</title>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"14\">" << buf << "</text>\n";

  out << "<g stroke=\"#444\" fill=\"none\">\n";
  std::snprintf(buf, sizeof buf, "<path d=\"M%.1f %.1fV%.1fH%.1f\"/>\n", kLeft, kTop, kTop + ph, kLeft + pw);
  out << buf;
  for (int t = 0; t <= 10; t += 2) {
    std::snprintf(buf, sizeof buf, "<path d=\"M%.1f %.1fh-5\"/>\n", kLeft, y(t / 10.0));
    out << buf;
  }
  out << "</g>\n<g text-anchor=\"end\">\n";
  for (int t = 0; t <= 10; t += 2) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">%.1f</text>\n", kLeft - 8, y(t / 10.0) + 4, t / 10.0);
    out << buf;
  }
  out << "</g>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">test patients (rank of mean risk)</text>\n",
                kLeft + pw / 2, kHeight - 20);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text transform=\"translate(20 %.1f) rotate(-90)\" text-anchor=\"middle\">estimated risk</text>\n",
                kTop + ph / 2);
  out << buf;

  std::snprintf(buf, sizeof buf, "<g fill=\"#1f4e9c\" fill-opacity=\"%.2f\">\n", kAlpha);
  out << buf;
  for (const auto& p : d.points) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"%.1f\"/>\n", x(static_cast<double>(p.rank)),
                  y(p.risk), kRadius);
    out << buf;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace riskverse
