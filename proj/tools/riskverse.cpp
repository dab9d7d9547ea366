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

// Command-line front end: synth, validate, run, report, plot.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "riskverse/config.hpp"
#include "riskverse/error.hpp"
#include "riskverse/report.hpp"
#include "riskverse/synthgen.hpp"

namespace rv = riskverse;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 2;
constexpr int kRuntimeFailure = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int cmd_validate(const std::string& config_path) {
  const auto cfg = rv::load_experiment_config(config_path);
  const auto& c = cfg.run;
  const auto grid = rv::enumerate_grid(c);
  rv::check_seed_collisions(c, grid);
  const std::size_t data = c.grid.size_definitions.size() * c.grid.imputations.size();
  std::size_t logistic = 0;
  for (const auto& l : c.grid.learners) logistic += l.family == rv::LearnerFamily::kLogistic ? 1 : 0;
  std::cout << "model: " << c.grid.learners.size() << " (logistic " << logistic << ", tree-based "
            << c.grid.learners.size() - logistic << ")\n";
  std::cout << "data: " << data << " (size definitions " << c.grid.size_definitions.size() << " × imputations "
            << c.grid.imputations.size() << ")\n";
  std::cout << "population: " << c.grid.populations.size() << "\n";
  std::cout << "scenarios: " << grid.size() << " (model " << c.grid.learners.size() << " × data " << data
            << " × population " << c.grid.populations.size() << ")\n";
  std::cout << "work units: " << grid.size() * static_cast<std::size_t>(c.replicates) * c.train_sizes.size() << " ("
            << grid.size() << " × " << c.replicates << " replicates × " << c.train_sizes.size() << (c.train_sizes.size() == 1 ? " size)\n" : " sizes)\n");
  return kOk;
}

int cmd_synth(const std::string& config_path, const fs::path& out) {
  const auto cfg = rv::load_experiment_config(config_path);
  const auto cohorts = rv::prepare_cohorts(cfg.run, false);
  fs::create_directories(out);
  for (const auto& [name, real] : cohorts.pools) {
    std::cerr << "synthesizing " << name << " from " << real.size() << " records\n";
    const auto synth = rv::synthesize_pool(cfg.run, name, real);
    rv::save_cohort_csv(real, out / (name + "-real.csv"));
    rv::save_cohort_csv(synth, out / (name + "-synthetic.csv"));
    std::ofstream fid(out / (name + "-fidelity.csv"), std::ios::binary);
    rv::write_fidelity_csv(fid, rv::fidelity_report(real, synth));
  }
  rv::save_cohort_csv(cohorts.test, out / "test.csv");
  return kOk;
}

int cmd_run(const std::string& config_path, const fs::path& out) {
  const auto cfg = rv::load_experiment_config(config_path);
  rv::RunOptions opt;
  opt.cancel = &g_interrupted;
  opt.progress = [](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\r%zu/%zu work units", done, total);
    if (done == total) std::fputc('\n', stderr);
  };
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto s = rv::run_all(cfg.run, out, opt);
  if (!s.complete) {
    std::fprintf(stderr, "\ninterrupted after %zu of %zu work units; rerun to resume\n", s.resumed + s.executed,
                 s.total);
    return kRuntimeFailure;
  }
  if (s.executed == 0 && s.resumed == s.total) std::cerr << "store is already complete\n";
  const auto st = rv::load_store(out);
  const auto& counts = st.manifest.at("counts");
  std::cout << "completed " << counts.at("completed") << " of " << counts.at("units") << " work units ("
            << counts.at("failed") << " failed, " << counts.at("flagged") << " flagged) in " << out.string() << "\n";
  return kOk;
}

std::vector<rv::Source> views_from(const std::string& view, std::vector<rv::Source> fallback) {
  if (view.empty()) return fallback;
  return {rv::parse_source(view)};
}

int cmd_report(const fs::path& store_dir, const std::string& view, fs::path out) {
  const auto store = rv::load_store(store_dir);
  if (out.empty()) out = store_dir / "report";
  fs::create_directories(out);

  std::ostringstream headline;
  rv::write_summary_csv(headline, rv::headline_rows(store));
  write_text(out / "headline.csv", headline.str());

  std::vector<std::string> skipped;
  const auto views = views_from(view, {rv::Source::kEstimation, rv::Source::kModel, rv::Source::kData,
                                       rv::Source::kPopulation, rv::Source::kAll});
  const auto rows = rv::source_rows(store, views, view.empty() ? &skipped : nullptr);
  std::ostringstream sources;
  rv::write_summary_csv(sources, rows);
  write_text(out / "sources.csv", sources.str());
  std::cout << headline.str() << "\n" << sources.str();
  for (const auto& s : skipped) std::cerr << "skipped " << s << "\n";
  return kOk;
}

int cmd_plot(const fs::path& store_dir, const std::string& view, int size, fs::path out) {
  const auto store = rv::load_store(store_dir);
  if (out.empty()) out = store_dir / "plots";
  fs::create_directories(out);
  std::set<int> sizes;
  for (const auto& u : store.units) sizes.insert(u.key.n_train);
  if (size > 0) {
    if (!sizes.count(size)) throw rv::DataError("the store has no units at n_train " + std::to_string(size));
    sizes = {size};
  }
  for (rv::Source v : views_from(view, {rv::Source::kEstimation, rv::Source::kAll})) {
    for (int n : sizes) {
      const auto d = rv::plot_data(store, v, n);
      const std::string stem = std::string("plot_") + rv::source_name(v) + "_n" + std::to_string(n);
      std::ofstream csv(out / (stem + ".csv"), std::ios::binary);
      rv::write_plot_csv(csv, d);
      std::ofstream svg(out / (stem + ".svg"), std::ios::binary);
      rv::write_plot_svg(svg, d);
      std::cout << stem << ": " << d.patients << " patients × " << d.models << " models\n";
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individual risk uncertainty across a multiverse of model development choices"};
  app.require_subcommand(1);
  std::string config, view;
  fs::path out, store;
  int size = 0;

  auto* synth = app.add_subcommand("synth", "Fit synthesizers on the configured pools and write fidelity reports");
  synth->add_option("--config", config, "Experiment config (JSON)")->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check a config and print the grid size");
  validate->add_option("--config", config, "Experiment config (JSON)")->required();

  auto* run = app.add_subcommand("run", "Execute (or resume) every work unit into a result store");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out,--store", out, "Result store directory")->required();

  auto* report = app.add_subcommand("report", "Write summary tables from a result store");
  report->add_option("--store", store, "Result store directory")->required();
  report->add_option("--view", view, "estimation|model|data|population|all (default: every view)");
  report->add_option("--out", out, "Output directory (default: <store>/report)");

  auto* plot = app.add_subcommand("plot", "Write per-patient scatter data and SVG figures");
  plot->add_option("--store", store, "Result store directory")->required();
  plot->add_option("--view", view, "estimation|model|data|population|all (default: estimation and all)");
  plot->add_option("--size", size, "Training size (default: every stored size)");
  plot->add_option("--out", out, "Output directory (default: <store>/plots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*synth) return cmd_synth(config, out);
    if (*validate) return cmd_validate(config);
    if (*run) return cmd_run(config, out);
    if (*report) return cmd_report(store, view, out);
    if (*plot) return cmd_plot(store, view, size, out);
  } catch (const rv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}
