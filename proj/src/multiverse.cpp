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

#include "riskverse/multiverse.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "riskverse/error.hpp"
#include "riskverse/synthgen.hpp"

namespace riskverse {

namespace fs = std::filesystem;

const char* const kCodeVersion = "riskverse 1.0.0";

const char* resampling_name(Resampling r) {
  return r == Resampling::kWithReplacement ? "with-replacement" : "without-replacement";
}

std::vector<LearnerSpec> all_learners() {
  std::vector<LearnerSpec> out;
  for (auto h : {ContinuousHandling::kLinear, ContinuousHandling::kDichotomizeMedian,
                 ContinuousHandling::kQuartileCategories, ContinuousHandling::kFractionalPolynomial,
                 ContinuousHandling::kRcs3}) {
    for (auto s : {Selection::kNone, Selection::kBackward001, Selection::kBackward020}) {
      for (auto p : {Penalty::kNone, Penalty::kRidgeAic}) {
        if (h == ContinuousHandling::kFractionalPolynomial && p == Penalty::kRidgeAic) continue;
        LearnerSpec l;
        l.handling = h;
        l.selection = s;
        l.penalty = p;
        out.push_back(l);
      }
    }
  }
  for (auto f : {LearnerFamily::kRandomForest, LearnerFamily::kBoostedTrees}) {
    for (auto m : {TreeMode::kSmall, TreeMode::kLarge, TreeMode::kTuned}) {
      LearnerSpec l;
      l.family = f;
      l.tree_mode = m;
      out.push_back(l);
    }
  }
  return out;
}

RunConfig full_config() {
  RunConfig c;
  c.grid.learners = all_learners();
  c.grid.size_definitions = {SizeDefinition::kDiameter, SizeDefinition::kVolume};
  c.grid.imputations = {ImputeStrategy::kRegression, ImputeStrategy::kOutcomeConditionalMedian,
                        ImputeStrategy::kUnconditionalMedian};
  c.grid.populations = {"leuven", "malmo", "rome"};
  c.sources = {{"leuven", "leuven", {}, 1122, 100000},
               {"malmo", "malmo", {}, 1048, 100000},
               {"rome", "rome", {}, 1131, 100000}};
  return c;
}

namespace {

const PopulationSource* find_source(const RunConfig& c, const std::string& name) {
  for (const auto& s : c.sources) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  if (train_sizes.empty()) throw ConfigError("sizes: at least one training size is required");
  for (int n : train_sizes) {
    if (n <= 0) throw ConfigError("sizes: training sizes must be positive, got " + std::to_string(n));
  }
  if (std::set<int>(train_sizes.begin(), train_sizes.end()).size() != train_sizes.size()) {
    throw ConfigError("sizes: duplicate training size");
  }
  if (replicates < 1) throw ConfigError("replicates: must be at least 1");
  policy.validate();
  if (grid.learners.empty()) throw ConfigError("grid.learners: axis is empty");
  if (grid.size_definitions.empty()) throw ConfigError("grid.size_definitions: axis is empty");
  if (grid.imputations.empty()) throw ConfigError("grid.imputations: axis is empty");
  if (grid.populations.empty()) throw ConfigError("grid.populations: axis is empty");
  for (const auto& l : grid.learners) l.validate();
  if (test_size < 2) throw ConfigError("test.size: need at least two test patients");
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (!names.insert(s.name).second) throw ConfigError("populations." + s.name + ": defined twice");
    if (s.generator.empty() == s.csv.empty()) {
      throw ConfigError("populations." + s.name + ": give exactly one of generator or csv");
    }
    if (!s.generator.empty() && s.n == 0) throw ConfigError("populations." + s.name + ".n: must be positive");
  }
  for (const auto& p : grid.populations) {
    if (!find_source(*this, p)) throw ConfigError("grid.populations: no source defined for '" + p + "'");
  }
  if (!find_source(*this, test_population)) {
    throw ConfigError("test.population: no source defined for '" + test_population + "'");
  }
  if (forest.trees < 1 || forest.cv_trees < 1 || forest.folds < 2) throw ConfigError("forest: invalid tree counts");
  if (workers < 0) throw ConfigError("workers: must be non-negative");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["sizes"] = train_sizes;
  j["replicates"] = replicates;
  j["threshold"] = policy.threshold;
  j["resampling"] = resampling_name(resampling);
  auto& g = j["grid"];
  g["learners"] = nlohmann::json::array();
  for (const auto& l : grid.learners) g["learners"].push_back(l.id());
  g["size_definitions"] = nlohmann::json::array();
  for (auto s : grid.size_definitions) g["size_definitions"].push_back(size_definition_name(s));
  g["imputations"] = nlohmann::json::array();
  for (auto s : grid.imputations) g["imputations"].push_back(impute_strategy_name(s));
  g["populations"] = grid.populations;
  j["populations"] = nlohmann::json::object();
  for (const auto& s : sources) {
    nlohmann::json p;
    if (!s.generator.empty()) {
      p["generator"] = s.generator;
      p["n"] = s.n;
    } else {
      p["csv"] = s.csv.generic_string();
    }
    p["synthesize"] = s.synthesize;
    j["populations"][s.name] = p;
  }
  j["test"] = {{"population", test_population}, {"size", test_size}};
  j["forest"] = {{"trees", forest.trees}, {"cv_trees", forest.cv_trees}, {"folds", forest.folds}};
  return j;
}

// ---------------------------------------------------------------------------

namespace {

const char* size_token(SizeDefinition s) { return s == SizeDefinition::kDiameter ? "diam" : "vol"; }

const char* impute_token(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::kRegression: return "reg";
    case ImputeStrategy::kOutcomeConditionalMedian: return "ocmed";
    case ImputeStrategy::kUnconditionalMedian: return "med";
  }
  return "?";
}

}  // namespace

std::string scenario_id(const LearnerSpec& learner, SizeDefinition size, ImputeStrategy impute,
                        const std::string& population) {
  return population + "__" + size_token(size) + "__" + impute_token(impute) + "__" + learner.id();
}

std::vector<Scenario> enumerate_grid(const RunConfig& config) {
  const auto& g = config.grid;
  if (g.learners.empty() || g.size_definitions.empty() || g.imputations.empty() || g.populations.empty()) {
    config.validate();
  }
  std::vector<Scenario> out;
  for (const auto& p : g.populations) {
    for (auto s : g.size_definitions) {
      for (auto i : g.imputations) {
        for (const auto& l : g.learners) out.push_back({scenario_id(l, s, i, p), l, s, i, p});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (out[k].id == out[k - 1].id) throw ConfigError("grid: duplicate scenario " + out[k].id);
  }
  return out;
}

Seed derive_seed(Seed master, const std::string& id, int replicate, int n_train) {
  Seed s = combine_seed(master, fnv1a64(id));
  s = combine_seed(s, static_cast<std::uint64_t>(replicate));
  return combine_seed(s, static_cast<std::uint64_t>(n_train));
}

namespace {

std::string sample_stream(const std::string& population) { return "sample:" + population; }

}  // namespace

void check_seed_collisions(const RunConfig& config, const std::vector<Scenario>& grid) {
  std::vector<Seed> seeds;
  seeds.reserve((grid.size() + config.grid.populations.size()) * static_cast<std::size_t>(config.replicates) *
                config.train_sizes.size());
  for (int n : config.train_sizes) {
    for (int r = 0; r < config.replicates; ++r) {
      for (const auto& s : grid) seeds.push_back(derive_seed(config.seed, s.id, r, n));
      for (const auto& p : config.grid.populations) seeds.push_back(derive_seed(config.seed, sample_stream(p), r, n));
    }
  }
  std::sort(seeds.begin(), seeds.end());
  if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) {
    throw ConfigError("seed: two work units would share a derived seed; choose another master seed");
  }
}

// ---------------------------------------------------------------------------

std::string UnitKey::file_stem() const {
  return scenario_id + "__r" + std::to_string(replicate) + "__n" + std::to_string(n_train);
}

Cohort synthesize_pool(const RunConfig& config, const std::string& population, const Cohort& real) {
  const auto* src = find_source(config, population);
  if (!src) throw ConfigError("no source defined for '" + population + "'");
  const std::size_t n = src->synthesize > 0 ? src->synthesize : real.size();
  Cohort c = sample_synthetic(fit_synthesizer(real), n, derive_seed(config.seed, "synth:" + population, 0, 0));
  c.name = population;
  return c;
}

Cohorts prepare_cohorts(const RunConfig& config, bool synthesize) {
  Cohorts out;
  std::set<std::string> needed(config.grid.populations.begin(), config.grid.populations.end());
  needed.insert(config.test_population);
  for (const auto& name : needed) {
    const auto& src = *find_source(config, name);
    Cohort c = src.generator.empty()
                   ? load_cohort_csv(src.csv, CsvSchema::standard(), name)
                   : generate_reference_cohort(generator_preset(src.generator), src.n,
                                               derive_seed(config.seed, "cohort:" + name, 0, 0));
    c.name = name;
    if (name == config.test_population) {
      auto split = split_fixed_test(c, config.test_size, derive_seed(config.seed, "test:" + name, 0, 0));
      out.test = std::move(split.test);
      c = std::move(split.train_pool);
    }
    if (synthesize && src.synthesize > 0) c = synthesize_pool(config, name, c);
    std::erase_if(c.records, [](const PatientRecord& r) { return !r.outcome; });
    if (c.empty()) throw DataError("population " + name + ": training pool has no labeled records");
    out.pools.emplace(name, std::move(c));
  }
  const auto labels = PrevalenceContext::from_labels([&] {
    std::vector<int> y;
    for (const auto& r : out.test.records) y.push_back(*r.outcome ? 1 : 0);
    return y;
  }());
  if (labels.events == 0 || labels.nonevents == 0) throw DataError("test set must contain both outcome classes");
  if (config.resampling == Resampling::kWithoutReplacement) {
    const int largest = *std::max_element(config.train_sizes.begin(), config.train_sizes.end());
    for (const auto& [name, pool] : out.pools) {
      if (pool.size() < static_cast<std::size_t>(largest)) {
        throw ConfigError("sizes: " + std::to_string(largest) + " exceeds the " + std::to_string(pool.size()) +
                          "-record pool of " + name + " without replacement");
      }
    }
  }
  return out;
}

UnitResult run_one(const Scenario& scenario, const Cohort& pool, const Cohort& test, int n_train, int replicate,
                   const RunConfig& config) {
  UnitResult u;
  u.key = {scenario.id, replicate, n_train};
  try {
    const Cohort sample =
        resample(pool, static_cast<std::size_t>(n_train),
                 derive_seed(config.seed, sample_stream(scenario.population), replicate, n_train),
                 config.resampling == Resampling::kWithReplacement);
    const auto p = fit_pipeline(scenario.learner, scenario.size, {scenario.impute}, sample,
                                derive_seed(config.seed, scenario.id, replicate, n_train), config.forest);
    u.risks = predict_risks(p, test);
    std::vector<int> y;
    for (const auto& r : test.records) y.push_back(*r.outcome ? 1 : 0);
    u.metrics = evaluate_model(u.risks, y, config.policy);
    if (p.diag.separation) u.flags.emplace_back("separation");
    if (!p.diag.converged) u.flags.emplace_back("nonconverged");
    u.pipeline = describe_pipeline(p);
  } catch (const FitError& e) {
    u.failed = true;
    u.failure = e.what();
  } catch (const DataError& e) {
    u.failed = true;
    u.failure = e.what();
  }
  if (u.failed) {
    u.risks.clear();
    u.flags = {"failed"};
  }
  return u;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json unit_to_json(const UnitResult& u) {
  return {{"scenario_id", u.key.scenario_id},
          {"replicate", u.key.replicate},
          {"n_train", u.key.n_train},
          {"failed", u.failed},
          {"failure", u.failure},
          {"flags", u.flags},
          {"risks", u.risks},
          {"auroc", u.failed ? nlohmann::json(nullptr) : nlohmann::json(u.metrics.auroc)},
          {"eci", opt(u.metrics.eci)},
          {"nb", u.failed ? nlohmann::json(nullptr) : nlohmann::json(u.metrics.nb)},
          {"ru", opt(u.metrics.ru)},
          {"pipeline", u.pipeline}};
}

UnitResult unit_from_json(const nlohmann::json& j) {
  UnitResult u;
  u.key = {j.at("scenario_id").get<std::string>(), j.at("replicate").get<int>(), j.at("n_train").get<int>()};
  u.failed = j.at("failed").get<bool>();
  u.failure = j.at("failure").get<std::string>();
  u.flags = j.at("flags").get<std::vector<std::string>>();
  u.risks = j.at("risks").get<std::vector<double>>();
  if (!u.failed) {
    u.metrics.auroc = j.at("auroc").get<double>();
    u.metrics.nb = j.at("nb").get<double>();
  }
  u.metrics.eci = opt_from(j.at("eci"));
  u.metrics.ru = opt_from(j.at("ru"));
  u.pipeline = j.at("pipeline");
  return u;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += sep;
    out += parts[k];
  }
  return out;
}

nlohmann::json scenario_json(const Scenario& s) {
  return {{"id", s.id},
          {"learner", s.learner.id()},
          {"size_definition", size_definition_name(s.size)},
          {"imputation", impute_strategy_name(s.impute)},
          {"population", s.population}};
}

std::vector<UnitKey> planned_units(const RunConfig& config, const std::vector<Scenario>& grid) {
  std::vector<UnitKey> keys;
  for (const auto& s : grid) {
    for (int r = 0; r < config.replicates; ++r) {
      for (int n : config.train_sizes) keys.push_back({s.id, r, n});
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void assemble(const RunConfig& config, const std::vector<Scenario>& grid, const std::vector<UnitKey>& keys,
              const fs::path& dir) {
  std::ostringstream risks, metrics, pipes;
  risks << "scenario_id,replicate,n_train,patient_id,risk\n";
  metrics << "scenario_id,replicate,n_train,auroc,eci,nb,ru,flags\n";
  nlohmann::json failures = nlohmann::json::array();
  std::size_t failed = 0, flagged = 0;
  for (const auto& k : keys) {
    const auto u = unit_from_json(nlohmann::json::parse(read_file(dir / "units" / (k.file_stem() + ".json"))));
    const std::string head = k.scenario_id + "," + std::to_string(k.replicate) + "," + std::to_string(k.n_train);
    for (std::size_t i = 0; i < u.risks.size(); ++i) risks << head << ',' << i << ',' << num(u.risks[i]) << '\n';
    if (u.failed) {
      metrics << head << ",,,,," << join(u.flags, ';') << '\n';
      failures.push_back({{"scenario_id", k.scenario_id},
                          {"replicate", k.replicate},
                          {"n_train", k.n_train},
                          {"message", u.failure}});
      ++failed;
    } else {
      metrics << head << ',' << num(u.metrics.auroc) << ',' << num(u.metrics.eci) << ',' << num(u.metrics.nb) << ','
              << num(u.metrics.ru) << ',' << join(u.flags, ';') << '\n';
      if (!u.flags.empty()) ++flagged;
    }
    pipes << nlohmann::json{{"scenario_id", k.scenario_id},
                            {"replicate", k.replicate},
                            {"n_train", k.n_train},
                            {"pipeline", u.pipeline}}
                 .dump()
          << '\n';
  }
  const Cohort test = load_cohort_csv(dir / "test.csv", CsvSchema::standard(), config.test_population);
  std::vector<int> labels;
  for (const auto& r : test.records) labels.push_back(*r.outcome ? 1 : 0);

  nlohmann::json m;
  m["code_version"] = kCodeVersion;
  m["config"] = config.to_json();
  m["grid"] = nlohmann::json::array();
  for (const auto& s : grid) m["grid"].push_back(scenario_json(s));
  m["counts"] = {{"scenarios", grid.size()},
                 {"units", keys.size()},
                 {"completed", keys.size() - failed},
                 {"failed", failed},
                 {"flagged", flagged}};
  m["failures"] = failures;
  m["test"] = {{"population", config.test_population}, {"labels", labels}};
  m["single_source_replicate"] = 0;
  m["notes"] = {
      "data axis: two size definitions by three imputation strategies; the unconditional-median strategy "
      "reconstructs the third option",
      "training samples depend on population, replicate and size only, so model and data views share them"};
  write_atomic(dir / "risks.csv", risks.str());
  write_atomic(dir / "model_metrics.csv", metrics.str());
  write_atomic(dir / "pipelines.jsonl", pipes.str());
  write_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

RunSummary run_all(const RunConfig& config, const fs::path& dir, const RunOptions& options) {
  config.validate();
  const auto grid = enumerate_grid(config);
  check_seed_collisions(config, grid);
  const auto keys = planned_units(config, grid);

  fs::create_directories(dir / "units");
  const std::string echo = config.to_json().dump(2) + "\n";
  const fs::path config_path = dir / "config.json";
  if (fs::exists(config_path)) {
    if (read_file(config_path) != echo) {
      throw ConfigError("store " + dir.string() + " was created with a different configuration");
    }
  } else {
    write_atomic(config_path, echo);
  }

  RunSummary summary;
  summary.total = keys.size();
  std::vector<UnitKey> pending;
  for (const auto& k : keys) {
    if (fs::exists(dir / "units" / (k.file_stem() + ".json"))) {
      ++summary.resumed;
    } else {
      pending.push_back(k);
    }
  }
  if (pending.empty() && fs::exists(dir / "manifest.json")) {
    summary.complete = true;
    return summary;
  }

  if (!pending.empty()) {
    const Cohorts cohorts = prepare_cohorts(config);
    if (!fs::exists(dir / "test.csv")) write_atomic(dir / "test.csv", format_cohort_csv(cohorts.test));
    if (options.shuffle_seed) {
      Rng rng(*options.shuffle_seed);
      for (std::size_t k = pending.size() - 1; k > 0; --k) std::swap(pending[k], pending[rng.below(k + 1)]);
    }
    std::map<std::string, const Scenario*> by_id;
    for (const auto& s : grid) by_id[s.id] = &s;

    const std::size_t limit = std::min(pending.size(), options.stop_after.value_or(pending.size()));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::exception_ptr error;
    std::size_t done = summary.resumed;
    auto worker = [&] {
      for (;;) {
        if (stop || (options.cancel && options.cancel->load())) return;
        const std::size_t idx = next++;
        if (idx >= limit) return;
        const auto& k = pending[idx];
        try {
          const Scenario& s = *by_id.at(k.scenario_id);
          const auto u = run_one(s, cohorts.pools.at(s.population), cohorts.test, k.n_train, k.replicate, config);
          write_atomic(dir / "units" / (k.file_stem() + ".json"), unit_to_json(u).dump() + "\n");
          std::lock_guard lock(mu);
          ++done;
          ++summary.executed;
          if (options.progress) options.progress(done, keys.size());
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          stop = true;
          return;
        }
      }
    };
    int workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(limit)));
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    if (summary.resumed + summary.executed < keys.size()) return summary;
  }
  assemble(config, grid, keys, dir);
  summary.complete = true;
  return summary;
}

// ---------------------------------------------------------------------------

const Scenario* ResultStore::scenario(const std::string& id) const {
  auto it = std::lower_bound(grid.begin(), grid.end(), id, [](const Scenario& s, const std::string& v) { return s.id < v; });
  return it != grid.end() && it->id == id ? &*it : nullptr;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

SizeDefinition parse_size(const std::string& s) {
  for (auto v : {SizeDefinition::kDiameter, SizeDefinition::kVolume}) {
    if (s == size_definition_name(v)) return v;
  }
  throw DataError("unknown size definition '" + s + "'");
}

ImputeStrategy parse_impute(const std::string& s) {
  for (auto v : {ImputeStrategy::kRegression, ImputeStrategy::kOutcomeConditionalMedian,
                 ImputeStrategy::kUnconditionalMedian}) {
    if (s == impute_strategy_name(v)) return v;
  }
  throw DataError("unknown imputation '" + s + "'");
}

}  // namespace

ResultStore load_store(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw DataError("store " + dir.string() + " is incomplete (no manifest.json); resume the run first");
  }
  ResultStore st;
  st.manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  st.test_labels = st.manifest.at("test").at("labels").get<std::vector<int>>();
  for (const auto& g : st.manifest.at("grid")) {
    Scenario s;
    s.id = g.at("id").get<std::string>();
    s.learner = LearnerSpec::parse(g.at("learner").get<std::string>());
    s.size = parse_size(g.at("size_definition").get<std::string>());
    s.impute = parse_impute(g.at("imputation").get<std::string>());
    s.population = g.at("population").get<std::string>();
    st.grid.push_back(s);
  }

  std::istringstream metrics(read_file(dir / "model_metrics.csv"));
  std::string line;
  std::getline(metrics, line);
  while (std::getline(metrics, line)) {
    const auto f = split_csv(line);
    if (f.size() != 8) throw DataError("model_metrics.csv: malformed row '" + line + "'");
    UnitResult u;
    u.key = {f[0], std::stoi(f[1]), std::stoi(f[2])};
    std::stringstream flags(f[7]);
    for (std::string t; std::getline(flags, t, ';');) u.flags.push_back(t);
    u.failed = std::find(u.flags.begin(), u.flags.end(), "failed") != u.flags.end();
    if (!u.failed) {
      u.metrics.auroc = std::stod(f[3]);
      u.metrics.eci = parse_opt(f[4]);
      u.metrics.nb = std::stod(f[5]);
      u.metrics.ru = parse_opt(f[6]);
    }
    st.units.push_back(std::move(u));
  }

  std::istringstream risks(read_file(dir / "risks.csv"));
  std::getline(risks, line);
  std::size_t at = 0;
  while (std::getline(risks, line)) {
    const auto f = split_csv(line);
    if (f.size() != 5) throw DataError("risks.csv: malformed row '" + line + "'");
    const UnitKey key{f[0], std::stoi(f[1]), std::stoi(f[2])};
    while (at < st.units.size() && st.units[at].key < key) ++at;
    if (at == st.units.size() || !(st.units[at].key == key)) throw DataError("risks.csv: row without metrics: " + line);
    st.units[at].risks.push_back(std::stod(f[4]));
  }
  for (const auto& u : st.units) {
    if (!u.failed && u.risks.size() != st.test_labels.size()) {
      throw DataError("store: unit " + u.key.file_stem() + " has " + std::to_string(u.risks.size()) + " risks");
    }
  }
  return st;
}

// ---------------------------------------------------------------------------

const char* source_name(Source s) {
  switch (s) {
    case Source::kEstimation: return "estimation";
    case Source::kModel: return "model";
    case Source::kData: return "data";
    case Source::kPopulation: return "population";
    case Source::kAll: return "all";
  }
  return "?";
}

Source parse_source(const std::string& name) {
  for (auto s : {Source::kEstimation, Source::kModel, Source::kData, Source::kPopulation, Source::kAll}) {
    if (name == source_name(s)) return s;
  }
  throw ConfigError("unknown view '" + name + "' (estimation, model, data, population, all)");
}

const Scenario& main_scenario(const ResultStore& store) {
  if (store.grid.empty()) throw DataError("store has an empty grid");
  LearnerSpec main;
  const std::string pop = store.manifest.at("test").at("population").get<std::string>();
  const auto* s = store.scenario(scenario_id(main, SizeDefinition::kDiameter, ImputeStrategy::kRegression, pop));
  return s ? *s : store.grid.front();
}

SizeSlice slice_at(const ResultStore& store, int n_train) {
  SizeSlice out{RiskMatrix(store.test_labels), {}, {}};
  for (const auto& u : store.units) {
    if (u.failed || u.key.n_train != n_train) continue;
    out.matrix.add_column({u.key.scenario_id, u.key.replicate, u.key.n_train}, u.risks);
    out.units.push_back(&u);
    out.metrics.push_back(u.metrics);
  }
  return out;
}

namespace {

std::vector<std::size_t> select_in(const ResultStore& store, const std::vector<const UnitResult*>& units,
                                   Source source, const std::string& subset) {
  const Scenario& m = main_scenario(store);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < units.size(); ++j) {
    const Scenario* s = store.scenario(units[j]->key.scenario_id);
    if (!s) throw DataError("store: unit references unknown scenario " + units[j]->key.scenario_id);
    const bool rep0 = units[j]->key.replicate == 0;
    bool keep = false;
    switch (source) {
      case Source::kEstimation: keep = s->id == m.id; break;
      case Source::kModel:
        keep = rep0 && s->size == m.size && s->impute == m.impute && s->population == m.population;
        break;
      case Source::kData: keep = rep0 && s->learner == m.learner && s->population == m.population; break;
      case Source::kPopulation:
        keep = rep0 && s->learner == m.learner && s->size == m.size && s->impute == m.impute;
        break;
      case Source::kAll: keep = true; break;
    }
    const bool lr = s->learner.family == LearnerFamily::kLogistic;
    if (subset == "lr") keep = keep && lr;
    if (subset == "trees") keep = keep && !lr;
    if (keep) out.push_back(j);
  }
  return out;
}

// Single-source views need two or more options on their axis.
void require_axis(const ResultStore& store, Source source) {
  std::set<std::string> learners, data, pops;
  for (const auto& s : store.grid) {
    learners.insert(s.learner.id());
    data.insert(std::string(size_definition_name(s.size)) + "/" + impute_strategy_name(s.impute));
    pops.insert(s.population);
  }
  auto need = [](const std::set<std::string>& axis, const char* what) {
    if (axis.size() < 2) {
      throw DataError(std::string("the ") + what + " view needs at least two " + what +
                      " variations in the grid; this store has " + std::to_string(axis.size()));
    }
  };
  if (source == Source::kModel) need(learners, "model");
  if (source == Source::kData) need(data, "data");
  if (source == Source::kPopulation) need(pops, "population");
}

}  // namespace

std::vector<std::size_t> select_columns(const ResultStore& store, Source source, int n_train,
                                        const std::string& subset) {
  std::vector<const UnitResult*> units;
  for (const auto& u : store.units) {
    if (!u.failed && u.key.n_train == n_train) units.push_back(&u);
  }
  return select_in(store, units, source, subset);
}

std::vector<SummaryRow> decompose(const ResultStore& store, Source source, const ThresholdPolicy& policy) {
  require_axis(store, source);
  std::set<int> sizes;
  for (const auto& u : store.units) sizes.insert(u.key.n_train);
  std::vector<SummaryRow> rows;
  for (int n : sizes) {
    const auto slice = slice_at(store, n);
    std::vector<std::string> subsets = {"all"};
    if (source == Source::kModel || source == Source::kAll) subsets = {"all", "lr", "trees"};
    for (const auto& sub : subsets) {
      const auto cols = select_in(store, slice.units, source, sub);
      if (cols.empty()) {
        if (sub == "all") {
          throw DataError(std::string("the ") + source_name(source) + " view selects no completed models at n_train " +
                          std::to_string(n));
        }
        continue;
      }
      const std::string label = source == Source::kEstimation ? main_scenario(store).id : sub;
      rows.push_back(summarize(slice.matrix, cols, policy, source_name(source), label, n, slice.metrics));
    }
  }
  return rows;
}

}  // namespace riskverse
