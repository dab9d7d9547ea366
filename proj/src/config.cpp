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

#include "riskverse/config.hpp"

#include <fstream>
#include <sstream>

#include "riskverse/error.hpp"

namespace riskverse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Collects problems instead of stopping at the first one.
class Reader {
 public:
  void fail(const std::string& path, const std::string& what) { problems_.push_back(path + ": " + what); }

  void only(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) fail(path.empty() ? key : path + "." + key, "unknown key");
    }
  }

  bool object(const json& v, const std::string& path) {
    if (v.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  template <typename T>
  void number(const json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(path, "expected a number");
    } else {
      if (!v.is_number_integer()) return fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) return fail(path, "expected a non-negative integer");
      }
    }
    out = v.get<T>();
  }

  bool string(const json& obj, const char* key, const std::string& path, std::string& out) {
    if (!obj.contains(key)) return false;
    if (!obj.at(key).is_string()) {
      fail(path, "expected a string");
      return false;
    }
    out = obj.at(key).get<std::string>();
    return true;
  }

  // A list of strings, each mapped through `convert` (which throws ConfigError).
  template <typename T, typename F>
  void list(const json& obj, const char* key, const std::string& path, std::vector<T>& out, F convert) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array()) return fail(path, "expected an array");
    std::vector<T> parsed;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string at = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_string()) {
        fail(at, "expected a string");
        continue;
      }
      try {
        parsed.push_back(convert(v[i].get<std::string>()));
      } catch (const ConfigError& e) {
        fail(at, e.what());
      }
    }
    if (parsed.empty()) fail(path, "axis is empty");
    out = std::move(parsed);
  }

  void raise() const {
    if (problems_.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> problems_;
};

SizeDefinition size_from(const std::string& s) {
  for (auto v : {SizeDefinition::kDiameter, SizeDefinition::kVolume}) {
    if (s == size_definition_name(v)) return v;
  }
  throw ConfigError("unknown size definition '" + s + "' (diameter, volume)");
}

ImputeStrategy impute_from(const std::string& s) {
  for (auto v : {ImputeStrategy::kRegression, ImputeStrategy::kOutcomeConditionalMedian,
                 ImputeStrategy::kUnconditionalMedian}) {
    if (s == impute_strategy_name(v)) return v;
  }
  throw ConfigError("unknown imputation '" + s + "' (regression, outcome-conditional-median, unconditional-median)");
}

LearnerSpec learner_from(const std::string& s) {
  auto l = LearnerSpec::parse(s);
  l.validate();
  return l;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc, const fs::path& base_dir) {
  ExperimentConfig out;
  RunConfig& c = out.run;
  c = full_config();
  Reader rd;
  if (!rd.object(doc, "(root)")) rd.raise();
  rd.only(doc, "", {"seed", "sizes", "replicates", "threshold", "resampling", "workers", "grid", "populations", "test",
                    "forest"});

  rd.number(doc, "seed", "seed", c.seed);
  if (doc.contains("sizes")) {
    const auto& v = doc.at("sizes");
    if (!v.is_array() || v.empty()) {
      rd.fail("sizes", "expected a non-empty array of integers");
    } else {
      c.train_sizes.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer() || v[i].get<long long>() <= 0) {
          rd.fail("sizes[" + std::to_string(i) + "]", "expected a positive integer");
        } else {
          c.train_sizes.push_back(v[i].get<int>());
        }
      }
    }
  }
  rd.number(doc, "replicates", "replicates", c.replicates);
  rd.number(doc, "threshold", "threshold", c.policy.threshold);
  rd.number(doc, "workers", "workers", c.workers);
  std::string resampling;
  if (rd.string(doc, "resampling", "resampling", resampling)) {
    if (resampling == resampling_name(Resampling::kWithReplacement)) {
      c.resampling = Resampling::kWithReplacement;
    } else if (resampling == resampling_name(Resampling::kWithoutReplacement)) {
      c.resampling = Resampling::kWithoutReplacement;
    } else {
      rd.fail("resampling", "expected \"with-replacement\" or \"without-replacement\"");
    }
  }

  if (doc.contains("grid") && rd.object(doc.at("grid"), "grid")) {
    const auto& g = doc.at("grid");
    rd.only(g, "grid", {"learners", "size_definitions", "imputations", "populations"});
    if (g.contains("learners") && g.at("learners").is_string()) {
      if (g.at("learners") != "all") rd.fail("grid.learners", "expected \"all\" or an array of learner ids");
    } else {
      rd.list(g, "learners", "grid.learners", c.grid.learners, learner_from);
    }
    rd.list(g, "size_definitions", "grid.size_definitions", c.grid.size_definitions, size_from);
    rd.list(g, "imputations", "grid.imputations", c.grid.imputations, impute_from);
    rd.list(g, "populations", "grid.populations", c.grid.populations, [](const std::string& s) { return s; });
  }

  if (doc.contains("populations") && rd.object(doc.at("populations"), "populations")) {
    c.sources.clear();
    for (const auto& [name, v] : doc.at("populations").items()) {
      const std::string path = "populations." + name;
      if (!rd.object(v, path)) continue;
      rd.only(v, path, {"generator", "csv", "n", "synthesize"});
      PopulationSource s;
      s.name = name;
      rd.string(v, "generator", path + ".generator", s.generator);
      std::string csv;
      if (rd.string(v, "csv", path + ".csv", csv)) {
        s.csv = fs::path(csv).is_absolute() ? fs::path(csv) : base_dir / csv;
      }
      rd.number(v, "n", path + ".n", s.n);
      rd.number(v, "synthesize", path + ".synthesize", s.synthesize);
      if (s.generator.empty() == s.csv.empty()) {
        rd.fail(path, "give exactly one of generator or csv");
      } else if (!s.generator.empty()) {
        try {
          generator_preset(s.generator);
        } catch (const std::exception& e) {
          rd.fail(path + ".generator", e.what());
        }
        if (!v.contains("n")) rd.fail(path + ".n", "required with generator");
      } else if (v.contains("n")) {
        rd.fail(path + ".n", "only valid with generator");
      }
      c.sources.push_back(s);
    }
  }

  if (doc.contains("test") && rd.object(doc.at("test"), "test")) {
    const auto& t = doc.at("test");
    rd.only(t, "test", {"population", "size"});
    rd.string(t, "population", "test.population", c.test_population);
    rd.number(t, "size", "test.size", c.test_size);
  }

  if (doc.contains("forest") && rd.object(doc.at("forest"), "forest")) {
    const auto& f = doc.at("forest");
    rd.only(f, "forest", {"trees", "cv_trees", "folds"});
    rd.number(f, "trees", "forest.trees", c.forest.trees);
    rd.number(f, "cv_trees", "forest.cv_trees", c.forest.cv_trees);
    rd.number(f, "folds", "forest.folds", c.forest.folds);
  }

  rd.raise();
  c.validate();
  return out;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  auto out = parse_experiment_config(doc, path.parent_path());
  out.source = path;
  return out;
}

}  // namespace riskverse
