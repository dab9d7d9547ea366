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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "riskverse/rng.hpp"

namespace riskverse {

// One ovarian-tumor case. Size and solid proportion exist in two measurement
// variants (maximum diameter vs. volume).
struct PatientRecord {
  double age = 18.0;             // years, >= 18
  double lesion_dmax = 1.0;      // mm, > 0
  double lesion_volume = 0.0;    // ml, >= 0
  double solid_prop_diam = 0.0;  // [0, 1]
  double solid_prop_vol = 0.0;   // [0, 1]
  std::optional<double> ca125;   // IU/L, > 0 when observed
  bool bilateral = false;
  bool papflow = false;
  std::optional<bool> outcome;   // malignant

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

enum class Column : std::uint8_t {
  kAge,
  kLesionDmax,
  kLesionVolume,
  kSolidPropDiam,
  kSolidPropVol,
  kCa125,
  kBilateral,
  kPapflow,
  kOutcome,
};
inline constexpr std::size_t kNumColumns = 9;
inline constexpr std::array<Column, kNumColumns> kAllColumns = {
    Column::kAge,           Column::kLesionDmax, Column::kLesionVolume,
    Column::kSolidPropDiam, Column::kSolidPropVol, Column::kCa125,
    Column::kBilateral,     Column::kPapflow,    Column::kOutcome};

// Canonical CSV header name of a column.
const char* column_name(Column c);
std::optional<Column> column_from_name(const std::string& name);

// The set of columns a cohort actually carries.
class ColumnSet {
 public:
  static ColumnSet all() { return ColumnSet((1u << kNumColumns) - 1); }
  static ColumnSet none() { return ColumnSet(0); }
  bool has(Column c) const { return (bits_ >> static_cast<unsigned>(c)) & 1u; }
  void add(Column c) { bits_ |= 1u << static_cast<unsigned>(c); }
  void remove(Column c) { bits_ &= ~(1u << static_cast<unsigned>(c)); }
  friend bool operator==(ColumnSet, ColumnSet) = default;

 private:
  explicit ColumnSet(unsigned bits) : bits_(bits) {}
  unsigned bits_;
};

enum class Provenance { kIngested, kReferenceGenerated, kSynthesized };
const char* provenance_name(Provenance p);

// An ordered, index-addressable set of records (patient_id = index).
struct Cohort {
  std::string name;
  std::vector<PatientRecord> records;
  Provenance provenance = Provenance::kIngested;
  ColumnSet columns = ColumnSet::all();

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Throws DataError naming the first column in `required` the cohort lacks.
void require_columns(const Cohort& cohort, std::initializer_list<Column> required,
                     const char* context);

// Throws DataError if a record breaks the PatientRecord invariants.
void validate_record(const PatientRecord& r);

double ca125_missing_fraction(const Cohort& cohort);
double event_rate(const Cohort& cohort);

// ---------------------------------------------------------------------------
// CSV ingestion

// Maps cohort columns to header names in the file. Columns left out of the
// mapping are absent from the resulting cohort.
struct CsvSchema {
  std::map<Column, std::string> header;

  static CsvSchema standard();
};

Cohort load_cohort_csv(const std::filesystem::path& path,
                       const CsvSchema& schema = CsvSchema::standard(),
                       const std::string& name = "");
Cohort parse_cohort_csv(const std::string& text, const CsvSchema& schema,
                        const std::string& name);

// Writes the present columns in canonical order, reals with 17 significant
// digits, missing as empty field.
std::string format_cohort_csv(const Cohort& cohort);
void save_cohort_csv(const Cohort& cohort, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reference generator

struct TruncatedNormal {
  double mu = 0, sigma = 1, lower = -1e300, upper = 1e300;
};
// Log-normal: log(X) ~ N(log_mu, log_sigma^2).
struct LogNormal {
  double log_mu = 0, log_sigma = 1;
};
// Point masses at 0 and 1 plus a Beta(a, b) interior.
struct ZeroOneInflatedBeta {
  double p_zero = 0, p_one = 0, a = 1, b = 1;
};

// Log-odds coefficients: intercept + age + log(lesion_dmax) + solid_prop_diam
// + bilateral + papflow + log(CA125).
struct OutcomeCoefficients {
  double intercept = 0, age = 0, log_dmax = 0, solid_prop = 0, bilateral = 0,
         papflow = 0, log_ca125 = 0;
};

// Summary targets the marginals were solved from.
struct MarginalTargets {
  double age_median = 0, dmax_median = 0, volume_median = 0,
         solid_diam_median = 0, solid_vol_median = 0, ca125_observed_median = 0;
};

inline constexpr int kCopulaDim = 7;
// Copula coordinate order.
enum CopulaAxis { kAxAge, kAxDmax, kAxSolidDiam, kAxSolidVol, kAxCa125, kAxBilateral, kAxPapflow };

struct GeneratorSpec {
  std::string name;
  TruncatedNormal age;
  LogNormal lesion_dmax;
  // lesion_volume = volume_scale * dmax^3 * exp(volume_log_sd * Z)
  double volume_scale = 2.8e-4;
  double volume_log_sd = 0.25;
  ZeroOneInflatedBeta solid_prop_diam;
  ZeroOneInflatedBeta solid_prop_vol;
  LogNormal ca125;
  double bilateral_rate = 0.2;
  double papflow_rate = 0.2;
  // Spearman correlations between copula axes (see CopulaAxis).
  Eigen::Matrix<double, kCopulaDim, kCopulaDim> rank_correlation =
      Eigen::Matrix<double, kCopulaDim, kCopulaDim>::Identity();
  OutcomeCoefficients outcome;
  // When set, the intercept is re-solved so the expected event rate matches.
  std::optional<double> prevalence;
  double ca125_missing_rate = 0.0;
  // Slope of logit P(CA125 missing) on solid_prop_diam.
  double ca125_missing_slope = -1.5;
  MarginalTargets targets;
};

GeneratorSpec leuven_preset();
GeneratorSpec malmo_preset();
GeneratorSpec rome_preset();
// "leuven" | "malmo" | "rome"
GeneratorSpec generator_preset(const std::string& name);

// Throws DataError on invalid parameters or a non-PSD correlation matrix.
void validate_generator_spec(const GeneratorSpec& spec);

// Intercept of logit P(missing) = a + slope * solid_prop_diam that hits the
// configured overall missing rate (deterministic quadrature).
double solve_missingness_intercept(const GeneratorSpec& spec);

// Outcome intercept actually used by the generator (configured value, or re-solved
// from the prevalence target).
double effective_outcome_intercept(const GeneratorSpec& spec);

Cohort generate_reference_cohort(const GeneratorSpec& spec, std::size_t n, Seed seed);

// ---------------------------------------------------------------------------

struct TrainTestSplit {
  Cohort train_pool;
  Cohort test;
};

// Sets aside n_test labeled records as a fixed test set. Both parts keep the
// original relative record order.
TrainTestSplit split_fixed_test(const Cohort& cohort, std::size_t n_test, Seed seed);

// Draws n records (with or without replacement) from `pool`.
Cohort resample(const Cohort& pool, std::size_t n, Seed seed, bool with_replacement);

}  // namespace riskverse
