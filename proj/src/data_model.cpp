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

#include "riskverse/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/beta.hpp>

#include "riskverse/error.hpp"
#include "riskverse/stats.hpp"

namespace riskverse {

namespace {

constexpr std::array<const char*, kNumColumns> kColumnNames = {
    "age",           "lesion_dmax", "lesion_volume", "solid_prop_diam", "solid_prop_vol",
    "ca125",         "bilateral",   "papflow",       "outcome"};

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void row_error(std::size_t row, const std::string& field, const std::string& what) {
  throw DataError("row " + std::to_string(row) + ", field '" + field + "': " + what);
}

double parse_real(std::string_view text, std::size_t row, const std::string& field) {
  double v = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    row_error(row, field, "not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

bool parse_flag(std::string_view text, std::size_t row, const std::string& field) {
  if (text == "0") return false;
  if (text == "1") return true;
  row_error(row, field, "expected 0 or 1, got '" + std::string(text) + "'");
}

// Inverse CDFs used by the copula.
double truncated_normal_quantile(const TruncatedNormal& d, double u) {
  const double lo = normal_cdf((d.lower - d.mu) / d.sigma);
  const double hi = normal_cdf((d.upper - d.mu) / d.sigma);
  const double p = std::clamp(lo + u * (hi - lo), 1e-16, 1.0 - 1e-16);
  return std::clamp(d.mu + d.sigma * normal_quantile(p), d.lower, d.upper);
}

double zoib_quantile(const ZeroOneInflatedBeta& d, double u) {
  if (u < d.p_zero) return 0.0;
  if (u >= 1.0 - d.p_one) return 1.0;
  const double inner = (u - d.p_zero) / (1.0 - d.p_zero - d.p_one);
  boost::math::beta_distribution<double> beta(d.a, d.b);
  return std::clamp(boost::math::quantile(beta, std::clamp(inner, 0.0, 1.0)), 0.0, 1.0);
}

Eigen::Matrix<double, kCopulaDim, kCopulaDim> latent_cholesky(const GeneratorSpec& spec) {
  Eigen::Matrix<double, kCopulaDim, kCopulaDim> r;
  for (int i = 0; i < kCopulaDim; ++i) {
    for (int j = 0; j < kCopulaDim; ++j) {
      // Spearman -> Pearson for a Gaussian copula.
      r(i, j) = i == j ? 1.0 : 2.0 * std::sin(M_PI * spec.rank_correlation(i, j) / 6.0);
    }
  }
  Eigen::LLT<Eigen::Matrix<double, kCopulaDim, kCopulaDim>> llt(r);
  if (llt.info() != Eigen::Success) {
    throw DataError("generator '" + spec.name +
                    "': latent Gaussian correlation is not positive definite");
  }
  return llt.matrixL();
}

struct LatentDraw {
  PatientRecord record;
  double eta_without_intercept = 0;
};

class CopulaSampler {
 public:
  explicit CopulaSampler(const GeneratorSpec& spec)
      : spec_(spec), chol_(latent_cholesky(spec)) {}

  LatentDraw draw(Rng& rng) const {
    Eigen::Matrix<double, kCopulaDim, 1> eps;
    for (int k = 0; k < kCopulaDim; ++k) eps(k) = rng.normal();
    const Eigen::Matrix<double, kCopulaDim, 1> z = chol_ * eps;
    PatientRecord r;
    r.age = truncated_normal_quantile(spec_.age, normal_cdf(z(kAxAge)));
    r.lesion_dmax = std::exp(spec_.lesion_dmax.log_mu + spec_.lesion_dmax.log_sigma * z(kAxDmax));
    r.lesion_volume = spec_.volume_scale * std::pow(r.lesion_dmax, 3.0) *
                      std::exp(spec_.volume_log_sd * rng.normal());
    r.solid_prop_diam = zoib_quantile(spec_.solid_prop_diam, normal_cdf(z(kAxSolidDiam)));
    r.solid_prop_vol = zoib_quantile(spec_.solid_prop_vol, normal_cdf(z(kAxSolidVol)));
    const double log_ca = spec_.ca125.log_mu + spec_.ca125.log_sigma * z(kAxCa125);
    r.ca125 = std::exp(log_ca);
    r.bilateral = normal_cdf(z(kAxBilateral)) >= 1.0 - spec_.bilateral_rate;
    r.papflow = normal_cdf(z(kAxPapflow)) >= 1.0 - spec_.papflow_rate;
    const auto& c = spec_.outcome;
    LatentDraw out;
    out.eta_without_intercept = c.age * r.age + c.log_dmax * std::log(r.lesion_dmax) +
                                c.solid_prop * r.solid_prop_diam + c.bilateral * r.bilateral +
                                c.papflow * r.papflow + c.log_ca125 * log_ca;
    out.record = r;
    return out;
  }

 private:
  const GeneratorSpec& spec_;
  Eigen::Matrix<double, kCopulaDim, kCopulaDim> chol_;
};

template <typename F>
double bisect(F&& f, double lo, double hi, double target) {
  // f increasing.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

const char* column_name(Column c) { return kColumnNames[static_cast<std::size_t>(c)]; }

std::optional<Column> column_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNumColumns; ++i) {
    if (name == kColumnNames[i]) return kAllColumns[i];
  }
  return std::nullopt;
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kIngested: return "ingested";
    case Provenance::kReferenceGenerated: return "reference-generated";
    case Provenance::kSynthesized: return "synthesized";
  }
  return "?";
}

void require_columns(const Cohort& cohort, std::initializer_list<Column> required,
                     const char* context) {
  for (Column c : required) {
    if (!cohort.columns.has(c)) {
      throw DataError(std::string(context) + ": schema mismatch, cohort '" + cohort.name +
                      "' lacks column '" + column_name(c) + "'");
    }
  }
}

void validate_record(const PatientRecord& r) {
  auto fail = [](const char* field, double v, const char* range) {
    std::ostringstream os;
    os << "field '" << field << "' = " << v << " outside " << range;
    throw DataError(os.str());
  };
  if (!(r.age >= 18.0) || !std::isfinite(r.age)) fail("age", r.age, "[18, inf)");
  if (!(r.lesion_dmax > 0.0) || !std::isfinite(r.lesion_dmax)) fail("lesion_dmax", r.lesion_dmax, "(0, inf)");
  if (!(r.lesion_volume >= 0.0) || !std::isfinite(r.lesion_volume)) fail("lesion_volume", r.lesion_volume, "[0, inf)");
  if (!(r.solid_prop_diam >= 0.0 && r.solid_prop_diam <= 1.0)) fail("solid_prop_diam", r.solid_prop_diam, "[0, 1]");
  if (!(r.solid_prop_vol >= 0.0 && r.solid_prop_vol <= 1.0)) fail("solid_prop_vol", r.solid_prop_vol, "[0, 1]");
  if (r.ca125 && (!(*r.ca125 > 0.0) || !std::isfinite(*r.ca125))) fail("ca125", *r.ca125, "(0, inf)");
}

double ca125_missing_fraction(const Cohort& cohort) {
  if (cohort.empty()) return 0.0;
  const auto missing = std::count_if(cohort.records.begin(), cohort.records.end(),
                                     [](const PatientRecord& r) { return !r.ca125; });
  return static_cast<double>(missing) / static_cast<double>(cohort.size());
}

double event_rate(const Cohort& cohort) {
  std::size_t labeled = 0, events = 0;
  for (const auto& r : cohort.records) {
    if (r.outcome) {
      ++labeled;
      events += *r.outcome ? 1 : 0;
    }
  }
  return labeled == 0 ? std::nan("") : static_cast<double>(events) / static_cast<double>(labeled);
}

CsvSchema CsvSchema::standard() {
  CsvSchema s;
  for (Column c : kAllColumns) s.header[c] = column_name(c);
  return s;
}

Cohort parse_cohort_csv(const std::string& text, const CsvSchema& schema,
                        const std::string& name) {
  Cohort cohort;
  cohort.name = name;
  cohort.provenance = Provenance::kIngested;
  cohort.columns = ColumnSet::none();

  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      auto pos = rest.find('\n');
      auto line = rest.substr(0, pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
  }
  if (lines.empty() || lines.front().empty()) throw DataError("cohort CSV: missing header row");

  const auto header = split_fields(lines.front());
  // For each file column, which cohort column it feeds (or none).
  std::vector<std::optional<Column>> slots(header.size());
  for (const auto& [col, hname] : schema.header) {
    auto it = std::find(header.begin(), header.end(), hname);
    if (it == header.end()) {
      throw DataError("cohort CSV: header lacks column '" + hname + "' required by schema");
    }
    slots[static_cast<std::size_t>(it - header.begin())] = col;
    cohort.columns.add(col);
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!slots[i]) {
      throw DataError("cohort CSV: unexpected header column '" + std::string(header[i]) + "'");
    }
  }

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;  // trailing newline
    const std::size_t row = li;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      row_error(row, "*", "expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
    }
    PatientRecord r;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const Column c = *slots[i];
      const std::string field = column_name(c);
      const auto v = fields[i];
      if (v.empty()) {
        if (c == Column::kCa125 || c == Column::kOutcome) continue;
        row_error(row, field, "empty value");
      }
      switch (c) {
        case Column::kAge: r.age = parse_real(v, row, field); break;
        case Column::kLesionDmax: r.lesion_dmax = parse_real(v, row, field); break;
        case Column::kLesionVolume: r.lesion_volume = parse_real(v, row, field); break;
        case Column::kSolidPropDiam: r.solid_prop_diam = parse_real(v, row, field); break;
        case Column::kSolidPropVol: r.solid_prop_vol = parse_real(v, row, field); break;
        case Column::kCa125: r.ca125 = parse_real(v, row, field); break;
        case Column::kBilateral: r.bilateral = parse_flag(v, row, field); break;
        case Column::kPapflow: r.papflow = parse_flag(v, row, field); break;
        case Column::kOutcome: r.outcome = parse_flag(v, row, field); break;
      }
    }
    try {
      validate_record(r);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    cohort.records.push_back(r);
  }
  return cohort;
}

Cohort load_cohort_csv(const std::filesystem::path& path, const CsvSchema& schema,
                       const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read cohort file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cohort_csv(buf.str(), schema, name.empty() ? path.stem().string() : name);
}

std::string format_cohort_csv(const Cohort& cohort) {
  std::vector<Column> cols;
  for (Column c : kAllColumns) {
    if (cohort.columns.has(c)) cols.push_back(c);
  }
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += column_name(cols[i]);
  }
  out += '\n';
  for (const auto& r : cohort.records) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      switch (cols[i]) {
        case Column::kAge: out += format_real(r.age); break;
        case Column::kLesionDmax: out += format_real(r.lesion_dmax); break;
        case Column::kLesionVolume: out += format_real(r.lesion_volume); break;
        case Column::kSolidPropDiam: out += format_real(r.solid_prop_diam); break;
        case Column::kSolidPropVol: out += format_real(r.solid_prop_vol); break;
        case Column::kCa125: if (r.ca125) out += format_real(*r.ca125); break;
        case Column::kBilateral: out += r.bilateral ? '1' : '0'; break;
        case Column::kPapflow: out += r.papflow ? '1' : '0'; break;
        case Column::kOutcome: if (r.outcome) out += *r.outcome ? '1' : '0'; break;
      }
    }
    out += '\n';
  }
  return out;
}

void save_cohort_csv(const Cohort& cohort, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cohort file '" + path.string() + "'");
  out << format_cohort_csv(cohort);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::Matrix<double, kCopulaDim, kCopulaDim> default_rank_correlation() {
  Eigen::Matrix<double, kCopulaDim, kCopulaDim> m;
  // age, dmax, solid_diam, solid_vol, ca125, bilateral, papflow
  m << 1.00, -0.05, 0.20, 0.18, 0.15, 0.10, 0.12,
      -0.05, 1.00, 0.10, 0.12, 0.20, 0.00, 0.10,
       0.20, 0.10, 1.00, 0.92, 0.40, 0.20, 0.55,
       0.18, 0.12, 0.92, 1.00, 0.38, 0.18, 0.50,
       0.15, 0.20, 0.40, 0.38, 1.00, 0.25, 0.30,
       0.10, 0.00, 0.20, 0.18, 0.25, 1.00, 0.15,
       0.12, 0.10, 0.55, 0.50, 0.30, 0.15, 1.00;
  return m;
}

}  // namespace

// Marginal parameters below were solved offline from the per-center
// median/IQR summaries (age by least squares on the three quartiles, the
// solid proportions by fixing the point masses and matching two interior
// quantiles). The CA125 location sits below the observed median because the
// missingness mechanism preferentially hides low-solid (lower CA125) cases.
GeneratorSpec leuven_preset() {
  GeneratorSpec s;
  s.name = "leuven";
  s.age = {47.908, 23.446, 18.0, 90.0};
  s.lesion_dmax = {std::log(71.0), 0.673};
  s.volume_scale = 101.0 / (71.0 * 71.0 * 71.0);
  s.volume_log_sd = 0.25;
  s.solid_prop_diam = {0.33, 0.12, 0.69330, 0.87640};
  s.solid_prop_vol = {0.45, 0.08, 0.50037, 1.11072};
  s.ca125 = {std::log(38.4), 2.2};
  s.bilateral_rate = 0.20;
  s.papflow_rate = 0.19;
  s.rank_correlation = default_rank_correlation();
  s.outcome = {-11.20, 0.04, 1.05, 2.18, 0.61, 2.47, 0.67};
  s.ca125_missing_rate = 0.31;
  s.ca125_missing_slope = -1.5;
  s.targets = {51.0, 71.0, 101.0, 0.21, 0.01, 44.0};
  return s;
}

GeneratorSpec malmo_preset() {
  GeneratorSpec s;
  s.name = "malmo";
  s.age = {44.853, 24.788, 18.0, 96.0};
  s.lesion_dmax = {std::log(71.0), 0.4995};
  s.volume_scale = 106.0 / (71.0 * 71.0 * 71.0);
  s.volume_log_sd = 0.25;
  s.solid_prop_diam = {0.40, 0.06, 0.87818, 1.64945};
  s.solid_prop_vol = {0.55, 0.04, 0.5, 3.19780};
  s.ca125 = {std::log(21.0), 1.103};
  s.bilateral_rate = 0.20;
  s.papflow_rate = 0.24;
  s.rank_correlation = default_rank_correlation();
  s.outcome = {-11.20, 0.04, 1.05, 2.18, 0.61, 2.47, 0.67};
  s.prevalence = 0.11;
  s.ca125_missing_rate = 0.18;
  s.ca125_missing_slope = -1.5;
  s.targets = {49.0, 71.0, 106.0, 0.09, 0.0, 23.0};
  return s;
}

GeneratorSpec rome_preset() {
  GeneratorSpec s;
  s.name = "rome";
  s.age = {49.793, 19.321, 18.0, 90.0};
  s.lesion_dmax = {std::log(79.0), 0.622};
  s.volume_scale = 142.0 / (79.0 * 79.0 * 79.0);
  s.volume_log_sd = 0.25;
  s.solid_prop_diam = {0.30, 0.30, 1.11999, 1.64230};
  s.solid_prop_vol = {0.40, 0.28, 0.33847, 0.84908};
  s.ca125 = {std::log(55.0), 2.18};
  s.bilateral_rate = 0.20;
  s.papflow_rate = 0.24;
  s.rank_correlation = default_rank_correlation();
  // Rome differs in case-mix and in predictor effects.
  s.outcome = {-11.20, 0.03, 0.90, 2.60, 0.70, 2.00, 0.75};
  s.prevalence = 0.08;
  s.ca125_missing_rate = 0.53;
  s.ca125_missing_slope = -1.5;
  s.targets = {50.0, 79.0, 142.0, 0.38, 0.04, 74.0};
  return s;
}

GeneratorSpec generator_preset(const std::string& name) {
  if (name == "leuven") return leuven_preset();
  if (name == "malmo") return malmo_preset();
  if (name == "rome") return rome_preset();
  throw ConfigError("unknown generator preset '" + name + "' (expected leuven|malmo|rome)");
}

void validate_generator_spec(const GeneratorSpec& spec) {
  auto fail = [&](const std::string& what) {
    throw DataError("generator '" + spec.name + "': " + what);
  };
  if (!(spec.age.sigma > 0) || !(spec.age.lower < spec.age.upper)) fail("invalid age marginal");
  if (!(spec.lesion_dmax.log_sigma > 0) || !(spec.ca125.log_sigma > 0)) fail("log-normal sigma must be > 0");
  for (const auto* z : {&spec.solid_prop_diam, &spec.solid_prop_vol}) {
    if (z->p_zero < 0 || z->p_one < 0 || z->p_zero + z->p_one >= 1.0 || !(z->a > 0) || !(z->b > 0)) {
      fail("invalid zero-one-inflated beta marginal");
    }
  }
  if (!(spec.ca125_missing_rate >= 0.0 && spec.ca125_missing_rate <= 1.0)) fail("missing rate outside [0, 1]");
  if (spec.prevalence && !(*spec.prevalence > 0.0 && *spec.prevalence < 1.0)) fail("prevalence outside (0, 1)");
  if (!(spec.bilateral_rate >= 0 && spec.bilateral_rate <= 1 && spec.papflow_rate >= 0 && spec.papflow_rate <= 1)) {
    fail("binary rates outside [0, 1]");
  }
  const auto& r = spec.rank_correlation;
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12) fail("correlation matrix not symmetric");
  if ((r.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) fail("correlation matrix diagonal must be 1");
  if (r.cwiseAbs().maxCoeff() > 1.0) fail("correlation entries outside [-1, 1]");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kCopulaDim, kCopulaDim>> eig(r);
  if (eig.eigenvalues().minCoeff() < -1e-10) fail("correlation matrix is not positive semi-definite");
  (void)latent_cholesky(spec);
}

double solve_missingness_intercept(const GeneratorSpec& spec) {
  const double rate = spec.ca125_missing_rate;
  if (rate <= 0.0) return -std::numeric_limits<double>::infinity();
  if (rate >= 1.0) return std::numeric_limits<double>::infinity();
  const auto& z = spec.solid_prop_diam;
  // Midpoint rule over the beta quantile function.
  constexpr int kNodes = 4000;
  std::vector<double> interior(kNodes);
  boost::math::beta_distribution<double> beta(z.a, z.b);
  for (int k = 0; k < kNodes; ++k) {
    interior[k] = boost::math::quantile(beta, (k + 0.5) / kNodes);
  }
  const double b = spec.ca125_missing_slope;
  auto expected = [&](double a) {
    double inner = 0;
    for (double x : interior) inner += logistic(a + b * x);
    inner /= kNodes;
    return z.p_zero * logistic(a) + z.p_one * logistic(a + b) +
           (1.0 - z.p_zero - z.p_one) * inner;
  };
  return bisect(expected, -40.0, 40.0, rate);
}

double effective_outcome_intercept(const GeneratorSpec& spec) {
  if (!spec.prevalence) return spec.outcome.intercept;
  // Fixed internal Monte Carlo sample so the solved intercept is deterministic.
  CopulaSampler sampler(spec);
  Rng rng(0x5eedca11b7a7e0ULL ^ fnv1a64(spec.name));
  constexpr int kDraws = 40000;
  std::vector<double> eta(kDraws);
  for (auto& e : eta) e = sampler.draw(rng).eta_without_intercept;
  auto expected = [&](double a) {
    double s = 0;
    for (double e : eta) s += logistic(a + e);
    return s / kDraws;
  };
  return bisect(expected, -60.0, 60.0, *spec.prevalence);
}

Cohort generate_reference_cohort(const GeneratorSpec& spec, std::size_t n, Seed seed) {
  validate_generator_spec(spec);
  Cohort cohort;
  cohort.name = spec.name;
  cohort.provenance = Provenance::kReferenceGenerated;
  cohort.records.reserve(n);
  if (n == 0) return cohort;

  const double intercept = effective_outcome_intercept(spec);
  const double miss_a = solve_missingness_intercept(spec);
  CopulaSampler sampler(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    LatentDraw d = sampler.draw(rng);
    const double u_outcome = rng.uniform();
    const double u_missing = rng.uniform();
    d.record.outcome = u_outcome < logistic(intercept + d.eta_without_intercept);
    const double p_missing = spec.ca125_missing_rate <= 0.0 ? 0.0
                             : spec.ca125_missing_rate >= 1.0
                                 ? 1.0
                                 : logistic(miss_a + spec.ca125_missing_slope * d.record.solid_prop_diam);
    if (u_missing < p_missing) d.record.ca125.reset();
    cohort.records.push_back(d.record);
  }
  return cohort;
}

TrainTestSplit split_fixed_test(const Cohort& cohort, std::size_t n_test, Seed seed) {
  if (n_test > cohort.size()) {
    throw DataError("split_fixed_test: n_test = " + std::to_string(n_test) +
                    " exceeds cohort size " + std::to_string(cohort.size()));
  }
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort.records[i].outcome) labeled.push_back(i);
  }
  if (n_test > labeled.size()) {
    throw DataError("split_fixed_test: only " + std::to_string(labeled.size()) +
                    " labeled records available for a test set of " + std::to_string(n_test));
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first n_test slots become the test set.
  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(labeled.size() - i));
    std::swap(labeled[i], labeled[j]);
  }
  std::vector<char> in_test(cohort.size(), 0);
  for (std::size_t i = 0; i < n_test; ++i) in_test[labeled[i]] = 1;

  TrainTestSplit out;
  out.train_pool.name = cohort.name;
  out.train_pool.provenance = cohort.provenance;
  out.train_pool.columns = cohort.columns;
  out.test = out.train_pool;
  out.test.name = cohort.name + "-test";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    (in_test[i] ? out.test : out.train_pool).records.push_back(cohort.records[i]);
  }
  return out;
}

Cohort resample(const Cohort& pool, std::size_t n, Seed seed, bool with_replacement) {
  if (pool.empty() && n > 0) throw DataError("resample: empty pool");
  if (!with_replacement && n > pool.size()) {
    throw DataError("resample: cannot draw " + std::to_string(n) + " records without replacement from " +
                    std::to_string(pool.size()));
  }
  Cohort out;
  out.name = pool.name;
  out.provenance = pool.provenance;
  out.columns = pool.columns;
  out.records.reserve(n);
  Rng rng(seed);
  if (with_replacement) {
    for (std::size_t i = 0; i < n; ++i) out.records.push_back(pool.records[rng.below(pool.size())]);
  } else {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
      out.records.push_back(pool.records[idx[i]]);
    }
  }
  return out;
}

}  // namespace riskverse
