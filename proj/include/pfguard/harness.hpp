// Copyright 2026 The PFGuard Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment harness: flat dotted key = value configs, noise calibration
// against the ledger, per-seed end-to-end runs and one-axis sweeps that
// write CSV / JSON results.
//
// Config syntax: one `key = value` per line, `#` starts a comment. Keys
// outside the schema (see ConfigKeys()) are rejected. Apart from
// PFGEN_OUTPUT_DIR, which replaces output_dir, the environment is ignored.

#ifndef PFGUARD_HARNESS_HPP_
#define PFGUARD_HARNESS_HPP_

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfguard/checkpoint.hpp"
#include "pfguard/core_data.hpp"
#include "pfguard/dp.hpp"
#include "pfguard/error.hpp"
#include "pfguard/evaluation.hpp"
#include "pfguard/rng.hpp"
#include "pfguard/training.hpp"

namespace pfguard {

inline constexpr std::size_t kSyntheticSamples = 10000;

struct DataConfig {
  Scenario scenario = Scenario::kSubgroup;
  double gamma = 1.0;
  std::size_t total_size = 0;
  GeometryOptions geometry;
  double reference_fraction = 0.1;  // sir_estimated only, relative to |D|
};

struct PrivacyConfig {
  std::optional<double> target_epsilon;  // may be +inf (no noise)
  std::optional<double> sigma;            // explicit noise multiplier
  double delta = 1e-5;
};

struct ExperimentConfig {
  DataConfig data;
  TrainConfig train;
  PrivacyConfig privacy;
  EvalConfig eval;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds;
};

// ---------------------------------------------------------------- parsing

using KeyValues = std::map<std::string, std::string>;

namespace internal {

inline std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double ParseDouble(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE ||
      std::isnan(d))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

inline std::uint64_t ParseUnsigned(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (v.empty() || v[0] == '-')
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  return u;
}

inline bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

template <class Enum, std::size_t N>
Enum ParseEnum(const std::string& key, const std::string& v,
               const Enum (&options)[N],
               std::string_view (*name)(Enum)) {
  std::string allowed;
  for (Enum e : options) {
    if (name(e) == v) return e;
    allowed += (allowed.empty() ? "" : ", ") + std::string(name(e));
  }
  throw ConfigError(key, "unknown value '" + v + "' (expected one of " +
                             allowed + ")");
}

inline std::string_view ClassifierName(ClassifierKind k) {
  return k == ClassifierKind::kLogistic ? "logistic" : "mlp";
}

}  // namespace internal

inline KeyValues ParseKeyValues(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const std::string t = internal::Trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = internal::Trim(std::string_view(t).substr(0, eq));
    const std::string value = internal::Trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    if (kv.count(key)) throw ConfigError(key, "given more than once");
    kv[key] = value;
  }
  return kv;
}

inline const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = {
      "data.scenario", "data.gamma", "data.total_size", "data.dim",
      "data.num_classes", "data.num_groups", "data.offset", "data.spread",
      "data.group_angle_deg", "data.stddev", "data.reference_fraction",
      "train.n_teachers", "train.batch_size", "train.teacher_lr",
      "train.generator_lr", "train.steps", "train.loss", "train.aggregator",
      "train.clip", "train.fairness", "train.scheme", "train.stratify",
      "train.z_dim", "train.generator_hidden", "train.teacher_hidden",
      "train.estimator_degree", "train.estimator_l2",
      "privacy.target_epsilon", "privacy.sigma", "privacy.delta",
      "eval.mmd_max_samples", "eval.mmd_bandwidth", "eval.classifier",
      "eval.classifier_iterations", "eval.classifier_lr", "eval.classifier_l2",
      "eval.classifier_hidden", "output_dir", "seeds"};
  return keys;
}

inline ExperimentConfig ConfigFromKeyValues(const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    bool known = false;
    for (const std::string& c : ConfigKeys()) known = known || c == k;
    if (!known) throw ConfigError(k, "unknown key");
  }
  auto get = [&](const std::string& k) -> const std::string* {
    const auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto req = [&](const std::string& k) -> const std::string& {
    const std::string* v = get(k);
    if (!v) throw ConfigError(k, "missing required field");
    return *v;
  };
  using internal::ParseDouble;
  using internal::ParseUnsigned;
  auto dbl = [&](const std::string& k, double& dst) {
    if (const std::string* v = get(k)) dst = ParseDouble(k, *v);
  };
  auto uns = [&](const std::string& k, auto& dst) {
    if (const std::string* v = get(k))
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(ParseUnsigned(k, *v));
  };

  ExperimentConfig c;
  static const Scenario kScenarios[] = {Scenario::kBinaryClass, Scenario::kMultiClass,
                                        Scenario::kSubgroup, Scenario::kUnknownSubgroup};
  c.data.scenario = internal::ParseEnum("data.scenario", req("data.scenario"),
                                        kScenarios, &ScenarioName);
  c.data.gamma = ParseDouble("data.gamma", req("data.gamma"));
  if (!(c.data.gamma >= 1.0) || std::isinf(c.data.gamma))
    throw ConfigError("data.gamma", "must be a finite number >= 1");
  c.data.total_size = ParseUnsigned("data.total_size", req("data.total_size"));
  if (c.data.total_size == 0) throw ConfigError("data.total_size", "must be positive");
  uns("data.dim", c.data.geometry.dim);
  uns("data.num_classes", c.data.geometry.num_classes);
  uns("data.num_groups", c.data.geometry.num_groups);
  dbl("data.offset", c.data.geometry.offset);
  dbl("data.spread", c.data.geometry.spread);
  dbl("data.group_angle_deg", c.data.geometry.group_angle_deg);
  dbl("data.stddev", c.data.geometry.stddev);
  dbl("data.reference_fraction", c.data.reference_fraction);
  if (c.data.geometry.dim < 1) throw ConfigError("data.dim", "must be >= 1");
  if (c.data.geometry.num_classes < 2)
    throw ConfigError("data.num_classes", "must be >= 2");
  if (c.data.geometry.num_groups < 2)
    throw ConfigError("data.num_groups", "must be >= 2");
  if (!(c.data.geometry.stddev > 0.0)) throw ConfigError("data.stddev", "must be positive");
  if (!(c.data.reference_fraction > 0.0))
    throw ConfigError("data.reference_fraction", "must be positive");

  TrainConfig& t = c.train;
  t.num_teachers = ParseUnsigned("train.n_teachers", req("train.n_teachers"));
  if (t.num_teachers == 0) throw ConfigError("train.n_teachers", "must be >= 1");
  t.steps = ParseUnsigned("train.steps", req("train.steps"));
  uns("train.batch_size", t.batch_size);
  if (t.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
  dbl("train.teacher_lr", t.teacher_lr);
  if (!(t.teacher_lr > 0.0)) throw ConfigError("train.teacher_lr", "must be positive");
  dbl("train.generator_lr", t.generator_lr);
  if (!(t.generator_lr > 0.0)) throw ConfigError("train.generator_lr", "must be positive");
  static const GanLoss kLosses[] = {GanLoss::kNonSaturating, GanLoss::kWasserstein};
  static const Aggregator kAggs[] = {Aggregator::kGnmaxDirection, Aggregator::kSignVote,
                                     Aggregator::kGswganSanitize};
  static const FairnessMode kFair[] = {FairnessMode::kOff, FairnessMode::kSirKnown,
                                       FairnessMode::kSirEstimated};
  static const NormalizationScheme kSchemes[] = {NormalizationScheme::kN1,
                                                 NormalizationScheme::kN2};
  if (const std::string* v = get("train.loss"))
    t.loss = internal::ParseEnum("train.loss", *v, kLosses, &GanLossName);
  if (const std::string* v = get("train.aggregator"))
    t.aggregator = internal::ParseEnum("train.aggregator", *v, kAggs, &AggregatorName);
  if (const std::string* v = get("train.fairness"))
    t.fairness = internal::ParseEnum("train.fairness", *v, kFair, &FairnessName);
  if (const std::string* v = get("train.scheme"))
    t.scheme = internal::ParseEnum("train.scheme", *v, kSchemes, &SchemeName);
  if (const std::string* v = get("train.stratify"))
    t.stratify = internal::ParseBool("train.stratify", *v);
  dbl("train.clip", t.clip);
  if (!(t.clip > 0.0)) throw ConfigError("train.clip", "must be positive");
  uns("train.z_dim", t.z_dim);
  uns("train.generator_hidden", t.generator_hidden);
  uns("train.teacher_hidden", t.teacher_hidden);
  if (t.z_dim == 0) throw ConfigError("train.z_dim", "must be >= 1");
  if (t.generator_hidden == 0) throw ConfigError("train.generator_hidden", "must be >= 1");
  if (t.teacher_hidden == 0) throw ConfigError("train.teacher_hidden", "must be >= 1");
  uns("train.estimator_degree", t.estimator.degree);
  if (t.estimator.degree < 1 || t.estimator.degree > 6)
    throw ConfigError("train.estimator_degree", "must lie in [1, 6]");
  dbl("train.estimator_l2", t.estimator.l2);
  if (!(t.estimator.l2 >= 0.0)) throw ConfigError("train.estimator_l2", "must be >= 0");
  if (t.fairness == FairnessMode::kSirEstimated && t.Stratified())
    throw ConfigError("train.stratify",
                      "sir_estimated cannot stratify on withheld attributes");

  const std::string* eps = get("privacy.target_epsilon");
  const std::string* sig = get("privacy.sigma");
  if (eps && sig)
    throw ConfigError("privacy.sigma", "give either privacy.target_epsilon or privacy.sigma, not both");
  if (!eps && !sig)
    throw ConfigError("privacy.target_epsilon", "missing required field (or privacy.sigma)");
  if (eps) {
    c.privacy.target_epsilon = ParseDouble("privacy.target_epsilon", *eps);
    if (!(*c.privacy.target_epsilon > 0.0))
      throw ConfigError("privacy.target_epsilon", "must be positive");
  } else {
    c.privacy.sigma = ParseDouble("privacy.sigma", *sig);
    if (!(*c.privacy.sigma >= 0.0) || std::isinf(*c.privacy.sigma))
      throw ConfigError("privacy.sigma", "must be a finite number >= 0");
  }
  dbl("privacy.delta", c.privacy.delta);
  if (!(c.privacy.delta > 0.0 && c.privacy.delta < 1.0))
    throw ConfigError("privacy.delta", "must lie in (0, 1)");
  t.delta = c.privacy.delta;

  uns("eval.mmd_max_samples", c.eval.mmd_max_samples);
  if (c.eval.mmd_max_samples < 2) throw ConfigError("eval.mmd_max_samples", "must be >= 2");
  dbl("eval.mmd_bandwidth", c.eval.mmd_bandwidth);
  static const ClassifierKind kKinds[] = {ClassifierKind::kLogistic, ClassifierKind::kMlp};
  if (const std::string* v = get("eval.classifier"))
    c.eval.classifier.kind =
        internal::ParseEnum("eval.classifier", *v, kKinds, &internal::ClassifierName);
  uns("eval.classifier_iterations", c.eval.classifier.iterations);
  dbl("eval.classifier_lr", c.eval.classifier.learning_rate);
  dbl("eval.classifier_l2", c.eval.classifier.l2);
  uns("eval.classifier_hidden", c.eval.classifier.hidden);

  if (const std::string* v = get("output_dir")) c.output_dir = *v;
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  {
    std::stringstream ss(req("seeds"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = internal::Trim(item);
      if (item.empty()) throw ConfigError("seeds", "empty entry in seed list");
      c.seeds.push_back(ParseUnsigned("seeds", item));
    }
    if (c.seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
  }
  return c;
}

inline void ApplyEnvironment(ExperimentConfig& c) {
  if (const char* dir = std::getenv("PFGEN_OUTPUT_DIR"); dir && *dir)
    c.output_dir = dir;
}

inline ExperimentConfig ParseConfig(std::istream& in) {
  return ConfigFromKeyValues(ParseKeyValues(in));
}

inline ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  ExperimentConfig c = ParseConfig(in);
  ApplyEnvironment(c);
  return c;
}

// Fully resolved key = value form (defaults filled in, keys sorted). The
// output directory is not part of the experiment's identity.
inline KeyValues CanonicalKeyValues(const ExperimentConfig& c) {
  using internal::FormatDouble;
  KeyValues kv;
  const GeometryOptions& g = c.data.geometry;
  kv["data.scenario"] = std::string(ScenarioName(c.data.scenario));
  kv["data.gamma"] = FormatDouble(c.data.gamma);
  kv["data.total_size"] = std::to_string(c.data.total_size);
  kv["data.dim"] = std::to_string(g.dim);
  kv["data.num_classes"] = std::to_string(g.num_classes);
  kv["data.num_groups"] = std::to_string(g.num_groups);
  kv["data.offset"] = FormatDouble(g.offset);
  kv["data.spread"] = FormatDouble(g.spread);
  kv["data.group_angle_deg"] = FormatDouble(g.group_angle_deg);
  kv["data.stddev"] = FormatDouble(g.stddev);
  kv["data.reference_fraction"] = FormatDouble(c.data.reference_fraction);
  const TrainConfig& t = c.train;
  kv["train.n_teachers"] = std::to_string(t.num_teachers);
  kv["train.batch_size"] = std::to_string(t.batch_size);
  kv["train.teacher_lr"] = FormatDouble(t.teacher_lr);
  kv["train.generator_lr"] = FormatDouble(t.generator_lr);
  kv["train.steps"] = std::to_string(t.steps);
  kv["train.loss"] = std::string(GanLossName(t.loss));
  kv["train.aggregator"] = std::string(AggregatorName(t.aggregator));
  kv["train.clip"] = FormatDouble(t.clip);
  kv["train.fairness"] = std::string(FairnessName(t.fairness));
  kv["train.scheme"] = std::string(SchemeName(t.scheme));
  kv["train.stratify"] = t.Stratified() ? "true" : "false";
  kv["train.z_dim"] = std::to_string(t.z_dim);
  kv["train.generator_hidden"] = std::to_string(t.generator_hidden);
  kv["train.teacher_hidden"] = std::to_string(t.teacher_hidden);
  kv["train.estimator_degree"] = std::to_string(t.estimator.degree);
  kv["train.estimator_l2"] = FormatDouble(t.estimator.l2);
  if (c.privacy.target_epsilon)
    kv["privacy.target_epsilon"] = FormatDouble(*c.privacy.target_epsilon);
  if (c.privacy.sigma) kv["privacy.sigma"] = FormatDouble(*c.privacy.sigma);
  kv["privacy.delta"] = FormatDouble(c.privacy.delta);
  kv["eval.mmd_max_samples"] = std::to_string(c.eval.mmd_max_samples);
  kv["eval.mmd_bandwidth"] = FormatDouble(c.eval.mmd_bandwidth);
  kv["eval.classifier"] = std::string(internal::ClassifierName(c.eval.classifier.kind));
  kv["eval.classifier_iterations"] = std::to_string(c.eval.classifier.iterations);
  kv["eval.classifier_lr"] = FormatDouble(c.eval.classifier.learning_rate);
  kv["eval.classifier_l2"] = FormatDouble(c.eval.classifier.l2);
  kv["eval.classifier_hidden"] = std::to_string(c.eval.classifier.hidden);
  std::string seeds;
  for (std::uint64_t s : c.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  kv["seeds"] = seeds;
  return kv;
}

inline std::string CanonicalText(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, v] : CanonicalKeyValues(c)) out += k + " = " + v + "\n";
  return out;
}

// 64-bit FNV-1a of the canonical text, as 16 hex digits.
inline std::string ConfigHash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : CanonicalText(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- sigma

struct SigmaGrid {
  double lo = 1e-3;
  double hi = 1e5;
  double ratio = 1.01;
};

// Smallest grid value whose epsilon meets the target. epsilon_of must be
// nonincreasing in sigma.
inline double ResolveSigmaOnGrid(const std::function<double(double)>& epsilon_of,
                                 double target_epsilon, const SigmaGrid& grid = {}) {
  PFGUARD_CHECK(target_epsilon > 0.0, "target epsilon must be positive");
  PFGUARD_CHECK(grid.lo > 0.0 && grid.hi > grid.lo && grid.ratio > 1.0,
                "invalid sigma grid");
  if (std::isinf(target_epsilon)) return 0.0;
  const auto n = static_cast<std::size_t>(
      std::ceil(std::log(grid.hi / grid.lo) / std::log(grid.ratio)));
  auto at = [&](std::size_t k) { return grid.lo * std::pow(grid.ratio, static_cast<double>(k)); };
  if (epsilon_of(at(n)) > target_epsilon)
    throw Error("target epsilon " + internal::FormatDouble(target_epsilon) +
                " is unreachable with sigma <= " + internal::FormatDouble(at(n)));
  std::size_t lo = 0, hi = n;  // invariant: at(hi) meets the target
  if (epsilon_of(at(0)) <= target_epsilon) return at(0);
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (epsilon_of(at(mid)) <= target_epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return at(hi);
}

// Sigma for `queries` Gaussian queries of the given sensitivity.
inline double ResolveSigmaForQueries(Sensitivity sensitivity, std::size_t queries,
                                     double delta, double target_epsilon,
                                     const SigmaGrid& grid = {}) {
  return ResolveSigmaOnGrid(
      [&](double sigma) {
        PrivacyLedger l;
        l.Charge(sensitivity, sigma, queries);
        return LedgerEpsilon(l, delta);
      },
      target_epsilon, grid);
}

// Noise multiplier for the run: explicit sigma unchanged, otherwise the
// smallest grid multiplier whose planned ledger meets the target.
inline double ResolveSigma(const ExperimentConfig& c, const SigmaGrid& grid = {}) {
  if (c.privacy.sigma) return *c.privacy.sigma;
  PFGUARD_CHECK(c.privacy.target_epsilon.has_value(), "no privacy target given");
  TrainConfig t = c.train;
  return ResolveSigmaOnGrid(
      [&](double m) {
        t.noise_multiplier = m;
        return LedgerEpsilon(PlannedLedger(t, c.data.geometry.dim), c.privacy.delta);
      },
      *c.privacy.target_epsilon, grid);
}

// ---------------------------------------------------------------- data

struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
  std::optional<LabeledDataset> reference;
};

inline std::uint64_t SubSeed(std::uint64_t seed, StreamTag tag) {
  Rng r = DeriveStream(seed, tag);
  return r();
}

inline BiasSpec DataSpec(const ExperimentConfig& c) {
  return MakeBiasSpec(c.data.scenario, c.data.gamma, c.data.total_size,
                      c.data.geometry);
}

// Training set of total_size, an independent test draw of total_size / 4
// (an 80/20 split of the pooled data) and, for sir_estimated, a balanced
// reference draw of reference_fraction * total_size.
inline ExperimentData MakeExperimentData(const ExperimentConfig& c, std::uint64_t seed) {
  ExperimentData d;
  const BiasSpec spec = DataSpec(c);
  d.train = MakeBiasedMixture(spec, SubSeed(seed, StreamTag::kData));
  BiasSpec test_spec = spec;
  test_spec.total_size = std::max<std::size_t>(c.data.total_size / 4, 1);
  d.test = MakeBiasedMixture(test_spec, SubSeed(seed, StreamTag::kTestSet));
  if (c.train.fairness == FairnessMode::kSirEstimated) {
    BiasSpec ref = spec;
    ref.gamma = 1.0;
    ref.total_size = static_cast<std::size_t>(
        std::llround(c.data.reference_fraction * static_cast<double>(c.data.total_size)));
    if (ref.total_size == 0)
      throw ConfigError("data.reference_fraction", "reference set would be empty");
    d.reference = MakeBiasedMixture(ref, SubSeed(seed, StreamTag::kReference));
  }
  return d;
}

// ---------------------------------------------------------------- runs

// Failure of one stage of one seed. Partial outputs of that seed are
// flagged with a FAILED file in its directory.
class StageError : public Error {
 public:
  StageError(std::string stage, std::uint64_t seed, const std::string& what)
      : Error("seed " + std::to_string(seed) + ", stage " + stage + ": " + what),
        stage_(std::move(stage)),
        seed_(seed) {}
  const std::string& stage() const noexcept { return stage_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::string stage_;
  std::uint64_t seed_;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double noise_multiplier = 0.0;
  double epsilon = 0.0;  // from the ledger
  double epsilon_before_eval = 0.0;
  double wall_seconds = 0.0;
  FairnessReport report;
  nlohmann::json accountant;
  std::vector<std::string> warnings;
};

struct RunRecord {
  std::string config_hash;
  std::vector<SeedResult> seeds;
  double wall_seconds = 0.0;
};

inline std::vector<std::string> MetricsColumns() {
  return {"config_hash", "seed", "scenario", "gamma", "n_teachers", "fairness",
          "aggregator", "steps", "noise_multiplier", "epsilon", "delta",
          "generated_group_dist", "kl_to_uniform", "dist_disparity",
          "dist_disparity_l1", "per_group_mmd", "minority_mmd", "accuracy",
          "eo_disparity", "dem_disparity", "acc_disparity"};
}

inline std::string MetricsHeader() {
  std::string h;
  for (const std::string& c : MetricsColumns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

inline std::string MetricsRow(const ExperimentConfig& c, const std::string& hash,
                              const SeedResult& r) {
  using internal::FormatDouble;
  auto joined = [](const Vec& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ";") + FormatDouble(x);
    return s;
  };
  const std::vector<std::string> cells = {
      hash,
      std::to_string(r.seed),
      std::string(ScenarioName(c.data.scenario)),
      FormatDouble(c.data.gamma),
      std::to_string(c.train.num_teachers),
      std::string(FairnessName(c.train.fairness)),
      std::string(AggregatorName(c.train.aggregator)),
      std::to_string(c.train.steps),
      FormatDouble(r.noise_multiplier),
      FormatDouble(r.epsilon),
      FormatDouble(c.privacy.delta),
      joined(r.report.generated.probs),
      FormatDouble(r.report.kl_to_uniform),
      FormatDouble(r.report.dist_disparity),
      FormatDouble(r.report.dist_disparity_l1),
      joined(r.report.per_group_mmd),
      FormatDouble(r.report.per_group_mmd.empty() ? 0.0 : r.report.per_group_mmd.front()),
      FormatDouble(r.report.downstream.accuracy),
      FormatDouble(r.report.downstream.eo_disparity),
      FormatDouble(r.report.downstream.dem_disparity),
      FormatDouble(r.report.downstream.acc_disparity)};
  std::string row;
  for (const std::string& cell : cells) row += (row.empty() ? "" : ",") + cell;
  return row;
}

namespace internal {

inline void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

inline std::string HistoryCsv(const std::vector<HistoryRow>& history) {
  std::string s = "step,phase,loss,epsilon\n";
  for (const HistoryRow& h : history)
    s += std::to_string(h.step) + "," + h.phase + "," + FormatDouble(h.loss) + "," +
         FormatDouble(h.epsilon) + "\n";
  return s;
}

}  // namespace internal

// Trains one seed end to end and writes its files under `dir`:
// summary.json, accountant.json, generator.ckpt, history.csv.
inline SeedResult RunSeed(const ExperimentConfig& c, std::uint64_t seed,
                          const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string hash = ConfigHash(c);
  std::string stage = "setup";
  SeedResult r;
  r.seed = seed;
  try {
    fs::create_directories(dir);
    fs::remove(dir / "FAILED");
    stage = "calibrate";
    r.noise_multiplier = ResolveSigma(c);
    TrainConfig tc = c.train;
    tc.noise_multiplier = r.noise_multiplier;
    tc.delta = c.privacy.delta;
    tc.seed = seed;
    stage = "data";
    const ExperimentData data = MakeExperimentData(c, seed);
    stage = "train";
    TrainResult tr = Train(data.train, tc, data.reference ? &*data.reference : nullptr);
    r.warnings = tr.warnings;
    r.epsilon_before_eval = LedgerEpsilon(tr.ledger, c.privacy.delta);
    stage = "generate";
    Rng er = DeriveStream(seed, StreamTag::kEval);
    const std::vector<Vec> synth = Generate(tr.generator, kSyntheticSamples, er);
    stage = "evaluate";
    EvalConfig ec = c.eval;
    ec.classifier.seed = SubSeed(seed, StreamTag::kEval);
    r.report = EvaluateSynthetic(synth, data.train, data.test, ec);
    r.epsilon = LedgerEpsilon(tr.ledger, c.privacy.delta);
    if (r.epsilon != r.epsilon_before_eval &&
        !(std::isinf(r.epsilon) && std::isinf(r.epsilon_before_eval)))
      throw Error("ledger epsilon changed during post-processing");
    r.accountant = AccountantReport(tr.ledger, c.privacy.delta);
    stage = "write";
    {
      std::ofstream ck(dir / "generator.ckpt", std::ios::binary);
      WriteCheckpoint(ck, tr.generator, hash, tc.steps);
    }
    internal::WriteText(dir / "history.csv", internal::HistoryCsv(tr.history));
    internal::WriteText(dir / "accountant.json", r.accountant.dump(2) + "\n");
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json summary = {{"config_hash", hash},
                              {"seed", seed},
                              {"epsilon", r.epsilon},
                              {"delta", c.privacy.delta},
                              {"noise_multiplier", r.noise_multiplier},
                              {"metrics", r.report.ToJson()},
                              {"warnings", r.warnings},
                              {"wall_seconds", r.wall_seconds}};
    if (c.privacy.target_epsilon)
      summary["target_epsilon"] = std::isinf(*c.privacy.target_epsilon)
                                      ? nlohmann::json("inf")
                                      : nlohmann::json(*c.privacy.target_epsilon);
    if (std::isinf(r.epsilon)) summary["epsilon"] = "inf";
    internal::WriteText(dir / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream flag(dir / "FAILED");
    flag << nlohmann::json{{"stage", stage}, {"message", e.what()}}.dump() << "\n";
    throw StageError(stage, seed, e.what());
  }
  return r;
}

inline std::filesystem::path SeedDir(const std::filesystem::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

// All seeds of one config. metrics.csv holds one row per finished seed; a
// failing seed stops the run, leaves a PARTIAL marker and rethrows.
inline RunRecord RunExperiment(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_hash = ConfigHash(c);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  fs::remove(out / "PARTIAL");
  std::string csv = MetricsHeader() + "\n";
  for (std::uint64_t seed : c.seeds) {
    try {
      rec.seeds.push_back(RunSeed(c, seed, SeedDir(out, seed)));
    } catch (...) {
      internal::WriteText(out / "metrics.csv", csv);
      internal::WriteText(out / "PARTIAL", "run stopped at seed " + std::to_string(seed) + "\n");
      throw;
    }
    csv += MetricsRow(c, rec.config_hash, rec.seeds.back()) + "\n";
  }
  internal::WriteText(out / "metrics.csv", csv);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------- sweeps

enum class SweepAxis { kEpsilon, kGamma, kNumTeachers, kRefSize };

inline std::string_view SweepAxisName(SweepAxis a) {
  switch (a) {
    case SweepAxis::kEpsilon: return "epsilon";
    case SweepAxis::kGamma: return "gamma";
    case SweepAxis::kNumTeachers: return "n_T";
    case SweepAxis::kRefSize: return "ref_size";
  }
  return "?";
}

inline SweepAxis ParseSweepAxis(const std::string& v) {
  static const SweepAxis kAxes[] = {SweepAxis::kEpsilon, SweepAxis::kGamma,
                                    SweepAxis::kNumTeachers, SweepAxis::kRefSize};
  return internal::ParseEnum("--axis", v, kAxes, &SweepAxisName);
}

// The config for one sweep point. ref_size is a fraction of |D|.
inline ExperimentConfig WithAxisValue(ExperimentConfig c, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::kEpsilon:
      if (!(v > 0.0)) throw ConfigError("epsilon", "sweep value must be positive");
      c.privacy.target_epsilon = v;
      c.privacy.sigma.reset();
      break;
    case SweepAxis::kGamma:
      if (!(v >= 1.0) || std::isinf(v)) throw ConfigError("gamma", "sweep value must be >= 1");
      c.data.gamma = v;
      break;
    case SweepAxis::kNumTeachers:
      if (!(v >= 1.0) || v != std::floor(v) || std::isinf(v))
        throw ConfigError("n_T", "sweep value must be a positive integer");
      c.train.num_teachers = static_cast<std::size_t>(v);
      break;
    case SweepAxis::kRefSize:
      if (!(v > 0.0) || std::isinf(v)) throw ConfigError("ref_size", "sweep value must be positive");
      c.data.reference_fraction = v;
      break;
  }
  return c;
}

struct SweepFailure {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string stage;
  std::string message;
};

struct SweepPoint {
  double value = 0.0;
  ExperimentConfig config;
  std::string config_hash;
  std::vector<SeedResult> seeds;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kGamma;
  std::vector<SweepPoint> points;
  std::vector<SweepFailure> failures;
  std::string csv;  // merged table, also written to <out>/sweep.csv
};

// One run per value and seed, each in <out>/<axis>_<i>/seed_<s>. Failures
// are recorded in failures.csv and the sweep moves on.
inline SweepResult Sweep(const ExperimentConfig& base, SweepAxis axis,
                         const std::vector<double>& values) {
  namespace fs = std::filesystem;
  PFGUARD_CHECK(!values.empty(), "sweep needs at least one value");
  SweepResult res;
  res.axis = axis;
  const fs::path out = base.output_dir;
  fs::create_directories(out);
  const std::string axis_name(SweepAxisName(axis));
  std::string csv = "axis,value," + MetricsHeader() + "\n";
  std::string fails = "axis,value,seed,stage,message\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint p;
    p.value = values[i];
    p.config = WithAxisValue(base, axis, values[i]);
    p.config.output_dir = (out / (axis_name + "_" + std::to_string(i))).string();
    p.config_hash = ConfigHash(p.config);
    std::string point_csv = MetricsHeader() + "\n";
    for (std::uint64_t seed : p.config.seeds) {
      try {
        p.seeds.push_back(RunSeed(p.config, seed, SeedDir(p.config.output_dir, seed)));
        const std::string row = MetricsRow(p.config, p.config_hash, p.seeds.back());
        point_csv += row + "\n";
        csv += axis_name + "," + internal::FormatDouble(p.value) + "," + row + "\n";
      } catch (const StageError& e) {
        res.failures.push_back({p.value, seed, e.stage(), e.what()});
        std::string msg = e.what();
        for (char& ch : msg)
          if (ch == ',' || ch == '\n') ch = ' ';
        fails += axis_name + "," + internal::FormatDouble(p.value) + "," +
                 std::to_string(seed) + "," + e.stage() + "," + msg + "\n";
      }
    }
    internal::WriteText(fs::path(p.config.output_dir) / "metrics.csv", point_csv);
    res.points.push_back(std::move(p));
  }
  internal::WriteText(out / "sweep.csv", csv);
  internal::WriteText(out / "failures.csv", fails);
  res.csv = std::move(csv);
  return res;
}

}  // namespace pfguard

#endif  // PFGUARD_HARNESS_HPP_
