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

// Two-phase private and fair generative training on toy networks.
//
// Phase 1 trains every teacher discriminator on its own disjoint partition,
// drawing real minibatches with SIR when fairness is on. Phase 2 queries the
// teachers on freshly generated samples, aggregates their per-sample
// gradient signals with a DP mechanism and updates the generator with the
// sanitized signal only. The ledger is charged once per aggregation.

#ifndef PFGUARD_TRAINING_HPP_
#define PFGUARD_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pfguard/core_data.hpp"
#include "pfguard/dp.hpp"
#include "pfguard/error.hpp"
#include "pfguard/fair_sampling.hpp"
#include "pfguard/mlp.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

enum class GanLoss { kNonSaturating, kWasserstein };
enum class Aggregator { kGnmaxDirection, kSignVote, kGswganSanitize };
enum class FairnessMode { kOff, kSirKnown, kSirEstimated };

inline std::string_view GanLossName(GanLoss l) {
  return l == GanLoss::kNonSaturating ? "nonsaturating_gan" : "wgan";
}
inline std::string_view AggregatorName(Aggregator a) {
  switch (a) {
    case Aggregator::kGnmaxDirection: return "gnmax_direction";
    case Aggregator::kSignVote: return "sign_vote";
    case Aggregator::kGswganSanitize: return "gswgan_sanitize";
  }
  return "?";
}
inline std::string_view FairnessName(FairnessMode f) {
  switch (f) {
    case FairnessMode::kOff: return "off";
    case FairnessMode::kSirKnown: return "sir_known";
    case FairnessMode::kSirEstimated: return "sir_estimated";
  }
  return "?";
}

struct TrainConfig {
  std::size_t num_teachers = 10;
  std::size_t batch_size = 32;
  double teacher_lr = 0.05;
  double generator_lr = 0.05;
  std::size_t steps = 200;
  GanLoss loss = GanLoss::kNonSaturating;
  Aggregator aggregator = Aggregator::kGnmaxDirection;
  double clip = 1.0;
  double noise_multiplier = 1.0;  // noise std in units of the sensitivity
  FairnessMode fairness = FairnessMode::kOff;
  NormalizationScheme scheme = NormalizationScheme::kN1;
  std::optional<bool> stratify;  // unset: stratify iff fairness == sir_known
  double delta = 1e-5;
  std::size_t z_dim = 4;
  std::size_t generator_hidden = 16;
  std::size_t teacher_hidden = 16;
  std::uint64_t seed = 0;
  RatioEstimatorConfig estimator;

  bool Stratified() const {
    return stratify.value_or(fairness == FairnessMode::kSirKnown);
  }

  void Validate() const {
    PFGUARD_CHECK(num_teachers >= 1, "num_teachers must be >= 1");
    PFGUARD_CHECK(batch_size >= 1, "batch_size must be >= 1");
    PFGUARD_CHECK(teacher_lr >= 0.0 && generator_lr >= 0.0,
                  "learning rates must be nonnegative");
    PFGUARD_CHECK(clip > 0.0, "clip must be positive");
    PFGUARD_CHECK(noise_multiplier >= 0.0, "noise multiplier must be >= 0");
    PFGUARD_CHECK(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    PFGUARD_CHECK(z_dim >= 1 && generator_hidden >= 1 && teacher_hidden >= 1,
                  "network sizes must be positive");
    PFGUARD_CHECK(!(fairness == FairnessMode::kSirEstimated && Stratified()),
                  "sir_estimated cannot stratify on withheld attributes");
  }
};

// Sensitivity of one aggregation query (one generated sample).
inline Sensitivity QuerySensitivity(const TrainConfig& config,
                                    std::size_t data_dim) {
  switch (config.aggregator) {
    case Aggregator::kGnmaxDirection: return GnmaxSensitivity();
    case Aggregator::kSignVote: return SignVoteSensitivity(data_dim);
    case Aggregator::kGswganSanitize:
      return SanitizerSensitivity(ClipBound{config.clip});
  }
  return {};
}

// What one generator step costs: batch_size queries at noise
// std = noise_multiplier * sensitivity.
inline MechanismCost PlannedStepCost(const TrainConfig& config,
                                     std::size_t data_dim) {
  const Sensitivity s = QuerySensitivity(config, data_dim);
  return {s, config.noise_multiplier * s.value, config.batch_size};
}

inline PrivacyLedger PlannedLedger(const TrainConfig& config,
                                   std::size_t data_dim) {
  PrivacyLedger ledger;
  const MechanismCost cost = PlannedStepCost(config, data_dim);
  for (std::size_t s = 0; s < config.steps; ++s) ledger.Charge(cost);
  return ledger;
}

struct Models {
  Mlp generator;
  std::vector<Mlp> teachers;
};

inline std::vector<LayerShape> GeneratorShapes(const TrainConfig& c,
                                               std::size_t dim) {
  return {{c.z_dim, c.generator_hidden}, {c.generator_hidden, dim}};
}

inline std::vector<LayerShape> TeacherShapes(const TrainConfig& c,
                                             std::size_t dim) {
  return {{dim, c.teacher_hidden}, {c.teacher_hidden, 1}};
}

inline Models InitModels(const TrainConfig& config, std::size_t data_dim,
                         std::uint64_t seed) {
  PFGUARD_CHECK(data_dim >= 1, "data dimension must be >= 1");
  Models m;
  Rng g = DeriveStream(seed, StreamTag::kInit, 0);
  m.generator = Mlp::Initialized(GeneratorShapes(config, data_dim),
                                 ModelRole::kGenerator, g);
  m.teachers.reserve(config.num_teachers);
  for (std::size_t i = 0; i < config.num_teachers; ++i) {
    Rng t = DeriveStream(seed, StreamTag::kInit, i + 1);
    m.teachers.push_back(Mlp::Initialized(TeacherShapes(config, data_dim),
                                          ModelRole::kTeacher, t));
  }
  return m;
}

inline Vec DrawLatent(std::size_t z_dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec z(z_dim);
  for (double& v : z) v = n(rng);
  return z;
}

// Post-processing only: no ledger is involved.
inline std::vector<Vec> Generate(const Mlp& generator, std::size_t n, Rng& rng) {
  PFGUARD_CHECK(n >= 1, "generate at least one sample");
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(generator.Forward(DrawLatent(generator.input_dim(), rng)));
  return out;
}

namespace internal {

inline double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
inline double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace internal

struct LossAndGrad {
  double loss = 0.0;
  Vec grad;
};

// Discriminator loss and its parameter gradient.
// Non-saturating: mean softplus(-D(real)) + mean softplus(D(fake)).
// Wasserstein:    mean D(fake) - mean D(real).
inline LossAndGrad TeacherLossGradient(const Mlp& teacher,
                                       std::span<const Vec> real,
                                       std::span<const Vec> fake, GanLoss loss) {
  PFGUARD_CHECK(!real.empty() && !fake.empty(), "teacher batch is empty");
  LossAndGrad out;
  out.grad.assign(teacher.num_params(), 0.0);
  Mlp::Cache cache;
  const double wr = 1.0 / static_cast<double>(real.size());
  const double wf = 1.0 / static_cast<double>(fake.size());
  for (const Vec& x : real) {
    const double d = teacher.Forward(x, &cache)[0];
    double dl;
    if (loss == GanLoss::kNonSaturating) {
      out.loss += wr * internal::Softplus(-d);
      dl = -wr * internal::Sigmoid(-d);
    } else {
      out.loss -= wr * d;
      dl = -wr;
    }
    teacher.Backward(cache, std::span<const double>(&dl, 1), &out.grad);
  }
  for (const Vec& x : fake) {
    const double d = teacher.Forward(x, &cache)[0];
    double dl;
    if (loss == GanLoss::kNonSaturating) {
      out.loss += wf * internal::Softplus(d);
      dl = wf * internal::Sigmoid(d);
    } else {
      out.loss += wf * d;
      dl = wf;
    }
    teacher.Backward(cache, std::span<const double>(&dl, 1), &out.grad);
  }
  return out;
}

// One SGD step on the discriminator loss; returns the pre-step loss. No
// privacy noise: teachers are never released.
inline double TeacherStep(Mlp& teacher, std::span<const Vec> real,
                          std::span<const Vec> fake, double lr, GanLoss loss) {
  const LossAndGrad lg = TeacherLossGradient(teacher, real, fake, loss);
  if (!std::isfinite(lg.loss))
    throw Error("teacher loss is not finite (" + std::to_string(lg.loss) + ")");
  Vec& p = teacher.mutable_params();
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * lg.grad[k];
  return lg.loss;
}

inline std::vector<Vec> Gather(const LabeledDataset& data,
                               std::span<const std::size_t> idx) {
  std::vector<Vec> xs;
  xs.reserve(idx.size());
  for (std::size_t i : idx) xs.push_back(data[i].features);
  return xs;
}

// Generator loss for one sample as seen by one teacher, and its gradient
// with respect to the sample.
struct SampleSignal {
  double loss = 0.0;
  Vec grad_x;
};

inline SampleSignal GeneratorSignal(const Mlp& teacher, std::span<const double> x,
                                    GanLoss loss) {
  Mlp::Cache cache;
  const double d = teacher.Forward(x, &cache)[0];
  double dl;
  SampleSignal s;
  if (loss == GanLoss::kNonSaturating) {
    s.loss = internal::Softplus(-d);
    dl = -internal::Sigmoid(-d);
  } else {
    s.loss = -d;
    dl = -1.0;
  }
  s.grad_x = teacher.Backward(cache, std::span<const double>(&dl, 1), nullptr);
  return s;
}

// Teacher vote for the GNMax direction aggregator: the signed axis along
// which the descent direction -grad_x is largest. Class 2k is +e_k, class
// 2k+1 is -e_k.
inline int DirectionVote(std::span<const double> grad_x) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < grad_x.size(); ++k)
    if (std::abs(grad_x[k]) > std::abs(grad_x[best])) best = k;
  const bool negative_descent = -grad_x[best] < 0.0;
  return static_cast<int>(2 * best + (negative_descent ? 1 : 0));
}

// Surrogate gradient (w.r.t. the sample) encoded by a direction class.
inline Vec DirectionClassGradient(int cls, std::size_t dim) {
  Vec g(dim, 0.0);
  const auto k = static_cast<std::size_t>(cls / 2);
  g[k] = cls % 2 == 0 ? -1.0 : 1.0;
  return g;
}

struct AggregatedSignal {
  std::vector<Vec> sanitized;  // per generated sample, d/dx of the loss
  MechanismCost cost;
};

// Runs the configured mechanism on per-teacher, per-sample gradients
// signals[t][i]. For gswgan_sanitize only signals.front() is used: the
// caller passes the representative teacher.
inline AggregatedSignal AggregateSignals(
    const std::vector<std::vector<Vec>>& signals, const TrainConfig& config,
    Rng& rng) {
  PFGUARD_CHECK(!signals.empty() && !signals.front().empty(),
                "no teacher signals to aggregate");
  const std::size_t batch = signals.front().size();
  const std::size_t dim = signals.front().front().size();
  for (const auto& per_teacher : signals) {
    PFGUARD_CHECK(per_teacher.size() == batch, "ragged teacher signals");
    for (const Vec& g : per_teacher)
      for (double v : g)
        if (!std::isfinite(v)) throw Error("non-finite teacher signal");
  }
  AggregatedSignal out;
  const Sensitivity sens = QuerySensitivity(config, dim);
  const double noise_std = config.noise_multiplier * sens.value;
  out.sanitized.reserve(batch);
  switch (config.aggregator) {
    case Aggregator::kGnmaxDirection: {
      std::vector<int> votes(signals.size());
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t t = 0; t < signals.size(); ++t)
          votes[t] = DirectionVote(signals[t][i]);
        const int cls =
            GnmaxAggregate(votes, static_cast<int>(2 * dim), noise_std, rng);
        out.sanitized.push_back(DirectionClassGradient(cls, dim));
      }
      out.cost = {sens, noise_std, batch};
      break;
    }
    case Aggregator::kSignVote: {
      std::vector<Vec> per_teacher(signals.size());
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t t = 0; t < signals.size(); ++t)
          per_teacher[t] = signals[t][i];
        out.sanitized.push_back(SignVoteAggregate(per_teacher, noise_std, rng));
      }
      out.cost = {sens, noise_std, batch};
      break;
    }
    case Aggregator::kGswganSanitize: {
      SanitizedGradients s = SanitizeGradientPerSample(
          signals.front(), ClipBound{config.clip}, config.noise_multiplier, rng);
      out.sanitized = std::move(s.grads);
      out.cost = s.cost;
      break;
    }
  }
  return out;
}

// d/d(theta_G) of (1/B) sum_i <sanitized_i, G(z_i)>, i.e. the chain rule
// through the generator only.
inline Vec GeneratorParamGradient(const Mlp& generator, std::span<const Vec> zs,
                                  std::span<const Vec> sanitized) {
  PFGUARD_CHECK(zs.size() == sanitized.size() && !zs.empty(),
                "latent batch and signals differ in size");
  Vec grad(generator.num_params(), 0.0);
  Mlp::Cache cache;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    generator.Forward(zs[i], &cache);
    generator.Backward(cache, sanitized[i], &grad);
  }
  for (double& g : grad) g /= static_cast<double>(zs.size());
  return grad;
}

// Mean generator loss of one teacher over a latent batch (for gradient
// checks and diagnostics).
inline double GeneratorLoss(const Mlp& generator, const Mlp& teacher,
                            std::span<const Vec> zs, GanLoss loss) {
  double total = 0.0;
  for (const Vec& z : zs)
    total += GeneratorSignal(teacher, generator.Forward(z), loss).loss;
  return total / static_cast<double>(zs.size());
}

struct GeneratorStepResult {
  double loss = 0.0;  // mean teacher generator loss, diagnostic only
  std::size_t representative = 0;
};

inline GeneratorStepResult GeneratorStepPtel(Mlp& generator,
                                             std::span<const Mlp> teachers,
                                             const TrainConfig& config,
                                             PrivacyLedger& ledger, Rng& rng) {
  PFGUARD_CHECK(!teachers.empty(), "generator step needs teachers");
  GeneratorStepResult res;
  std::vector<std::size_t> queried;
  if (config.aggregator == Aggregator::kGswganSanitize) {
    std::uniform_int_distribution<std::size_t> pick(0, teachers.size() - 1);
    res.representative = pick(rng);
    queried.push_back(res.representative);
  } else {
    for (std::size_t t = 0; t < teachers.size(); ++t) queried.push_back(t);
  }
  std::vector<Vec> zs;
  std::vector<Vec> xs;
  zs.reserve(config.batch_size);
  for (std::size_t i = 0; i < config.batch_size; ++i) {
    zs.push_back(DrawLatent(generator.input_dim(), rng));
    xs.push_back(generator.Forward(zs.back()));
  }
  std::vector<std::vector<Vec>> signals(queried.size());
  double loss_sum = 0.0;
  for (std::size_t q = 0; q < queried.size(); ++q) {
    signals[q].reserve(xs.size());
    for (const Vec& x : xs) {
      SampleSignal s = GeneratorSignal(teachers[queried[q]], x, config.loss);
      loss_sum += s.loss;
      signals[q].push_back(std::move(s.grad_x));
    }
  }
  res.loss = loss_sum / static_cast<double>(queried.size() * xs.size());
  AggregatedSignal agg = AggregateSignals(signals, config, rng);
  if (agg.cost.noise_std > 0.0)
    ledger.Charge(agg.cost);
  else
    ledger.ChargeUnbounded(agg.cost);
  const Vec grad = GeneratorParamGradient(generator, zs, agg.sanitized);
  Vec& p = generator.mutable_params();
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= config.generator_lr * grad[k];
  if (!generator.AllFinite()) throw Error("generator parameters became non-finite");
  return res;
}

// Known-attribute ratios from the partition's own group counts. Groups the
// partition lacks get a placeholder of 1 (they have no members to weight).
// Using the partition's counts keeps every teacher a function of its own
// data only.
inline RatioTable PartitionRatioTable(const Partition& partition,
                                      const LabeledDataset& parent) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(parent.num_groups()), 0);
  for (std::size_t idx : partition.members)
    ++counts[static_cast<std::size_t>(parent[idx].group)];
  RatioTable t;
  t.source = RatioSource::kKnown;
  const double target = 1.0 / static_cast<double>(counts.size());
  const double n = static_cast<double>(partition.members.size());
  for (std::size_t c : counts)
    t.h.push_back(c ? target / (static_cast<double>(c) / n) : 1.0);
  return t;
}

inline LabeledDataset SubsetDataset(const LabeledDataset& parent,
                                    std::span<const std::size_t> idx) {
  std::vector<Sample> s;
  s.reserve(idx.size());
  for (std::size_t i : idx) s.push_back(parent[i]);
  return LabeledDataset(std::move(s), parent.num_classes(), parent.num_groups());
}

struct HistoryRow {
  std::size_t step = 0;
  std::string phase;  // "teacher" or "generator"
  double loss = 0.0;
  double epsilon = 0.0;
};

struct TrainHooks {
  // Called for every real sample a teacher reads: (teacher, dataset index).
  std::function<void(std::size_t, std::size_t)> on_real_access;
};

struct TrainResult {
  Mlp generator;
  std::vector<Mlp> teachers;
  PrivacyLedger ledger;
  std::vector<HistoryRow> history;
  PartitionSplit split;
  std::vector<std::string> warnings;
};

// Per-teacher real-minibatch source.
class TeacherDataSource {
 public:
  // Uniform resampling with replacement (fairness off).
  explicit TeacherDataSource(const Partition& p) : members_(p.members) {
    PFGUARD_CHECK(!members_.empty(), "teacher partition is empty");
  }
  explicit TeacherDataSource(SirSampler sampler) : sir_(std::move(sampler)) {}

  MiniBatch Draw(std::size_t batch, Rng& rng) const {
    if (sir_) return sir_->Draw(batch, rng);
    std::uniform_int_distribution<std::size_t> u(0, members_.size() - 1);
    MiniBatch out(batch);
    for (std::size_t& i : out) i = members_[u(rng)];
    return out;
  }

 private:
  std::vector<std::size_t> members_;
  std::optional<SirSampler> sir_;
};

inline std::vector<TeacherDataSource> BuildDataSources(
    const LabeledDataset& data, const PartitionSplit& split,
    const TrainConfig& config, const LabeledDataset* reference) {
  std::vector<TeacherDataSource> out;
  out.reserve(split.partitions.size());
  for (const Partition& p : split.partitions) {
    switch (config.fairness) {
      case FairnessMode::kOff:
        out.emplace_back(p);
        break;
      case FairnessMode::kSirKnown:
        out.emplace_back(SirSampler(p, data, PartitionRatioTable(p, data),
                                    config.scheme));
        break;
      case FairnessMode::kSirEstimated: {
        PFGUARD_CHECK(reference != nullptr && !reference->empty(),
                      "sir_estimated needs a reference dataset");
        RatioEstimator est = FitRatioEstimator(SubsetDataset(data, p.members),
                                               *reference, config.estimator);
        out.emplace_back(SirSampler(p, data, est, config.scheme));
        break;
      }
    }
  }
  return out;
}

inline TrainResult Train(const LabeledDataset& data, const TrainConfig& config,
                         const LabeledDataset* reference = nullptr,
                         const TrainHooks& hooks = {}) {
  config.Validate();
  PFGUARD_CHECK(!data.empty(), "training data is empty");
  TrainResult res;
  try {
    const std::size_t bound = MaxTeachers(data);
    if (bound < config.num_teachers)
      res.warnings.push_back("num_teachers " +
                             std::to_string(config.num_teachers) +
                             " exceeds the teacher bound " +
                             std::to_string(bound));
  } catch (const Error& e) {
    res.warnings.push_back(std::string("teacher bound unavailable: ") + e.what());
  }
  res.split = PartitionDisjoint(data, config.num_teachers, config.Stratified(),
                                config.seed);
  for (const EmptyGroupWarning& w : res.split.warnings)
    res.warnings.push_back("partition " + std::to_string(w.partition) +
                           " has no samples of group " + std::to_string(w.group));
  Models models = InitModels(config, data.dim(), config.seed);
  res.generator = std::move(models.generator);
  res.teachers = std::move(models.teachers);
  const std::vector<TeacherDataSource> sources =
      BuildDataSources(data, res.split, config, reference);
  std::vector<Rng> teacher_rngs;
  for (std::size_t i = 0; i < config.num_teachers; ++i)
    teacher_rngs.push_back(DeriveStream(config.seed, StreamTag::kTeacher, i));
  Rng gen_rng = DeriveStream(config.seed, StreamTag::kGenerator);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    try {
      double teacher_loss = 0.0;
      for (std::size_t t = 0; t < res.teachers.size(); ++t) {
        const MiniBatch batch = sources[t].Draw(config.batch_size, teacher_rngs[t]);
        if (hooks.on_real_access)
          for (std::size_t idx : batch) hooks.on_real_access(t, idx);
        const std::vector<Vec> real = Gather(data, batch);
        const std::vector<Vec> fake =
            Generate(res.generator, config.batch_size, teacher_rngs[t]);
        teacher_loss += TeacherStep(res.teachers[t], real, fake,
                                    config.teacher_lr, config.loss);
      }
      res.history.push_back(
          {step, "teacher", teacher_loss / static_cast<double>(res.teachers.size()),
           LedgerEpsilon(res.ledger, config.delta)});
      const GeneratorStepResult g = GeneratorStepPtel(
          res.generator, res.teachers, config, res.ledger, gen_rng);
      res.history.push_back(
          {step, "generator", g.loss, LedgerEpsilon(res.ledger, config.delta)});
    } catch (const Error& e) {
      throw Error("training aborted at step " + std::to_string(step) + ": " +
                  e.what());
    }
  }
  return res;
}

// (1/B) sum_i g_i * h(s_i).
inline Vec ReweightedGradient(std::span<const Vec> grads,
                              std::span<const int> groups,
                              const RatioTable& ratios) {
  PFGUARD_CHECK(!grads.empty() && grads.size() == groups.size(),
                "gradients and group labels differ in length");
  Vec mean(grads.front().size(), 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double h = ratios[static_cast<std::size_t>(groups[i])];
    PFGUARD_CHECK(h > 0.0, "ratios must be positive");
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += grads[i][k] * h;
  }
  for (double& v : mean) v /= static_cast<double>(grads.size());
  return mean;
}

struct ClipReweightDiagnostic {
  Vec clipped_mean;
  Vec balanced_mean;
  double bias_norm = 0.0;
};

// Reweight first, then clip: mean of clip(g_i h_i, C) against the unclipped
// reweighted mean.
inline ClipReweightDiagnostic ConflictProbeClipCancelsReweight(
    std::span<const Vec> grads, std::span<const int> groups,
    const RatioTable& ratios, ClipBound bound) {
  ClipReweightDiagnostic d;
  d.balanced_mean = ReweightedGradient(grads, groups, ratios);
  d.clipped_mean.assign(d.balanced_mean.size(), 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Vec w = grads[i];
    for (double& v : w) v *= ratios[static_cast<std::size_t>(groups[i])];
    const Vec c = ClipGradient(w, bound);
    for (std::size_t k = 0; k < c.size(); ++k) d.clipped_mean[k] += c[k];
  }
  for (double& v : d.clipped_mean) v /= static_cast<double>(grads.size());
  d.bias_norm = L2Distance(d.clipped_mean, d.balanced_mean);
  return d;
}

struct SensitivityBreakDiagnostic {
  double max_postweight_norm = 0.0;
  double declared_c = 0.0;
  bool violation = false;
};

// Clip first, then reweight: the per-sample contribution can exceed C.
inline SensitivityBreakDiagnostic ConflictProbeReweightBreaksSensitivity(
    std::span<const Vec> grads, std::span<const int> groups,
    const RatioTable& ratios, ClipBound bound) {
  PFGUARD_CHECK(grads.size() == groups.size(), "length mismatch");
  SensitivityBreakDiagnostic d;
  d.declared_c = bound.c;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double h = ratios[static_cast<std::size_t>(groups[i])];
    PFGUARD_CHECK(h > 0.0, "ratios must be positive");
    const double n = L2Norm(ClipGradient(grads[i], bound)) * h;
    d.max_postweight_norm = std::max(d.max_postweight_norm, n);
  }
  d.violation = d.max_postweight_norm > bound.c * (1.0 + 1e-12);
  return d;
}

}  // namespace pfguard

#endif  // PFGUARD_TRAINING_HPP_
