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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "pfguard/ptel_baseline.hpp"
#include "pfguard/training.hpp"

namespace pfguard {
namespace {

LabeledDataset Mixture(double gamma, std::size_t n, std::uint64_t seed) {
  return MakeBiasedMixture(MakeBiasSpec(Scenario::kSubgroup, gamma, n), seed);
}

TrainConfig SmallConfig() {
  TrainConfig c;
  c.num_teachers = 4;
  c.batch_size = 16;
  c.steps = 20;
  c.noise_multiplier = 1.0;
  c.seed = 3;
  return c;
}

double RelativeError(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

TEST(InitModels, ShapesAndDeterminism) {
  TrainConfig c = SmallConfig();
  c.num_teachers = 5;
  const Models a = InitModels(c, 2, 7), b = InitModels(c, 2, 7), other = InitModels(c, 2, 8);
  EXPECT_EQ(a.generator.num_params(), 4u * 16 + 16 + 16 * 2 + 2);
  EXPECT_EQ(a.generator.num_params(), 114u);
  ASSERT_EQ(a.teachers.size(), 5u);
  EXPECT_EQ(a.teachers[0].num_params(), 2u * 16 + 16 + 16 + 1);
  EXPECT_EQ(a.generator.params(), b.generator.params());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.teachers[i].params(), b.teachers[i].params());
  EXPECT_NE(a.generator.params(), other.generator.params());
  EXPECT_NE(a.teachers[0].params(), a.teachers[1].params());
}

TEST(TeacherStep, ZeroLearningRateLeavesParameters) {
  const Models m = InitModels(SmallConfig(), 2, 1);
  Mlp t = m.teachers[0];
  const std::vector<Vec> real{{1.0, 2.0}}, fake{{-1.0, 0.0}};
  TeacherStep(t, real, fake, 0.0, GanLoss::kNonSaturating);
  EXPECT_EQ(t.params(), m.teachers[0].params());
}

TEST(TeacherStep, LossDecreasesOnSeparableData) {
  Rng init(4);
  Mlp t = Mlp::Initialized({{1, 16}, {16, 1}}, ModelRole::kTeacher, init);
  Rng rng(5);
  std::normal_distribution<double> real_d(2.0, 0.3), fake_d(-2.0, 0.3);
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    std::vector<Vec> real(16), fake(16);
    for (Vec& v : real) v = {real_d(rng)};
    for (Vec& v : fake) v = {fake_d(rng)};
    losses.push_back(TeacherStep(t, real, fake, 0.1, GanLoss::kNonSaturating));
  }
  // Compare windowed means to tolerate per-step noise.
  double prev = std::numeric_limits<double>::infinity();
  for (int w = 0; w < 200; w += 40) {
    double m = 0.0;
    for (int k = w; k < w + 40; ++k) m += losses[k] / 40.0;
    EXPECT_LT(m, prev);
    prev = m;
  }
  EXPECT_LT(losses.back(), 0.5 * losses.front());
}

TEST(GradientCheck, TeacherLossMatchesFiniteDifferences) {
  Rng rng(11);
  std::normal_distribution<double> n(0.0, 1.5);
  for (GanLoss loss : {GanLoss::kNonSaturating, GanLoss::kWasserstein}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t d = 1 + trial % 3;
      Mlp t = Mlp::Initialized({{d, 5}, {5, 1}}, ModelRole::kTeacher, rng);
      std::vector<Vec> real(3, Vec(d)), fake(4, Vec(d));
      for (auto* batch : {&real, &fake})
        for (Vec& v : *batch)
          for (double& x : v) x = n(rng);
      const LossAndGrad lg = TeacherLossGradient(t, real, fake, loss);
      for (std::size_t k = 0; k < t.num_params(); ++k) {
        Mlp plus = t, minus = t;
        plus.mutable_params()[k] += 1e-5;
        minus.mutable_params()[k] -= 1e-5;
        const double fd = (TeacherLossGradient(plus, real, fake, loss).loss -
                           TeacherLossGradient(minus, real, fake, loss).loss) / 2e-5;
        EXPECT_LT(RelativeError(lg.grad[k], fd), 1e-4) << k;
      }
    }
  }
}

TEST(GradientCheck, GeneratorThroughNoiselessSanitizer) {
  Rng rng(12);
  for (GanLoss loss : {GanLoss::kNonSaturating, GanLoss::kWasserstein}) {
    TrainConfig c = SmallConfig();
    c.aggregator = Aggregator::kGswganSanitize;
    c.clip = std::numeric_limits<double>::infinity();
    c.noise_multiplier = 0.0;
    c.loss = loss;
    for (int trial = 0; trial < 10; ++trial) {
      Mlp g = Mlp::Initialized({{3, 6}, {6, 2}}, ModelRole::kGenerator, rng);
      const Mlp t = Mlp::Initialized({{2, 5}, {5, 1}}, ModelRole::kTeacher, rng);
      std::vector<Vec> zs;
      for (int i = 0; i < 5; ++i) zs.push_back(DrawLatent(3, rng));
      std::vector<std::vector<Vec>> signals(1);
      for (const Vec& z : zs) signals[0].push_back(GeneratorSignal(t, g.Forward(z), loss).grad_x);
      const AggregatedSignal agg = AggregateSignals(signals, c, rng);
      const Vec grad = GeneratorParamGradient(g, zs, agg.sanitized);
      for (std::size_t k = 0; k < g.num_params(); ++k) {
        Mlp plus = g, minus = g;
        plus.mutable_params()[k] += 1e-5;
        minus.mutable_params()[k] -= 1e-5;
        const double fd = (GeneratorLoss(plus, t, zs, loss) - GeneratorLoss(minus, t, zs, loss)) / 2e-5;
        EXPECT_LT(RelativeError(grad[k], fd), 1e-4) << k;
      }
    }
  }
}

TEST(GeneratorStepPtel, ZeroLearningRateStillCharges) {
  TrainConfig c = SmallConfig();
  c.generator_lr = 0.0;
  Models m = InitModels(c, 2, 1);
  const Vec before = m.generator.params();
  PrivacyLedger ledger;
  Rng rng(2);
  GeneratorStepPtel(m.generator, m.teachers, c, ledger, rng);
  EXPECT_EQ(m.generator.params(), before);
  EXPECT_EQ(ledger.num_charges(), 1u);
  EXPECT_EQ(ledger.query_log(), c.batch_size);
  EXPECT_GT(LedgerEpsilon(ledger, c.delta), 0.0);
}

TEST(GeneratorStepPtel, ChargesEveryAggregator) {
  for (Aggregator a : {Aggregator::kGnmaxDirection, Aggregator::kSignVote, Aggregator::kGswganSanitize}) {
    TrainConfig c = SmallConfig();
    c.aggregator = a;
    Models m = InitModels(c, 2, 1);
    PrivacyLedger ledger;
    Rng rng(2);
    for (int s = 0; s < 3; ++s) GeneratorStepPtel(m.generator, m.teachers, c, ledger, rng);
    EXPECT_EQ(ledger.num_charges(), 3u);
    EXPECT_DOUBLE_EQ(ledger.last_charge().sensitivity.value, QuerySensitivity(c, 2).value);
    EXPECT_DOUBLE_EQ(ledger.last_charge().noise_std, QuerySensitivity(c, 2).value);
    EXPECT_EQ(LedgerEpsilon(ledger, c.delta), LedgerEpsilon(PlannedLedger([&] {
      TrainConfig p = c;
      p.steps = 3;
      return p;
    }(), 2), c.delta));
  }
}

// Energy distance E|X-Y| - (E|X-X'| + E|Y-Y'|)/2 between two samples.
double EnergyStatistic(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  auto mean_dist = [](const std::vector<Vec>& x, const std::vector<Vec>& y) {
    double s = 0.0;
    for (const Vec& p : x)
      for (const Vec& q : y) s += L2Distance(p, q);
    return s / static_cast<double>(x.size() * y.size());
  };
  return mean_dist(a, b) - 0.5 * (mean_dist(a, a) + mean_dist(b, b));
}

// Permutation p-value of the energy statistic, samples of equal size.
double EnergyPValue(const std::vector<Vec>& a, const std::vector<Vec>& b, std::uint64_t seed) {
  const double observed = EnergyStatistic(a, b);
  std::vector<Vec> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  Rng perm(seed);
  int exceed = 0;
  const int rounds = 200;
  const auto half = static_cast<std::ptrdiff_t>(a.size());
  for (int k = 0; k < rounds; ++k) {
    std::shuffle(pooled.begin(), pooled.end(), perm);
    const std::vector<Vec> x(pooled.begin(), pooled.begin() + half), y(pooled.begin() + half, pooled.end());
    exceed += EnergyStatistic(x, y) >= observed;
  }
  return static_cast<double>(exceed + 1) / (rounds + 1);
}

// Vote signals have unit norm whatever the noise, so a drowned-out
// generator still takes a zero-mean random walk away from its
// initialization. What noise removes is the dependence on the data: runs on
// a dataset and on its mirror image come out alike.
TEST(GeneratorStepPtel, HugeNoiseRemovesDataDependence) {
  const LabeledDataset data = Mixture(1.0, 400, 4);
  std::vector<Sample> mirrored = data.samples();
  for (Sample& s : mirrored) s.features[0] = -s.features[0];
  const LabeledDataset mirror(mirrored, 2, 2);
  auto p_value = [&](double multiplier) {
    TrainConfig c = SmallConfig();
    c.noise_multiplier = multiplier;
    c.steps = 30;
    const TrainResult a = Train(data, c), b = Train(mirror, c);
    Rng ra(21), rb(22);
    return EnergyPValue(Generate(a.generator, 150, ra), Generate(b.generator, 150, rb), 23);
  };
  EXPECT_GT(p_value(1e6), 0.05);
  EXPECT_LT(p_value(0.0), 0.05);
}

TEST(Train, BitIdenticalTrajectory) {
  const LabeledDataset data = Mixture(3.0, 300, 1);
  for (FairnessMode f : {FairnessMode::kOff, FairnessMode::kSirKnown}) {
    TrainConfig c = SmallConfig();
    c.fairness = f;
    const TrainResult a = Train(data, c), b = Train(data, c);
    EXPECT_EQ(a.generator.params(), b.generator.params());
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  }
}

TEST(Train, FairnessOffMatchesPlainPtel) {
  const LabeledDataset data = Mixture(3.0, 300, 1);
  for (Aggregator agg : {Aggregator::kGnmaxDirection, Aggregator::kSignVote, Aggregator::kGswganSanitize}) {
    TrainConfig c = SmallConfig();
    c.aggregator = agg;
    c.stratify = false;
    const TrainResult a = Train(data, c);
    const PlainPtelResult b = TrainPlainPtel(data, c);
    EXPECT_EQ(a.generator.params(), b.generator.params());
    for (std::size_t t = 0; t < c.num_teachers; ++t)
      EXPECT_EQ(a.teachers[t].params(), b.teachers[t].params());
    EXPECT_EQ(a.ledger.rdp_costs(), b.ledger.rdp_costs());
  }
}

TEST(Train, LedgerChargedOncePerGeneratorStep) {
  const LabeledDataset data = Mixture(2.0, 200, 1);
  TrainConfig c = SmallConfig();
  c.steps = 13;
  const TrainResult r = Train(data, c);
  EXPECT_EQ(r.ledger.num_charges(), 13u);
  EXPECT_EQ(r.ledger.query_log(), 13u * c.batch_size);
  EXPECT_EQ(r.ledger.rdp_costs(), PlannedLedger(c, 2).rdp_costs());
  ASSERT_EQ(r.history.size(), 26u);
  EXPECT_EQ(r.history.back().phase, "generator");
  EXPECT_DOUBLE_EQ(r.history.back().epsilon, LedgerEpsilon(r.ledger, c.delta));
}

TEST(Train, TeachersTouchOnlyTheirPartition) {
  const LabeledDataset data = Mixture(3.0, 400, 2);
  for (FairnessMode f : {FairnessMode::kOff, FairnessMode::kSirKnown}) {
    TrainConfig c = SmallConfig();
    c.fairness = f;
    TrainHooks hooks;
    std::vector<std::set<std::size_t>> touched(c.num_teachers);
    hooks.on_real_access = [&](std::size_t t, std::size_t idx) { touched[t].insert(idx); };
    const TrainResult r = Train(data, c, nullptr, hooks);
    for (std::size_t t = 0; t < c.num_teachers; ++t) {
      const auto& members = r.split.partitions[t].members;
      EXPECT_FALSE(touched[t].empty());
      for (std::size_t idx : touched[t])
        EXPECT_TRUE(std::binary_search(members.begin(), members.end(), idx));
    }
  }
}

TEST(Train, FirstTeacherUpdateDependsOnlyOnOwnPartition) {
  const LabeledDataset data = Mixture(3.0, 200, 2);
  TrainConfig c = SmallConfig();
  c.fairness = FairnessMode::kSirKnown;
  c.steps = 1;
  const TrainResult base = Train(data, c);
  const std::size_t victim = base.split.partitions[2].members.front();
  std::vector<Sample> s = data.samples();
  s[victim].features[0] += 5.0;
  const TrainResult moved = Train(LabeledDataset(s, 2, 2), c);
  for (std::size_t t = 0; t < c.num_teachers; ++t) {
    if (t == 2)
      EXPECT_NE(base.teachers[t].params(), moved.teachers[t].params());
    else
      EXPECT_EQ(base.teachers[t].params(), moved.teachers[t].params());
  }
}

TEST(Train, WarnsWhenTeacherBoundIsExceeded) {
  const LabeledDataset data = Mixture(9.0, 100, 1);  // 10 minority samples
  TrainConfig c = SmallConfig();
  c.num_teachers = 12;
  c.steps = 1;
  c.fairness = FairnessMode::kSirKnown;
  const TrainResult r = Train(data, c);
  const bool warned = std::any_of(r.warnings.begin(), r.warnings.end(),
                                  [](const std::string& w) { return w.find("teacher bound") != std::string::npos; });
  EXPECT_TRUE(warned);
  c.num_teachers = 10;
  const TrainResult ok = Train(data, c);
  EXPECT_TRUE(ok.warnings.empty());
}

TEST(Train, EstimatedFairnessNeedsReferenceAndNoStratification) {
  const LabeledDataset data = Mixture(3.0, 200, 1);
  TrainConfig c = SmallConfig();
  c.fairness = FairnessMode::kSirEstimated;
  c.steps = 2;
  EXPECT_THROW(Train(data, c), Error);
  const LabeledDataset ref = Mixture(1.0, 40, 9);
  EXPECT_NO_THROW(Train(data, c, &ref));
  c.stratify = true;
  EXPECT_THROW(Train(data, c, &ref), Error);
}

TEST(ReweightedGradient, Examples) {
  const std::vector<Vec> g{{1.0}, {2.0}, {3.0}};
  const std::vector<int> s{0, 1, 0};
  EXPECT_EQ(ReweightedGradient(g, s, RatioTable{{1.0, 1.0}}), (Vec{2.0}));
  // Exact expectation with 8:2 composition.
  std::vector<Vec> grads;
  std::vector<int> groups;
  for (int i = 0; i < 10; ++i) {
    grads.push_back({i < 8 ? 1.0 : -1.0});
    groups.push_back(i < 8 ? 1 : 0);
  }
  const RatioTable h = LikelihoodRatioKnown({{0.2, 0.8}});
  EXPECT_NEAR(ReweightedGradient(grads, groups, h)[0], 0.0, 1e-12);
}

TEST(ReweightedGradient, MonteCarloMatchesBalancedMean) {
  Rng rng(4);
  std::bernoulli_distribution minority(0.2);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<Vec> grads;
  std::vector<int> groups;
  for (int i = 0; i < 100000; ++i) {
    const int s = minority(rng) ? 0 : 1;
    groups.push_back(s);
    grads.push_back({(s == 0 ? -1.0 : 1.0) + noise(rng)});
  }
  const RatioTable h = LikelihoodRatioKnown({{0.2, 0.8}});
  EXPECT_NEAR(ReweightedGradient(grads, groups, h)[0], 0.0, 0.01);
}

TEST(ConflictProbes, ClipCancelsReweight) {
  std::vector<Vec> grads;
  std::vector<int> groups;
  for (int i = 0; i < 10; ++i) {
    grads.push_back({i < 8 ? 1.0 : -1.0});
    groups.push_back(i < 8 ? 1 : 0);
  }
  const RatioTable h = LikelihoodRatioKnown({{0.2, 0.8}});
  const ClipReweightDiagnostic c1 = ConflictProbeClipCancelsReweight(grads, groups, h, {1.0});
  EXPECT_NEAR(c1.clipped_mean[0], 0.8 * 0.625 - 0.2 * 1.0, 1e-12);
  EXPECT_NEAR(c1.bias_norm, 0.3, 1e-12);
  EXPECT_NEAR(ConflictProbeClipCancelsReweight(grads, groups, h, {3.0}).bias_norm, 0.0, 1e-12);
  EXPECT_NEAR(ConflictProbeClipCancelsReweight(grads, groups, RatioTable{{1.0, 1.0}}, {1.0}).bias_norm,
              0.0, 1e-12);
}

TEST(ConflictProbes, ReweightBreaksSensitivity) {
  const std::vector<Vec> grads{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<int> groups{0, 1};
  const auto d = ConflictProbeReweightBreaksSensitivity(grads, groups, RatioTable{{2.5, 0.625}}, {1.0});
  EXPECT_NEAR(d.max_postweight_norm, 2.5, 1e-12);
  EXPECT_TRUE(d.violation);
  EXPECT_FALSE(ConflictProbeReweightBreaksSensitivity(grads, groups, RatioTable{{1.0, 1.0}}, {1.0}).violation);
  EXPECT_FALSE(ConflictProbeReweightBreaksSensitivity(grads, groups, RatioTable{{0.9, 0.5}}, {1.0}).violation);
}

TEST(Generate, DeterministicAndPostProcessing) {
  const Models m = InitModels(SmallConfig(), 2, 3);
  PrivacyLedger ledger = PlannedLedger(SmallConfig(), 2);
  const double before = LedgerEpsilon(ledger, 1e-5);
  Rng a(1), b(1);
  EXPECT_EQ(Generate(m.generator, 50, a), Generate(m.generator, 50, b));
  EXPECT_EQ(LedgerEpsilon(ledger, 1e-5), before);
  EXPECT_EQ(ledger.num_charges(), SmallConfig().steps);
}

TEST(Generate, ZeroWeightsGiveConstantBiasImage) {
  Mlp g(GeneratorShapes(SmallConfig(), 2), ModelRole::kGenerator);
  Vec& p = g.mutable_params();
  p[p.size() - 2] = 0.7;
  p[p.size() - 1] = -1.3;
  Rng rng(0);
  for (const Vec& x : Generate(g, 20, rng)) EXPECT_EQ(x, (Vec{0.7, -1.3}));
}

}  // namespace
}  // namespace pfguard
