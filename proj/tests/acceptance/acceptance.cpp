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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Derived reference values come from
// closed forms or brute force computed here, independent of the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pfguard/pfguard.hpp"

namespace fs = std::filesystem;
using namespace pfguard;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void Report(int id, const std::string& name, double budget_s,
            const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += " [over time budget]";
  }
  if (!o.pass) ++g_failures;
  std::printf("%s criterion %2d %-38s %s (%.2fs / %.0fs)\n", o.pass ? "PASS" : "FAIL",
              id, name.c_str(), o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

std::string Fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double HistL2(const VoteHistogram& a, const VoteHistogram& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    const double d = a.counts[k] - b.counts[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Closed-form minimum over continuous alpha > 1 of
// rdp(alpha) + ln(1/delta) / (alpha - 1) with rdp = q * alpha / (2 sigma^2).
double ContinuousRdpOptimum(double queries, double sigma, double delta) {
  const double c = queries / (2.0 * sigma * sigma);
  const double l = std::log(1.0 / delta);
  const double a = 1.0 + std::sqrt(l / c);
  return c * a + l / (a - 1.0);
}

fs::path ScratchDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "pfguard_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig EndToEndConfig(FairnessMode fairness, const std::string& out) {
  ExperimentConfig c;
  c.data.scenario = Scenario::kSubgroup;
  c.data.gamma = 9.0;
  c.data.total_size = 2000;
  c.train.num_teachers = 10;
  c.train.batch_size = 32;
  c.train.steps = 300;
  c.train.teacher_lr = 0.05;
  c.train.generator_lr = 0.05;
  c.train.fairness = fairness;
  c.privacy.target_epsilon = 10.0;
  c.privacy.delta = 1e-5;
  c.train.delta = 1e-5;
  c.output_dir = out;
  c.seeds = {0, 1, 2, 3, 4};
  return c;
}

std::vector<double> Kls(const RunRecord& r) {
  std::vector<double> out;
  for (const SeedResult& s : r.seeds) out.push_back(s.report.kl_to_uniform);
  return out;
}

// Every end-to-end seed result seen by criteria 9 to 12, for criterion 13.
std::vector<SeedResult> g_end_to_end;
double g_known_kl = -1.0;

// Phase-1 teacher training for a fixed generator snapshot, as Train() runs
// it: own data source, own stream, fresh fakes per teacher.
std::vector<Mlp> TrainTeachersFixedGenerator(const LabeledDataset& data,
                                             const PartitionSplit& split,
                                             const TrainConfig& cfg,
                                             const Mlp& generator,
                                             std::vector<Mlp> teachers,
                                             std::size_t steps) {
  const std::vector<TeacherDataSource> sources = BuildDataSources(data, split, cfg, nullptr);
  for (std::size_t t = 0; t < teachers.size(); ++t) {
    Rng rng = DeriveStream(cfg.seed, StreamTag::kTeacher, t);
    for (std::size_t s = 0; s < steps; ++s) {
      const MiniBatch b = sources[t].Draw(cfg.batch_size, rng);
      const std::vector<Vec> real = Gather(data, b);
      const std::vector<Vec> fake = Generate(generator, cfg.batch_size, rng);
      TeacherStep(teachers[t], real, fake, cfg.teacher_lr, cfg.loss);
    }
  }
  return teachers;
}

VoteHistogram DirectionHistogram(const std::vector<Mlp>& teachers, const Vec& x,
                                 GanLoss loss) {
  std::vector<int> votes;
  for (const Mlp& t : teachers) votes.push_back(DirectionVote(GeneratorSignal(t, x, loss).grad_x));
  return BuildVoteHistogram(votes, static_cast<int>(2 * x.size()));
}

}  // namespace

int main() {
  std::printf("pfguard acceptance suite\n");

  Report(1, "Gaussian calibration", 1.0, [] {
    const double eps = 10.0, delta = 1e-5, sens = std::numbers::sqrt2;
    const double oracle = std::sqrt(2.0 * std::log(1.25 / delta)) * sens / eps;
    const double got = GaussianSigma({eps, delta}, Sensitivity{sens});
    const bool ok = std::abs(got - 0.68516) <= 1e-4 && std::abs(got - oracle) <= 1e-12;
    return Outcome{ok, Fmt("sigma=%.6f", got) + Fmt(" oracle=%.6f", oracle)};
  });

  Report(2, "GNMax vote sensitivity", 1.0, [] {
    Rng rng = DeriveStream(2, StreamTag::kEstimator);
    const int classes = 4;
    const FuzzResult r = FuzzAdjacency<int>(
        10, 5000, rng,
        [&](Rng& g) { return std::uniform_int_distribution<int>(0, classes - 1)(g); },
        [&](std::span<const int> votes) { return BuildVoteHistogram(votes, classes).counts; });
    const bool ok = r.trials >= 1000 && r.max_difference <= std::numbers::sqrt2 + 1e-12 &&
                    std::abs(r.max_difference - std::numbers::sqrt2) <= 1e-12 &&
                    r.hits_at_max >= 1;
    return Outcome{ok, Fmt("trials=%.0f", static_cast<double>(r.trials)) +
                           Fmt(" max=%.15f", r.max_difference) +
                           Fmt(" hits=%.0f", static_cast<double>(r.hits_at_max))};
  });

  Report(3, "Sensitivity under SIR sampling", 10.0, [] {
    // Neighbouring datasets replace one sample in place. Unstratified splits
    // allow any replacement; stratified splits are keyed on s, so there the
    // replacement keeps the sample's group and the split is unchanged.
    double max_diff = 0.0;
    std::size_t comparisons = 0, hits = 0, untouched_violations = 0;
    for (bool stratify : {false, true}) {
      const LabeledDataset data =
          MakeBiasedMixture(MakeBiasSpec(Scenario::kSubgroup, 4.0, 120), 31);
      TrainConfig cfg;
      cfg.num_teachers = 6;
      cfg.batch_size = 8;
      cfg.teacher_lr = 0.5;
      cfg.fairness = FairnessMode::kSirKnown;
      cfg.stratify = stratify;
      cfg.seed = 7;
      const PartitionSplit split = PartitionDisjoint(data, cfg.num_teachers, stratify, cfg.seed);
      const Models init = InitModels(cfg, data.dim(), cfg.seed);
      const std::vector<Mlp> base =
          TrainTeachersFixedGenerator(data, split, cfg, init.generator, init.teachers, 3);
      Rng rng = DeriveStream(3, StreamTag::kEstimator, stratify ? 1 : 0);
      std::vector<Vec> queries;
      for (int q = 0; q < 8; ++q)
        queries.push_back({std::normal_distribution<double>(0.0, 3.0)(rng),
                           std::normal_distribution<double>(0.0, 3.0)(rng)});
      std::vector<VoteHistogram> base_hist;
      for (const Vec& x : queries) base_hist.push_back(DirectionHistogram(base, x, cfg.loss));
      for (int trial = 0; trial < 600; ++trial) {
        std::vector<Sample> samples = data.samples();
        const std::size_t victim =
            std::uniform_int_distribution<std::size_t>(0, samples.size() - 1)(rng);
        Sample& s = samples[victim];
        if (!stratify) s.group = std::uniform_int_distribution<int>(0, 1)(rng);
        s.label = std::uniform_int_distribution<int>(0, 1)(rng);
        s.features = {std::normal_distribution<double>(0.0, 4.0)(rng),
                      std::normal_distribution<double>(0.0, 4.0)(rng)};
        const LabeledDataset neighbour(samples, data.num_classes(), data.num_groups());
        const PartitionSplit split2 =
            PartitionDisjoint(neighbour, cfg.num_teachers, stratify, cfg.seed);
        std::size_t owner = 0;
        for (const Partition& p : split2.partitions)
          if (std::binary_search(p.members.begin(), p.members.end(), victim)) owner = p.index;
        const std::vector<Mlp> other = TrainTeachersFixedGenerator(
            neighbour, split2, cfg, init.generator, init.teachers, 3);
        for (std::size_t t = 0; t < other.size(); ++t)
          if (t != owner && other[t].params() != base[t].params()) ++untouched_violations;
        for (std::size_t q = 0; q < queries.size(); ++q) {
          const double d = HistL2(base_hist[q], DirectionHistogram(other, queries[q], cfg.loss));
          max_diff = std::max(max_diff, d);
          if (std::abs(d - std::numbers::sqrt2) <= 1e-12) ++hits;
          ++comparisons;
        }
      }
    }
    const bool ok = comparisons >= 1000 && max_diff <= std::numbers::sqrt2 + 1e-12 &&
                    hits >= 1 && untouched_violations == 0;
    return Outcome{ok, Fmt("comparisons=%.0f", static_cast<double>(comparisons)) +
                           Fmt(" max=%.15f", max_diff) +
                           Fmt(" hits=%.0f", static_cast<double>(hits)) +
                           Fmt(" other-teacher changes=%.0f",
                               static_cast<double>(untouched_violations))};
  });

  Report(4, "SIR balance", 5.0, [] {
    std::vector<Sample> samples;
    for (int i = 0; i < 100; ++i) samples.push_back({{static_cast<double>(i), 0.0}, 0, i < 80 ? 1 : 0});
    const LabeledDataset data(samples, 2, 2);
    Partition p;
    for (std::size_t i = 0; i < data.size(); ++i) p.members.push_back(i);
    const RatioTable h = LikelihoodRatioKnown(EmpiricalGroupDist(data, GroupKey::kBySensitive));
    const SirSampler sampler(p, data, h, NormalizationScheme::kN1);
    Rng rng = DeriveStream(4, StreamTag::kEstimator);
    const std::size_t n = 100000;
    double c0 = 0;
    for (std::size_t idx : sampler.Draw(n, rng)) c0 += data[idx].group == 0;
    const double c1 = static_cast<double>(n) - c0;
    const double f0 = c0 / static_cast<double>(n), f1 = c1 / static_cast<double>(n);
    const double e = static_cast<double>(n) / 2.0;
    const double chi2 = (c0 - e) * (c0 - e) / e + (c1 - e) * (c1 - e) / e;
    const double p_value = std::erfc(std::sqrt(chi2 / 2.0));  // chi-square, 1 dof
    const bool ok = std::abs(f0 - 0.5) <= 0.01 && std::abs(f1 - 0.5) <= 0.01 && p_value > 0.01;
    return Outcome{ok, Fmt("freq=(%.4f, ", f0) + Fmt("%.4f)", f1) + Fmt(" chi2=%.3f", chi2) +
                           Fmt(" p=%.3f", p_value)};
  });

  Report(5, "Reweighting unbiasedness", 5.0, [] {
    const RatioTable h{{0.625, 2.5}, RatioSource::kKnown};
    // Group 0 is the majority with gradient +1, group 1 the minority with -1.
    std::vector<Vec> hand{{1.0}, {1.0}, {1.0}, {1.0}, {-1.0}};
    std::vector<int> groups{0, 0, 0, 0, 1};
    const double exact = ReweightedGradient(hand, groups, h)[0];
    Rng rng = DeriveStream(5, StreamTag::kEstimator);
    std::bernoulli_distribution minority(0.2);
    std::vector<Vec> g;
    std::vector<int> s;
    for (int i = 0; i < 100000; ++i) {
      const bool m = minority(rng);
      g.push_back({m ? -1.0 : 1.0});
      s.push_back(m ? 1 : 0);
    }
    const double mc = ReweightedGradient(g, s, h)[0];
    const double balanced = 0.5 * 1.0 + 0.5 * -1.0;
    const bool ok = exact == 0.0 && std::abs(mc - balanced) <= 0.01;
    return Outcome{ok, Fmt("hand=%.17g", exact) + Fmt(" monte-carlo=%.5f", mc)};
  });

  Report(6, "Conflict probes", 1.0, [] {
    const RatioTable h{{0.625, 2.5}, RatioSource::kKnown};
    std::vector<Vec> g{{1.0}, {1.0}, {1.0}, {1.0}, {-1.0}};
    std::vector<int> s{0, 0, 0, 0, 1};
    const double bias1 = ConflictProbeClipCancelsReweight(g, s, h, ClipBound{1.0}).bias_norm;
    const double bias3 = ConflictProbeClipCancelsReweight(g, s, h, ClipBound{3.0}).bias_norm;
    const SensitivityBreakDiagnostic br =
        ConflictProbeReweightBreaksSensitivity(g, s, h, ClipBound{1.0});
    // Hand evaluation: (4 * 0.625 - 1) / 5 = 0.3 at C = 1; no clipping at C = 3.
    const bool ok = std::abs(bias1 - 0.3) <= 1e-12 && bias3 == 0.0 &&
                    std::abs(br.max_postweight_norm - 2.5) <= 1e-12 && br.violation &&
                    br.declared_c == 1.0;
    return Outcome{ok, Fmt("bias(C=1)=%.15f", bias1) + Fmt(" bias(C=3)=%.3g", bias3) +
                           Fmt(" post-weight norm=%.3f", br.max_postweight_norm)};
  });

  Report(7, "Accountant", 1.0, [] {
    const double delta = 1e-5;
    auto eps_for = [&](std::size_t n) {
      PrivacyLedger l;
      l.Charge(Sensitivity{1.0}, 1.0, n);
      return LedgerEpsilon(l, delta);
    };
    const double e1 = eps_for(1), e4 = eps_for(4);
    const double o1 = ContinuousRdpOptimum(1, 1.0, delta), o4 = ContinuousRdpOptimum(4, 1.0, delta);
    bool monotone = true;
    double prev = 0.0;
    for (std::size_t n = 1; n <= 64; ++n) {
      const double e = eps_for(n);
      monotone = monotone && e > prev;
      prev = e;
    }
    const bool ok = std::abs(e1 - o1) <= 0.01 * o1 && std::abs(e4 - o4) <= 0.01 * o4 &&
                    std::abs(e1 - 5.30) <= 0.01 * 5.30 && std::abs(e4 - 11.60) <= 0.01 * 11.60 &&
                    monotone;
    return Outcome{ok, Fmt("eps(1)=%.4f", e1) + Fmt(" optimum=%.4f", o1) + Fmt(" eps(4)=%.4f", e4) +
                           Fmt(" optimum=%.4f", o4) + (monotone ? " monotone" : " NOT monotone")};
  });

  Report(8, "Gradient correctness", 30.0, [] {
    // Central differences on the teacher loss and on the generator loss
    // through the aggregate with sigma = 0, C = inf and a single teacher.
    const double h = 1e-5;
    double worst = 0.0;
    auto rel = [](double a, double n) {
      return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
    };
    Rng rng = DeriveStream(8, StreamTag::kEstimator);
    for (int net = 0; net < 100; ++net) {
      TrainConfig cfg;
      cfg.loss = net % 2 ? GanLoss::kWasserstein : GanLoss::kNonSaturating;
      cfg.z_dim = 1 + net % 4;
      cfg.generator_hidden = 2 + net % 5;
      cfg.teacher_hidden = 2 + (net / 5) % 5;
      const std::size_t d = 1 + net % 3;
      Mlp gen = Mlp::Initialized(GeneratorShapes(cfg, d), ModelRole::kGenerator, rng);
      Mlp teacher = Mlp::Initialized(TeacherShapes(cfg, d), ModelRole::kTeacher, rng);
      std::vector<Vec> real, fake, zs;
      std::normal_distribution<double> nd;
      for (int i = 0; i < 4; ++i) {
        Vec r(d), f(d);
        for (double& v : r) v = nd(rng);
        for (double& v : f) v = nd(rng);
        real.push_back(r);
        fake.push_back(f);
        zs.push_back(DrawLatent(cfg.z_dim, rng));
      }
      // Teacher parameters.
      const LossAndGrad lg = TeacherLossGradient(teacher, real, fake, cfg.loss);
      for (std::size_t k = 0; k < teacher.num_params(); ++k) {
        Mlp tp = teacher, tm = teacher;
        tp.mutable_params()[k] += h;
        tm.mutable_params()[k] -= h;
        const double num = (TeacherLossGradient(tp, real, fake, cfg.loss).loss -
                            TeacherLossGradient(tm, real, fake, cfg.loss).loss) / (2 * h);
        worst = std::max(worst, rel(lg.grad[k], num));
      }
      // Generator parameters through the sanitizer at sigma = 0, C = inf.
      std::vector<Vec> per_sample;
      for (const Vec& z : zs) per_sample.push_back(GeneratorSignal(teacher, gen.Forward(z), cfg.loss).grad_x);
      Rng unused(0);
      const SanitizedGradients san = SanitizeGradientPerSample(
          per_sample, ClipBound{std::numeric_limits<double>::infinity()}, 0.0, unused);
      const Vec analytic = GeneratorParamGradient(gen, zs, san.grads);
      for (std::size_t k = 0; k < gen.num_params(); ++k) {
        Mlp gp = gen, gm = gen;
        gp.mutable_params()[k] += h;
        gm.mutable_params()[k] -= h;
        const double num = (GeneratorLoss(gp, teacher, zs, cfg.loss) -
                            GeneratorLoss(gm, teacher, zs, cfg.loss)) / (2 * h);
        worst = std::max(worst, rel(analytic[k], num));
      }
    }
    return Outcome{worst <= 1e-4, Fmt("max relative error=%.3g over 100 nets", worst)};
  });

  Report(9, "End-to-end fairness direction", 600.0, [] {
    const fs::path root = ScratchDir("c9");
    const RunRecord off = RunExperiment(EndToEndConfig(FairnessMode::kOff, (root / "off").string()));
    const RunRecord known =
        RunExperiment(EndToEndConfig(FairnessMode::kSirKnown, (root / "known").string()));
    for (const auto* r : {&off, &known})
      g_end_to_end.insert(g_end_to_end.end(), r->seeds.begin(), r->seeds.end());
    const double m_off = Median(Kls(off)), m_known = Median(Kls(known));
    g_known_kl = m_known;
    bool matched = true;
    for (std::size_t i = 0; i < off.seeds.size(); ++i)
      matched = matched && off.seeds[i].epsilon == known.seeds[i].epsilon &&
                off.seeds[i].epsilon <= 10.0;
    const double reduction = 1.0 - m_known / m_off;
    const bool ok = matched && m_known < m_off && reduction >= 0.30;
    return Outcome{ok, Fmt("median KL off=%.4f", m_off) + Fmt(" sir_known=%.4f", m_known) +
                           Fmt(" reduction=%.1f%%", 100 * reduction) +
                           Fmt(" eps=%.4f", off.seeds.front().epsilon) +
                           (matched ? "" : " ledgers not matched")};
  });

  Report(10, "Teacher bound", 900.0, [] {
    ExperimentConfig c = EndToEndConfig(FairnessMode::kSirKnown, ScratchDir("c10").string());
    c.train.num_teachers = 20;
    const std::vector<double> gammas{9, 49, 99, 199};
    const SweepResult res = Sweep(c, SweepAxis::kGamma, gammas);
    if (!res.failures.empty()) return Outcome{false, "sweep failure: " + res.failures.front().message};
    double compliant_gamma = -1, compliant_mmd = 0;
    std::vector<std::pair<double, double>> violating;
    std::string detail;
    for (const SweepPoint& p : res.points) {
      g_end_to_end.insert(g_end_to_end.end(), p.seeds.begin(), p.seeds.end());
      std::vector<double> mmd;
      for (const SeedResult& s : p.seeds) mmd.push_back(s.report.per_group_mmd.front());
      const double med = Median(mmd);
      const std::size_t bound = MaxTeachers(MakeBiasedMixture(DataSpec(p.config), 0));
      const bool compliant = bound >= c.train.num_teachers;
      detail += Fmt(" g=%.0f", p.value) + Fmt(":%.3f", med) + (compliant ? "" : "*");
      if (compliant && p.value > compliant_gamma) {
        compliant_gamma = p.value;
        compliant_mmd = med;
      }
      if (!compliant) violating.push_back({p.value, med});
    }
    bool ok = compliant_gamma > 0 && !violating.empty();
    for (const auto& [g, m] : violating) ok = ok && m > compliant_mmd;
    return Outcome{ok, "median minority MMD" + detail + " (* past the bound)"};
  });

  Report(11, "Reference-size robustness", 600.0, [] {
    if (g_known_kl < 0) return Outcome{false, "needs the known-s run of criterion 9"};
    ExperimentConfig c = EndToEndConfig(FairnessMode::kSirEstimated, ScratchDir("c11").string());
    const SweepResult res = Sweep(c, SweepAxis::kRefSize, {0.01, 0.10});
    if (!res.failures.empty()) return Outcome{false, "sweep failure: " + res.failures.front().message};
    bool ok = true;
    std::string detail = Fmt("known-s KL=%.4f", g_known_kl);
    for (const SweepPoint& p : res.points) {
      g_end_to_end.insert(g_end_to_end.end(), p.seeds.begin(), p.seeds.end());
      std::vector<double> kl;
      for (const SeedResult& s : p.seeds) kl.push_back(s.report.kl_to_uniform);
      const double m = Median(kl);
      ok = ok && m <= 2.0 * g_known_kl;
      detail += Fmt(" ref=%.0f%%", 100 * p.value) + Fmt(":%.4f", m);
    }
    return Outcome{ok, detail};
  });

  Report(12, "Determinism", 60.0, [] {
    ExperimentConfig c;
    c.data.scenario = Scenario::kSubgroup;
    c.data.gamma = 4.0;
    c.data.total_size = 400;
    c.train.num_teachers = 4;
    c.train.steps = 60;
    c.train.fairness = FairnessMode::kSirKnown;
    c.privacy.target_epsilon = 10.0;
    c.seeds = {0, 1, 2};
    auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    std::string first;
    bool same = true;
    for (const char* name : {"a", "b"}) {
      c.output_dir = ScratchDir(std::string("c12") + name).string();
      const RunRecord r = RunExperiment(c);
      g_end_to_end.insert(g_end_to_end.end(), r.seeds.begin(), r.seeds.end());
      const std::string bytes = read(fs::path(c.output_dir) / "metrics.csv");
      if (first.empty())
        first = bytes;
      else
        same = same && bytes == first;
    }
    const bool ok = same && !first.empty();
    return Outcome{ok, Fmt("metrics.csv %.0f bytes, ", static_cast<double>(first.size())) +
                           (same ? "byte-identical" : "DIFFERENT")};
  });

  Report(13, "Post-processing guard", 60.0, [] {
    // Every end-to-end seed above, plus an explicit ledger snapshot around
    // generation and evaluation.
    std::size_t mismatched = 0;
    for (const SeedResult& s : g_end_to_end)
      if (!(s.epsilon == s.epsilon_before_eval)) ++mismatched;
    const LabeledDataset data = MakeBiasedMixture(MakeBiasSpec(Scenario::kSubgroup, 4.0, 400), 13);
    const LabeledDataset test = MakeBiasedMixture(MakeBiasSpec(Scenario::kSubgroup, 4.0, 100), 14);
    TrainConfig cfg;
    cfg.num_teachers = 4;
    cfg.steps = 20;
    cfg.noise_multiplier = 5.0;
    const TrainResult tr = Train(data, cfg);
    const PrivacyLedger before = tr.ledger;
    Rng rng = DeriveStream(13, StreamTag::kEval);
    const std::vector<Vec> synth = Generate(tr.generator, kSyntheticSamples, rng);
    EvaluateSynthetic(synth, data, test, EvalConfig{});
    const bool snapshot_equal = before.rdp_costs() == tr.ledger.rdp_costs() &&
                                before.query_log() == tr.ledger.query_log() &&
                                LedgerEpsilon(before, cfg.delta) == LedgerEpsilon(tr.ledger, cfg.delta);
    const bool ok = !g_end_to_end.empty() && mismatched == 0 && snapshot_equal;
    return Outcome{ok, Fmt("%.0f end-to-end runs checked", static_cast<double>(g_end_to_end.size())) +
                           Fmt(", %.0f changed", static_cast<double>(mismatched)) +
                           (snapshot_equal ? ", snapshot equal" : ", snapshot differs")};
  });

  std::printf("%s: %d criteria failed\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
