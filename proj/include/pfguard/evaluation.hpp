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

// Fairness and utility metrics for generated data.

#ifndef PFGUARD_EVALUATION_HPP_
#define PFGUARD_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfguard/core_data.hpp"
#include "pfguard/dp.hpp"
#include "pfguard/error.hpp"
#include "pfguard/mlp.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

struct Centroid {
  int label = 0;
  int group = 0;
  Vec mean;
};

// Mean of every nonempty (y, s) cell, ordered by y * num_groups + s.
inline std::vector<Centroid> CellCentroids(const LabeledDataset& data) {
  const int g = data.num_groups();
  const std::size_t cells = static_cast<std::size_t>(data.num_classes() * g);
  std::vector<Vec> sum(cells, Vec(data.dim(), 0.0));
  std::vector<std::size_t> count(cells, 0);
  for (const Sample& s : data.samples()) {
    const auto c = static_cast<std::size_t>(s.label * g + s.group);
    for (std::size_t k = 0; k < data.dim(); ++k) sum[c][k] += s.features[k];
    ++count[c];
  }
  std::vector<Centroid> out;
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) continue;
    for (double& v : sum[c]) v /= static_cast<double>(count[c]);
    out.push_back({static_cast<int>(c) / g, static_cast<int>(c) % g, sum[c]});
  }
  return out;
}

struct CellLabel {
  int label = 0;
  int group = 0;
};

// Nearest centroid in L2; ties go to the earlier centroid.
inline std::vector<CellLabel> LabelGroups(std::span<const Vec> synthetic,
                                          std::span<const Centroid> centroids) {
  if (centroids.empty()) throw Error("empty centroid set");
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b)
      PFGUARD_CHECK(L2Distance(centroids[a].mean, centroids[b].mean) > 0.0,
                    "centroids must be pairwise distinct");
  std::vector<CellLabel> out;
  out.reserve(synthetic.size());
  for (const Vec& x : synthetic) {
    std::size_t best = 0;
    double best_d = L2Distance(x, centroids[0].mean);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
      const double d = L2Distance(x, centroids[c].mean);
      if (d < best_d) {
        best = c;
        best_d = d;
      }
    }
    out.push_back({centroids[best].label, centroids[best].group});
  }
  return out;
}

inline GroupDistribution LabelDistribution(std::span<const CellLabel> labels,
                                           int num_groups) {
  PFGUARD_CHECK(!labels.empty(), "no labels");
  GroupDistribution p;
  p.probs.assign(static_cast<std::size_t>(num_groups), 0.0);
  for (const CellLabel& l : labels) p.probs[static_cast<std::size_t>(l.group)] += 1.0;
  for (double& v : p.probs) v /= static_cast<double>(labels.size());
  return p;
}

// KL(p || uniform) in nats with 0 ln 0 = 0.
inline double KlToUniform(const GroupDistribution& p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double kl = 0.0;
  for (double v : p.probs)
    if (v > 0.0) kl += v * std::log(v / u);
  return std::max(kl, 0.0);
}

// max_s |p(s) - 1/|S||.
inline double DistributionDisparity(const GroupDistribution& p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double m = 0.0;
  for (double v : p.probs) m = std::max(m, std::abs(v - u));
  return m;
}

// sum_s |p(s) - 1/|S||, reported next to the max form.
inline double DistributionDisparityL1(const GroupDistribution& p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double m = 0.0;
  for (double v : p.probs) m += std::abs(v - u);
  return m;
}

// Unbiased squared MMD with k(x, y) = exp(-|x - y|^2 / (2 bw^2)). A side
// with a single sample uses k(x, x) = 1 for its within-set term.
inline double GroupMmd(std::span<const Vec> real, std::span<const Vec> synth,
                       double bandwidth) {
  if (!(bandwidth > 0.0)) throw Error("MMD bandwidth must be positive");
  PFGUARD_CHECK(!real.empty() && !synth.empty(), "MMD needs nonempty sets");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kernel = [inv](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-s * inv);
  };
  auto within = [&](std::span<const Vec> x) {
    if (x.size() == 1) return 1.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = i + 1; j < x.size(); ++j) s += kernel(x[i], x[j]);
    return 2.0 * s / (static_cast<double>(x.size()) * (x.size() - 1.0));
  };
  double cross = 0.0;
  for (const Vec& a : real)
    for (const Vec& b : synth) cross += kernel(a, b);
  cross /= static_cast<double>(real.size()) * static_cast<double>(synth.size());
  return within(real) + within(synth) - 2.0 * cross;
}

// Median pairwise distance of the pooled samples (evenly strided subsample
// of at most max_points).
inline double MedianHeuristicBandwidth(std::span<const Vec> a,
                                       std::span<const Vec> b,
                                       std::size_t max_points = 400) {
  std::vector<const Vec*> pool;
  for (const Vec& x : a) pool.push_back(&x);
  for (const Vec& x : b) pool.push_back(&x);
  PFGUARD_CHECK(pool.size() >= 2, "median heuristic needs two points");
  const std::size_t stride = std::max<std::size_t>(1, pool.size() / max_points);
  std::vector<const Vec*> sub;
  for (std::size_t i = 0; i < pool.size(); i += stride) sub.push_back(pool[i]);
  std::vector<double> d;
  for (std::size_t i = 0; i < sub.size(); ++i)
    for (std::size_t j = i + 1; j < sub.size(); ++j)
      d.push_back(L2Distance(*sub[i], *sub[j]));
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double m = d[d.size() / 2];
  return m > 0.0 ? m : 1.0;
}

// counts[(s * C + y) * C + yhat].
class ConfusionSlices {
 public:
  ConfusionSlices(int num_classes, int num_groups)
      : c_(num_classes), g_(num_groups),
        counts_(static_cast<std::size_t>(num_classes * num_classes * num_groups), 0) {}

  void Add(int group, int label, int predicted) {
    ++counts_[Index(group, label, predicted)];
  }
  std::size_t count(int group, int label, int predicted) const {
    return counts_[Index(group, label, predicted)];
  }
  std::size_t SliceTotal(int group, int label) const {
    std::size_t t = 0;
    for (int p = 0; p < c_; ++p) t += count(group, label, p);
    return t;
  }
  int num_classes() const { return c_; }
  int num_groups() const { return g_; }

 private:
  std::size_t Index(int s, int y, int p) const {
    PFGUARD_CHECK(s >= 0 && s < g_ && y >= 0 && y < c_ && p >= 0 && p < c_,
                  "confusion index out of range");
    return static_cast<std::size_t>((s * c_ + y) * c_ + p);
  }
  int c_, g_;
  std::vector<std::size_t> counts_;
};

struct DownstreamReport {
  double accuracy = 0.0;
  double eo_disparity = 0.0;
  double dem_disparity = 0.0;
  double acc_disparity = 0.0;
};

// Equalized odds: max_{y,s1,s2} |P(yhat=y | y, s1) - P(yhat=y | y, s2)|.
// Demographic parity: max_{k,s1,s2} |P(yhat=k | s1) - P(yhat=k | s2)|; for
// two classes this is the positive-rate gap.
// Accuracy disparity: max_{y1,y2} |P(yhat=y1 | y1) - P(yhat=y2 | y2)|.
// Slices that are empty by construction (class-bias scenarios, where s = y)
// are skipped; requires every class to be present.
inline DownstreamReport ComputeDisparities(const ConfusionSlices& cs) {
  const int c = cs.num_classes(), g = cs.num_groups();
  DownstreamReport r;
  std::size_t correct = 0, total = 0;
  std::vector<double> class_acc(static_cast<std::size_t>(c), 0.0);
  for (int y = 0; y < c; ++y) {
    std::size_t yc = 0, yt = 0;
    for (int s = 0; s < g; ++s) {
      yc += cs.count(s, y, y);
      yt += cs.SliceTotal(s, y);
    }
    if (yt == 0) throw Error("test set has no samples of class " + std::to_string(y));
    class_acc[static_cast<std::size_t>(y)] = static_cast<double>(yc) / static_cast<double>(yt);
    correct += yc;
    total += yt;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  for (int a = 0; a < c; ++a)
    for (int b = 0; b < c; ++b)
      r.acc_disparity = std::max(
          r.acc_disparity, std::abs(class_acc[static_cast<std::size_t>(a)] -
                                    class_acc[static_cast<std::size_t>(b)]));
  for (int y = 0; y < c; ++y)
    for (int s1 = 0; s1 < g; ++s1)
      for (int s2 = 0; s2 < g; ++s2) {
        const std::size_t t1 = cs.SliceTotal(s1, y), t2 = cs.SliceTotal(s2, y);
        if (t1 == 0 || t2 == 0) continue;
        const double p1 = static_cast<double>(cs.count(s1, y, y)) / t1;
        const double p2 = static_cast<double>(cs.count(s2, y, y)) / t2;
        r.eo_disparity = std::max(r.eo_disparity, std::abs(p1 - p2));
      }
  std::vector<std::size_t> group_total(static_cast<std::size_t>(g), 0);
  for (int s = 0; s < g; ++s)
    for (int y = 0; y < c; ++y) group_total[static_cast<std::size_t>(s)] += cs.SliceTotal(s, y);
  for (int k = 0; k < c; ++k)
    for (int s1 = 0; s1 < g; ++s1)
      for (int s2 = 0; s2 < g; ++s2) {
        const std::size_t t1 = group_total[static_cast<std::size_t>(s1)];
        const std::size_t t2 = group_total[static_cast<std::size_t>(s2)];
        if (t1 == 0 || t2 == 0) continue;
        double r1 = 0.0, r2 = 0.0;
        for (int y = 0; y < c; ++y) {
          r1 += static_cast<double>(cs.count(s1, y, k));
          r2 += static_cast<double>(cs.count(s2, y, k));
        }
        r.dem_disparity = std::max(r.dem_disparity, std::abs(r1 / t1 - r2 / t2));
      }
  return r;
}

enum class ClassifierKind { kLogistic, kMlp };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::kLogistic;
  std::size_t iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::size_t hidden = 16;
  std::uint64_t seed = 0;
};

// Softmax classifier (linear or one tanh hidden layer) trained by full-batch
// gradient descent on standardized features.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier(std::span<const Vec> xs, std::span<const int> ys,
                    int num_classes, const ClassifierConfig& cfg) {
    PFGUARD_CHECK(!xs.empty() && xs.size() == ys.size(),
                  "classifier needs labeled samples");
    const std::size_t d = xs.front().size();
    mean_.assign(d, 0.0);
    scale_.assign(d, 0.0);
    for (const Vec& x : xs)
      for (std::size_t k = 0; k < d; ++k) mean_[k] += x[k];
    for (double& m : mean_) m /= static_cast<double>(xs.size());
    for (const Vec& x : xs)
      for (std::size_t k = 0; k < d; ++k) scale_[k] += (x[k] - mean_[k]) * (x[k] - mean_[k]);
    for (double& s : scale_) s = std::max(std::sqrt(s / static_cast<double>(xs.size())), 1e-9);
    std::vector<LayerShape> shapes;
    const auto c = static_cast<std::size_t>(num_classes);
    if (cfg.kind == ClassifierKind::kLogistic)
      shapes = {{d, c}};
    else
      shapes = {{d, cfg.hidden}, {cfg.hidden, c}};
    Rng rng = DeriveStream(cfg.seed, StreamTag::kEval, 17);
    net_ = Mlp::Initialized(shapes, ModelRole::kTeacher, rng);
    if (cfg.kind == ClassifierKind::kLogistic)
      std::fill(net_.mutable_params().begin(), net_.mutable_params().end(), 0.0);
    std::vector<Vec> us;
    us.reserve(xs.size());
    for (const Vec& x : xs) us.push_back(Standardize(x));
    Mlp::Cache cache;
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      Vec grad(net_.num_params(), 0.0);
      for (std::size_t i = 0; i < us.size(); ++i) {
        Vec p = Softmax(net_.Forward(us[i], &cache));
        p[static_cast<std::size_t>(ys[i])] -= 1.0;
        for (double& v : p) v *= inv_n;
        net_.Backward(cache, p, &grad);
      }
      Vec& theta = net_.mutable_params();
      for (std::size_t k = 0; k < theta.size(); ++k)
        theta[k] -= cfg.learning_rate * (grad[k] + cfg.l2 * theta[k]);
    }
  }

  int Predict(std::span<const double> x) const {
    const Vec out = net_.Forward(Standardize(x));
    return static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
  }

 private:
  Vec Standardize(std::span<const double> x) const {
    Vec u(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) u[k] = (x[k] - mean_[k]) / scale_[k];
    return u;
  }
  static Vec Softmax(Vec z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : z) v /= s;
    return z;
  }

  Vec mean_, scale_;
  Mlp net_;
};

// Train on labeled synthetic data, test on real data.
inline DownstreamReport DownstreamFairness(std::span<const Vec> synth,
                                           std::span<const int> synth_labels,
                                           const LabeledDataset& real_test,
                                           const ClassifierConfig& cfg) {
  PFGUARD_CHECK(!real_test.empty(), "real test set is empty");
  ConfusionSlices cs(real_test.num_classes(), real_test.num_groups());
  std::vector<int> present;
  for (int y : synth_labels)
    if (std::find(present.begin(), present.end(), y) == present.end()) present.push_back(y);
  if (present.size() < 2) {
    // A single synthetic class: the only sensible classifier is constant.
    const int k = synth_labels.empty() ? 0 : synth_labels.front();
    for (const Sample& s : real_test.samples()) cs.Add(s.group, s.label, k);
  } else {
    const SoftmaxClassifier clf(synth, synth_labels, real_test.num_classes(), cfg);
    for (const Sample& s : real_test.samples()) cs.Add(s.group, s.label, clf.Predict(s.features));
  }
  return ComputeDisparities(cs);
}

struct EvalConfig {
  std::size_t mmd_max_samples = 1000;  // per side and group
  double mmd_bandwidth = 0.0;          // <= 0: median heuristic
  ClassifierConfig classifier;
};

struct FairnessReport {
  GroupDistribution generated;
  double kl_to_uniform = 0.0;
  double dist_disparity = 0.0;
  double dist_disparity_l1 = 0.0;
  Vec per_group_mmd;
  DownstreamReport downstream;

  nlohmann::json ToJson() const {
    return {{"generated_group_dist", generated.probs},
            {"kl_to_uniform", kl_to_uniform},
            {"dist_disparity", dist_disparity},
            {"dist_disparity_l1", dist_disparity_l1},
            {"per_group_mmd", per_group_mmd},
            {"downstream",
             {{"accuracy", downstream.accuracy},
              {"eo_disparity", downstream.eo_disparity},
              {"dem_disparity", downstream.dem_disparity},
              {"acc_disparity", downstream.acc_disparity}}}};
  }
};

// Upper bound of the Gaussian-kernel MMD^2, reported for a group the
// generator never produces.
inline constexpr double kMissingGroupMmd = 2.0;

inline std::vector<Vec> Strided(const std::vector<Vec>& xs, std::size_t max_n) {
  if (xs.size() <= max_n) return xs;
  std::vector<Vec> out;
  out.reserve(max_n);
  for (std::size_t i = 0; i < max_n; ++i) out.push_back(xs[i * xs.size() / max_n]);
  return out;
}

inline FairnessReport EvaluateSynthetic(std::span<const Vec> synth,
                                        const LabeledDataset& real_train,
                                        const LabeledDataset& real_test,
                                        const EvalConfig& cfg) {
  PFGUARD_CHECK(!synth.empty(), "no synthetic samples to evaluate");
  const std::vector<Centroid> centroids = CellCentroids(real_train);
  const std::vector<CellLabel> labels = LabelGroups(synth, centroids);
  FairnessReport rep;
  rep.generated = LabelDistribution(labels, real_train.num_groups());
  rep.kl_to_uniform = KlToUniform(rep.generated);
  rep.dist_disparity = DistributionDisparity(rep.generated);
  rep.dist_disparity_l1 = DistributionDisparityL1(rep.generated);
  for (int g = 0; g < real_train.num_groups(); ++g) {
    std::vector<Vec> real_g, synth_g;
    for (const Sample& s : real_train.samples())
      if (s.group == g) real_g.push_back(s.features);
    for (std::size_t i = 0; i < synth.size(); ++i)
      if (labels[i].group == g) synth_g.push_back(synth[i]);
    if (real_g.empty() || synth_g.empty()) {
      rep.per_group_mmd.push_back(kMissingGroupMmd);
      continue;
    }
    real_g = Strided(real_g, cfg.mmd_max_samples);
    synth_g = Strided(synth_g, cfg.mmd_max_samples);
    const double bw = cfg.mmd_bandwidth > 0.0
                          ? cfg.mmd_bandwidth
                          : MedianHeuristicBandwidth(real_g, {});
    rep.per_group_mmd.push_back(GroupMmd(real_g, synth_g, bw));
  }
  std::vector<int> ys;
  ys.reserve(labels.size());
  for (const CellLabel& l : labels) ys.push_back(l.label);
  rep.downstream = DownstreamFairness(synth, ys, real_test, cfg.classifier);
  return rep;
}

}  // namespace pfguard

#endif  // PFGUARD_EVALUATION_HPP_
