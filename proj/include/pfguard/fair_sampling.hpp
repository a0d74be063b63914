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

// Balanced minibatch sampling by sampling-importance resampling (SIR).
//
// Each teacher's partition is a draw from the biased distribution. Members
// are resampled with probability proportional to the likelihood ratio
// h(x) = p_bal(x) / p_bias(x), so that resampled minibatches follow the
// balanced distribution. With known sensitive attributes h depends only on
// the group; otherwise it is estimated from features with a probabilistic
// classifier trained against a small balanced reference set.

#ifndef PFGUARD_FAIR_SAMPLING_HPP_
#define PFGUARD_FAIR_SAMPLING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pfguard/core_data.hpp"
#include "pfguard/error.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

enum class RatioSource { kKnown, kEstimated };

inline std::string_view RatioSourceName(RatioSource s) {
  return s == RatioSource::kKnown ? "known_s" : "estimated";
}

struct RatioTable {
  Vec h;  // per group
  RatioSource source = RatioSource::kKnown;

  double operator[](std::size_t group) const { return h[group]; }

  nlohmann::json ToJson() const {
    return {{"h", h}, {"source", std::string(RatioSourceName(source))}};
  }

  static RatioTable FromJson(const nlohmann::json& j) {
    RatioTable t;
    t.h = j.at("h").get<Vec>();
    const std::string src = j.at("source").get<std::string>();
    PFGUARD_CHECK(src == "known_s" || src == "estimated",
                  "unknown ratio source '" + src + "'");
    t.source = src == "known_s" ? RatioSource::kKnown : RatioSource::kEstimated;
    for (double v : t.h)
      PFGUARD_CHECK(v > 0.0 && std::isfinite(v), "ratios must be positive");
    return t;
  }
};

// h(s) = (1/|S|) / p_bias(s) for a uniform target over groups.
inline RatioTable LikelihoodRatioKnown(const GroupDistribution& p_bias) {
  PFGUARD_CHECK(!p_bias.probs.empty(), "empty group distribution");
  const double target = 1.0 / static_cast<double>(p_bias.size());
  RatioTable table;
  table.source = RatioSource::kKnown;
  table.h.reserve(p_bias.size());
  for (std::size_t s = 0; s < p_bias.size(); ++s) {
    if (!(p_bias[s] > 0.0))
      throw Error("group " + std::to_string(s) +
                  " has zero probability; balanced target unreachable");
    table.h.push_back(target / p_bias[s]);
  }
  return table;
}

struct RatioEstimatorConfig {
  int degree = 2;  // total degree of the polynomial feature map
  double l2 = 1e-3;
  int max_iterations = 100;
  double tolerance = 1e-10;
};

// Logistic discrimination of reference (label 1) against biased data
// (label 0) with prior correction: ratio(x) = exp(logit(x)) * n_bias / n_ref.
class RatioEstimator {
 public:
  RatioEstimator() = default;

  double Logit(std::span<const double> x) const {
    const Vec phi = Features(x);
    double z = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) z += params_[k] * phi[k];
    return std::clamp(z, -30.0, 30.0);
  }

  double Ratio(std::span<const double> x) const {
    return std::exp(Logit(x) + log_prior_correction_);
  }

  const Vec& params() const { return params_; }
  double log_prior_correction() const { return log_prior_correction_; }
  std::size_t input_dim() const { return mean_.size(); }

  // Per-group averages of the estimated ratio, for audit output.
  RatioTable GroupAverages(const LabeledDataset& data) const {
    Vec sum(static_cast<std::size_t>(data.num_groups()), 0.0);
    std::vector<std::size_t> count(sum.size(), 0);
    for (const Sample& s : data.samples()) {
      sum[static_cast<std::size_t>(s.group)] += Ratio(s.features);
      ++count[static_cast<std::size_t>(s.group)];
    }
    RatioTable t;
    t.source = RatioSource::kEstimated;
    for (std::size_t g = 0; g < sum.size(); ++g)
      t.h.push_back(count[g] ? sum[g] / static_cast<double>(count[g]) : 1.0);
    return t;
  }

  friend RatioEstimator FitRatioEstimator(const LabeledDataset& biased,
                                          const LabeledDataset& reference,
                                          const RatioEstimatorConfig& config);

 private:
  Vec Features(std::span<const double> x) const {
    const std::size_t d = mean_.size();
    Vec u(d);
    for (std::size_t k = 0; k < d; ++k) u[k] = (x[k] - mean_[k]) / scale_[k];
    Vec phi;
    phi.reserve(monomials_.size());
    for (const auto& expo : monomials_) {
      double v = 1.0;
      for (std::size_t k = 0; k < d; ++k)
        for (int e = 0; e < expo[k]; ++e) v *= u[k];
      phi.push_back(v);
    }
    return phi;
  }

  // Exponent tuples of total degree <= degree, constant term first.
  static std::vector<std::vector<int>> Monomials(std::size_t d, int degree) {
    std::vector<std::vector<int>> out;
    for (int total = 0; total <= degree; ++total) {
      std::vector<int> cur(d, 0);
      auto rec = [&](auto& self, std::size_t k, int left) -> void {
        if (k + 1 == d) {
          cur[k] = left;
          out.push_back(cur);
          return;
        }
        for (int e = left; e >= 0; --e) {
          cur[k] = e;
          self(self, k + 1, left - e);
        }
      };
      if (d == 0) continue;
      rec(rec, 0, total);
    }
    return out;
  }

  std::vector<std::vector<int>> monomials_;
  Vec mean_, scale_;
  Vec params_;
  double log_prior_correction_ = 0.0;
};

namespace internal {

// Solves A x = b for a small dense SPD system (Gaussian elimination with
// partial pivoting; A is overwritten).
inline Vec SolveDense(std::vector<Vec> a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    PFGUARD_CHECK(std::abs(a[col][col]) > 1e-300, "singular Newton system");
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

}  // namespace internal

// Newton / IRLS fit; deterministic and seed-free.
inline RatioEstimator FitRatioEstimator(const LabeledDataset& biased,
                                        const LabeledDataset& reference,
                                        const RatioEstimatorConfig& config = {}) {
  if (reference.empty()) throw Error("reference dataset is empty");
  PFGUARD_CHECK(!biased.empty(), "biased dataset is empty");
  PFGUARD_CHECK(biased.dim() == reference.dim(),
                "biased and reference datasets differ in dimension");
  biased.Validate();
  reference.Validate();

  RatioEstimator est;
  PFGUARD_CHECK(config.degree >= 1 && config.degree <= 6,
                "ratio estimator degree must be in [1, 6]");
  const std::size_t d = biased.dim();
  est.monomials_ = RatioEstimator::Monomials(d, config.degree);
  const double n_total = static_cast<double>(biased.size() + reference.size());
  est.mean_.assign(d, 0.0);
  est.scale_.assign(d, 0.0);
  for (const auto* set : {&biased, &reference})
    for (const Sample& s : set->samples())
      for (std::size_t k = 0; k < d; ++k) est.mean_[k] += s.features[k];
  for (double& m : est.mean_) m /= n_total;
  for (const auto* set : {&biased, &reference})
    for (const Sample& s : set->samples())
      for (std::size_t k = 0; k < d; ++k) {
        const double c = s.features[k] - est.mean_[k];
        est.scale_[k] += c * c;
      }
  for (double& v : est.scale_) v = std::max(std::sqrt(v / n_total), 1e-12);

  struct Row {
    Vec phi;
    double target;
  };
  std::vector<Row> rows;
  rows.reserve(biased.size() + reference.size());
  est.params_.clear();
  for (const Sample& s : biased.samples())
    rows.push_back({est.Features(s.features), 0.0});
  for (const Sample& s : reference.samples())
    rows.push_back({est.Features(s.features), 1.0});
  const std::size_t p = rows.front().phi.size();
  est.params_.assign(p, 0.0);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<Vec> hess(p, Vec(p, 0.0));
    Vec grad(p, 0.0);
    for (const Row& r : rows) {
      double z = 0.0;
      for (std::size_t k = 0; k < p; ++k) z += est.params_[k] * r.phi[k];
      const double prob = 1.0 / (1.0 + std::exp(-z));
      const double wgt = std::max(prob * (1.0 - prob), 1e-12);
      for (std::size_t a = 0; a < p; ++a) {
        grad[a] += (prob - r.target) * r.phi[a];
        for (std::size_t b = 0; b < p; ++b)
          hess[a][b] += wgt * r.phi[a] * r.phi[b];
      }
    }
    // Ridge on everything except the intercept.
    for (std::size_t k = 1; k < p; ++k) {
      grad[k] += config.l2 * n_total * est.params_[k];
      hess[k][k] += config.l2 * n_total;
    }
    hess[0][0] += 1e-12 * n_total;
    const Vec step = internal::SolveDense(hess, grad);
    double max_step = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      est.params_[k] -= step[k];
      max_step = std::max(max_step, std::abs(step[k]));
    }
    if (max_step < config.tolerance) break;
  }
  for (double v : est.params_)
    PFGUARD_CHECK(std::isfinite(v), "ratio estimator diverged");
  est.log_prior_correction_ =
      std::log(static_cast<double>(biased.size()) /
               static_cast<double>(reference.size()));
  return est;
}

enum class NormalizationScheme { kN1, kN2 };

inline std::string_view SchemeName(NormalizationScheme s) {
  return s == NormalizationScheme::kN1 ? "N1" : "N2";
}

struct ResampleWeights {
  Vec w;
  NormalizationScheme scheme = NormalizationScheme::kN1;
};

// N1: w_i = h_i / sum(h). N2: w_i proportional to h_i / (sum(h) - h_i).
inline ResampleWeights NormalizeWeights(std::span<const double> h,
                                        NormalizationScheme scheme) {
  PFGUARD_CHECK(!h.empty(), "no ratios to normalize");
  double total = 0.0;
  for (double v : h) {
    PFGUARD_CHECK(std::isfinite(v), "non-finite likelihood ratio");
    PFGUARD_CHECK(v > 0.0, "likelihood ratios must be positive");
    total += v;
  }
  ResampleWeights out;
  out.scheme = scheme;
  out.w.resize(h.size());
  if (scheme == NormalizationScheme::kN1) {
    for (std::size_t i = 0; i < h.size(); ++i) out.w[i] = h[i] / total;
    return out;
  }
  if (h.size() < 2)
    throw Error("N2 normalization needs at least two members");
  double norm = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double rest = total - h[i];
    PFGUARD_CHECK(rest > 0.0, "N2 leave-one-out mass vanished");
    out.w[i] = h[i] / rest;
    norm += out.w[i];
  }
  for (double& v : out.w) v /= norm;
  return out;
}

using RatioModel = std::variant<RatioTable, RatioEstimator>;

// Likelihood ratio of every partition member. The estimator path reads
// features only, never the sensitive attribute.
inline Vec MemberRatios(const Partition& partition,
                        const LabeledDataset& parent, const RatioModel& model) {
  Vec h;
  h.reserve(partition.members.size());
  for (std::size_t idx : partition.members) {
    PFGUARD_CHECK(idx < parent.size(), "partition index outside dataset");
    const Sample& s = parent[idx];
    double v = 0.0;
    if (const auto* table = std::get_if<RatioTable>(&model)) {
      PFGUARD_CHECK(static_cast<std::size_t>(s.group) < table->h.size(),
                    "ratio table does not cover group");
      v = (*table)[static_cast<std::size_t>(s.group)];
    } else {
      v = std::get<RatioEstimator>(model).Ratio(s.features);
    }
    if (!std::isfinite(v))
      throw Error("non-finite ratio for sample " + std::to_string(idx));
    h.push_back(v);
  }
  return h;
}

using MiniBatch = std::vector<std::size_t>;

// Precomputed resampling distribution over one partition; draws are i.i.d.
// with replacement.
class SirSampler {
 public:
  SirSampler(const Partition& partition, const LabeledDataset& parent,
             const RatioModel& model, NormalizationScheme scheme)
      : members_(partition.members) {
    PFGUARD_CHECK(!members_.empty(), "cannot resample an empty partition");
    const Vec h = MemberRatios(partition, parent, model);
    weights_ = NormalizeWeights(h, scheme);
    cumulative_.resize(weights_.w.size());
    std::partial_sum(weights_.w.begin(), weights_.w.end(), cumulative_.begin());
  }

  const ResampleWeights& weights() const { return weights_; }

  MiniBatch Draw(std::size_t batch_size, Rng& rng) const {
    PFGUARD_CHECK(batch_size >= 1, "batch size must be >= 1");
    std::uniform_real_distribution<double> unif(0.0, cumulative_.back());
    MiniBatch out(batch_size);
    for (std::size_t& slot : out) {
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(),
                                 unif(rng));
      const auto pos = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
          it - cumulative_.begin(),
          static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
      slot = members_[pos];
    }
    return out;
  }

 private:
  std::vector<std::size_t> members_;
  ResampleWeights weights_;
  Vec cumulative_;
};

inline MiniBatch SirMinibatch(const Partition& partition,
                              const LabeledDataset& parent,
                              const RatioModel& model, std::size_t batch_size,
                              NormalizationScheme scheme, Rng& rng) {
  return SirSampler(partition, parent, model, scheme).Draw(batch_size, rng);
}

}  // namespace pfguard

#endif  // PFGUARD_FAIR_SAMPLING_HPP_
