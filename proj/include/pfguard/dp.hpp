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

// Differential-privacy mechanisms and Renyi-DP accounting.

#ifndef PFGUARD_DP_HPP_
#define PFGUARD_DP_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfguard/core_data.hpp"
#include "pfguard/error.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-5;

  void Validate() const {
    PFGUARD_CHECK(epsilon > 0.0, "epsilon must be positive");
    PFGUARD_CHECK(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  }
};

// L2 sensitivity.
struct Sensitivity {
  double value = 0.0;
};

struct ClipBound {
  double c = 1.0;  // +inf disables clipping
};

inline double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double L2Distance(std::span<const double> a, std::span<const double> b) {
  PFGUARD_CHECK(a.size() == b.size(), "dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// g / max(1, |g| / C).
inline Vec ClipGradient(std::span<const double> g, ClipBound bound) {
  PFGUARD_CHECK(bound.c > 0.0, "clip bound must be positive");
  const double scale = std::max(1.0, L2Norm(g) / bound.c);
  Vec out(g.begin(), g.end());
  for (double& v : out) v /= scale;
  return out;
}

// Classical calibration sigma = sqrt(2 ln(1.25 / delta)) * Delta / epsilon.
inline double GaussianSigma(const PrivacyParams& pp, Sensitivity sens) {
  PFGUARD_CHECK(pp.epsilon > 0.0, "epsilon must be positive");
  PFGUARD_CHECK(sens.value >= 0.0 && std::isfinite(sens.value),
                "sensitivity must be finite and nonnegative");
  if (!(pp.delta > 0.0) || pp.delta >= 1.25)
    throw Error("delta must lie in (0, 1.25) for the Gaussian calibration");
  return std::sqrt(2.0 * std::log(1.25 / pp.delta)) * sens.value / pp.epsilon;
}

inline Vec GaussianMechanism(std::span<const double> v, double sigma, Rng& rng) {
  PFGUARD_CHECK(sigma >= 0.0, "noise scale must be nonnegative");
  Vec out(v.begin(), v.end());
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& x : out) x += noise(rng);
  return out;
}

struct VoteHistogram {
  std::vector<double> counts;  // integral values; double for noise arithmetic

  double total() const {
    double t = 0.0;
    for (double c : counts) t += c;
    return t;
  }
};

inline VoteHistogram BuildVoteHistogram(std::span<const int> votes,
                                        int num_classes) {
  PFGUARD_CHECK(num_classes >= 1, "need at least one class");
  PFGUARD_CHECK(!votes.empty(), "need at least one teacher vote");
  VoteHistogram h;
  h.counts.assign(static_cast<std::size_t>(num_classes), 0.0);
  for (int v : votes) {
    PFGUARD_CHECK(v >= 0 && v < num_classes, "vote outside class range");
    h.counts[static_cast<std::size_t>(v)] += 1.0;
  }
  return h;
}

// Noisy argmax; ties resolved towards the lowest class index.
inline int NoisyArgmax(const VoteHistogram& hist, double sigma, Rng& rng) {
  const Vec noisy = GaussianMechanism(hist.counts, sigma, rng);
  std::size_t best = 0;
  for (std::size_t j = 1; j < noisy.size(); ++j)
    if (noisy[j] > noisy[best]) best = j;
  return static_cast<int>(best);
}

inline int GnmaxAggregate(std::span<const int> votes, int num_classes,
                          double sigma, Rng& rng) {
  return NoisyArgmax(BuildVoteHistogram(votes, num_classes), sigma, rng);
}

// One teacher changing its vote moves one count down and another up.
inline Sensitivity GnmaxSensitivity() { return {std::numbers::sqrt2}; }

// Per-query sensitivity of the per-coordinate sign-sum: each coordinate
// moves by at most 2 when one teacher changes.
inline Sensitivity SignVoteSensitivity(std::size_t dim) {
  return {2.0 * std::sqrt(static_cast<double>(dim))};
}

// Per-sample sanitizer sensitivity: clipped vectors differ by at most 2C.
inline Sensitivity SanitizerSensitivity(ClipBound bound) {
  return {2.0 * bound.c};
}

// Cost of one mechanism invocation, to be charged to the ledger by the
// caller exactly once.
struct MechanismCost {
  Sensitivity sensitivity;
  double noise_std = 0.0;
  std::size_t queries = 0;
};

struct SanitizedGradients {
  std::vector<Vec> grads;
  MechanismCost cost;
};

// Clips each per-sample gradient to C, then adds N(0, (multiplier * 2C)^2 I).
inline SanitizedGradients SanitizeGradientPerSample(
    std::span<const Vec> per_sample, ClipBound bound, double noise_multiplier,
    Rng& rng) {
  PFGUARD_CHECK(noise_multiplier >= 0.0, "noise multiplier must be >= 0");
  SanitizedGradients out;
  out.cost.sensitivity = SanitizerSensitivity(bound);
  out.cost.noise_std =
      noise_multiplier == 0.0 ? 0.0
                              : noise_multiplier * out.cost.sensitivity.value;
  out.cost.queries = per_sample.size();
  out.grads.reserve(per_sample.size());
  for (const Vec& g : per_sample) {
    for (double v : g) PFGUARD_CHECK(std::isfinite(v), "non-finite gradient");
    out.grads.push_back(
        GaussianMechanism(ClipGradient(g, bound), out.cost.noise_std, rng));
  }
  return out;
}

inline double SignOf(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// Pre-noise per-coordinate sum of teacher signs, with sign(0) = +1.
inline Vec SignVoteSums(std::span<const Vec> per_teacher) {
  PFGUARD_CHECK(!per_teacher.empty(), "sign vote needs at least one teacher");
  const std::size_t d = per_teacher.front().size();
  Vec sums(d, 0.0);
  for (const Vec& g : per_teacher) {
    PFGUARD_CHECK(g.size() == d, "teacher gradients differ in dimension");
    for (std::size_t k = 0; k < d; ++k) sums[k] += SignOf(g[k]);
  }
  return sums;
}

inline Vec SignVoteAggregate(std::span<const Vec> per_teacher, double noise_std,
                             Rng& rng) {
  Vec noisy = GaussianMechanism(SignVoteSums(per_teacher), noise_std, rng);
  for (double& v : noisy) v = SignOf(v);
  return noisy;
}

// Renyi orders: 1.25, 1.5, the integers 2..64, 128, 256, the half-integer
// band 2..16 and a fine band 1.02..4 for heavily composed ledgers.
inline Vec DefaultAlphaGrid() {
  Vec grid{1.25, 1.5};
  for (int a = 2; a <= 64; ++a) grid.push_back(a);
  for (double a = 2.5; a < 16.0; a += 1.0) grid.push_back(a);
  for (int k = 51; k < 200; ++k)
    if (k % 25 != 0) grid.push_back(k / 50.0);
  grid.push_back(128);
  grid.push_back(256);
  std::sort(grid.begin(), grid.end());
  return grid;
}

class PrivacyLedger {
 public:
  explicit PrivacyLedger(Vec alpha_grid = DefaultAlphaGrid())
      : alpha_grid_(std::move(alpha_grid)), rdp_(alpha_grid_.size(), 0.0) {
    PFGUARD_CHECK(!alpha_grid_.empty(), "empty Renyi order grid");
    for (double a : alpha_grid_)
      PFGUARD_CHECK(a > 1.0, "Renyi orders must exceed 1");
  }

  PrivacyLedger(const PrivacyLedger& other) { *this = other; }
  PrivacyLedger& operator=(const PrivacyLedger& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mu_, other.mu_);
    alpha_grid_ = other.alpha_grid_;
    rdp_ = other.rdp_;
    queries_ = other.queries_;
    charges_ = other.charges_;
    last_ = other.last_;
    return *this;
  }

  // Composes n Gaussian queries: rdp(alpha) += n * alpha * Delta^2 / (2 sigma^2).
  void Charge(Sensitivity sens, double sigma, std::size_t n_queries) {
    PFGUARD_CHECK(sens.value >= 0.0 && std::isfinite(sens.value),
                  "sensitivity must be finite and nonnegative");
    PFGUARD_CHECK(sigma >= 0.0, "noise scale must be nonnegative");
    if (n_queries == 0) return;
    if (sigma == 0.0)
      throw Error("charging queries with zero noise: privacy cost is infinite");
    std::scoped_lock lock(mu_);
    const double per = sens.value * sens.value / (2.0 * sigma * sigma);
    for (std::size_t k = 0; k < alpha_grid_.size(); ++k)
      rdp_[k] += static_cast<double>(n_queries) * alpha_grid_[k] * per;
    queries_ += n_queries;
    ++charges_;
    last_ = MechanismCost{sens, sigma, n_queries};
  }

  void Charge(const MechanismCost& cost) {
    Charge(cost.sensitivity, cost.noise_std, cost.queries);
  }

  // Records noiseless queries (the non-private reference setting): every
  // Renyi cost becomes infinite.
  void ChargeUnbounded(const MechanismCost& cost) {
    if (cost.queries == 0) return;
    std::scoped_lock lock(mu_);
    for (double& r : rdp_) r = std::numeric_limits<double>::infinity();
    queries_ += cost.queries;
    ++charges_;
    last_ = cost;
  }

  const Vec& alpha_grid() const { return alpha_grid_; }
  Vec rdp_costs() const {
    std::scoped_lock lock(mu_);
    return rdp_;
  }
  std::size_t query_log() const {
    std::scoped_lock lock(mu_);
    return queries_;
  }
  std::size_t num_charges() const {
    std::scoped_lock lock(mu_);
    return charges_;
  }
  MechanismCost last_charge() const {
    std::scoped_lock lock(mu_);
    return last_;
  }

 private:
  mutable std::mutex mu_;
  Vec alpha_grid_;
  Vec rdp_;
  std::size_t queries_ = 0;
  std::size_t charges_ = 0;
  MechanismCost last_;
};

inline PrivacyLedger LedgerCharge(const PrivacyLedger& ledger, Sensitivity sens,
                                  double sigma, std::size_t n_queries) {
  PrivacyLedger next = ledger;
  next.Charge(sens, sigma, n_queries);
  return next;
}

struct EpsilonResult {
  double epsilon = 0.0;
  double alpha_star = 0.0;
};

// eps = min_alpha rdp(alpha) + ln(1/delta) / (alpha - 1).
inline EpsilonResult LedgerEpsilonDetail(const PrivacyLedger& ledger,
                                         double delta) {
  PFGUARD_CHECK(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  if (ledger.query_log() == 0) return {0.0, ledger.alpha_grid().back()};
  const Vec rdp = ledger.rdp_costs();
  const Vec& grid = ledger.alpha_grid();
  EpsilonResult best{std::numeric_limits<double>::infinity(), grid.front()};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double eps = rdp[k] + std::log(1.0 / delta) / (grid[k] - 1.0);
    if (eps < best.epsilon) best = {eps, grid[k]};
  }
  return best;
}

inline double LedgerEpsilon(const PrivacyLedger& ledger, double delta) {
  return LedgerEpsilonDetail(ledger, delta).epsilon;
}

inline nlohmann::json AccountantReport(const PrivacyLedger& ledger,
                                       double delta) {
  const EpsilonResult r = LedgerEpsilonDetail(ledger, delta);
  const MechanismCost last = ledger.last_charge();
  return {{"queries", ledger.query_log()},
          {"sigma", last.noise_std},
          {"sensitivity", last.sensitivity.value},
          {"alpha_star", r.alpha_star},
          {"epsilon", r.epsilon},
          {"delta", delta}};
}

struct FuzzResult {
  double max_difference = 0.0;
  std::size_t trials = 0;
  std::size_t hits_at_max = 0;  // trials whose difference equals the max
};

// Adjacency fuzzer: draws teacher outputs, replaces one teacher's output and
// records the L2 change of the pre-noise aggregate.
template <class Output>
FuzzResult FuzzAdjacency(
    std::size_t num_teachers, std::size_t trials, Rng& rng,
    const std::function<Output(Rng&)>& draw_output,
    const std::function<Vec(std::span<const Output>)>& aggregate) {
  PFGUARD_CHECK(num_teachers >= 1, "need at least one teacher");
  FuzzResult res;
  std::uniform_int_distribution<std::size_t> pick(0, num_teachers - 1);
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<Output> a;
    a.reserve(num_teachers);
    for (std::size_t i = 0; i < num_teachers; ++i) a.push_back(draw_output(rng));
    std::vector<Output> b = a;
    b[pick(rng)] = draw_output(rng);
    const double diff = L2Distance(aggregate(a), aggregate(b));
    if (diff > res.max_difference + 1e-15) {
      res.max_difference = diff;
      res.hits_at_max = 1;
    } else if (std::abs(diff - res.max_difference) <= 1e-15) {
      ++res.hits_at_max;
    }
    ++res.trials;
  }
  return res;
}

}  // namespace pfguard

#endif  // PFGUARD_DP_HPP_
