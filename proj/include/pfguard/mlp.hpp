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

// Small fully connected networks with hand-written backpropagation.

#ifndef PFGUARD_MLP_HPP_
#define PFGUARD_MLP_HPP_

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "pfguard/core_data.hpp"
#include "pfguard/error.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

enum class ModelRole { kGenerator, kTeacher };

inline std::string_view ModelRoleName(ModelRole r) {
  return r == ModelRole::kGenerator ? "generator" : "teacher";
}

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;

  bool operator==(const LayerShape&) const = default;
};

// tanh on every hidden layer, identity on the output layer. Parameters are
// one flat vector: per layer the row-major weight matrix (out x in), then
// the bias.
class Mlp {
 public:
  struct Cache {
    std::vector<Vec> inputs;  // input of each layer
  };

  Mlp() = default;
  Mlp(std::vector<LayerShape> shapes, ModelRole role)
      : shapes_(std::move(shapes)), role_(role) {
    PFGUARD_CHECK(!shapes_.empty(), "network needs at least one layer");
    for (std::size_t l = 1; l < shapes_.size(); ++l)
      PFGUARD_CHECK(shapes_[l].in == shapes_[l - 1].out,
                    "layer shapes do not chain");
    params_.assign(CountParams(shapes_), 0.0);
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Mlp Initialized(std::vector<LayerShape> shapes, ModelRole role,
                         Rng& rng) {
    Mlp net(std::move(shapes), role);
    std::size_t offset = 0;
    for (const LayerShape& s : net.shapes_) {
      const double a = 1.0 / std::sqrt(static_cast<double>(s.in));
      std::uniform_real_distribution<double> u(-a, a);
      for (std::size_t k = 0; k < s.in * s.out + s.out; ++k)
        net.params_[offset + k] = u(rng);
      offset += s.in * s.out + s.out;
    }
    return net;
  }

  static std::size_t CountParams(const std::vector<LayerShape>& shapes) {
    std::size_t n = 0;
    for (const LayerShape& s : shapes) n += s.in * s.out + s.out;
    return n;
  }

  const std::vector<LayerShape>& shapes() const { return shapes_; }
  ModelRole role() const { return role_; }
  std::size_t input_dim() const { return shapes_.front().in; }
  std::size_t output_dim() const { return shapes_.back().out; }
  std::size_t num_params() const { return params_.size(); }
  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }

  void SetParams(Vec p) {
    PFGUARD_CHECK(p.size() == params_.size(), "parameter count mismatch");
    params_ = std::move(p);
  }

  Vec Forward(std::span<const double> x, Cache* cache = nullptr) const {
    PFGUARD_CHECK(x.size() == input_dim(), "input dimension mismatch");
    Vec cur(x.begin(), x.end());
    if (cache) cache->inputs.clear();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      const LayerShape& s = shapes_[l];
      if (cache) cache->inputs.push_back(cur);
      const double* w = params_.data() + offset;
      const double* b = w + s.in * s.out;
      Vec next(s.out);
      for (std::size_t o = 0; o < s.out; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < s.in; ++i) acc += w[o * s.in + i] * cur[i];
        next[o] = l + 1 < shapes_.size() ? std::tanh(acc) : acc;
      }
      cur = std::move(next);
      offset += s.in * s.out + s.out;
    }
    return cur;
  }

  // Backpropagates dL/d(output). Adds dL/d(theta) into param_grad when
  // given and returns dL/d(input).
  Vec Backward(const Cache& cache, std::span<const double> dout,
               Vec* param_grad) const {
    PFGUARD_CHECK(cache.inputs.size() == shapes_.size(), "stale cache");
    PFGUARD_CHECK(dout.size() == output_dim(), "output gradient mismatch");
    if (param_grad) PFGUARD_CHECK(param_grad->size() == params_.size(),
                                  "gradient buffer size mismatch");
    Vec delta(dout.begin(), dout.end());
    std::size_t offset = params_.size();
    for (std::size_t l = shapes_.size(); l-- > 0;) {
      const LayerShape& s = shapes_[l];
      offset -= s.in * s.out + s.out;
      const double* w = params_.data() + offset;
      const Vec& in = cache.inputs[l];
      if (param_grad) {
        double* gw = param_grad->data() + offset;
        double* gb = gw + s.in * s.out;
        for (std::size_t o = 0; o < s.out; ++o) {
          gb[o] += delta[o];
          for (std::size_t i = 0; i < s.in; ++i) gw[o * s.in + i] += delta[o] * in[i];
        }
      }
      Vec prev(s.in, 0.0);
      for (std::size_t o = 0; o < s.out; ++o)
        for (std::size_t i = 0; i < s.in; ++i) prev[i] += w[o * s.in + i] * delta[o];
      // The input of layer l > 0 is tanh of the previous pre-activation.
      if (l > 0)
        for (std::size_t i = 0; i < s.in; ++i) prev[i] *= 1.0 - in[i] * in[i];
      delta = std::move(prev);
    }
    return delta;
  }

  bool AllFinite() const {
    for (double v : params_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<LayerShape> shapes_;
  ModelRole role_ = ModelRole::kGenerator;
  Vec params_;
};

}  // namespace pfguard

#endif  // PFGUARD_MLP_HPP_
