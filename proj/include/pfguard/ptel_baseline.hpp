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

// Reference PTEL loop without any fairness machinery: uniform minibatches
// from an unstratified disjoint split, one teacher step each, then one
// private generator step. Used to cross-check Train() with fairness off.

#ifndef PFGUARD_PTEL_BASELINE_HPP_
#define PFGUARD_PTEL_BASELINE_HPP_

#include <random>
#include <vector>

#include "pfguard/training.hpp"

namespace pfguard {

struct PlainPtelResult {
  Mlp generator;
  std::vector<Mlp> teachers;
  PrivacyLedger ledger;
};

inline PlainPtelResult TrainPlainPtel(const LabeledDataset& data,
                                      const TrainConfig& config) {
  PFGUARD_CHECK(config.fairness == FairnessMode::kOff,
                "plain PTEL has no fairness mode");
  config.Validate();
  const PartitionSplit split =
      PartitionDisjoint(data, config.num_teachers, false, config.seed);
  Models m = InitModels(config, data.dim(), config.seed);
  PlainPtelResult res{std::move(m.generator), std::move(m.teachers), PrivacyLedger()};
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < config.num_teachers; ++i)
    rngs.push_back(DeriveStream(config.seed, StreamTag::kTeacher, i));
  Rng gen_rng = DeriveStream(config.seed, StreamTag::kGenerator);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t t = 0; t < config.num_teachers; ++t) {
      const std::vector<std::size_t>& members = split.partitions[t].members;
      PFGUARD_CHECK(!members.empty(), "teacher partition is empty");
      std::uniform_int_distribution<std::size_t> u(0, members.size() - 1);
      std::vector<Vec> real;
      for (std::size_t b = 0; b < config.batch_size; ++b)
        real.push_back(data[members[u(rngs[t])]].features);
      const std::vector<Vec> fake =
          Generate(res.generator, config.batch_size, rngs[t]);
      TeacherStep(res.teachers[t], real, fake, config.teacher_lr, config.loss);
    }
    GeneratorStepPtel(res.generator, res.teachers, config, res.ledger, gen_rng);
  }
  return res;
}

}  // namespace pfguard

#endif  // PFGUARD_PTEL_BASELINE_HPP_
