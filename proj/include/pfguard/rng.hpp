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

#ifndef PFGUARD_RNG_HPP_
#define PFGUARD_RNG_HPP_

#include <cstdint>
#include <random>

namespace pfguard {

using Rng = std::mt19937_64;

// Stream tags keep independent consumers of one root seed apart.
enum class StreamTag : std::uint32_t {
  kData = 1,
  kPartition = 2,
  kTeacher = 3,
  kGenerator = 4,
  kInit = 5,
  kEval = 6,
  kReference = 7,
  kTestSet = 8,
  kEstimator = 9,
};

// Deterministic child stream for (root, tag, index). Teacher i always gets
// the same stream regardless of how many other teachers exist.
inline Rng DeriveStream(std::uint64_t root, StreamTag tag,
                        std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(root),
                    static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace pfguard

#endif  // PFGUARD_RNG_HPP_
