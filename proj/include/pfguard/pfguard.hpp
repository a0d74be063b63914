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

#ifndef PFGUARD_PFGUARD_HPP_
#define PFGUARD_PFGUARD_HPP_

#include "pfguard/checkpoint.hpp"
#include "pfguard/core_data.hpp"
#include "pfguard/dp.hpp"
#include "pfguard/error.hpp"
#include "pfguard/evaluation.hpp"
#include "pfguard/fair_sampling.hpp"
#include "pfguard/harness.hpp"
#include "pfguard/mlp.hpp"
#include "pfguard/ptel_baseline.hpp"
#include "pfguard/rng.hpp"
#include "pfguard/training.hpp"

#endif  // PFGUARD_PFGUARD_HPP_
