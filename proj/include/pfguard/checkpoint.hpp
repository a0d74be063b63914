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

// Model checkpoints: one JSON header line followed by the flat parameter
// vector as little-endian IEEE-754 binary64.

#ifndef PFGUARD_CHECKPOINT_HPP_
#define PFGUARD_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfguard/error.hpp"
#include "pfguard/mlp.hpp"

namespace pfguard {

struct CheckpointHeader {
  std::vector<LayerShape> shapes;
  ModelRole role = ModelRole::kGenerator;
  std::string config_hash;
  std::size_t step = 0;
};

namespace internal {

inline std::uint64_t ToLittleEndian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

}  // namespace internal

inline void WriteCheckpoint(std::ostream& out, const Mlp& model,
                            const std::string& config_hash, std::size_t step) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const LayerShape& s : model.shapes()) shapes.push_back({s.in, s.out});
  const nlohmann::json header = {
      {"format", "pfguard-checkpoint-v1"},
      {"role", model.role() == ModelRole::kGenerator ? "generator" : "teacher"},
      {"shapes", shapes},
      {"num_params", model.num_params()},
      {"config_hash", config_hash},
      {"step", step}};
  out << header.dump() << '\n';
  for (double v : model.params()) {
    const std::uint64_t bits = internal::ToLittleEndian(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw Error("failed to write checkpoint");
}

inline Mlp ReadCheckpoint(std::istream& in, CheckpointHeader* header_out = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw Error("checkpoint header missing");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint header is not JSON: ") + e.what());
  }
  if (h.value("format", "") != "pfguard-checkpoint-v1")
    throw Error("unknown checkpoint format");
  CheckpointHeader header;
  try {
    for (const auto& s : h.at("shapes"))
      header.shapes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    const std::string role = h.at("role").get<std::string>();
    PFGUARD_CHECK(role == "generator" || role == "teacher",
                  "checkpoint role must be generator or teacher");
    header.role = role == "generator" ? ModelRole::kGenerator : ModelRole::kTeacher;
    header.config_hash = h.at("config_hash").get<std::string>();
    header.step = h.at("step").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
  Mlp model(header.shapes, header.role);
  PFGUARD_CHECK(h.value("num_params", std::size_t{0}) == model.num_params(),
                "checkpoint parameter count disagrees with its shapes");
  Vec params(model.num_params());
  for (double& v : params) {
    char buf[8];
    if (!in.read(buf, 8)) throw Error("checkpoint payload truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    v = std::bit_cast<double>(internal::ToLittleEndian(bits));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error("trailing bytes after checkpoint payload");
  model.SetParams(std::move(params));
  if (header_out) *header_out = std::move(header);
  return model;
}

}  // namespace pfguard

#endif  // PFGUARD_CHECKPOINT_HPP_
