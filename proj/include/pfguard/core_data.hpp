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

// Dataset model, synthetic biased mixtures and disjoint partitioning.

#ifndef PFGUARD_CORE_DATA_HPP_
#define PFGUARD_CORE_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pfguard/error.hpp"
#include "pfguard/rng.hpp"

namespace pfguard {

using Vec = std::vector<double>;

struct Sample {
  Vec features;
  int label = 0;  // y
  int group = 0;  // s
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::vector<Sample> samples, int num_classes, int num_groups)
      : samples_(std::move(samples)),
        num_classes_(num_classes),
        num_groups_(num_groups) {
    Validate();
  }

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int num_classes() const { return num_classes_; }
  int num_groups() const { return num_groups_; }
  std::size_t dim() const {
    return samples_.empty() ? 0 : samples_.front().features.size();
  }

  void Validate() const {
    PFGUARD_CHECK(num_classes_ >= 1 && num_groups_ >= 1,
                  "dataset needs at least one class and one group");
    const std::size_t d = dim();
    for (const Sample& s : samples_) {
      PFGUARD_CHECK(s.features.size() == d, "samples differ in dimension");
      for (double v : s.features)
        PFGUARD_CHECK(std::isfinite(v), "non-finite feature value");
      PFGUARD_CHECK(s.label >= 0 && s.label < num_classes_,
                    "class label out of range");
      PFGUARD_CHECK(s.group >= 0 && s.group < num_groups_,
                    "sensitive attribute out of range");
    }
  }

 private:
  std::vector<Sample> samples_;
  int num_classes_ = 1;
  int num_groups_ = 1;
};

enum class Scenario { kBinaryClass, kMultiClass, kSubgroup, kUnknownSubgroup };

inline std::string_view ScenarioName(Scenario s) {
  switch (s) {
    case Scenario::kBinaryClass: return "binary_class";
    case Scenario::kMultiClass: return "multi_class";
    case Scenario::kSubgroup: return "subgroup";
    case Scenario::kUnknownSubgroup: return "unknown_subgroup";
  }
  return "?";
}

inline Scenario ParseScenario(std::string_view name) {
  for (Scenario s : {Scenario::kBinaryClass, Scenario::kMultiClass,
                     Scenario::kSubgroup, Scenario::kUnknownSubgroup})
    if (ScenarioName(s) == name) return s;
  throw Error("unknown scenario '" + std::string(name) + "'");
}

// Class-bias scenarios use the class itself as the sensitive attribute.
inline bool GroupIsClass(Scenario s) {
  return s == Scenario::kBinaryClass || s == Scenario::kMultiClass;
}

struct Component {
  Vec mean;
  double stddev = 0.5;
};

// Cell (y, s) is stored at components[y * num_groups + s].
struct BiasSpec {
  Scenario scenario = Scenario::kSubgroup;
  double gamma = 1.0;
  int num_classes = 2;
  int num_groups = 2;
  std::vector<Component> components;
  std::size_t total_size = 1000;

  const Component& cell(int y, int s) const {
    return components[static_cast<std::size_t>(y * num_groups + s)];
  }

  void Validate() const {
    PFGUARD_CHECK(gamma >= 1.0 && std::isfinite(gamma), "gamma must be >= 1");
    PFGUARD_CHECK(num_classes >= 1 && num_groups >= 1, "empty class/group set");
    PFGUARD_CHECK(components.size() ==
                      static_cast<std::size_t>(num_classes * num_groups),
                  "one mixture component per (y, s) cell required");
    PFGUARD_CHECK(total_size >= static_cast<std::size_t>(num_classes) *
                                    static_cast<std::size_t>(num_groups),
                  "total_size must cover every (y, s) cell");
    const std::size_t d = components.front().mean.size();
    PFGUARD_CHECK(d >= 1, "component dimension must be >= 1");
    for (const Component& c : components) {
      PFGUARD_CHECK(c.mean.size() == d, "component dimensions differ");
      PFGUARD_CHECK(c.stddev > 0.0, "component stddev must be positive");
    }
    if (GroupIsClass(scenario))
      PFGUARD_CHECK(num_groups == num_classes,
                    "class-bias scenarios use s = y");
  }
};

struct GeometryOptions {
  std::size_t dim = 2;
  int num_classes = 2;   // subgroup scenarios; class scenarios take it as c
  int num_groups = 2;    // subgroup scenarios only
  double offset = 3.0;   // distance of each group centre from the origin
  double spread = 2.0;   // class spacing within a group
  double group_angle_deg = 0.0;  // angle between group centres; 0 = 360 / G
  double stddev = 0.5;
};

namespace internal {

inline Vec Embed(double a, double b, std::size_t dim) {
  Vec v(dim, 0.0);
  v[0] = a;
  if (dim > 1) v[1] = b;
  return v;
}

}  // namespace internal

// Default 2-D (or embedded) layout. Subgroup scenarios put the unrotated
// majority group s = G-1 at (offset, 0) and move each further group centre
// round the circle by group_angle_deg; within a group the classes sit on a
// vertical line through the centre, so the class boundary is shared.
// Class scenarios place one component per class on a circle.
inline BiasSpec MakeBiasSpec(Scenario scenario, double gamma,
                             std::size_t total_size,
                             const GeometryOptions& geo = {}) {
  BiasSpec spec;
  spec.scenario = scenario;
  spec.gamma = gamma;
  spec.total_size = total_size;
  if (GroupIsClass(scenario)) {
    const int c = scenario == Scenario::kBinaryClass ? 2 : geo.num_classes;
    spec.num_classes = c;
    spec.num_groups = c;
    spec.components.resize(static_cast<std::size_t>(c * c));
    for (int y = 0; y < c; ++y) {
      const double angle = 2.0 * std::numbers::pi * y / c;
      Component comp{internal::Embed(geo.offset * std::cos(angle),
                                     geo.offset * std::sin(angle), geo.dim),
                     geo.stddev};
      // Off-diagonal cells never receive samples; they mirror the class.
      for (int s = 0; s < c; ++s)
        spec.components[static_cast<std::size_t>(y * c + s)] = comp;
    }
    return spec;
  }
  spec.num_classes = geo.num_classes;
  spec.num_groups = geo.num_groups;
  spec.components.resize(
      static_cast<std::size_t>(geo.num_classes * geo.num_groups));
  const double step_deg = geo.group_angle_deg != 0.0
                              ? geo.group_angle_deg
                              : 360.0 / geo.num_groups;
  for (int s = 0; s < geo.num_groups; ++s) {
    const double theta =
        step_deg * std::numbers::pi / 180.0 * (geo.num_groups - 1 - s);
    const double ca = geo.offset * std::cos(theta);
    const double cb = geo.offset * std::sin(theta);
    for (int y = 0; y < geo.num_classes; ++y) {
      const double b = geo.spread * (2.0 * y - (geo.num_classes - 1));
      spec.components[static_cast<std::size_t>(y * geo.num_groups + s)] =
          Component{internal::Embed(ca, cb + b, geo.dim), geo.stddev};
    }
  }
  return spec;
}

// Closed-form per-group sizes: group 0 is the minority and is gamma times
// smaller than each of the other groups. The minority takes the floor and
// the majority groups share the rest evenly.
inline std::vector<std::size_t> BiasedGroupSizes(std::size_t total,
                                                 int num_groups, double gamma) {
  PFGUARD_CHECK(num_groups >= 1, "need at least one group");
  if (num_groups == 1) return {total};
  const double denom = 1.0 + gamma * (num_groups - 1);
  // Nudge for exact ratios such as 3000 / 3 evaluating to 999.999...
  const auto minority = static_cast<std::size_t>(
      std::floor(static_cast<double>(total) / denom + 1e-9));
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_groups), 0);
  sizes[0] = minority;
  const std::size_t rest = total - minority;
  const auto majors = static_cast<std::size_t>(num_groups - 1);
  for (std::size_t g = 0; g < majors; ++g)
    sizes[g + 1] = rest / majors + (g < rest % majors ? 1 : 0);
  return sizes;
}

// Evenly splits n over k bins, remainder to the lowest indices.
inline std::vector<std::size_t> EvenSplit(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++out[i];
  return out;
}

inline LabeledDataset MakeBiasedMixture(const BiasSpec& spec,
                                        std::uint64_t seed) {
  spec.Validate();
  const bool class_groups = GroupIsClass(spec.scenario);
  const std::vector<std::size_t> group_sizes = BiasedGroupSizes(
      spec.total_size, spec.num_groups, spec.gamma);
  Rng rng = DeriveStream(seed, StreamTag::kData);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Sample> samples;
  samples.reserve(spec.total_size);
  for (int s = 0; s < spec.num_groups; ++s) {
    const std::size_t gsize = group_sizes[static_cast<std::size_t>(s)];
    if (gsize == 0)
      throw Error("gamma too large: group " + std::to_string(s) +
                  " would receive zero samples");
    std::vector<std::size_t> cell_sizes;
    if (class_groups) {
      cell_sizes.assign(static_cast<std::size_t>(spec.num_classes), 0);
      cell_sizes[static_cast<std::size_t>(s)] = gsize;
    } else {
      cell_sizes = EvenSplit(gsize, static_cast<std::size_t>(spec.num_classes));
    }
    for (int y = 0; y < spec.num_classes; ++y) {
      const std::size_t n = cell_sizes[static_cast<std::size_t>(y)];
      if (!class_groups && n == 0)
        throw Error("gamma too large: cell (y=" + std::to_string(y) +
                    ", s=" + std::to_string(s) + ") would be empty");
      const Component& comp = spec.cell(y, s);
      for (std::size_t i = 0; i < n; ++i) {
        Sample smp;
        smp.features.resize(comp.mean.size());
        for (std::size_t k = 0; k < comp.mean.size(); ++k)
          smp.features[k] = comp.mean[k] + comp.stddev * normal(rng);
        smp.label = y;
        smp.group = s;
        samples.push_back(std::move(smp));
      }
    }
  }
  std::shuffle(samples.begin(), samples.end(), rng);
  return LabeledDataset(std::move(samples), spec.num_classes, spec.num_groups);
}

struct GroupDistribution {
  Vec probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  void Validate() const {
    PFGUARD_CHECK(!probs.empty(), "empty distribution");
    double total = 0.0;
    for (double p : probs) {
      PFGUARD_CHECK(p >= 0.0 && p <= 1.0, "probability outside [0, 1]");
      total += p;
    }
    PFGUARD_CHECK(std::abs(total - 1.0) <= 1e-9, "probabilities must sum to 1");
  }
};

enum class GroupKey { kBySensitive, kByLabel };

inline std::vector<std::size_t> GroupCounts(const LabeledDataset& data,
                                            GroupKey key = GroupKey::kBySensitive) {
  const int k = key == GroupKey::kBySensitive ? data.num_groups()
                                              : data.num_classes();
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (const Sample& s : data.samples())
    ++counts[static_cast<std::size_t>(key == GroupKey::kBySensitive ? s.group
                                                                    : s.label)];
  return counts;
}

inline GroupDistribution EmpiricalGroupDist(
    const LabeledDataset& data, GroupKey key = GroupKey::kBySensitive) {
  PFGUARD_CHECK(!data.empty(), "empirical distribution of an empty dataset");
  const std::vector<std::size_t> counts = GroupCounts(data, key);
  GroupDistribution dist;
  dist.probs.reserve(counts.size());
  for (std::size_t c : counts)
    dist.probs.push_back(static_cast<double>(c) /
                         static_cast<double>(data.size()));
  return dist;
}

struct Partition {
  std::size_t index = 0;
  std::vector<std::size_t> members;  // indices into the parent dataset
};

// A (partition, group) pair that received no samples.
struct EmptyGroupWarning {
  std::size_t partition = 0;
  int group = 0;
};

struct PartitionSplit {
  std::vector<Partition> partitions;
  std::vector<EmptyGroupWarning> warnings;
};

// Deals samples to partitions with a single cyclic cursor. In stratified
// mode groups are dealt one after another, so every partition holds the
// floor or ceiling of group_count / n_T per group and remainders rotate
// through ascending partition indices across groups.
inline PartitionSplit PartitionDisjoint(const LabeledDataset& data,
                                        std::size_t num_partitions,
                                        bool stratify_by_group,
                                        std::uint64_t seed) {
  PFGUARD_CHECK(num_partitions >= 1, "need at least one partition");
  PFGUARD_CHECK(num_partitions <= data.size(),
                "more partitions than samples");
  Rng rng = DeriveStream(seed, StreamTag::kPartition);
  PartitionSplit split;
  split.partitions.resize(num_partitions);
  for (std::size_t i = 0; i < num_partitions; ++i)
    split.partitions[i].index = i;

  std::vector<std::vector<std::size_t>> pools;
  if (stratify_by_group) {
    pools.resize(static_cast<std::size_t>(data.num_groups()));
    for (std::size_t i = 0; i < data.size(); ++i)
      pools[static_cast<std::size_t>(data[i].group)].push_back(i);
  } else {
    pools.emplace_back(data.size());
    std::iota(pools.back().begin(), pools.back().end(), std::size_t{0});
  }
  std::size_t cursor = 0;
  for (auto& pool : pools) {
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t idx : pool) {
      split.partitions[cursor % num_partitions].members.push_back(idx);
      ++cursor;
    }
  }
  for (Partition& p : split.partitions) {
    std::sort(p.members.begin(), p.members.end());
    std::vector<std::size_t> per_group(
        static_cast<std::size_t>(data.num_groups()), 0);
    for (std::size_t idx : p.members)
      ++per_group[static_cast<std::size_t>(data[idx].group)];
    for (int g = 0; g < data.num_groups(); ++g)
      if (per_group[static_cast<std::size_t>(g)] == 0)
        split.warnings.push_back({p.index, g});
  }
  return split;
}

// Largest ensemble for which every teacher can receive a sample of the
// smallest group: floor(|D| * min_s p(s)), i.e. the smallest group size.
inline std::size_t MaxTeachers(const LabeledDataset& data) {
  PFGUARD_CHECK(!data.empty(), "max_teachers of an empty dataset");
  const std::vector<std::size_t> counts = GroupCounts(data);
  for (std::size_t g = 0; g < counts.size(); ++g)
    if (counts[g] == 0)
      throw Error("group " + std::to_string(g) + " is empty");
  return *std::min_element(counts.begin(), counts.end());
}

// CSV with header x1,...,xd,y,s and 9 significant digits per feature.
inline void WriteDatasetCsv(std::ostream& out, const LabeledDataset& data) {
  const std::size_t d = data.dim();
  for (std::size_t k = 0; k < d; ++k) out << 'x' << (k + 1) << ',';
  out << "y,s\n";
  char buf[32];
  for (const Sample& s : data.samples()) {
    for (double v : s.features) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << buf << ',';
    }
    out << s.label << ',' << s.group << '\n';
  }
}

// num_classes / num_groups of 0 mean "infer as max + 1".
inline LabeledDataset ReadDatasetCsv(std::istream& in, int num_classes = 0,
                                     int num_groups = 0) {
  std::string line;
  PFGUARD_CHECK(static_cast<bool>(std::getline(in, line)), "missing CSV header");
  std::size_t columns = 1 + static_cast<std::size_t>(
                                std::count(line.begin(), line.end(), ','));
  PFGUARD_CHECK(columns >= 3, "CSV header needs x1,...,xd,y,s");
  const std::size_t d = columns - 2;
  std::vector<Sample> samples;
  int max_y = -1, max_s = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != columns)
      throw Error("CSV row " + std::to_string(row) + " has " +
                  std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(columns));
    Sample s;
    s.features.resize(d);
    try {
      for (std::size_t k = 0; k < d; ++k) s.features[k] = std::stod(fields[k]);
      s.label = std::stoi(fields[d]);
      s.group = std::stoi(fields[d + 1]);
    } catch (const std::exception&) {
      throw Error("CSV row " + std::to_string(row) + " is not numeric");
    }
    max_y = std::max(max_y, s.label);
    max_s = std::max(max_s, s.group);
    samples.push_back(std::move(s));
  }
  if (num_classes == 0) num_classes = std::max(1, max_y + 1);
  if (num_groups == 0) num_groups = std::max(1, max_s + 1);
  return LabeledDataset(std::move(samples), num_classes, num_groups);
}

}  // namespace pfguard

#endif  // PFGUARD_CORE_DATA_HPP_
