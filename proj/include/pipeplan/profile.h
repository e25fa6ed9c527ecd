// Copyright 2026 The Pipeplan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Cost model of a diffusion-style workload: per-layer compute time and
// transfer sizes of the trainable backbones and the frozen (forward-only)
// components, each sampled at a handful of batch sizes.
//
// Units are fixed across the project: seconds for time, bytes for sizes,
// bytes/second for bandwidth.

#ifndef PIPEPLAN_PROFILE_H_
#define PIPEPLAN_PROFILE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pipeplan {

struct CommCosts {
  double bandwidth_ar = 1.0;   // all-reduce, bytes/s
  double latency_ar = 0.0;     // s
  double bandwidth_p2p = 1.0;  // point-to-point, bytes/s
  double latency_p2p = 0.0;    // s

  bool operator==(const CommCosts&) const = default;
};

struct ClusterConfig {
  int world_size = 1;
  CommCosts comm;

  bool operator==(const ClusterConfig&) const = default;
};

// Throws ValidationError. Bandwidths must be > 0; latencies are allowed to be
// 0 so that analytic test cases can switch communication off entirely.
void ValidateCluster(const ClusterConfig& cluster);

// batch size -> value
using TimeCurve = std::map<int64_t, double>;
using ByteCurve = std::map<int64_t, uint64_t>;

// Cost of one layer. For frozen layers bwd_time is identically zero and the
// transfer/gradient curves are unused by the planner but still carried.
struct LayerCost {
  TimeCurve fwd_time;
  TimeCurve bwd_time;
  ByteCurve fwd_comm_bytes;  // activations sent from this layer to the next
  ByteCurve bwd_comm_bytes;  // gradients sent from the next layer back here
  ByteCurve grad_bytes;
  ByteCurve out_bytes;

  bool operator==(const LayerCost&) const = default;
};

enum class CostField {
  kFwdTime,
  kBwdTime,
  kFwdCommBytes,
  kBwdCommBytes,
  kGradBytes,
  kOutBytes,
};

const char* CostFieldName(CostField field);

// Evaluates one cost curve at `batch`. Profiled keys return the stored value
// exactly; values strictly between two keys are linearly interpolated.
// Batches outside [min key, max key] raise ExtrapolationError.
//
// `batch` is a double because local batch sizes such as B/d are not always
// integral.
double CostAt(const LayerCost& layer, CostField field, double batch);

// True when CostAt(layer, field, batch) would not throw.
bool CostInRange(const LayerCost& layer, double batch);

struct ComponentProfile {
  std::string name;
  std::vector<LayerCost> layers;  // execution order
  bool trainable = false;

  bool operator==(const ComponentProfile&) const = default;
};

// Edge {from, to}: frozen component `from` must complete before `to` starts.
using DependencyEdge = std::pair<int, int>;

struct ModelProfile {
  std::vector<ComponentProfile> backbones;
  std::vector<ComponentProfile> frozen;
  std::vector<DependencyEdge> frozen_deps;
  double selfcond_prob = 0.0;

  bool operator==(const ModelProfile&) const = default;
};

// Checks every invariant of the profile types and throws ValidationError
// naming the violated invariant and the offending component/layer.
void ValidateProfile(const ModelProfile& profile);

// Frozen component indices in dependency order (ties by index). Throws
// ValidationError naming the cycle when frozen_deps is not a DAG.
std::vector<int> FrozenTopologicalOrder(const ModelProfile& profile);

// Profile document (JSON, see docs/profile.schema.json).
ModelProfile ParseProfile(std::string_view text);
std::string SerializeProfile(const ModelProfile& profile);

ModelProfile LoadProfile(const std::filesystem::path& path);
void SaveProfile(const ModelProfile& profile,
                 const std::filesystem::path& path);

}  // namespace pipeplan

#endif  // PIPEPLAN_PROFILE_H_
