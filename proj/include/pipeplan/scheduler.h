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

// Event-driven simulation of FIFO-1F1B pipelines and the idle-time analysis
// built on top of it.
//
// Every device has two lanes. The compute lane runs forward, backward and
// fill tasks one at a time. The communication lane carries point-to-point
// transfers, the self-conditioning feedback and the gradient all-reduce;
// those never block compute and may overlap each other.

#ifndef PIPEPLAN_SCHEDULER_H_
#define PIPEPLAN_SCHEDULER_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "pipeplan/partitioner.h"
#include "pipeplan/profile.h"

namespace pipeplan {

enum class TaskKind { kFwd, kBwd, kFwdSc, kP2p, kFeedback, kSync, kFill };

const char* TaskKindName(TaskKind kind);
std::optional<TaskKind> TaskKindFromName(std::string_view name);

// Compute-lane kinds: fwd, bwd, fwd_sc, fill.
bool IsComputeKind(TaskKind kind);

struct Task {
  int device = 0;
  TaskKind kind = TaskKind::kFwd;
  int micro_batch = -1;
  int stage = -1;  // pipeline stage index within `direction`
  Direction direction = Direction::kDown;
  double start = 0.0;
  double end = 0.0;
  // Transfers: the receiving stage and the compute kind whose output is
  // carried. Unused (-1 / kFwd) for other kinds.
  int peer_stage = -1;
  TaskKind payload = TaskKind::kFwd;
  // Fill tasks: frozen component, layer and number of samples processed.
  int component = -1;
  int layer = -1;
  int64_t samples = 0;

  bool operator==(const Task&) const = default;
};

struct Schedule {
  std::vector<Task> tasks;
  double makespan = 0.0;
  int device_count = 0;

  bool operator==(const Schedule&) const = default;
};

// Canonical task order: device, start, end, kind, direction, stage,
// micro-batch, component, layer.
void SortTasks(std::vector<Task>& tasks);

struct Bubble {
  double start = 0.0;
  double end = 0.0;
  std::vector<int> idle_devices;  // ascending

  double duration() const { return end - start; }
  bool operator==(const Bubble&) const = default;
};

// Single-backbone FIFO-1F1B schedule of `plan`. When `selfcond_active` is
// unset it follows plan.config.selfcond; with self-conditioning every
// micro-batch first runs an extra forward pass whose output is fed back
// from the last stage to the first.
Schedule BuildSchedule(const PartitionPlan& plan, const ModelProfile& profile,
                       const ClusterConfig& cluster,
                       std::optional<bool> selfcond_active = std::nullopt);

// Down and up pipelines sharing device groups, transfers with doubled
// bandwidth term. A plan whose second backbone has no stages reduces to
// BuildSchedule.
Schedule BuildBidirectionalSchedule(const PartitionPlan& plan,
                                    const ModelProfile& profile,
                                    const ClusterConfig& cluster);

// Dispatches on the number of backbones in the plan.
Schedule BuildPlanSchedule(const PartitionPlan& plan,
                           const ModelProfile& profile,
                           const ClusterConfig& cluster,
                           std::optional<bool> selfcond_active = std::nullopt);

// Makespan of a bidirectional pipeline with unit-cost stages (forward and
// backward 0.5 each, no communication), M micro-batches per direction.
double UnitBidirectionalMakespan(int num_stages, int num_microbatches);

inline constexpr double kDefaultBubbleMinLen = 0.010;

// Maximal idle intervals with a constant idle-device set, in chronological
// order. Only compute-lane tasks make a device busy.
std::vector<Bubble> ExtractBubbles(const Schedule& schedule,
                                   double min_len = kDefaultBubbleMinLen);

// sum(duration * |idle|) / (makespan * device_count).
double BubbleRatio(const Schedule& schedule,
                   const std::vector<Bubble>& bubbles);

// Total compute-lane busy time summed over devices.
double BusyTime(const Schedule& schedule);

// Prerequisite edges (pred index, succ index) reconstructed from task
// identities: pipeline order, transfers and the self-conditioning feedback.
std::vector<std::pair<int, int>> DependencyEdges(const Schedule& schedule);

// Chain of tight edges (dependency or same-device compute order) ending at
// the last-finishing compute task, oldest first.
std::vector<int> CriticalPath(const Schedule& schedule);

}  // namespace pipeplan

#endif  // PIPEPLAN_SCHEDULER_H_
