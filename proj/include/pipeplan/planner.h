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

// Grid search over (stages, micro-batches, group size), plan reports and
// their on-disk forms.
//
// Every grid point is partitioned, simulated, filled and scored on its own;
// the point with the smallest predicted iteration time wins. Feasibility is
// purely structural: there is no memory model.

#ifndef PIPEPLAN_PLANNER_H_
#define PIPEPLAN_PLANNER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pipeplan/filler.h"
#include "pipeplan/partitioner.h"
#include "pipeplan/profile.h"
#include "pipeplan/scheduler.h"

namespace pipeplan {

struct SearchSpace {
  // Empty lists select the default grid: every D dividing the world size,
  // S dividing D (any S <= D with unequal replication), M in {1,2,4,8,16}.
  std::vector<int> stage_counts;
  std::vector<int> microbatch_counts;
  std::vector<int> group_sizes;
  int64_t global_batch = 1;  // samples per iteration across all groups
  bool equal_replication = true;

  bool operator==(const SearchSpace&) const = default;
};

struct SearchOptions {
  double bubble_min_len = kDefaultBubbleMinLen;
  double fill_setup_overhead = 0.0;
  // Overrides the profile's self-conditioning probability. p > 0 turns the
  // self-conditioning cost model on.
  std::optional<double> selfcond_prob;
  int threads = 0;  // 0: hardware concurrency
  PartitionOptions partition;
};

// One grid point, in (S, M, D) order.
struct PointResult {
  int num_stages = 0;
  int num_microbatches = 0;
  int group_size = 0;
  bool feasible = false;
  double predicted_iter_time = 0.0;  // when feasible
  std::string reason;                // when not

  bool operator==(const PointResult&) const = default;
};

struct PlanReport {
  int world_size = 1;
  CommCosts comm;
  int64_t global_batch = 1;
  double bubble_min_len = kDefaultBubbleMinLen;
  PartitionPlan plan;
  // Filled schedule of an iteration without the self-conditioning pass
  // (tail included). Present unless p = 1.
  std::optional<Schedule> schedule;
  std::optional<FillPlan> fill;
  // Same for an iteration with the self-conditioning pass, when p > 0.
  std::optional<Schedule> selfcond_schedule;
  std::optional<FillPlan> selfcond_fill;
  // Expectations over the two iteration kinds, weighted by p.
  double pipeline_makespan = 0.0;  // before filling, tail excluded
  double predicted_iter_time = 0.0;
  double bubble_ratio_before = 0.0;
  double bubble_ratio_after = 0.0;
  double throughput = 0.0;  // samples per second, all groups
  std::vector<PointResult> diagnostics;

  int data_parallel() const { return world_size / plan.config.group_size; }
  bool operator==(const PlanReport&) const = default;
};

// Evaluates one grid point. Throws InfeasibleError (or the error of the
// failing stage) when the point cannot be planned.
PlanReport EvaluatePoint(const ModelProfile& profile,
                         const ClusterConfig& cluster, int num_stages,
                         int num_microbatches, int group_size,
                         int64_t global_batch, bool equal_replication,
                         const SearchOptions& options = {});

// The grid points in evaluation and tie-break order.
std::vector<PointResult> ExpandSpace(const SearchSpace& space,
                                     const ClusterConfig& cluster);

// Best report over the space; diagnostics list every point. Throws
// NoFeasiblePlanError naming each point's failure when nothing is feasible.
PlanReport Search(const ModelProfile& profile, const ClusterConfig& cluster,
                  const SearchSpace& space, const SearchOptions& options = {});

// Plan document (JSON, see docs/plan-format.md). Byte-identical for equal
// reports.
std::string EmitPlan(const PlanReport& report);
PlanReport ParsePlan(std::string_view text);
void SavePlan(const PlanReport& report, const std::filesystem::path& path);
PlanReport LoadPlan(const std::filesystem::path& path);

// Chrome trace event document: one complete event per task, one process per
// device with compute and communication threads.
std::string EmitTrace(const PlanReport& report);
void SaveTrace(const PlanReport& report, const std::filesystem::path& path);

}  // namespace pipeplan

#endif  // PIPEPLAN_PLANNER_H_
