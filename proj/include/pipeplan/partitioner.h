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

// Stage partitioning of the trainable backbone(s).
//
// A plan cuts each backbone into S contiguous layer ranges and places them on
// a chain of D devices, stage k replicated on r_k consecutive devices. Plans
// are scored by the critical-path upper bound of a FIFO-1F1B pipeline:
//
//   T_max = (M + 2S - 2) * max_s T0(s) + max(0, max_s (T_sync(s) - T_comp(s)))
//
// with variants for self-conditioning (extra forward pass and a feedback
// transfer) and for two backbones pipelined in opposite directions on the
// same devices.

#ifndef PIPEPLAN_PARTITIONER_H_
#define PIPEPLAN_PARTITIONER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pipeplan/profile.h"

namespace pipeplan {

enum class Direction { kDown, kUp };

const char* DirectionName(Direction d);

struct PlanConfig {
  int num_stages = 1;        // S
  int num_microbatches = 1;  // M
  int group_size = 1;        // D, devices per pipeline group
  // Samples processed by one pipeline group per iteration. With a data
  // parallel degree of world_size / D this is the global batch divided by
  // that degree.
  int64_t global_batch = 1;
  bool selfcond = false;
  double selfcond_prob = 0.0;  // p, used when selfcond is set
  bool equal_replication = true;

  int64_t micro_batch() const { return global_batch / num_microbatches; }

  bool operator==(const PlanConfig&) const = default;
};

// Structural checks: S <= D, M >= 1, global_batch divisible by M, D divides
// the world size, p in [0, 1]. Throws InfeasibleError with the reason.
void ValidatePlanConfig(const PlanConfig& cfg, const ClusterConfig& cluster);

struct StageAssignment {
  int backbone = 0;
  int lo = 0;  // [lo, hi) layer range
  int hi = 0;
  int replicas = 1;
  Direction direction = Direction::kDown;
  int first_device = 0;  // replicas occupy [first_device, first_device + r)

  bool operator==(const StageAssignment&) const = default;
};

struct StageCosts {
  double t0 = 0.0;       // max(compute, comm)
  double t_sync = 0.0;   // gradient all-reduce
  double t_comp = 0.0;   // backward time that hides the sync
  double gap = 0.0;      // t_sync - t_comp, may be negative
  double compute = 0.0;  // compute branch of t0
  double comm = 0.0;     // communication branch of t0

  bool operator==(const StageCosts&) const = default;
};

struct PartitionPlan {
  PlanConfig config;
  // Single backbone: S stages in pipeline order. Two backbones: S down
  // stages (backbone 0) followed by S up stages (backbone 1), each list in
  // its own pipeline order.
  std::vector<StageAssignment> stages;
  std::vector<StageCosts> per_stage;  // parallel to `stages`
  // Minimized value: t_max, or the p-weighted expectation with
  // self-conditioning.
  double objective = 0.0;
  double t_max = 0.0;
  std::optional<double> t_max_sc;
  double feedback_time = 0.0;
  // M for one backbone, M_CDM for two.
  int paired_stage_count = 0;

  bool operator==(const PartitionPlan&) const = default;
};

// Stage of `backbone` covering layers [lo, hi) on `replicas` devices at
// micro-batch `micro_batch` (local batch micro_batch / replicas).
// `p2p_scale` multiplies the bandwidth term of the point-to-point transfers
// (2 for bidirectional pipelines). Boundary transfers are those of layer
// hi - 1 and vanish when hi is the backbone's last layer.
StageCosts StageCostSingle(const ComponentProfile& backbone,
                           const CommCosts& comm, int lo, int hi, int replicas,
                           int64_t micro_batch, bool selfcond,
                           double p2p_scale = 1.0);

// Output transfer of the backbone's last layer back to the first stage.
double FeedbackTime(const ComponentProfile& backbone, const CommCosts& comm,
                    int replicas, int64_t micro_batch);

// p * t_max_sc + (1 - p) * t_max.
double SelfcondObjective(double t_max, double t_max_sc, double p);

// Number of paired forward/backward stage slots on the critical path of a
// bidirectional pipeline with S stages and M micro-batches per direction,
// measured on a simulated schedule with unit-cost stages.
int PairedStageCount(int num_stages, int num_microbatches);

struct PartitionOptions {
  // Replaceable M_CDM estimate; defaults to PairedStageCount.
  std::function<int(int, int)> paired_stage_count;
};

// Bound values of a fully specified partition (no search).
struct PartitionScore {
  double t_max = 0.0;
  std::optional<double> t_max_sc;
  double objective = 0.0;
  double feedback_time = 0.0;
  double max_compute = 0.0;
  std::vector<StageCosts> per_stage;
};

PartitionScore ScorePartition(const ModelProfile& profile,
                              const ClusterConfig& cluster,
                              const PlanConfig& cfg,
                              const std::vector<StageAssignment>& stages,
                              const PartitionOptions& options = {});

// Dynamic program over (layers, stages, devices) for one backbone. With
// cfg.selfcond the expectation p * T_max_SC + (1 - p) * T_max is minimized
// over a single shared partition. Throws InfeasibleError.
PartitionPlan PartitionSingle(const ModelProfile& profile,
                              const ClusterConfig& cluster,
                              const PlanConfig& cfg,
                              const PartitionOptions& options = {});

// Two backbones, backbone 0 pipelined down the device chain and backbone 1
// up; each device group hosts one stage of each. Throws InfeasibleError.
PartitionPlan PartitionBidirectional(const ModelProfile& profile,
                                     const ClusterConfig& cluster,
                                     const PlanConfig& cfg,
                                     const PartitionOptions& options = {});

// Exhaustive enumeration of every contiguous partition and replication split
// (test oracle). Guards: L <= 10 per backbone, S <= 4, D <= 6, otherwise
// OracleTooLargeError.
PartitionPlan BruteForcePartition(const ModelProfile& profile,
                                  const ClusterConfig& cluster,
                                  const PlanConfig& cfg,
                                  const PartitionOptions& options = {});

// Dispatches on the number of backbones.
PartitionPlan Partition(const ModelProfile& profile,
                        const ClusterConfig& cluster, const PlanConfig& cfg,
                        const PartitionOptions& options = {});

}  // namespace pipeplan

#endif  // PIPEPLAN_PARTITIONER_H_
