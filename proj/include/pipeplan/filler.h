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

// Packs the forward-only work of frozen components into pipeline bubbles.
//
// Bubbles are visited in chronological order. Each one receives, per ready
// component, a prefix of its not-yet-run layers on the full remaining batch,
// plus at most one layer on a partial batch. Work that does not fit anywhere
// runs after the pipeline drains (the tail). The frozen work placed in one
// iteration's bubbles belongs to the next iteration, so filling never changes
// the amount of work, only where it runs.

#ifndef PIPEPLAN_FILLER_H_
#define PIPEPLAN_FILLER_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "pipeplan/profile.h"
#include "pipeplan/scheduler.h"

namespace pipeplan {

// Per-device sample counts a partial-batch layer may run at.
inline const std::vector<int64_t>& DefaultValidLocalBatches() {
  static const std::vector<int64_t> kSizes = {4, 8, 12, 16, 24, 32, 48, 64, 96};
  return kSizes;
}

struct FillOptions {
  int64_t batch = 1;  // samples per frozen layer per iteration
  // Charged once per non-empty bubble fill; reduces the usable budget.
  double setup_overhead = 0.0;
  std::vector<int64_t> valid_local_batches = DefaultValidLocalBatches();
};

struct FillState {
  std::vector<int> ready;  // ascending component indices, not completed
  std::vector<int> cursor;  // per component: first layer with work left
  std::vector<std::vector<int64_t>> remaining;  // per component, per layer
  std::vector<bool> completed;

  bool operator==(const FillState&) const = default;
};

// All layers at `batch` remaining, components without predecessors ready.
FillState InitialFillState(const ModelProfile& profile, int64_t batch);

// Adds every component whose predecessors are all completed to `ready`.
void PromoteReady(const ModelProfile& profile, FillState& state);

// Time of the cursor-relative layer run on its whole remaining batch spread
// over d devices; nullopt when that local batch is outside the profile.
std::optional<double> RemainingLayerTime(const ModelProfile& profile,
                                         const FillState& state, int component,
                                         int layer, int devices);

// Full-batch candidates: prefix lengths, one per entry of state.ready, in
// the order the recursion produces them (largest first prefix first). The
// last ready component always takes its longest fitting prefix.
std::vector<std::vector<int>> Ffc(const ModelProfile& profile,
                                  const FillState& state, double budget,
                                  int devices);

struct PartialAssignment {
  int component = 0;
  int layer = 0;
  int64_t samples = 0;       // b, a multiple of the idle-device count
  int64_t first_sample = 0;  // sample range [first, first + b)

  bool operator==(const PartialAssignment&) const = default;
};

// One layer execution inside a bubble, replicated over its idle devices.
struct LayerRun {
  int component = 0;
  int layer = 0;
  int64_t samples = 0;  // across all idle devices
  int64_t first_sample = 0;
  double offset = 0.0;  // from bubble start
  double time = 0.0;
  bool partial = false;

  bool operator==(const LayerRun&) const = default;
};

struct FullRange {
  int component = 0;
  int lo = 0;  // [lo, hi) layers run on their whole remaining batch
  int hi = 0;

  bool operator==(const FullRange&) const = default;
};

struct BubbleFill {
  int bubble_index = 0;
  Bubble bubble;
  std::vector<FullRange> full_layers;  // non-empty ranges only
  std::optional<PartialAssignment> partial;
  double fill_time = 0.0;  // includes setup_overhead when non-empty
  std::vector<LayerRun> runs;

  bool empty() const { return runs.empty(); }
  bool operator==(const BubbleFill&) const = default;
};

// Chooses the longest (candidate, optional partial) combination that fits
// the bubble and applies it to `state`. Ties: fewer partial layers, then
// earlier candidate order, then lower partial component.
BubbleFill FillBubble(const ModelProfile& profile, FillState& state,
                      const Bubble& bubble, const FillOptions& options);

struct TailItem {
  int component = 0;
  int layer = 0;
  int64_t samples = 0;
  int64_t first_sample = 0;
  int devices = 1;
  double time = 0.0;

  bool operator==(const TailItem&) const = default;
};

struct FillPlan {
  std::vector<BubbleFill> fills;  // chronological, empty fills omitted
  std::vector<TailItem> tail;     // dependency order
  double tail_time = 0.0;
  // Sum over visited bubbles of (duration - fill_time).
  double residual_bubble_time = 0.0;

  bool operator==(const FillPlan&) const = default;
};

// Fills `bubbles` (chronological) and sends the rest to the tail, which runs
// on up to `tail_devices` devices (the pipeline group). Throws
// ExtrapolationError when a tail layer has no profiled local batch.
FillPlan FillAll(const ModelProfile& profile,
                 const std::vector<Bubble>& bubbles,
                 const FillOptions& options, int tail_devices);

// The schedule with fill tasks stamped on each fill's idle devices and the
// tail appended after the makespan on devices [0, item.devices).
Schedule ApplyFillPlan(const Schedule& schedule, const FillPlan& plan);

// Frozen forward time of one iteration run entirely after the pipeline
// (no filling), as FillAll would place it with no bubbles.
double UnfilledTailTime(const ModelProfile& profile, int64_t batch,
                        int tail_devices);

}  // namespace pipeplan

#endif  // PIPEPLAN_FILLER_H_
