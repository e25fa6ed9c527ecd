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

#include "pipeplan/filler.h"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "pipeplan/error.h"

namespace pipeplan {
namespace {

int LayerCount(const ModelProfile& profile, int component) {
  return static_cast<int>(profile.frozen[component].layers.size());
}

// Longest fitting prefix of `component` and the cumulative times of every
// shorter prefix: cum[k] is the time of the first k layers.
std::vector<double> PrefixTimes(const ModelProfile& profile,
                                const FillState& state, int component,
                                double budget, int devices) {
  std::vector<double> cum = {0.0};
  const int layers = LayerCount(profile, component);
  for (int l = state.cursor[component]; l < layers; ++l) {
    const auto t = RemainingLayerTime(profile, state, component, l, devices);
    if (!t || cum.back() + *t > budget) break;
    cum.push_back(cum.back() + *t);
  }
  return cum;
}

void FfcRecurse(const ModelProfile& profile, const FillState& state, size_t i,
                double budget, int devices, std::vector<int>& prefix,
                std::vector<std::vector<int>>& out) {
  const int c = state.ready[i];
  const std::vector<double> cum =
      PrefixTimes(profile, state, c, budget, devices);
  const int k0 = static_cast<int>(cum.size()) - 1;
  if (i + 1 == state.ready.size()) {
    prefix.push_back(k0);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = k0; k >= 0; --k) {
    prefix.push_back(k);
    FfcRecurse(profile, state, i + 1, budget - cum[k], devices, prefix, out);
    prefix.pop_back();
  }
}

// Chosen combination inside one bubble.
struct Choice {
  bool valid = false;
  double time = 0.0;
  int partials = 0;
  size_t candidate = 0;
  int partial_slot = -1;  // index into state.ready
  int64_t partial_samples = 0;
  double partial_time = 0.0;

  // Longer first, then fewer partials, then earlier candidate/slot.
  bool BetterThan(const Choice& o) const {
    if (!o.valid) return true;
    if (time != o.time) return time > o.time;
    return std::make_tuple(partials, candidate, partial_slot) <
           std::make_tuple(o.partials, o.candidate, o.partial_slot);
  }
};

}  // namespace

FillState InitialFillState(const ModelProfile& profile, int64_t batch) {
  FillState state;
  const size_t n = profile.frozen.size();
  state.cursor.assign(n, 0);
  state.completed.assign(n, false);
  for (const auto& c : profile.frozen) {
    state.remaining.emplace_back(c.layers.size(), batch);
  }
  PromoteReady(profile, state);
  return state;
}

void PromoteReady(const ModelProfile& profile, FillState& state) {
  const int n = static_cast<int>(profile.frozen.size());
  for (int c = 0; c < n; ++c) {
    if (state.completed[c]) continue;
    if (std::find(state.ready.begin(), state.ready.end(), c) !=
        state.ready.end()) {
      continue;
    }
    bool ok = true;
    for (const auto& [from, to] : profile.frozen_deps) {
      if (to == c && !state.completed[from]) ok = false;
    }
    if (ok) state.ready.push_back(c);
  }
  std::sort(state.ready.begin(), state.ready.end());
}

std::optional<double> RemainingLayerTime(const ModelProfile& profile,
                                         const FillState& state, int component,
                                         int layer, int devices) {
  const LayerCost& cost = profile.frozen[component].layers[layer];
  const double local = static_cast<double>(state.remaining[component][layer]) /
                       static_cast<double>(devices);
  if (!CostInRange(cost, local)) return std::nullopt;
  return CostAt(cost, CostField::kFwdTime, local);
}

std::vector<std::vector<int>> Ffc(const ModelProfile& profile,
                                  const FillState& state, double budget,
                                  int devices) {
  std::vector<std::vector<int>> out;
  if (state.ready.empty()) {
    out.emplace_back();
    return out;
  }
  std::vector<int> prefix;
  FfcRecurse(profile, state, 0, std::max(budget, 0.0), devices, prefix, out);
  return out;
}

BubbleFill FillBubble(const ModelProfile& profile, FillState& state,
                      const Bubble& bubble, const FillOptions& options) {
  BubbleFill fill;
  fill.bubble = bubble;
  const int d = static_cast<int>(bubble.idle_devices.size());
  const double budget = bubble.duration() - options.setup_overhead;
  if (d == 0 || budget <= 0.0 || state.ready.empty()) return fill;

  const auto candidates = Ffc(profile, state, budget, d);
  std::vector<int64_t> sizes = options.valid_local_batches;
  std::sort(sizes.rbegin(), sizes.rend());

  Choice best;
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    const std::vector<int>& cand = candidates[ci];
    double base = 0.0;
    for (size_t i = 0; i < cand.size(); ++i) {
      const int c = state.ready[i];
      for (int l = state.cursor[c]; l < state.cursor[c] + cand[i]; ++l) {
        base += *RemainingLayerTime(profile, state, c, l, d);
      }
    }
    if (base > budget) continue;
    Choice plain{.valid = true, .time = base, .candidate = ci};
    if (plain.BetterThan(best)) best = plain;
    for (size_t i = 0; i < cand.size(); ++i) {
      const int c = state.ready[i];
      const int layer = state.cursor[c] + cand[i];
      if (layer >= LayerCount(profile, c)) continue;
      const LayerCost& cost = profile.frozen[c].layers[layer];
      const int64_t rem = state.remaining[c][layer];
      // Largest valid size first; the first that fits wins.
      for (int64_t v : sizes) {
        const int64_t b = v * d;
        if (b >= rem) continue;
        const double local = static_cast<double>(v);
        if (!CostInRange(cost, local)) continue;
        const double t = CostAt(cost, CostField::kFwdTime, local);
        if (base + t > budget) continue;
        Choice with{.valid = true,
                    .time = base + t,
                    .partials = 1,
                    .candidate = ci,
                    .partial_slot = static_cast<int>(i),
                    .partial_samples = b,
                    .partial_time = t};
        if (with.BetterThan(best)) best = with;
        break;
      }
    }
  }
  if (!best.valid || best.time <= 0.0) return fill;

  // Apply: components in ready order, each prefix then its partial layer.
  const std::vector<int>& cand = candidates[best.candidate];
  const std::vector<int> ready = state.ready;
  const int64_t batch = options.batch;
  double offset = options.setup_overhead;
  for (size_t i = 0; i < cand.size(); ++i) {
    const int c = ready[i];
    const int lo = state.cursor[c];
    for (int l = lo; l < lo + cand[i]; ++l) {
      const double t = *RemainingLayerTime(profile, state, c, l, d);
      const int64_t rem = state.remaining[c][l];
      fill.runs.push_back({.component = c,
                           .layer = l,
                           .samples = rem,
                           .first_sample = batch - rem,
                           .offset = offset,
                           .time = t});
      offset += t;
      state.remaining[c][l] = 0;
    }
    state.cursor[c] = lo + cand[i];
    if (cand[i] > 0) {
      fill.full_layers.push_back({.component = c, .lo = lo, .hi = lo + cand[i]});
    }
    if (best.partial_slot == static_cast<int>(i)) {
      const int l = state.cursor[c];
      const int64_t rem = state.remaining[c][l];
      PartialAssignment part{.component = c,
                             .layer = l,
                             .samples = best.partial_samples,
                             .first_sample = batch - rem};
      fill.runs.push_back({.component = c,
                           .layer = l,
                           .samples = part.samples,
                           .first_sample = part.first_sample,
                           .offset = offset,
                           .time = best.partial_time,
                           .partial = true});
      offset += best.partial_time;
      state.remaining[c][l] = rem - part.samples;
      fill.partial = part;
    }
    if (state.cursor[c] == LayerCount(profile, c)) state.completed[c] = true;
  }
  state.ready.erase(std::remove_if(state.ready.begin(), state.ready.end(),
                                   [&](int c) { return state.completed[c]; }),
                    state.ready.end());
  fill.fill_time = best.time + options.setup_overhead;
  return fill;
}

FillPlan FillAll(const ModelProfile& profile,
                 const std::vector<Bubble>& bubbles,
                 const FillOptions& options, int tail_devices) {
  if (tail_devices < 1) throw ValidationError("tail needs at least one device");
  FillPlan plan;
  FillState state = InitialFillState(profile, options.batch);
  double total = 0.0;
  double used = 0.0;
  for (size_t i = 0; i < bubbles.size(); ++i) {
    total += bubbles[i].duration();
    if (state.ready.empty()) continue;
    BubbleFill fill = FillBubble(profile, state, bubbles[i], options);
    // Dependents start no earlier than the bubble after their predecessors
    // finish.
    PromoteReady(profile, state);
    if (fill.empty()) continue;
    fill.bubble_index = static_cast<int>(i);
    used += fill.fill_time;
    plan.fills.push_back(std::move(fill));
  }
  plan.residual_bubble_time = total - used;

  for (int c : FrozenTopologicalOrder(profile)) {
    const auto& layers = profile.frozen[c].layers;
    for (int l = state.cursor[c]; l < static_cast<int>(layers.size()); ++l) {
      const int64_t rem = state.remaining[c][l];
      if (rem == 0) continue;
      int devices = tail_devices;
      while (devices >= 1 &&
             !CostInRange(layers[l], static_cast<double>(rem) / devices)) {
        --devices;
      }
      if (devices < 1) {
        std::ostringstream ss;
        ss << "frozen '" << profile.frozen[c].name << "' layer " << l
           << ": no device count in [1, " << tail_devices << "] puts " << rem
           << " samples inside the profiled batch range";
        throw ExtrapolationError(ss.str());
      }
      const double t = CostAt(layers[l], CostField::kFwdTime,
                              static_cast<double>(rem) / devices);
      plan.tail.push_back({.component = c,
                           .layer = l,
                           .samples = rem,
                           .first_sample = options.batch - rem,
                           .devices = devices,
                           .time = t});
      plan.tail_time += t;
    }
  }
  return plan;
}

Schedule ApplyFillPlan(const Schedule& schedule, const FillPlan& plan) {
  Schedule out = schedule;
  for (const BubbleFill& fill : plan.fills) {
    for (const LayerRun& run : fill.runs) {
      const double start = fill.bubble.start + run.offset;
      const double end = std::min(start + run.time, fill.bubble.end);
      for (int dev : fill.bubble.idle_devices) {
        out.tasks.push_back({.device = dev,
                             .kind = TaskKind::kFill,
                             .start = start,
                             .end = end,
                             .component = run.component,
                             .layer = run.layer,
                             .samples = run.samples});
      }
    }
  }
  double t = schedule.makespan;
  for (const TailItem& item : plan.tail) {
    for (int dev = 0; dev < item.devices; ++dev) {
      out.tasks.push_back({.device = dev,
                           .kind = TaskKind::kFill,
                           .start = t,
                           .end = t + item.time,
                           .component = item.component,
                           .layer = item.layer,
                           .samples = item.samples});
    }
    t += item.time;
  }
  out.makespan = std::max(schedule.makespan, t);
  SortTasks(out.tasks);
  return out;
}

double UnfilledTailTime(const ModelProfile& profile, int64_t batch,
                        int tail_devices) {
  FillOptions options;
  options.batch = batch;
  return FillAll(profile, {}, options, tail_devices).tail_time;
}

}  // namespace pipeplan
