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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pipeplan/error.h"
#include "oracles.h"
#include "test_util.h"

namespace pipeplan {
namespace {

using testing::Component;
using testing::ConstLayer;
using testing::LinearLayer;
using testing::Near;

ModelProfile FrozenOnly(std::vector<ComponentProfile> frozen,
                        std::vector<DependencyEdge> deps = {}) {
  ModelProfile p = testing::UniformSingle(1, 1.0, 1.0);
  p.frozen = std::move(frozen);
  p.frozen_deps = std::move(deps);
  return p;
}

std::vector<LayerCost> Consts(std::initializer_list<double> times) {
  std::vector<LayerCost> out;
  for (double t : times) out.push_back(ConstLayer(t));
  return out;
}

Bubble MakeBubble(double start, double end, int devices) {
  Bubble b{.start = start, .end = end};
  for (int i = 0; i < devices; ++i) b.idle_devices.push_back(i);
  return b;
}

FillOptions Options(int64_t batch) {
  FillOptions o;
  o.batch = batch;
  return o;
}

// ---------------------------------------------------------------- ffc

TEST(FfcTest, SingleComponentTakesLongestPrefix) {
  const ModelProfile p = FrozenOnly({Component("a", Consts({3, 3, 3}), false)});
  const FillState s = InitialFillState(p, 8);
  EXPECT_EQ(Ffc(p, s, 7.0, 1), (std::vector<std::vector<int>>{{2}}));
}

TEST(FfcTest, TwoComponentsTradeBudget) {
  const ModelProfile p = FrozenOnly({Component("a", Consts({4}), false),
                                     Component("b", Consts({3, 3}), false)});
  const FillState s = InitialFillState(p, 8);
  EXPECT_EQ(Ffc(p, s, 7.0, 1),
            (std::vector<std::vector<int>>{{1, 1}, {0, 2}}));
}

TEST(FfcTest, ZeroBudgetGivesAllZeroCandidate) {
  const ModelProfile p = FrozenOnly({Component("a", Consts({3, 3}), false),
                                     Component("b", Consts({1}), false)});
  const FillState s = InitialFillState(p, 8);
  EXPECT_EQ(Ffc(p, s, 0.0, 1), (std::vector<std::vector<int>>{{0, 0}}));
}

TEST(FfcTest, NoReadyComponentsGivesEmptyCandidate) {
  const ModelProfile p = FrozenOnly({});
  const FillState s = InitialFillState(p, 8);
  EXPECT_EQ(Ffc(p, s, 5.0, 1), (std::vector<std::vector<int>>{{}}));
}

TEST(FfcTest, OutOfRangeLocalBatchStopsThePrefix) {
  // Keys 4..64: 64 samples over 32 devices is a local batch of 2.
  const ModelProfile p = FrozenOnly(
      {Component("a", {ConstLayer(1.0, 0.0, {4, 64})}, false)});
  const FillState s = InitialFillState(p, 64);
  EXPECT_EQ(Ffc(p, s, 10.0, 32), (std::vector<std::vector<int>>{{0}}));
  EXPECT_EQ(Ffc(p, s, 10.0, 4), (std::vector<std::vector<int>>{{1}}));
}

// ---------------------------------------------------------- fill_bubble

TEST(FillBubbleTest, NothingFitsLeavesStateUntouched) {
  const ModelProfile p = FrozenOnly({Component("a", Consts({5, 1}), false)});
  FillState s = InitialFillState(p, 64);
  const FillState before = s;
  const BubbleFill f = FillBubble(p, s, MakeBubble(0, 4, 2), Options(64));
  EXPECT_TRUE(f.empty());
  EXPECT_EQ(f.fill_time, 0.0);
  EXPECT_EQ(s, before);
}

TEST(FillBubbleTest, PartialContinuesInLaterBubbles) {
  const ModelProfile p =
      FrozenOnly({Component("a", {LinearLayer(0.01)}, false)});
  FillState s = InitialFillState(p, 64);
  // 16 samples take 0.16 (up to interpolation rounding).
  BubbleFill f = FillBubble(p, s, MakeBubble(0, 0.16 + 1e-9, 1), Options(64));
  ASSERT_TRUE(f.partial.has_value());
  EXPECT_EQ(f.partial->samples, 16);
  EXPECT_EQ(f.partial->first_sample, 0);
  EXPECT_TRUE(f.full_layers.empty());
  EXPECT_EQ(s.remaining[0][0], 48);
  EXPECT_EQ(s.cursor[0], 0);

  f = FillBubble(p, s, MakeBubble(1, 1.32 + 1e-9, 1), Options(64));
  ASSERT_TRUE(f.partial.has_value());
  EXPECT_EQ(f.partial->samples, 32);
  EXPECT_EQ(f.partial->first_sample, 16);
  EXPECT_EQ(s.remaining[0][0], 16);

  // The rest runs as a full layer on its remaining 16 samples.
  f = FillBubble(p, s, MakeBubble(2, 3, 1), Options(64));
  EXPECT_FALSE(f.partial.has_value());
  ASSERT_EQ(f.runs.size(), 1u);
  EXPECT_EQ(f.runs[0].samples, 16);
  EXPECT_EQ(f.runs[0].first_sample, 48);
  EXPECT_TRUE(Near(f.fill_time, 0.16));
  EXPECT_TRUE(s.completed[0]);
  EXPECT_TRUE(s.ready.empty());
}

TEST(FillBubbleTest, PartialBeatsLongestFullCandidate) {
  // a = {4, 4, 0.05/sample}, b = {5}; budget 10 on one device.
  // Full-only best is a0 + b0 = 9; a0 + a1 + 32 samples of a2 = 9.6.
  const ModelProfile p = FrozenOnly(
      {Component("a", {ConstLayer(4), ConstLayer(4), LinearLayer(0.05)},
                 false),
       Component("b", Consts({5}), false)});
  FillState s = InitialFillState(p, 64);
  const BubbleFill f = FillBubble(p, s, MakeBubble(0, 10, 1), Options(64));
  EXPECT_TRUE(Near(f.fill_time, 9.6));
  ASSERT_TRUE(f.partial.has_value());
  EXPECT_EQ(f.partial->component, 0);
  EXPECT_EQ(f.partial->layer, 2);
  EXPECT_EQ(f.partial->samples, 32);
  EXPECT_EQ(f.full_layers,
            (std::vector<FullRange>{{.component = 0, .lo = 0, .hi = 2}}));
  EXPECT_EQ(s.cursor, (std::vector<int>{2, 0}));
  EXPECT_EQ(s.remaining[0][2], 32);
}

TEST(FillBubbleTest, PartialSamplesScaleWithIdleDevices) {
  const ModelProfile p =
      FrozenOnly({Component("a", {LinearLayer(0.01)}, false)});
  FillState s = InitialFillState(p, 256);
  // Local batch 24 fits (0.24), 32 does not.
  const BubbleFill f = FillBubble(p, s, MakeBubble(0, 0.3, 4), Options(256));
  ASSERT_TRUE(f.partial.has_value());
  EXPECT_EQ(f.partial->samples, 96);
  EXPECT_EQ(s.remaining[0][0], 160);
}

TEST(FillBubbleTest, TiesPreferNoPartial) {
  // Full layer of 2 on the last sample group, or a partial of equal time.
  const ModelProfile p =
      FrozenOnly({Component("a", Consts({2}), false)});
  FillState s = InitialFillState(p, 64);
  const BubbleFill f = FillBubble(p, s, MakeBubble(0, 2, 1), Options(64));
  EXPECT_FALSE(f.partial.has_value());
  EXPECT_TRUE(s.completed[0]);
}

TEST(FillBubbleTest, SetupOverheadReducesBudget) {
  const ModelProfile p = FrozenOnly({Component("a", Consts({1, 1}), false)});
  FillState s = InitialFillState(p, 64);
  FillOptions o = Options(64);
  o.setup_overhead = 0.5;
  const BubbleFill f = FillBubble(p, s, MakeBubble(0, 2, 1), o);
  EXPECT_EQ(s.cursor[0], 1);
  EXPECT_TRUE(Near(f.fill_time, 1.5));
  EXPECT_TRUE(Near(f.runs[0].offset, 0.5));
}

TEST(FillBubbleProperties, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(testing::TestSeed(7));
  const int trials = testing::TestTrials(600);
  int any_prefix_gaps = 0;
  for (int t = 0; t < trials; ++t) {
    testing::RandomProfileOptions opts;
    opts.frozen = std::uniform_int_distribution<int>(1, 3)(rng);
    opts.max_frozen_layers = 5;
    ModelProfile p = testing::RandomProfile(rng, opts);
    p.frozen_deps.clear();
    const int64_t batch = std::vector<int64_t>{16, 64, 128, 256}[t % 4];
    const int d = std::vector<int>{1, 2, 4}[(t / 4) % 3];
    FillState s = testing::RandomFillState(p, batch, rng);
    const double budget =
        std::uniform_real_distribution<double>(0.0, 0.4)(rng);
    const testing::FillOracleResult oracle =
        testing::FillOracle(p, s, budget, d);
    const BubbleFill f = FillBubble(p, s, MakeBubble(0, budget, d),
                                    Options(batch));
    // Same terms, possibly summed in a different order.
    ASSERT_TRUE(Near(f.fill_time, oracle.ffc_best, 1e-12))
        << "trial " << t << ": " << f.fill_time << " vs " << oracle.ffc_best;
    ASSERT_LE(f.fill_time, budget);
    if (oracle.any_prefix_best > oracle.ffc_best) ++any_prefix_gaps;
  }
  RecordProperty("any_prefix_gaps", any_prefix_gaps);
}

TEST(FillBubbleProperties, MonotoneProgress) {
  std::mt19937_64 rng(testing::TestSeed(11));
  for (int t = 0; t < testing::TestTrials(100); ++t) {
    testing::RandomProfileOptions opts;
    opts.frozen = 3;
    opts.max_frozen_layers = 5;
    const ModelProfile p = testing::RandomProfile(rng, opts);
    FillState s = InitialFillState(p, 128);
    for (int b = 0; b < 20 && !s.ready.empty(); ++b) {
      const FillState before = s;
      const double len = std::uniform_real_distribution<double>(0, 0.2)(rng);
      FillBubble(p, s, MakeBubble(0, len, 1 + b % 4), Options(128));
      PromoteReady(p, s);
      for (size_t c = 0; c < p.frozen.size(); ++c) {
        ASSERT_GE(s.cursor[c], before.cursor[c]);
        for (size_t l = 0; l < p.frozen[c].layers.size(); ++l) {
          ASSERT_LE(s.remaining[c][l], before.remaining[c][l]);
        }
        if (before.completed[c]) ASSERT_TRUE(s.completed[c]);
      }
    }
  }
}

// ------------------------------------------------------------- fill_all

TEST(FillAllTest, NoFrozenComponents) {
  const ModelProfile p = FrozenOnly({});
  const FillPlan plan =
      FillAll(p, {MakeBubble(0, 1, 1), MakeBubble(2, 3, 2)}, Options(8), 2);
  EXPECT_TRUE(plan.fills.empty());
  EXPECT_TRUE(plan.tail.empty());
  EXPECT_EQ(plan.tail_time, 0.0);
  EXPECT_TRUE(Near(plan.residual_bubble_time, 2.0));
}

TEST(FillAllTest, DependentStartsAfterPredecessorCompletes) {
  // a needs three bubbles of length 1 (three layers of 1); b depends on a.
  const ModelProfile p =
      FrozenOnly({Component("a", Consts({1, 1, 1}), false),
                  Component("b", Consts({0.5, 0.5}), false)},
                 {{0, 1}});
  std::vector<Bubble> bubbles;
  for (int i = 0; i < 5; ++i) bubbles.push_back(MakeBubble(2 * i, 2 * i + 1, 1));
  const FillPlan plan = FillAll(p, bubbles, Options(8), 1);
  int a_last = -1;
  int b_first = 1 << 30;
  for (const BubbleFill& f : plan.fills) {
    for (const LayerRun& r : f.runs) {
      if (r.component == 0) a_last = std::max(a_last, f.bubble_index);
      if (r.component == 1) b_first = std::min(b_first, f.bubble_index);
    }
  }
  EXPECT_EQ(a_last, 2);
  EXPECT_EQ(b_first, 3);
  EXPECT_TRUE(plan.tail.empty());
}

TEST(FillAllTest, SaturatedBubblesLeaveLessThanOneLayer) {
  // Batch-independent layer time 0.3: any residual of 0.3 or more would
  // still fit a layer.
  const ModelProfile p = FrozenOnly(
      {Component("a", std::vector<LayerCost>(40, ConstLayer(0.3)), false)});
  std::mt19937_64 rng(3);
  std::vector<Bubble> bubbles;
  double t = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double len = std::uniform_real_distribution<double>(0.3, 1.7)(rng);
    bubbles.push_back(MakeBubble(t, t + len, 1 + i % 3));
    t += len + 1.0;
  }
  const FillPlan plan = FillAll(p, bubbles, Options(96), 3);
  EXPECT_EQ(plan.fills.size(), bubbles.size());
  EXPECT_FALSE(plan.tail.empty());
  EXPECT_LT(plan.residual_bubble_time, 0.3 * bubbles.size());
  for (const BubbleFill& f : plan.fills) {
    EXPECT_LT(f.bubble.duration() - f.fill_time, 0.3);
  }
}

TEST(FillAllTest, TailFallsBackToFewerDevices) {
  // Keys 16..64: 48 samples over 4 devices is 12 per device (too small),
  // over 3 devices it is 16.
  const ModelProfile p = FrozenOnly(
      {Component("a", {ConstLayer(1.0, 0.0, {16, 64})}, false)});
  const FillPlan plan = FillAll(p, {}, Options(48), 4);
  ASSERT_EQ(plan.tail.size(), 1u);
  EXPECT_EQ(plan.tail[0].devices, 3);
  EXPECT_EQ(plan.tail[0].samples, 48);
}

TEST(FillAllTest, TailOutsideProfileThrows) {
  const ModelProfile p = FrozenOnly(
      {Component("a", {ConstLayer(1.0, 0.0, {16, 64})}, false)});
  EXPECT_THROW(FillAll(p, {}, Options(8), 4), ExtrapolationError);
}

TEST(FillAllTest, UnfilledTailTimeSumsEveryLayer) {
  const ModelProfile p =
      FrozenOnly({Component("a", {LinearLayer(0.01), LinearLayer(0.02)}, false),
                  Component("b", {LinearLayer(0.03)}, false)});
  // 64 samples over 4 devices: 16 * (0.01 + 0.02 + 0.03).
  EXPECT_TRUE(Near(UnfilledTailTime(p, 64, 4), 0.96));
}

TEST(ApplyFillPlanTest, StampsFillsAndAppendsTail) {
  const ModelProfile p =
      FrozenOnly({Component("a", Consts({1, 1, 1}), false)});
  Schedule sched;
  sched.device_count = 2;
  sched.makespan = 5.0;
  sched.tasks.push_back({.device = 0, .kind = TaskKind::kFwd, .start = 0,
                         .end = 5});
  const FillPlan plan = FillAll(p, {MakeBubble(1, 2.5, 1)}, Options(8), 2);
  const Schedule out = ApplyFillPlan(sched, plan);
  int fills = 0;
  for (const Task& t : out.tasks) {
    if (t.kind != TaskKind::kFill) continue;
    ++fills;
    EXPECT_EQ(t.samples, 8);
  }
  // One layer in the bubble on device 0; two tail layers on 2 devices.
  EXPECT_EQ(fills, 1 + 2 * 2);
  EXPECT_TRUE(Near(out.makespan, 7.0));
  EXPECT_TRUE(std::is_sorted(out.tasks.begin(), out.tasks.end(),
                             [](const Task& a, const Task& b) {
                               return a.device < b.device;
                             }));
}

TEST(FillAllProperties, CoverageCapacityAndOrder) {
  std::mt19937_64 rng(testing::TestSeed(21));
  for (int t = 0; t < testing::TestTrials(200); ++t) {
    testing::RandomProfileOptions opts;
    opts.frozen = std::uniform_int_distribution<int>(1, 4)(rng);
    opts.max_frozen_layers = 6;
    const ModelProfile p = testing::RandomProfile(rng, opts);
    const int64_t batch = std::vector<int64_t>{32, 64, 128, 256}[t % 4];
    std::vector<Bubble> bubbles;
    double at = 0.0;
    const int nb = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int i = 0; i < nb; ++i) {
      const double len = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
      bubbles.push_back(MakeBubble(at, at + len, 1 + (i * 7 + t) % 4));
      at += len + 0.1;
    }
    const FillPlan plan = FillAll(p, bubbles, Options(batch), 4);
    ASSERT_EQ(testing::CheckFillPlan(p, plan, batch), "");
    double total = 0.0;
    double used = 0.0;
    for (const Bubble& b : bubbles) total += b.duration();
    for (const BubbleFill& f : plan.fills) used += f.fill_time;
    ASSERT_TRUE(Near(plan.residual_bubble_time, total - used, 1e-9) ||
                std::abs(plan.residual_bubble_time - (total - used)) < 1e-12);
  }
}

}  // namespace
}  // namespace pipeplan
