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

#include "pipeplan/scheduler.h"

#include <algorithm>
#include <map>
#include <random>

#include "gtest/gtest.h"
#include "pipeplan/error.h"
#include "test_util.h"

namespace pipeplan {
namespace {

using ::pipeplan::testing::Component;
using ::pipeplan::testing::Config;
using ::pipeplan::testing::ConstLayer;
using ::pipeplan::testing::RandomCluster;
using ::pipeplan::testing::RandomProfile;
using ::pipeplan::testing::RandomProfileOptions;
using ::pipeplan::testing::UniformSingle;
using ::pipeplan::testing::ZeroComm;

// One layer per stage, one device per stage.
struct Uniform {
  ModelProfile profile;
  PartitionPlan plan;
  ClusterConfig cluster;
};

Uniform MakeUniform(int s, int m, double tf, double tb) {
  Uniform u;
  u.profile = UniformSingle(s, tf, tb);
  u.cluster = ZeroComm(s);
  u.plan = PartitionSingle(u.profile, u.cluster, Config(s, m, s, m));
  return u;
}

int CountCompute(const Schedule& sched, const std::vector<int>& path) {
  return static_cast<int>(std::count_if(path.begin(), path.end(), [&](int i) {
    const TaskKind k = sched.tasks[i].kind;
    return k == TaskKind::kFwd || k == TaskKind::kBwd || k == TaskKind::kFwdSc;
  }));
}

void ExpectNoOverlap(const Schedule& sched) {
  std::map<int, std::vector<std::pair<double, double>>> lanes;
  for (const Task& t : sched.tasks) {
    EXPECT_GE(t.end, t.start);
    if (IsComputeKind(t.kind)) lanes[t.device].push_back({t.start, t.end});
  }
  for (auto& [dev, spans] : lanes) {
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i) {
      EXPECT_LE(spans[i - 1].second, spans[i].first) << "device " << dev;
    }
  }
}

void ExpectDependenciesHold(const Schedule& sched) {
  const auto edges = DependencyEdges(sched);
  for (const auto& [a, b] : edges) {
    EXPECT_LE(sched.tasks[a].end, sched.tasks[b].start)
        << TaskKindName(sched.tasks[a].kind) << " -> "
        << TaskKindName(sched.tasks[b].kind);
  }
}

void ExpectWorkConservation(const Schedule& sched) {
  const double idle = BubbleRatio(sched, ExtractBubbles(sched, 0.0)) *
                      sched.makespan * sched.device_count;
  EXPECT_NEAR(BusyTime(sched) + idle, sched.makespan * sched.device_count,
              1e-9 * std::max(1.0, sched.makespan * sched.device_count));
}

TEST(BuildScheduleTest, SingleStageBackToBack) {
  ModelProfile p = UniformSingle(1, 2.0, 4.0);
  const PartitionPlan plan = PartitionSingle(p, ZeroComm(1), Config(1, 2, 1, 2));
  const Schedule sched = BuildSchedule(plan, p, ZeroComm(1));
  EXPECT_EQ(sched.makespan, 12.0);
  EXPECT_TRUE(ExtractBubbles(sched, 0.0).empty());
  EXPECT_EQ(BubbleRatio(sched, ExtractBubbles(sched, 0.0)), 0.0);
}

TEST(BuildScheduleTest, TwoStagesTwoMicroBatches) {
  const Uniform u = MakeUniform(2, 2, 1.0, 1.0);
  EXPECT_EQ(BuildSchedule(u.plan, u.profile, u.cluster).makespan, 6.0);
}

TEST(BuildScheduleTest, AnalyticIdentities) {
  for (double tb : {1.0, 2.0}) {
    for (int s : {2, 3, 4, 8}) {
      for (int m : {2, 4, 8, 16}) {
        const Uniform u = MakeUniform(s, m, 1.0, tb);
        const Schedule sched = BuildSchedule(u.plan, u.profile, u.cluster);
        EXPECT_NEAR(sched.makespan, (m + s - 1) * (1.0 + tb), 1e-12)
            << s << "," << m;
        const double ratio = BubbleRatio(sched, ExtractBubbles(sched, 0.0));
        EXPECT_NEAR(ratio, (s - 1.0) / (m + s - 1.0), 1e-12) << s << "," << m;
        for (int d = 0; d < s; ++d) {
          double busy = 0.0;
          for (const Task& t : sched.tasks) {
            if (t.device == d && IsComputeKind(t.kind)) busy += t.end - t.start;
          }
          EXPECT_NEAR(busy, m * (1.0 + tb), 1e-12);
        }
        EXPECT_EQ(CountCompute(sched, CriticalPath(sched)), 2 * (m + s - 1))
            << s << "," << m;
      }
    }
  }
}

TEST(BuildScheduleTest, StablePhaseAlternates) {
  const Uniform u = MakeUniform(4, 8, 1.0, 1.0);
  const Schedule sched = BuildSchedule(u.plan, u.profile, u.cluster);
  for (int d = 0; d < 4; ++d) {
    std::vector<TaskKind> order;
    for (const Task& t : sched.tasks) {
      if (t.device == d && IsComputeKind(t.kind)) order.push_back(t.kind);
    }
    // Warm-up of 4 - d forwards, then strict alternation.
    const int warm = 4 - d;
    for (int i = 0; i < warm; ++i) EXPECT_EQ(order[i], TaskKind::kFwd);
    for (size_t i = warm; i + 1 < order.size() && i < 16u - warm; ++i) {
      EXPECT_NE(order[i], order[i + 1]) << "device " << d << " slot " << i;
    }
  }
}

TEST(ExtractBubblesTest, FirstBubbleOfFourStagePipeline) {
  const Uniform u = MakeUniform(4, 4, 1.0, 2.0);
  const Schedule sched = BuildSchedule(u.plan, u.profile, u.cluster);
  const auto bubbles = ExtractBubbles(sched, 0.0);
  ASSERT_FALSE(bubbles.empty());
  EXPECT_EQ(bubbles[0].start, 0.0);
  EXPECT_EQ(bubbles[0].end, 1.0);
  EXPECT_EQ(bubbles[0].idle_devices, (std::vector<int>{1, 2, 3}));
  for (size_t i = 1; i < bubbles.size(); ++i) {
    EXPECT_LE(bubbles[i - 1].start, bubbles[i].start);
  }
}

TEST(ExtractBubblesTest, ShortGapDropped) {
  Schedule sched;
  sched.device_count = 1;
  sched.tasks = {{.device = 0, .kind = TaskKind::kFwd, .start = 0.0, .end = 1.0},
                 {.device = 0, .kind = TaskKind::kBwd, .start = 1.005, .end = 2.0}};
  sched.makespan = 2.0;
  EXPECT_TRUE(ExtractBubbles(sched, 0.010).empty());
  const auto all = ExtractBubbles(sched, 0.0);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_NEAR(all[0].duration(), 0.005, 1e-15);
}

TEST(ExtractBubblesTest, CommunicationDoesNotOccupyDevice) {
  Schedule sched;
  sched.device_count = 2;
  sched.tasks = {{.device = 0, .kind = TaskKind::kFwd, .start = 0.0, .end = 1.0},
                 {.device = 0, .kind = TaskKind::kSync, .start = 1.0, .end = 3.0},
                 {.device = 1, .kind = TaskKind::kFwd, .start = 0.0, .end = 3.0}};
  sched.makespan = 3.0;
  const auto bubbles = ExtractBubbles(sched, 0.0);
  ASSERT_EQ(bubbles.size(), 1u);
  EXPECT_EQ(bubbles[0].start, 1.0);
  EXPECT_EQ(bubbles[0].end, 3.0);
  EXPECT_EQ(bubbles[0].idle_devices, std::vector<int>{0});
}

TEST(ExtractBubblesTest, MaximalAndConstantIdleSet) {
  const Uniform u = MakeUniform(3, 3, 1.0, 1.0);
  const Schedule sched = BuildSchedule(u.plan, u.profile, u.cluster);
  const auto bubbles = ExtractBubbles(sched, 0.0);
  for (size_t i = 1; i < bubbles.size(); ++i) {
    // Adjacent bubbles never share their idle set (they would have merged).
    if (bubbles[i - 1].end == bubbles[i].start) {
      EXPECT_NE(bubbles[i - 1].idle_devices, bubbles[i].idle_devices);
    }
  }
  for (const Bubble& b : bubbles) {
    for (int d : b.idle_devices) {
      for (const Task& t : sched.tasks) {
        if (t.device != d || !IsComputeKind(t.kind)) continue;
        EXPECT_TRUE(t.end <= b.start || t.start >= b.end);
      }
    }
  }
}

TEST(BidirectionalScheduleTest, BeatsSequentialExecution) {
  ModelProfile p;
  p.backbones.push_back(
      Component("down", {ConstLayer(0.5, 0.5), ConstLayer(0.5, 0.5)}, true));
  p.backbones.push_back(
      Component("up", {ConstLayer(0.5, 0.5), ConstLayer(0.5, 0.5)}, true));
  const PartitionPlan plan =
      PartitionBidirectional(p, ZeroComm(2), Config(2, 2, 2, 2));
  const Schedule sched = BuildBidirectionalSchedule(plan, p, ZeroComm(2));
  const double sequential = 2 * (2 + 2 - 1) * 1.0;
  EXPECT_LT(sched.makespan, sequential);
  ExpectNoOverlap(sched);
  ExpectDependenciesHold(sched);
  ExpectWorkConservation(sched);
}

TEST(BidirectionalScheduleTest, EmptyUpDirectionReduces) {
  const Uniform u = MakeUniform(3, 4, 1.0, 2.0);
  EXPECT_EQ(BuildBidirectionalSchedule(u.plan, u.profile, u.cluster),
            BuildSchedule(u.plan, u.profile, u.cluster));
}

TEST(BidirectionalScheduleTest, SymmetricFourStages) {
  ModelProfile p;
  p.backbones.push_back(Component(
      "down", std::vector<LayerCost>(4, ConstLayer(0.5, 0.5)), true));
  p.backbones.push_back(
      Component("up", std::vector<LayerCost>(4, ConstLayer(0.5, 0.5)), true));
  const PartitionPlan plan =
      PartitionBidirectional(p, ZeroComm(4), Config(4, 4, 4, 4));
  const Schedule sched = BuildBidirectionalSchedule(plan, p, ZeroComm(4));
  EXPECT_EQ(sched.makespan, UnitBidirectionalMakespan(4, 4));
  // Mirror symmetry: device d and device 3 - d idle equally long.
  std::vector<double> idle(4, 0.0);
  for (const Bubble& b : ExtractBubbles(sched, 0.0)) {
    for (int d : b.idle_devices) idle[d] += b.duration();
  }
  EXPECT_DOUBLE_EQ(idle[0], idle[3]);
  EXPECT_DOUBLE_EQ(idle[1], idle[2]);
  // Interleaving two directions idles less than one 1F1B pipeline carrying
  // both workloads back to back.
  double total = 0.0;
  for (double v : idle) total += v;
  EXPECT_LT(total, 2 * 4 * 3 * 1.0);
  ExpectDependenciesHold(sched);
}

TEST(ScheduleProperties, RandomPlans) {
  std::mt19937_64 rng(::pipeplan::testing::TestSeed(99));
  const int trials = ::pipeplan::testing::TestTrials(200);
  int checked = 0;
  for (int trial = 0; trial < trials; ++trial) {
    RandomProfileOptions opts;
    opts.backbones = trial % 4 == 3 ? 2 : 1;
    opts.min_layers = 1;
    opts.max_layers = 8;
    const ModelProfile p = RandomProfile(rng, opts);
    int min_layers = 100;
    for (const auto& b : p.backbones) {
      min_layers = std::min<int>(min_layers, b.layers.size());
    }
    const int s =
        std::uniform_int_distribution<int>(1, std::min(4, min_layers))(rng);
    const int d = std::uniform_int_distribution<int>(s, 6)(rng);
    const int m = 1 << std::uniform_int_distribution<int>(0, 4)(rng);
    PlanConfig cfg = Config(s, m, d, 16 * 12);
    cfg.equal_replication = trial % 2 == 0;
    cfg.selfcond = opts.backbones == 1 && trial % 3 == 0;
    cfg.selfcond_prob = 0.5;
    const ClusterConfig cluster = RandomCluster(rng, d);
    PartitionPlan plan;
    try {
      plan = Partition(p, cluster, cfg);
    } catch (const InfeasibleError&) {
      continue;
    }
    std::vector<Schedule> variants;
    if (cfg.selfcond) {
      const Schedule sc = BuildSchedule(plan, p, cluster, true);
      const Schedule plain = BuildSchedule(plan, p, cluster, false);
      EXPECT_LE(sc.makespan, *plan.t_max_sc * (1 + 1e-12)) << trial;
      EXPECT_LE(plain.makespan, plan.t_max * (1 + 1e-12)) << trial;
      variants = {sc, plain};
    } else {
      const Schedule sched = BuildPlanSchedule(plan, p, cluster);
      EXPECT_LE(sched.makespan, plan.objective * (1 + 1e-12))
          << trial << " S=" << s << " M=" << m << " D=" << d;
      variants = {sched};
    }
    for (const Schedule& sched : variants) {
      ExpectNoOverlap(sched);
      ExpectDependenciesHold(sched);
      ExpectWorkConservation(sched);
      double max_end = 0.0;
      for (const Task& t : sched.tasks) max_end = std::max(max_end, t.end);
      EXPECT_EQ(sched.makespan, max_end);
    }
    ++checked;
  }
  EXPECT_GT(checked, trials / 2);
}

TEST(CriticalPathTest, SelfcondChainIncludesFeedback) {
  ModelProfile p = UniformSingle(2, 1.0, 1.0);
  PlanConfig cfg = Config(2, 2, 2, 2);
  cfg.selfcond = true;
  const PartitionPlan plan = PartitionSingle(p, ZeroComm(2), cfg);
  const Schedule sched = BuildSchedule(plan, p, ZeroComm(2));
  ExpectDependenciesHold(sched);
  bool has_feedback = false;
  for (const Task& t : sched.tasks) {
    has_feedback |= t.kind == TaskKind::kFeedback;
  }
  EXPECT_TRUE(has_feedback);
  EXPECT_GT(CountCompute(sched, CriticalPath(sched)), 2 * (2 + 2 - 1));
}

TEST(TaskKindTest, NamesRoundTrip) {
  for (TaskKind k : {TaskKind::kFwd, TaskKind::kBwd, TaskKind::kFwdSc,
                     TaskKind::kP2p, TaskKind::kFeedback, TaskKind::kSync,
                     TaskKind::kFill}) {
    EXPECT_EQ(TaskKindFromName(TaskKindName(k)), k);
  }
  EXPECT_FALSE(TaskKindFromName("nope").has_value());
}

}  // namespace
}  // namespace pipeplan
