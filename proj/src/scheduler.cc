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
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "pipeplan/error.h"

namespace pipeplan {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StageTimes {
  double fwd = 0.0;
  double bwd = 0.0;
  double p2p_fwd = 0.0;  // activations to stage s + 1
  double p2p_bwd = 0.0;  // gradients from stage s + 1 back to s
  double sync = 0.0;
  int first_device = 0;
  int replicas = 1;
};

struct PipelineSpec {
  Direction direction = Direction::kDown;
  std::vector<StageTimes> stages;
};

struct SimInput {
  int num_microbatches = 1;
  bool selfcond = false;
  double feedback = 0.0;
  int device_count = 0;
  std::vector<PipelineSpec> pipes;
};

struct Edge {
  int node = 0;
  double delay = 0.0;
  TaskKind transfer = TaskKind::kP2p;  // kP2p or kFeedback when delay is a transfer
  bool is_transfer = false;
};

struct Node {
  TaskKind kind = TaskKind::kFwd;
  int pipe = 0;
  int stage = 0;
  int mb = 0;
  int executor = 0;
  double duration = 0.0;
  std::vector<Edge> succs;
  int pending = 0;
  double ready = 0.0;
  bool done = false;
  double start = 0.0;
};

class Simulator {
 public:
  explicit Simulator(const SimInput& in) : in_(in) {}

  Schedule Run() {
    Build();
    Dispatch();
    return Emit();
  }

 private:
  int Id(int p, int m, int s, TaskKind kind) const {
    const int per_stage = in_.selfcond ? 3 : 2;
    int k = kind == TaskKind::kFwd ? 0 : kind == TaskKind::kBwd ? 1 : 2;
    return offsets_[p] + (m * static_cast<int>(in_.pipes[p].stages.size()) + s) *
                             per_stage + k;
  }

  void AddEdge(int from, int to, double delay, bool transfer,
               TaskKind kind = TaskKind::kP2p) {
    nodes_[from].succs.push_back(
        {.node = to, .delay = delay, .transfer = kind, .is_transfer = transfer});
    ++nodes_[to].pending;
  }

  void Build() {
    const int per_stage = in_.selfcond ? 3 : 2;
    int total = 0;
    for (const auto& pipe : in_.pipes) {
      offsets_.push_back(total);
      total += in_.num_microbatches * static_cast<int>(pipe.stages.size()) *
               per_stage;
    }
    nodes_.resize(total);
    for (size_t p = 0; p < in_.pipes.size(); ++p) {
      const auto& stages = in_.pipes[p].stages;
      const int n = static_cast<int>(stages.size());
      for (int m = 0; m < in_.num_microbatches; ++m) {
        for (int s = 0; s < n; ++s) {
          const StageTimes& st = stages[s];
          auto init = [&](TaskKind kind, double dur) {
            Node& node = nodes_[Id(p, m, s, kind)];
            node.kind = kind;
            node.pipe = static_cast<int>(p);
            node.stage = s;
            node.mb = m;
            node.executor = st.first_device;
            node.duration = dur;
          };
          init(TaskKind::kFwd, st.fwd);
          init(TaskKind::kBwd, st.bwd);
          if (in_.selfcond) init(TaskKind::kFwdSc, st.fwd);
        }
      }
    }
    for (size_t p = 0; p < in_.pipes.size(); ++p) {
      const auto& stages = in_.pipes[p].stages;
      const int n = static_cast<int>(stages.size());
      for (int m = 0; m < in_.num_microbatches; ++m) {
        for (int s = 0; s < n; ++s) {
          if (s + 1 < n) {
            AddEdge(Id(p, m, s, TaskKind::kFwd), Id(p, m, s + 1, TaskKind::kFwd),
                    stages[s].p2p_fwd, true);
            AddEdge(Id(p, m, s + 1, TaskKind::kBwd), Id(p, m, s, TaskKind::kBwd),
                    stages[s].p2p_bwd, true);
            if (in_.selfcond) {
              AddEdge(Id(p, m, s, TaskKind::kFwdSc),
                      Id(p, m, s + 1, TaskKind::kFwdSc), stages[s].p2p_fwd,
                      true);
            }
          }
          AddEdge(Id(p, m, s, TaskKind::kFwd), Id(p, m, s, TaskKind::kBwd), 0.0,
                  false);
          if (in_.selfcond && s > 0) {
            AddEdge(Id(p, m, s, TaskKind::kFwdSc), Id(p, m, s, TaskKind::kFwd),
                    0.0, false);
          }
        }
        if (in_.selfcond) {
          AddEdge(Id(p, m, n - 1, TaskKind::kFwdSc), Id(p, m, 0, TaskKind::kFwd),
                  in_.feedback, true, TaskKind::kFeedback);
        }
      }
    }
  }

  // Per (executor, pipeline) progress through the fixed 1F1B order.
  struct Lane {
    int pipe = 0;
    int stage = 0;
    int warmup = 0;  // S - s forwards before the first backward
    int next_fwd = 0;
    int next_bwd = 0;
    int next_sc = 0;
    bool last_was_fwd = false;
  };

  // Forwards a stage issues before its first backward. Classic 1F1B uses
  // S - s; when transfers make the round trip from stage s to the last stage
  // and back longer than (S - s) slots of the slowest stage, the window grows
  // until the round trip is covered, so latency does not throttle the stable
  // phase. With free transfers and balanced stages this is exactly S - s.
  int Warmup(int p, int s) const {
    const auto& stages = in_.pipes[p].stages;
    const int n = static_cast<int>(stages.size());
    double slot = 0.0;
    for (const StageTimes& st : stages) {
      slot = std::max({slot, st.fwd + st.bwd, st.p2p_fwd + st.p2p_bwd});
    }
    double round_trip = 0.0;
    for (int k = s; k < n; ++k) {
      round_trip += stages[k].fwd + stages[k].bwd;
      if (k + 1 < n) round_trip += stages[k].p2p_fwd + stages[k].p2p_bwd;
    }
    int depth = n - s;
    if (slot > 0.0) {
      const double needed = std::ceil(round_trip / slot - 1e-9);
      depth = std::max(depth, static_cast<int>(needed));
    }
    return std::min(depth, in_.num_microbatches);
  }

  // Main task the lane runs next, or -1. A forward is admissible while
  // fewer than `warmup` micro-batches are in flight, a backward once its
  // micro-batch has been admitted; both go in micro-batch order. When both
  // are ready the lane alternates with its previous main task (1F1B), when
  // only one is ready it runs that one.
  int NextMain(const Lane& lane, double now) const {
    const int m = in_.num_microbatches;
    int fwd = -1;
    int bwd = -1;
    if (lane.next_fwd < m && lane.next_fwd - lane.next_bwd < lane.warmup) {
      fwd = Id(lane.pipe, lane.next_fwd, lane.stage, TaskKind::kFwd);
      if (!Ready(fwd, now)) fwd = -1;
    }
    if (lane.next_bwd < lane.next_fwd) {
      bwd = Id(lane.pipe, lane.next_bwd, lane.stage, TaskKind::kBwd);
      if (!Ready(bwd, now)) bwd = -1;
    }
    if (fwd >= 0 && bwd >= 0) return lane.last_was_fwd ? bwd : fwd;
    return fwd >= 0 ? fwd : bwd;
  }

  // Self-conditioning passes fill time the main order leaves idle, in
  // micro-batch order and without a run-ahead limit: the feedback round trip
  // of micro-batch m must finish before stage 0 reaches fwd(m).
  int NextSc(const Lane& lane) const {
    if (!in_.selfcond || lane.next_sc >= in_.num_microbatches) return -1;
    return Id(lane.pipe, lane.next_sc, lane.stage, TaskKind::kFwdSc);
  }

  bool Ready(int id, double now) const {
    return id >= 0 && !nodes_[id].done && nodes_[id].pending == 0 &&
           nodes_[id].ready <= now;
  }

  void Dispatch() {
    // executor -> lanes (one per pipeline with a stage on it)
    std::map<int, std::vector<Lane>> lanes;
    for (size_t p = 0; p < in_.pipes.size(); ++p) {
      const auto& stages = in_.pipes[p].stages;
      const int n = static_cast<int>(stages.size());
      for (int s = 0; s < n; ++s) {
        lanes[stages[s].first_device].push_back(
            {.pipe = static_cast<int>(p), .stage = s,
             .warmup = Warmup(static_cast<int>(p), s)});
      }
    }
    std::map<int, double> free_at;
    std::map<int, int> toggle;  // lane preferred on the next conflict
    for (const auto& [exec, l] : lanes) {
      free_at[exec] = 0.0;
      toggle[exec] = 0;
    }
    size_t remaining = nodes_.size();
    double now = 0.0;
    while (remaining > 0) {
      bool progress = true;
      while (progress) {
        progress = false;
        for (auto& [exec, ls] : lanes) {
          if (free_at[exec] > now) continue;
          int lane_idx = -1;
          int pick = -1;
          std::vector<int> main_ready;
          for (size_t i = 0; i < ls.size(); ++i) {
            if (NextMain(ls[i], now) >= 0) main_ready.push_back(i);
          }
          if (main_ready.size() == 1) {
            lane_idx = main_ready[0];
          } else if (main_ready.size() > 1) {
            lane_idx = main_ready[toggle[exec] % main_ready.size()];
            toggle[exec] = 1 - toggle[exec];
          }
          if (lane_idx >= 0) {
            pick = NextMain(ls[lane_idx], now);
          } else {
            for (size_t i = 0; i < ls.size() && pick < 0; ++i) {
              if (Ready(NextSc(ls[i]), now)) {
                lane_idx = static_cast<int>(i);
                pick = NextSc(ls[i]);
              }
            }
          }
          if (pick < 0) continue;
          Node& node = nodes_[pick];
          Lane& lane = ls[lane_idx];
          switch (node.kind) {
            case TaskKind::kFwd:
              ++lane.next_fwd;
              lane.last_was_fwd = true;
              break;
            case TaskKind::kBwd:
              ++lane.next_bwd;
              lane.last_was_fwd = false;
              break;
            default:
              ++lane.next_sc;
              break;
          }
          node.done = true;
          node.start = now;
          const double end = now + node.duration;
          free_at[exec] = end;
          for (const Edge& e : node.succs) {
            Node& succ = nodes_[e.node];
            succ.ready = std::max(succ.ready, end + e.delay);
            --succ.pending;
          }
          --remaining;
          progress = true;
        }
      }
      if (remaining == 0) break;
      double next = kInf;
      for (const auto& [exec, t] : free_at) {
        if (t > now) next = std::min(next, t);
      }
      for (const auto& n : nodes_) {
        if (!n.done && n.pending == 0 && n.ready > now) {
          next = std::min(next, n.ready);
        }
      }
      if (next == kInf) {
        throw std::logic_error("pipeline simulation deadlocked");
      }
      now = next;
    }
  }

  Schedule Emit() const {
    Schedule out;
    out.device_count = in_.device_count;
    auto stamp = [&](const Task& proto, const StageTimes& st) {
      for (int d = st.first_device; d < st.first_device + st.replicas; ++d) {
        Task t = proto;
        t.device = d;
        out.tasks.push_back(t);
      }
    };
    for (const Node& n : nodes_) {
      const PipelineSpec& pipe = in_.pipes[n.pipe];
      const StageTimes& st = pipe.stages[n.stage];
      Task t{.kind = n.kind,
             .micro_batch = n.mb,
             .stage = n.stage,
             .direction = pipe.direction,
             .start = n.start,
             .end = n.start + n.duration};
      stamp(t, st);
      for (const Edge& e : n.succs) {
        if (!e.is_transfer) continue;
        const Node& succ = nodes_[e.node];
        Task c{.kind = e.transfer,
               .micro_batch = n.mb,
               .stage = n.stage,
               .direction = pipe.direction,
               .start = t.end,
               .end = t.end + e.delay,
               .peer_stage = succ.stage,
               .payload = n.kind};
        stamp(c, st);
      }
    }
    for (size_t p = 0; p < in_.pipes.size(); ++p) {
      const PipelineSpec& pipe = in_.pipes[p];
      for (size_t s = 0; s < pipe.stages.size(); ++s) {
        double last = -1.0;
        for (int m = 0; m < in_.num_microbatches; ++m) {
          last = std::max(
              last, nodes_[Id(static_cast<int>(p), m, static_cast<int>(s),
                              TaskKind::kBwd)]
                        .start);
        }
        if (last < 0.0) continue;
        Task t{.kind = TaskKind::kSync,
               .stage = static_cast<int>(s),
               .direction = pipe.direction,
               .start = last,
               .end = last + pipe.stages[s].sync};
        stamp(t, pipe.stages[s]);
      }
    }
    pipeplan::SortTasks(out.tasks);
    for (const Task& t : out.tasks) out.makespan = std::max(out.makespan, t.end);
    return out;
  }

 private:
  const SimInput& in_;
  std::vector<int> offsets_;
  std::vector<Node> nodes_;
};

double LocalBatch(const PlanConfig& cfg, int replicas) {
  const int64_t mb = cfg.micro_batch();
  if (replicas < 1 || mb % replicas != 0) {
    throw InfeasibleError("micro-batch " + std::to_string(mb) +
                          " not divisible by r=" + std::to_string(replicas));
  }
  return static_cast<double>(mb / replicas);
}

StageTimes TimesFor(const StageAssignment& st, const ComponentProfile& bb,
                    const PlanConfig& cfg, const CommCosts& comm,
                    double p2p_scale) {
  const double local = LocalBatch(cfg, st.replicas);
  StageTimes out;
  out.first_device = st.first_device;
  out.replicas = st.replicas;
  double grad = 0.0;
  for (int i = st.lo; i < st.hi; ++i) {
    const LayerCost& layer = bb.layers.at(i);
    out.fwd += CostAt(layer, CostField::kFwdTime, local);
    out.bwd += CostAt(layer, CostField::kBwdTime, local);
    grad += CostAt(layer, CostField::kGradBytes, local);
  }
  out.sync = grad / comm.bandwidth_ar + comm.latency_ar;
  if (st.hi < static_cast<int>(bb.layers.size())) {
    const LayerCost& edge = bb.layers[st.hi - 1];
    out.p2p_fwd =
        CostAt(edge, CostField::kFwdCommBytes, local) * p2p_scale /
            comm.bandwidth_p2p +
        comm.latency_p2p;
    out.p2p_bwd =
        CostAt(edge, CostField::kBwdCommBytes, local) * p2p_scale /
            comm.bandwidth_p2p +
        comm.latency_p2p;
  }
  return out;
}

PipelineSpec SpecFor(const std::vector<StageAssignment>& stages,
                     Direction dir, const ModelProfile& profile,
                     const PlanConfig& cfg, const CommCosts& comm,
                     double p2p_scale) {
  PipelineSpec spec;
  spec.direction = dir;
  for (const auto& st : stages) {
    if (st.direction != dir) continue;
    spec.stages.push_back(TimesFor(st, profile.backbones.at(st.backbone), cfg,
                                   comm, p2p_scale));
  }
  return spec;
}

void CheckPlan(const PartitionPlan& plan, const ModelProfile& profile,
               const ClusterConfig& cluster) {
  ValidateCluster(cluster);
  if (plan.stages.empty()) throw InfeasibleError("plan has no stages");
  for (const auto& st : plan.stages) {
    if (st.backbone < 0 ||
        st.backbone >= static_cast<int>(profile.backbones.size())) {
      throw InfeasibleError("stage references unknown backbone " +
                            std::to_string(st.backbone));
    }
    if (st.first_device < 0 ||
        st.first_device + st.replicas > plan.config.group_size) {
      throw InfeasibleError("stage devices outside the pipeline group");
    }
  }
}

}  // namespace

const char* TaskKindName(TaskKind kind) {
  switch (kind) {
    case TaskKind::kFwd:
      return "fwd";
    case TaskKind::kBwd:
      return "bwd";
    case TaskKind::kFwdSc:
      return "fwd_sc";
    case TaskKind::kP2p:
      return "p2p_comm";
    case TaskKind::kFeedback:
      return "feedback_comm";
    case TaskKind::kSync:
      return "sync";
    case TaskKind::kFill:
      return "fill";
  }
  return "unknown";
}

std::optional<TaskKind> TaskKindFromName(std::string_view name) {
  for (TaskKind k : {TaskKind::kFwd, TaskKind::kBwd, TaskKind::kFwdSc,
                     TaskKind::kP2p, TaskKind::kFeedback, TaskKind::kSync,
                     TaskKind::kFill}) {
    if (name == TaskKindName(k)) return k;
  }
  return std::nullopt;
}

void SortTasks(std::vector<Task>& tasks) {
  auto key = [](const Task& t) {
    return std::make_tuple(t.device, t.start, t.end, static_cast<int>(t.kind),
                           static_cast<int>(t.direction), t.stage,
                           t.micro_batch, t.component, t.layer);
  };
  std::stable_sort(tasks.begin(), tasks.end(),
                   [&](const Task& a, const Task& b) { return key(a) < key(b); });
}

bool IsComputeKind(TaskKind kind) {
  return kind == TaskKind::kFwd || kind == TaskKind::kBwd ||
         kind == TaskKind::kFwdSc || kind == TaskKind::kFill;
}

Schedule BuildSchedule(const PartitionPlan& plan, const ModelProfile& profile,
                       const ClusterConfig& cluster,
                       std::optional<bool> selfcond_active) {
  CheckPlan(plan, profile, cluster);
  SimInput in;
  in.num_microbatches = plan.config.num_microbatches;
  in.selfcond = selfcond_active.value_or(plan.config.selfcond);
  in.device_count = plan.config.group_size;
  in.pipes.push_back(SpecFor(plan.stages, Direction::kDown, profile,
                             plan.config, cluster.comm, 1.0));
  if (in.selfcond) {
    const StageAssignment& last = plan.stages.back();
    in.feedback =
        FeedbackTime(profile.backbones.at(last.backbone), cluster.comm,
                     last.replicas, plan.config.micro_batch());
  }
  return Simulator(in).Run();
}

Schedule BuildBidirectionalSchedule(const PartitionPlan& plan,
                                    const ModelProfile& profile,
                                    const ClusterConfig& cluster) {
  CheckPlan(plan, profile, cluster);
  const bool has_up =
      std::any_of(plan.stages.begin(), plan.stages.end(),
                  [](const StageAssignment& s) {
                    return s.direction == Direction::kUp;
                  });
  if (!has_up) return BuildSchedule(plan, profile, cluster, false);
  if (plan.config.selfcond) {
    throw InfeasibleError(
        "self-conditioning is not supported with two backbones");
  }
  SimInput in;
  in.num_microbatches = plan.config.num_microbatches;
  in.device_count = plan.config.group_size;
  in.pipes.push_back(SpecFor(plan.stages, Direction::kDown, profile,
                             plan.config, cluster.comm, 2.0));
  in.pipes.push_back(SpecFor(plan.stages, Direction::kUp, profile,
                             plan.config, cluster.comm, 2.0));
  return Simulator(in).Run();
}

Schedule BuildPlanSchedule(const PartitionPlan& plan,
                           const ModelProfile& profile,
                           const ClusterConfig& cluster,
                           std::optional<bool> selfcond_active) {
  if (profile.backbones.size() == 2) {
    return BuildBidirectionalSchedule(plan, profile, cluster);
  }
  return BuildSchedule(plan, profile, cluster, selfcond_active);
}

double UnitBidirectionalMakespan(int num_stages, int num_microbatches) {
  if (num_stages < 1 || num_microbatches < 1) {
    throw InfeasibleError("S and M must be positive");
  }
  SimInput in;
  in.num_microbatches = num_microbatches;
  in.device_count = num_stages;
  for (Direction dir : {Direction::kDown, Direction::kUp}) {
    PipelineSpec spec;
    spec.direction = dir;
    for (int s = 0; s < num_stages; ++s) {
      StageTimes st;
      st.fwd = 0.5;
      st.bwd = 0.5;
      st.first_device = dir == Direction::kDown ? s : num_stages - 1 - s;
      spec.stages.push_back(st);
    }
    in.pipes.push_back(spec);
  }
  return Simulator(in).Run().makespan;
}

int PairedStageCount(int num_stages, int num_microbatches) {
  // A one-directional unit pipeline spans M + S - 1 slots; whatever the
  // bidirectional one spends beyond the S - 1 fill/drain slots counts as
  // paired stable-phase slots.
  const double span = UnitBidirectionalMakespan(num_stages, num_microbatches);
  return static_cast<int>(std::ceil(span - (num_stages - 1) - 1e-9));
}

std::vector<Bubble> ExtractBubbles(const Schedule& schedule, double min_len) {
  const int n = schedule.device_count;
  std::vector<std::vector<std::pair<double, double>>> busy(n);
  std::vector<double> cuts = {0.0, schedule.makespan};
  for (const Task& t : schedule.tasks) {
    if (!IsComputeKind(t.kind) || t.end <= t.start) continue;
    if (t.device < 0 || t.device >= n) {
      throw std::logic_error("task on device outside the schedule");
    }
    busy[t.device].push_back({t.start, t.end});
    cuts.push_back(t.start);
    cuts.push_back(t.end);
  }
  for (auto& b : busy) std::sort(b.begin(), b.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<size_t> cursor(n, 0);
  std::vector<Bubble> raw;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    if (a >= schedule.makespan) break;
    std::vector<int> idle;
    for (int d = 0; d < n; ++d) {
      auto& list = busy[d];
      while (cursor[d] < list.size() && list[cursor[d]].second <= a) {
        ++cursor[d];
      }
      // Busy intervals never overlap and [a, b) lies between consecutive
      // boundaries, so it is either fully covered or fully idle.
      const bool covered = cursor[d] < list.size() && list[cursor[d]].first <= a;
      if (!covered) idle.push_back(d);
    }
    if (idle.empty()) continue;
    if (!raw.empty() && raw.back().end == a && raw.back().idle_devices == idle) {
      raw.back().end = b;
    } else {
      raw.push_back({.start = a, .end = b, .idle_devices = std::move(idle)});
    }
  }
  std::vector<Bubble> out;
  for (auto& bubble : raw) {
    const double len = bubble.end - bubble.start;
    if (len > 0.0 && len >= min_len) out.push_back(std::move(bubble));
  }
  return out;
}

double BubbleRatio(const Schedule& schedule,
                   const std::vector<Bubble>& bubbles) {
  if (schedule.makespan <= 0.0 || schedule.device_count <= 0) return 0.0;
  double idle = 0.0;
  for (const Bubble& b : bubbles) {
    idle += b.duration() * static_cast<double>(b.idle_devices.size());
  }
  return idle / (schedule.makespan * schedule.device_count);
}

double BusyTime(const Schedule& schedule) {
  double total = 0.0;
  for (const Task& t : schedule.tasks) {
    if (IsComputeKind(t.kind)) total += t.end - t.start;
  }
  return total;
}

std::vector<std::pair<int, int>> DependencyEdges(const Schedule& schedule) {
  // Index compute and transfer tasks by identity; replicas share identity.
  using Key = std::tuple<int, int, int, int, int, int>;  // kind dir mb stage peer payload
  std::map<Key, std::vector<int>> index;
  int max_stage[2] = {-1, -1};
  for (size_t i = 0; i < schedule.tasks.size(); ++i) {
    const Task& t = schedule.tasks[i];
    if (t.kind == TaskKind::kSync || t.kind == TaskKind::kFill) continue;
    const bool comm = t.kind == TaskKind::kP2p || t.kind == TaskKind::kFeedback;
    index[{static_cast<int>(t.kind), static_cast<int>(t.direction),
           t.micro_batch, t.stage, comm ? t.peer_stage : -1,
           comm ? static_cast<int>(t.payload) : -1}]
        .push_back(static_cast<int>(i));
    if (IsComputeKind(t.kind)) {
      int& ms = max_stage[static_cast<int>(t.direction)];
      ms = std::max(ms, t.stage);
    }
  }
  auto find = [&](TaskKind kind, int dir, int mb, int stage, int peer = -1,
                  int payload = -1) -> const std::vector<int>* {
    auto it = index.find({static_cast<int>(kind), dir, mb, stage, peer, payload});
    return it == index.end() ? nullptr : &it->second;
  };
  std::vector<std::pair<int, int>> edges;
  auto link = [&](const std::vector<int>* from, const std::vector<int>* to) {
    if (from == nullptr || to == nullptr) return;
    for (int a : *from) {
      for (int b : *to) edges.push_back({a, b});
    }
  };
  for (const auto& [key, ids] : index) {
    const auto [kind_i, dir, mb, stage, peer, payload] = key;
    const TaskKind kind = static_cast<TaskKind>(kind_i);
    const int last = max_stage[dir];
    const bool sc = find(TaskKind::kFwdSc, dir, mb, stage) != nullptr;
    switch (kind) {
      case TaskKind::kFwd:
      case TaskKind::kFwdSc:
        if (stage > 0) {
          link(find(TaskKind::kP2p, dir, mb, stage - 1, stage, kind_i), &ids);
        }
        if (kind == TaskKind::kFwd && sc) {
          if (stage > 0) link(find(TaskKind::kFwdSc, dir, mb, stage), &ids);
          if (stage == 0) {
            link(find(TaskKind::kFeedback, dir, mb, last, 0,
                      static_cast<int>(TaskKind::kFwdSc)),
                 &ids);
          }
        }
        break;
      case TaskKind::kBwd:
        link(find(TaskKind::kFwd, dir, mb, stage), &ids);
        if (stage < last) {
          link(find(TaskKind::kP2p, dir, mb, stage + 1, stage,
                    static_cast<int>(TaskKind::kBwd)),
               &ids);
        }
        break;
      case TaskKind::kP2p:
      case TaskKind::kFeedback:
        link(find(static_cast<TaskKind>(payload), dir, mb, stage), &ids);
        break;
      default:
        break;
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<int> CriticalPath(const Schedule& schedule) {
  const auto& tasks = schedule.tasks;
  if (tasks.empty()) return {};
  const double tol = 1e-9 * std::max(1.0, schedule.makespan);
  std::vector<std::vector<int>> preds(tasks.size());
  for (const auto& [a, b] : DependencyEdges(schedule)) preds[b].push_back(a);
  // Previous compute task on the same device.
  std::vector<int> prev(tasks.size(), -1);
  std::map<int, std::vector<int>> per_device;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (IsComputeKind(tasks[i].kind)) {
      per_device[tasks[i].device].push_back(static_cast<int>(i));
    }
  }
  for (auto& [dev, ids] : per_device) {
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      return tasks[a].start < tasks[b].start;
    });
    for (size_t k = 1; k < ids.size(); ++k) prev[ids[k]] = ids[k - 1];
  }
  int cur = -1;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (!IsComputeKind(tasks[i].kind)) continue;
    if (cur < 0 || tasks[i].end > tasks[cur].end) cur = static_cast<int>(i);
  }
  std::vector<int> path;
  while (cur >= 0) {
    path.push_back(cur);
    int next = -1;
    for (int p : preds[cur]) {
      if (std::abs(tasks[p].end - tasks[cur].start) <= tol) {
        next = p;
        break;
      }
    }
    if (next < 0 && prev[cur] >= 0 &&
        std::abs(tasks[prev[cur]].end - tasks[cur].start) <= tol) {
      next = prev[cur];
    }
    cur = next;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace pipeplan
