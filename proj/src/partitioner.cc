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

#include "pipeplan/partitioner.h"

#include <algorithm>
#include <limits>
#include <sstream>
#include <tuple>

#include "pipeplan/error.h"

namespace pipeplan {
namespace {

// A partially built partition: the bound terms accumulated so far plus the
// decisions that produced them. W and Y combine by max, so the final
// objective is monotone in every coordinate and dominated prefixes can be
// dropped without losing the optimum.
struct Prefix {
  double w = 0.0;     // max T0, plain
  double w_sc = 0.0;  // max T0 with the extra forward pass
  double y = 0.0;     // max(0, max gap)
  double c = 0.0;     // max plain stage compute, tie-break
  std::vector<int> cuts;
  std::vector<int> reps;
};

bool LexLess(const Prefix& a, const Prefix& b) {
  return std::tie(a.cuts, a.reps) < std::tie(b.cuts, b.reps);
}

bool Dominates(const Prefix& f, const Prefix& e) {
  return f.w <= e.w && f.w_sc <= e.w_sc && f.y <= e.y && f.c <= e.c;
}

// Keeps an entry unless an entry that is no worse in every coordinate and
// lexicographically no larger exists. Dominance is transitive, so checking
// against survivors in lexicographic order is enough.
std::vector<Prefix> Prune(std::vector<Prefix> cands) {
  std::sort(cands.begin(), cands.end(), LexLess);
  std::vector<Prefix> kept;
  for (auto& e : cands) {
    bool dominated = false;
    for (const auto& f : kept) {
      if (Dominates(f, e)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(std::move(e));
  }
  return kept;
}

// Total order used to pick among complete plans.
struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  double c = 0.0;
  std::vector<int> cuts;
  std::vector<int> reps;
  double t_max = 0.0;
  double t_max_sc = 0.0;
  double feedback = 0.0;
  bool valid = false;
};

bool Better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  return std::tie(a.objective, a.c, a.cuts, a.reps) <
         std::tie(b.objective, b.c, b.cuts, b.reps);
}

std::vector<int> AllowedReplicas(const PlanConfig& cfg) {
  std::vector<int> out;
  const int s = cfg.num_stages;
  const int d = cfg.group_size;
  if (cfg.equal_replication) {
    if (d % s == 0) out.push_back(d / s);
  } else {
    for (int r = 1; r <= d - s + 1; ++r) out.push_back(r);
  }
  return out;
}

// cost[r][lo][hi]; empty optional when the local batch is not integral or
// not covered by the profile.
class StageCostTable {
 public:
  StageCostTable(const ComponentProfile& backbone, const CommCosts& comm,
                 const std::vector<int>& replicas, int64_t micro_batch,
                 bool selfcond, double p2p_scale)
      : layers_(static_cast<int>(backbone.layers.size())) {
    int max_r = 0;
    for (int r : replicas) max_r = std::max(max_r, r);
    table_.resize(max_r + 1);
    for (int r : replicas) {
      auto& by_r = table_[r];
      by_r.assign(static_cast<size_t>(layers_ * (layers_ + 1)), std::nullopt);
      if (micro_batch % r != 0) continue;
      for (int lo = 0; lo < layers_; ++lo) {
        for (int hi = lo + 1; hi <= layers_; ++hi) {
          try {
            by_r[Index(lo, hi)] = StageCostSingle(
                backbone, comm, lo, hi, r, micro_batch, selfcond, p2p_scale);
          } catch (const ExtrapolationError&) {
            // Leave unset: infeasible local batch for this replication.
          }
        }
      }
    }
  }

  const std::optional<StageCosts>& Get(int r, int lo, int hi) const {
    return table_[r][Index(lo, hi)];
  }

 private:
  size_t Index(int lo, int hi) const {
    return static_cast<size_t>(lo * (layers_ + 1) + hi);
  }
  int layers_;
  std::vector<std::vector<std::optional<StageCosts>>> table_;
};

std::vector<StageAssignment> SingleStages(const std::vector<int>& cuts,
                                          const std::vector<int>& reps) {
  std::vector<StageAssignment> stages;
  int lo = 0;
  int dev = 0;
  for (size_t k = 0; k < cuts.size(); ++k) {
    stages.push_back({.backbone = 0,
                      .lo = lo,
                      .hi = cuts[k],
                      .replicas = reps[k],
                      .direction = Direction::kDown,
                      .first_device = dev});
    lo = cuts[k];
    dev += reps[k];
  }
  return stages;
}

// cuts interleaves, per device position k, the down prefix length covered
// by positions 0..k and the up suffix length covered by positions 0..k.
std::vector<StageAssignment> BidirectionalStages(const std::vector<int>& cuts,
                                                 const std::vector<int>& reps,
                                                 int up_layers) {
  const size_t s = reps.size();
  std::vector<StageAssignment> down;
  std::vector<StageAssignment> up(s);
  int down_lo = 0;
  int up_suffix = 0;
  int dev = 0;
  for (size_t k = 0; k < s; ++k) {
    const int down_hi = cuts[2 * k];
    const int suffix = cuts[2 * k + 1];
    down.push_back({.backbone = 0,
                    .lo = down_lo,
                    .hi = down_hi,
                    .replicas = reps[k],
                    .direction = Direction::kDown,
                    .first_device = dev});
    // Position k holds up-pipeline stage s-1-k.
    up[s - 1 - k] = {.backbone = 1,
                     .lo = up_layers - suffix,
                     .hi = up_layers - up_suffix,
                     .replicas = reps[k],
                     .direction = Direction::kUp,
                     .first_device = dev};
    down_lo = down_hi;
    up_suffix = suffix;
    dev += reps[k];
  }
  down.insert(down.end(), up.begin(), up.end());
  return down;
}

int PairedCount(const PartitionOptions& options, int s, int m) {
  return options.paired_stage_count ? options.paired_stage_count(s, m)
                                    : PairedStageCount(s, m);
}

PartitionPlan MakePlan(const ModelProfile& profile,
                       const ClusterConfig& cluster, const PlanConfig& cfg,
                       const Candidate& best,
                       const PartitionOptions& options) {
  PartitionPlan plan;
  plan.config = cfg;
  if (profile.backbones.size() == 2) {
    plan.stages = BidirectionalStages(
        best.cuts, best.reps,
        static_cast<int>(profile.backbones[1].layers.size()));
  } else {
    plan.stages = SingleStages(best.cuts, best.reps);
  }
  PartitionScore score =
      ScorePartition(profile, cluster, cfg, plan.stages, options);
  plan.per_stage = std::move(score.per_stage);
  plan.objective = best.objective;
  plan.t_max = best.t_max;
  if (cfg.selfcond) plan.t_max_sc = best.t_max_sc;
  plan.feedback_time = best.feedback;
  plan.paired_stage_count =
      profile.backbones.size() == 2
          ? PairedCount(options, cfg.num_stages, cfg.num_microbatches)
          : cfg.num_microbatches;
  return plan;
}

Candidate Complete(const Prefix& p, double k_factor, const PlanConfig& cfg,
                   double feedback) {
  Candidate c;
  c.valid = true;
  c.t_max = k_factor * p.w + p.y;
  if (cfg.selfcond) {
    c.t_max_sc = k_factor * p.w_sc + p.y + feedback;
    c.feedback = feedback;
    c.objective = SelfcondObjective(c.t_max, c.t_max_sc, cfg.selfcond_prob);
  } else {
    c.objective = c.t_max;
  }
  c.c = p.c;
  c.cuts = p.cuts;
  c.reps = p.reps;
  return c;
}

void CheckCommon(const ModelProfile& profile, const ClusterConfig& cluster,
                 const PlanConfig& cfg, size_t backbones) {
  ValidateCluster(cluster);
  ValidatePlanConfig(cfg, cluster);
  if (profile.backbones.size() != backbones) {
    throw InfeasibleError("expected " + std::to_string(backbones) +
                          " backbone(s), profile has " +
                          std::to_string(profile.backbones.size()));
  }
  for (const auto& b : profile.backbones) {
    if (static_cast<int>(b.layers.size()) < cfg.num_stages) {
      throw InfeasibleError("backbone '" + b.name + "' has " +
                            std::to_string(b.layers.size()) +
                            " layers, fewer than S=" +
                            std::to_string(cfg.num_stages));
    }
  }
}

}  // namespace

const char* DirectionName(Direction d) {
  return d == Direction::kDown ? "down" : "up";
}

void ValidatePlanConfig(const PlanConfig& cfg, const ClusterConfig& cluster) {
  auto fail = [](const std::string& why) { throw InfeasibleError(why); };
  if (cfg.num_stages < 1) fail("S must be >= 1");
  if (cfg.num_microbatches < 1) fail("M must be >= 1");
  if (cfg.group_size < 1) fail("D must be >= 1");
  if (cfg.global_batch < 1) fail("batch must be >= 1");
  if (cfg.num_stages > cfg.group_size) {
    fail("S=" + std::to_string(cfg.num_stages) + " exceeds D=" +
         std::to_string(cfg.group_size));
  }
  if (cfg.global_batch % cfg.num_microbatches != 0) {
    fail("batch " + std::to_string(cfg.global_batch) +
         " not divisible by M=" + std::to_string(cfg.num_microbatches));
  }
  if (cluster.world_size % cfg.group_size != 0) {
    fail("D=" + std::to_string(cfg.group_size) +
         " does not divide world size " + std::to_string(cluster.world_size));
  }
  if (cfg.equal_replication && cfg.group_size % cfg.num_stages != 0) {
    fail("equal replication needs S=" + std::to_string(cfg.num_stages) +
         " to divide D=" + std::to_string(cfg.group_size));
  }
  if (cfg.selfcond &&
      !(cfg.selfcond_prob >= 0.0 && cfg.selfcond_prob <= 1.0)) {
    fail("self-conditioning probability outside [0, 1]");
  }
}

StageCosts StageCostSingle(const ComponentProfile& backbone,
                           const CommCosts& comm, int lo, int hi, int replicas,
                           int64_t micro_batch, bool selfcond,
                           double p2p_scale) {
  const int layers = static_cast<int>(backbone.layers.size());
  if (lo < 0 || hi > layers || lo >= hi) {
    throw InfeasibleError("invalid layer range [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + ")");
  }
  if (replicas < 1 || micro_batch % replicas != 0) {
    throw InfeasibleError("micro-batch " + std::to_string(micro_batch) +
                          " not divisible by r=" + std::to_string(replicas));
  }
  const double local = static_cast<double>(micro_batch / replicas);
  double fwd = 0.0;
  double bwd = 0.0;
  double grad = 0.0;
  for (int i = lo; i < hi; ++i) {
    const LayerCost& layer = backbone.layers[i];
    fwd += CostAt(layer, CostField::kFwdTime, local);
    bwd += CostAt(layer, CostField::kBwdTime, local);
    grad += CostAt(layer, CostField::kGradBytes, local);
  }
  StageCosts out;
  out.compute = selfcond ? 2.0 * fwd + bwd : fwd + bwd;
  if (hi < layers) {
    const LayerCost& edge = backbone.layers[hi - 1];
    const double cf = CostAt(edge, CostField::kFwdCommBytes, local);
    const double cb = CostAt(edge, CostField::kBwdCommBytes, local);
    out.comm = selfcond ? (2.0 * cf + cb) * p2p_scale / comm.bandwidth_p2p +
                              3.0 * comm.latency_p2p
                        : (cf + cb) * p2p_scale / comm.bandwidth_p2p +
                              2.0 * comm.latency_p2p;
  }
  out.t0 = std::max(out.compute, out.comm);
  out.t_sync = grad / comm.bandwidth_ar + comm.latency_ar;
  out.t_comp = bwd;
  out.gap = out.t_sync - out.t_comp;
  return out;
}

double FeedbackTime(const ComponentProfile& backbone, const CommCosts& comm,
                    int replicas, int64_t micro_batch) {
  const double local =
      static_cast<double>(micro_batch) / static_cast<double>(replicas);
  const double out =
      CostAt(backbone.layers.back(), CostField::kOutBytes, local);
  return out / comm.bandwidth_p2p + comm.latency_p2p;
}

double SelfcondObjective(double t_max, double t_max_sc, double p) {
  return p * t_max_sc + (1.0 - p) * t_max;
}

PartitionScore ScorePartition(const ModelProfile& profile,
                              const ClusterConfig& cluster,
                              const PlanConfig& cfg,
                              const std::vector<StageAssignment>& stages,
                              const PartitionOptions& options) {
  const bool bidirectional = profile.backbones.size() == 2;
  const double p2p_scale = bidirectional ? 2.0 : 1.0;
  const int64_t mb = cfg.micro_batch();
  PartitionScore score;
  double w = 0.0;
  double w_sc = 0.0;
  double y = 0.0;
  for (const auto& st : stages) {
    const ComponentProfile& bb = profile.backbones.at(st.backbone);
    const StageCosts plain = StageCostSingle(
        bb, cluster.comm, st.lo, st.hi, st.replicas, mb, false, p2p_scale);
    w = std::max(w, plain.t0);
    y = std::max(y, plain.gap);
    if (cfg.selfcond) {
      const StageCosts sc = StageCostSingle(bb, cluster.comm, st.lo, st.hi,
                                            st.replicas, mb, true, p2p_scale);
      w_sc = std::max(w_sc, sc.t0);
      score.per_stage.push_back(sc);
    } else {
      score.per_stage.push_back(plain);
    }
    score.max_compute = std::max(score.max_compute, plain.compute);
  }
  const int s = cfg.num_stages;
  const int m = bidirectional ? PairedCount(options, s, cfg.num_microbatches)
                              : cfg.num_microbatches;
  const double k_factor = static_cast<double>(m + 2 * s - 2);
  score.t_max = k_factor * w + y;
  score.objective = score.t_max;
  if (cfg.selfcond && !stages.empty()) {
    const StageAssignment& last = stages.back();
    score.feedback_time = FeedbackTime(profile.backbones.at(last.backbone),
                                       cluster.comm, last.replicas, mb);
    score.t_max_sc = k_factor * w_sc + y + score.feedback_time;
    score.objective =
        SelfcondObjective(score.t_max, *score.t_max_sc, cfg.selfcond_prob);
  }
  return score;
}

PartitionPlan PartitionSingle(const ModelProfile& profile,
                              const ClusterConfig& cluster,
                              const PlanConfig& cfg,
                              const PartitionOptions& options) {
  CheckCommon(profile, cluster, cfg, 1);
  const ComponentProfile& bb = profile.backbones[0];
  const int num_layers = static_cast<int>(bb.layers.size());
  const int num_stages = cfg.num_stages;
  const int devices = cfg.group_size;
  const int64_t mb = cfg.micro_batch();
  const std::vector<int> allowed = AllowedReplicas(cfg);
  if (allowed.empty()) throw InfeasibleError("no admissible replication");

  const StageCostTable plain(bb, cluster.comm, allowed, mb, false, 1.0);
  std::optional<StageCostTable> sc;
  if (cfg.selfcond) sc.emplace(bb, cluster.comm, allowed, mb, true, 1.0);

  // Extends prefix `e` by stage [lo, hi) on r devices; false if infeasible.
  auto extend = [&](const Prefix& e, int lo, int hi, int r, Prefix& out) {
    const auto& cost = plain.Get(r, lo, hi);
    if (!cost) return false;
    out.w = std::max(e.w, cost->t0);
    out.y = std::max(e.y, std::max(cost->gap, 0.0));
    if (sc) {
      const auto& cost_sc = sc->Get(r, lo, hi);
      out.w_sc = std::max(e.w_sc, cost_sc->t0);
    }
    out.c = std::max(e.c, cost->compute);
    out.cuts = e.cuts;
    out.cuts.push_back(hi);
    out.reps = e.reps;
    out.reps.push_back(r);
    return true;
  };

  // front[s][l][d]: first l layers as s stages on d devices.
  auto index = [&](int s, int l, int d) {
    return (static_cast<size_t>(s) * (num_layers + 1) + l) * (devices + 1) + d;
  };
  std::vector<std::vector<Prefix>> front(
      static_cast<size_t>(num_stages + 1) * (num_layers + 1) * (devices + 1));
  const Prefix empty;
  front[index(0, 0, 0)].push_back(empty);

  const double k_factor =
      static_cast<double>(cfg.num_microbatches + 2 * num_stages - 2);
  Candidate best;
  for (int s = 1; s <= num_stages; ++s) {
    const bool last = s == num_stages;
    const int l_min = last ? num_layers : s;
    const int l_max = num_layers - (num_stages - s);
    for (int l = l_min; l <= l_max; ++l) {
      const int d_min = last ? devices : s;
      const int d_max = devices - (num_stages - s);
      for (int d = d_min; d <= d_max; ++d) {
        std::vector<Prefix> cands;
        for (int r : allowed) {
          if (r > d - (s - 1)) continue;
          if (s == 1 && r != d) continue;
          for (int lp = s - 1; lp <= l - 1; ++lp) {
            for (const Prefix& e : front[index(s - 1, lp, d - r)]) {
              Prefix next;
              if (!extend(e, lp, l, r, next)) continue;
              if (last) {
                const double fb =
                    cfg.selfcond ? FeedbackTime(bb, cluster.comm, r, mb) : 0.0;
                Candidate cand = Complete(next, k_factor, cfg, fb);
                if (Better(cand, best)) best = std::move(cand);
              } else {
                cands.push_back(std::move(next));
              }
            }
          }
        }
        if (!last) front[index(s, l, d)] = Prune(std::move(cands));
      }
    }
  }
  if (!best.valid) {
    throw InfeasibleError(
        "no partition of '" + bb.name + "' into S=" +
        std::to_string(num_stages) + " stages on D=" +
        std::to_string(devices) +
        " devices has an integral, profiled local batch");
  }
  return MakePlan(profile, cluster, cfg, best, options);
}

PartitionPlan PartitionBidirectional(const ModelProfile& profile,
                                     const ClusterConfig& cluster,
                                     const PlanConfig& cfg,
                                     const PartitionOptions& options) {
  CheckCommon(profile, cluster, cfg, 2);
  if (cfg.selfcond) {
    throw InfeasibleError(
        "self-conditioning is only supported for a single backbone");
  }
  const ComponentProfile& down = profile.backbones[0];
  const ComponentProfile& up = profile.backbones[1];
  const int ld_total = static_cast<int>(down.layers.size());
  const int lu_total = static_cast<int>(up.layers.size());
  const int num_stages = cfg.num_stages;
  const int devices = cfg.group_size;
  const int64_t mb = cfg.micro_batch();
  const std::vector<int> allowed = AllowedReplicas(cfg);
  if (allowed.empty()) throw InfeasibleError("no admissible replication");

  const StageCostTable down_cost(down, cluster.comm, allowed, mb, false, 2.0);
  const StageCostTable up_cost(up, cluster.comm, allowed, mb, false, 2.0);

  auto index = [&](int s, int ld, int lu, int d) {
    return ((static_cast<size_t>(s) * (ld_total + 1) + ld) * (lu_total + 1) +
            lu) *
               (devices + 1) +
           d;
  };
  std::vector<std::vector<Prefix>> front(static_cast<size_t>(num_stages + 1) *
                                         (ld_total + 1) * (lu_total + 1) *
                                         (devices + 1));
  front[index(0, 0, 0, 0)].push_back(Prefix{});

  const double k_factor = static_cast<double>(
      PairedCount(options, num_stages, cfg.num_microbatches) +
      2 * num_stages - 2);
  Candidate best;
  for (int s = 1; s <= num_stages; ++s) {
    const bool last = s == num_stages;
    for (int ld = last ? ld_total : s; ld <= ld_total - (num_stages - s);
         ++ld) {
      for (int lu = last ? lu_total : s; lu <= lu_total - (num_stages - s);
           ++lu) {
        for (int d = last ? devices : s; d <= devices - (num_stages - s);
             ++d) {
          std::vector<Prefix> cands;
          for (int r : allowed) {
            if (r > d - (s - 1)) continue;
            if (s == 1 && r != d) continue;
            for (int lpd = s - 1; lpd <= ld - 1; ++lpd) {
              const auto& cd = down_cost.Get(r, lpd, ld);
              if (!cd) continue;
              for (int lpu = s - 1; lpu <= lu - 1; ++lpu) {
                // Up layers [lu_total - lu, lu_total - lpu).
                const auto& cu =
                    up_cost.Get(r, lu_total - lu, lu_total - lpu);
                if (!cu) continue;
                for (const Prefix& e : front[index(s - 1, lpd, lpu, d - r)]) {
                  Prefix next;
                  next.w = std::max({e.w, cd->t0, cu->t0});
                  next.y = std::max({e.y, cd->gap, cu->gap, 0.0});
                  next.c = std::max({e.c, cd->compute, cu->compute});
                  next.cuts = e.cuts;
                  next.cuts.push_back(ld);
                  next.cuts.push_back(lu);
                  next.reps = e.reps;
                  next.reps.push_back(r);
                  if (last) {
                    Candidate cand = Complete(next, k_factor, cfg, 0.0);
                    if (Better(cand, best)) best = std::move(cand);
                  } else {
                    cands.push_back(std::move(next));
                  }
                }
              }
            }
          }
          if (!last) front[index(s, ld, lu, d)] = Prune(std::move(cands));
        }
      }
    }
  }
  if (!best.valid) {
    throw InfeasibleError("no bidirectional partition into S=" +
                          std::to_string(num_stages) + " stages on D=" +
                          std::to_string(devices) +
                          " devices has an integral, profiled local batch");
  }
  return MakePlan(profile, cluster, cfg, best, options);
}

PartitionPlan BruteForcePartition(const ModelProfile& profile,
                                  const ClusterConfig& cluster,
                                  const PlanConfig& cfg,
                                  const PartitionOptions& options) {
  const bool bidirectional = profile.backbones.size() == 2;
  CheckCommon(profile, cluster, cfg, bidirectional ? 2 : 1);
  if (bidirectional && cfg.selfcond) {
    throw InfeasibleError(
        "self-conditioning is only supported for a single backbone");
  }
  for (const auto& bb : profile.backbones) {
    if (bb.layers.size() > 10) {
      throw OracleTooLargeError("brute force limited to L <= 10");
    }
  }
  if (cfg.num_stages > 4 || cfg.group_size > 6) {
    throw OracleTooLargeError("brute force limited to S <= 4, D <= 6");
  }
  const int num_stages = cfg.num_stages;
  const int devices = cfg.group_size;
  const int ld_total = static_cast<int>(profile.backbones[0].layers.size());
  const int lu_total =
      bidirectional ? static_cast<int>(profile.backbones[1].layers.size()) : 0;
  const std::vector<int> allowed = AllowedReplicas(cfg);

  // All compositions of `total` into `parts` positive increasing cut points.
  auto cut_vectors = [](int total, int parts) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int lo) {
      const int k = static_cast<int>(cur.size());
      if (k == parts - 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
      }
      for (int hi = lo + 1; hi <= total - (parts - 1 - k); ++hi) {
        cur.push_back(hi);
        rec(hi);
        cur.pop_back();
      }
    };
    rec(0);
    return out;
  };
  std::vector<std::vector<int>> rep_vectors;
  {
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int left) {
      if (static_cast<int>(cur.size()) == num_stages) {
        if (left == 0) rep_vectors.push_back(cur);
        return;
      }
      for (int r : allowed) {
        if (r > left) continue;
        cur.push_back(r);
        rec(left - r);
        cur.pop_back();
      }
    };
    rec(devices);
  }

  const auto down_cuts = cut_vectors(ld_total, num_stages);
  // Up cuts are suffix lengths per device position, built from the same
  // increasing sequences.
  const auto up_cuts = bidirectional ? cut_vectors(lu_total, num_stages)
                                     : std::vector<std::vector<int>>{{}};
  Candidate best;
  for (const auto& reps : rep_vectors) {
    for (const auto& dc : down_cuts) {
      for (const auto& uc : up_cuts) {
        std::vector<int> key;
        std::vector<StageAssignment> stages;
        if (bidirectional) {
          for (int k = 0; k < num_stages; ++k) {
            key.push_back(dc[k]);
            key.push_back(uc[k]);
          }
          stages = BidirectionalStages(key, reps, lu_total);
        } else {
          key = dc;
          stages = SingleStages(key, reps);
        }
        PartitionScore score;
        try {
          score = ScorePartition(profile, cluster, cfg, stages, options);
        } catch (const ExtrapolationError&) {
          continue;
        } catch (const InfeasibleError&) {
          continue;
        }
        Candidate cand;
        cand.valid = true;
        cand.objective = score.objective;
        cand.c = score.max_compute;
        cand.cuts = key;
        cand.reps = reps;
        cand.t_max = score.t_max;
        cand.t_max_sc = score.t_max_sc.value_or(0.0);
        cand.feedback = score.feedback_time;
        if (Better(cand, best)) best = std::move(cand);
      }
    }
  }
  if (!best.valid) throw InfeasibleError("no feasible partition");
  return MakePlan(profile, cluster, cfg, best, options);
}

PartitionPlan Partition(const ModelProfile& profile,
                        const ClusterConfig& cluster, const PlanConfig& cfg,
                        const PartitionOptions& options) {
  if (profile.backbones.size() == 2) {
    return PartitionBidirectional(profile, cluster, cfg, options);
  }
  return PartitionSingle(profile, cluster, cfg, options);
}

}  // namespace pipeplan
