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

// pipeplan plan: searches (stages, micro-batches, group size) for a profile
// and prints the best plan. Exit status: 0 success, 1 input error, 2 no
// feasible plan.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pipeplan/error.h"
#include "pipeplan/planner.h"

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNoPlan = 2;

struct PlanArgs {
  std::string profile;
  int world_size = 1;
  double bw_ar = 0.0;
  double lat_ar = 0.0;
  double bw_p2p = 0.0;
  double lat_p2p = 0.0;
  int64_t batch = 0;
  std::vector<int> stages;
  std::vector<int> microbatches;
  std::vector<int> group_sizes;
  std::optional<double> selfcond_prob;
  std::string emit_plan;
  std::string emit_trace;
  double bubble_min_ms = 10.0;
  bool unequal_replication = false;
  int threads = 0;
};

void PrintReport(const pipeplan::PlanReport& r) {
  const pipeplan::PlanConfig& c = r.plan.config;
  int feasible = 0;
  for (const auto& p : r.diagnostics) feasible += p.feasible ? 1 : 0;
  std::printf("best plan: S=%d M=%d D=%d (data parallel %d, group batch %lld)\n",
              c.num_stages, c.num_microbatches, c.group_size, r.data_parallel(),
              static_cast<long long>(c.global_batch));
  if (c.selfcond) std::printf("self-conditioning p=%g\n", c.selfcond_prob);
  std::printf("  %-8s %-4s %-9s %-8s %-8s %s\n", "backbone", "dir", "layers",
              "replicas", "devices", "t0 [s]");
  for (size_t i = 0; i < r.plan.stages.size(); ++i) {
    const auto& s = r.plan.stages[i];
    const std::string layers =
        "[" + std::to_string(s.lo) + "," + std::to_string(s.hi) + ")";
    const std::string devices = std::to_string(s.first_device) + ".." +
                                std::to_string(s.first_device + s.replicas - 1);
    std::printf("  %-8d %-4s %-9s %-8d %-8s %.6f\n", s.backbone,
                pipeplan::DirectionName(s.direction), layers.c_str(),
                s.replicas, devices.c_str(), r.plan.per_stage[i].t0);
  }
  std::printf("objective (bound):     %.6f s\n", r.plan.objective);
  std::printf("pipeline makespan:     %.6f s\n", r.pipeline_makespan);
  std::printf("predicted iteration:   %.6f s\n", r.predicted_iter_time);
  std::printf("bubble ratio:          %.4f before fill, %.4f after\n",
              r.bubble_ratio_before, r.bubble_ratio_after);
  std::printf("throughput:            %.3f samples/s\n", r.throughput);
  std::printf("grid points:           %d feasible of %zu\n", feasible,
              r.diagnostics.size());
}

int RunPlan(const PlanArgs& a) {
  const pipeplan::ModelProfile profile = pipeplan::LoadProfile(a.profile);
  pipeplan::ClusterConfig cluster{.world_size = a.world_size,
                                  .comm = {.bandwidth_ar = a.bw_ar,
                                           .latency_ar = a.lat_ar,
                                           .bandwidth_p2p = a.bw_p2p,
                                           .latency_p2p = a.lat_p2p}};
  pipeplan::SearchSpace space{.stage_counts = a.stages,
                              .microbatch_counts = a.microbatches,
                              .group_sizes = a.group_sizes,
                              .global_batch = a.batch,
                              .equal_replication = !a.unequal_replication};
  pipeplan::SearchOptions options;
  options.bubble_min_len = a.bubble_min_ms / 1000.0;
  options.selfcond_prob = a.selfcond_prob;
  options.threads = a.threads;
  const pipeplan::PlanReport report =
      pipeplan::Search(profile, cluster, space, options);
  PrintReport(report);
  if (!a.emit_plan.empty()) pipeplan::SavePlan(report, a.emit_plan);
  if (!a.emit_trace.empty()) pipeplan::SaveTrace(report, a.emit_trace);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipeline training planner"};
  app.require_subcommand(1);
  PlanArgs a;
  CLI::App* plan = app.add_subcommand("plan", "search for the best plan");
  plan->add_option("--profile", a.profile, "profile document")
      ->required()
      ->check(CLI::ExistingFile);
  plan->add_option("--world-size", a.world_size, "number of devices")
      ->required()
      ->check(CLI::PositiveNumber);
  plan->add_option("--bw-ar", a.bw_ar, "all-reduce bandwidth [bytes/s]")
      ->required();
  plan->add_option("--lat-ar", a.lat_ar, "all-reduce latency [s]")->required();
  plan->add_option("--bw-p2p", a.bw_p2p, "point-to-point bandwidth [bytes/s]")
      ->required();
  plan->add_option("--lat-p2p", a.lat_p2p, "point-to-point latency [s]")
      ->required();
  plan->add_option("--batch", a.batch, "global batch per iteration")
      ->required()
      ->check(CLI::PositiveNumber);
  plan->add_option("--stages", a.stages, "stage counts, comma separated")
      ->delimiter(',');
  plan->add_option("--microbatches", a.microbatches,
                   "micro-batch counts, comma separated")
      ->delimiter(',');
  plan->add_option("--group-sizes", a.group_sizes,
                   "devices per pipeline group, comma separated")
      ->delimiter(',');
  plan->add_option("--selfcond-prob", a.selfcond_prob,
                   "self-conditioning probability (overrides the profile)")
      ->check(CLI::Range(0.0, 1.0));
  plan->add_option("--emit-plan", a.emit_plan, "write the plan document");
  plan->add_option("--emit-trace", a.emit_trace, "write a Chrome trace");
  plan->add_option("--bubble-min-ms", a.bubble_min_ms,
                   "shortest bubble to fill [ms]")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  plan->add_flag("--unequal-replication", a.unequal_replication,
                 "allow stages with different replica counts");
  plan->add_option("--threads", a.threads, "worker threads (0: all cores)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    return RunPlan(a);
  } catch (const pipeplan::NoFeasiblePlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoPlan;
  } catch (const pipeplan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
