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

#include "pipeplan/planner.h"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>
#include <tuple>

#include "file_util.h"
#include "json.hpp"
#include "pipeplan/error.h"

namespace pipeplan {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kPlanFormat[] = "pipeplan.plan";
constexpr int kPlanVersion = 1;

std::vector<int> Divisors(int n) {
  std::vector<int> out;
  for (int i = 1; i <= n; ++i) {
    if (n % i == 0) out.push_back(i);
  }
  return out;
}

std::string PointLabel(int s, int m, int d) {
  std::ostringstream ss;
  ss << "(S=" << s << ", M=" << m << ", D=" << d << ")";
  return ss.str();
}

// One iteration kind (with or without the self-conditioning pass).
struct Variant {
  Schedule schedule;
  FillPlan fill;
  double pipeline_makespan = 0.0;
  double ratio_before = 0.0;
  double ratio_after = 0.0;
};

Variant RunVariant(const PartitionPlan& plan, const ModelProfile& profile,
                   const ClusterConfig& cluster, bool selfcond,
                   const SearchOptions& options) {
  Variant v;
  const Schedule pipeline = BuildPlanSchedule(plan, profile, cluster, selfcond);
  v.pipeline_makespan = pipeline.makespan;
  v.ratio_before = BubbleRatio(pipeline, ExtractBubbles(pipeline, 0.0));
  FillOptions fo;
  fo.batch = plan.config.global_batch;
  fo.setup_overhead = options.fill_setup_overhead;
  v.fill = FillAll(profile, ExtractBubbles(pipeline, options.bubble_min_len),
                   fo, plan.config.group_size);
  v.schedule = ApplyFillPlan(pipeline, v.fill);
  v.ratio_after = BubbleRatio(v.schedule, ExtractBubbles(v.schedule, 0.0));
  return v;
}

// ---- JSON helpers ---------------------------------------------------------

Json CommToJson(const CommCosts& c) {
  return Json{{"bandwidth_ar", c.bandwidth_ar},
              {"latency_ar", c.latency_ar},
              {"bandwidth_p2p", c.bandwidth_p2p},
              {"latency_p2p", c.latency_p2p}};
}

CommCosts CommFromJson(const Json& j) {
  return {.bandwidth_ar = j.at("bandwidth_ar").get<double>(),
          .latency_ar = j.at("latency_ar").get<double>(),
          .bandwidth_p2p = j.at("bandwidth_p2p").get<double>(),
          .latency_p2p = j.at("latency_p2p").get<double>()};
}

Direction DirectionFromName(const std::string& name) {
  if (name == "down") return Direction::kDown;
  if (name == "up") return Direction::kUp;
  throw ParseError("unknown direction '" + name + "'");
}

TaskKind KindFromJson(const Json& j) {
  const std::string name = j.get<std::string>();
  const auto kind = TaskKindFromName(name);
  if (!kind) throw ParseError("unknown task kind '" + name + "'");
  return *kind;
}

Json StageToJson(const StageAssignment& a, const StageCosts& c) {
  return Json{{"backbone", a.backbone},
              {"direction", DirectionName(a.direction)},
              {"layers", {a.lo, a.hi}},
              {"replicas", a.replicas},
              {"first_device", a.first_device},
              {"t0", c.t0},
              {"compute", c.compute},
              {"comm", c.comm},
              {"t_sync", c.t_sync},
              {"t_comp", c.t_comp},
              {"gap", c.gap}};
}

// Only fields that differ from a default Task are written.
Json TaskToJson(const Task& t) {
  const Task def;
  Json j{{"device", t.device},
         {"kind", TaskKindName(t.kind)},
         {"start", t.start},
         {"end", t.end}};
  if (t.micro_batch != def.micro_batch) j["micro_batch"] = t.micro_batch;
  if (t.stage != def.stage) j["stage"] = t.stage;
  if (t.direction != def.direction) j["direction"] = DirectionName(t.direction);
  if (t.peer_stage != def.peer_stage) j["peer_stage"] = t.peer_stage;
  if (t.payload != def.payload) j["payload"] = TaskKindName(t.payload);
  if (t.component != def.component) j["component"] = t.component;
  if (t.layer != def.layer) j["layer"] = t.layer;
  if (t.samples != def.samples) j["samples"] = t.samples;
  return j;
}

Task TaskFromJson(const Json& j) {
  Task t;
  t.device = j.at("device").get<int>();
  t.kind = KindFromJson(j.at("kind"));
  t.start = j.at("start").get<double>();
  t.end = j.at("end").get<double>();
  if (j.contains("micro_batch")) t.micro_batch = j["micro_batch"].get<int>();
  if (j.contains("stage")) t.stage = j["stage"].get<int>();
  if (j.contains("direction")) {
    t.direction = DirectionFromName(j["direction"].get<std::string>());
  }
  if (j.contains("peer_stage")) t.peer_stage = j["peer_stage"].get<int>();
  if (j.contains("payload")) t.payload = KindFromJson(j["payload"]);
  if (j.contains("component")) t.component = j["component"].get<int>();
  if (j.contains("layer")) t.layer = j["layer"].get<int>();
  if (j.contains("samples")) t.samples = j["samples"].get<int64_t>();
  return t;
}

Json ScheduleToJson(const Schedule& s, const FillPlan& f) {
  Json tasks = Json::array();
  for (const Task& t : s.tasks) tasks.push_back(TaskToJson(t));
  return Json{{"makespan", s.makespan},
              {"device_count", s.device_count},
              {"task_count", s.tasks.size()},
              {"residual_bubble_time", f.residual_bubble_time},
              {"tail_time", f.tail_time},
              {"tasks", std::move(tasks)}};
}

Schedule ScheduleFromJson(const Json& j) {
  Schedule s;
  s.makespan = j.at("makespan").get<double>();
  s.device_count = j.at("device_count").get<int>();
  for (const Json& t : j.at("tasks")) s.tasks.push_back(TaskFromJson(t));
  if (s.tasks.size() != j.at("task_count").get<size_t>()) {
    throw ParseError("schedule: task_count does not match the task list");
  }
  return s;
}

Json BubbleToJson(const Bubble& b) {
  return Json{{"start", b.start}, {"end", b.end}, {"idle_devices", b.idle_devices}};
}

Bubble BubbleFromJson(const Json& j) {
  return {.start = j.at("start").get<double>(),
          .end = j.at("end").get<double>(),
          .idle_devices = j.at("idle_devices").get<std::vector<int>>()};
}

Json FillsToJson(const FillPlan& f) {
  Json fills = Json::array();
  for (const BubbleFill& b : f.fills) {
    Json full = Json::array();
    for (const FullRange& r : b.full_layers) {
      full.push_back({{"component", r.component}, {"layers", {r.lo, r.hi}}});
    }
    Json runs = Json::array();
    for (const LayerRun& r : b.runs) {
      runs.push_back({{"component", r.component},
                      {"layer", r.layer},
                      {"samples", r.samples},
                      {"first_sample", r.first_sample},
                      {"offset", r.offset},
                      {"time", r.time},
                      {"partial", r.partial}});
    }
    Json jb{{"bubble_index", b.bubble_index},
            {"bubble", BubbleToJson(b.bubble)},
            {"fill_time", b.fill_time},
            {"full_layers", std::move(full)}};
    if (b.partial) {
      jb["partial"] = {{"component", b.partial->component},
                       {"layer", b.partial->layer},
                       {"samples", b.partial->samples},
                       {"first_sample", b.partial->first_sample}};
    }
    jb["runs"] = std::move(runs);
    fills.push_back(std::move(jb));
  }
  Json tail = Json::array();
  for (const TailItem& t : f.tail) {
    tail.push_back({{"component", t.component},
                    {"layer", t.layer},
                    {"samples", t.samples},
                    {"first_sample", t.first_sample},
                    {"devices", t.devices},
                    {"time", t.time}});
  }
  return Json{{"bubbles", std::move(fills)}, {"tail", std::move(tail)}};
}

// `schedule` carries residual_bubble_time and tail_time.
FillPlan FillsFromJson(const Json* j, const Json& schedule) {
  FillPlan f;
  f.residual_bubble_time = schedule.at("residual_bubble_time").get<double>();
  f.tail_time = schedule.at("tail_time").get<double>();
  if (j == nullptr) return f;
  for (const Json& jb : j->at("bubbles")) {
    BubbleFill b;
    b.bubble_index = jb.at("bubble_index").get<int>();
    b.bubble = BubbleFromJson(jb.at("bubble"));
    b.fill_time = jb.at("fill_time").get<double>();
    for (const Json& r : jb.at("full_layers")) {
      b.full_layers.push_back({.component = r.at("component").get<int>(),
                               .lo = r.at("layers").at(0).get<int>(),
                               .hi = r.at("layers").at(1).get<int>()});
    }
    if (jb.contains("partial")) {
      const Json& p = jb["partial"];
      b.partial = PartialAssignment{
          .component = p.at("component").get<int>(),
          .layer = p.at("layer").get<int>(),
          .samples = p.at("samples").get<int64_t>(),
          .first_sample = p.at("first_sample").get<int64_t>()};
    }
    for (const Json& r : jb.at("runs")) {
      b.runs.push_back({.component = r.at("component").get<int>(),
                        .layer = r.at("layer").get<int>(),
                        .samples = r.at("samples").get<int64_t>(),
                        .first_sample = r.at("first_sample").get<int64_t>(),
                        .offset = r.at("offset").get<double>(),
                        .time = r.at("time").get<double>(),
                        .partial = r.at("partial").get<bool>()});
    }
    f.fills.push_back(std::move(b));
  }
  for (const Json& t : j->at("tail")) {
    f.tail.push_back({.component = t.at("component").get<int>(),
                      .layer = t.at("layer").get<int>(),
                      .samples = t.at("samples").get<int64_t>(),
                      .first_sample = t.at("first_sample").get<int64_t>(),
                      .devices = t.at("devices").get<int>(),
                      .time = t.at("time").get<double>()});
  }
  return f;
}

bool HasFillWork(const std::optional<FillPlan>& f) {
  return f && (!f->fills.empty() || !f->tail.empty());
}

Json PointToJson(const PointResult& p) {
  Json j{{"num_stages", p.num_stages},
         {"num_microbatches", p.num_microbatches},
         {"group_size", p.group_size},
         {"feasible", p.feasible}};
  if (p.feasible) {
    j["predicted_iter_time"] = p.predicted_iter_time;
  } else {
    j["reason"] = p.reason;
  }
  return j;
}

PointResult PointFromJson(const Json& j) {
  PointResult p;
  p.num_stages = j.at("num_stages").get<int>();
  p.num_microbatches = j.at("num_microbatches").get<int>();
  p.group_size = j.at("group_size").get<int>();
  p.feasible = j.at("feasible").get<bool>();
  if (p.feasible) {
    p.predicted_iter_time = j.at("predicted_iter_time").get<double>();
  } else {
    p.reason = j.at("reason").get<std::string>();
  }
  return p;
}

std::string TaskLabel(const Task& t) {
  std::ostringstream ss;
  ss << TaskKindName(t.kind);
  if (t.kind == TaskKind::kFill) {
    ss << " c" << t.component << " l" << t.layer;
  } else if (t.kind == TaskKind::kSync) {
    ss << " s" << t.stage;
  } else {
    ss << " mb" << t.micro_batch << " s" << t.stage;
  }
  return ss.str();
}

}  // namespace

PlanReport EvaluatePoint(const ModelProfile& profile,
                         const ClusterConfig& cluster, int num_stages,
                         int num_microbatches, int group_size,
                         int64_t global_batch, bool equal_replication,
                         const SearchOptions& options) {
  if (group_size < 1 || cluster.world_size % group_size != 0) {
    throw InfeasibleError("group size " + std::to_string(group_size) +
                          " does not divide world size " +
                          std::to_string(cluster.world_size));
  }
  const int dp = cluster.world_size / group_size;
  if (global_batch % dp != 0) {
    throw InfeasibleError("batch " + std::to_string(global_batch) +
                          " not divisible by data-parallel degree " +
                          std::to_string(dp));
  }
  const double p = options.selfcond_prob.value_or(profile.selfcond_prob);
  PlanConfig cfg{.num_stages = num_stages,
                 .num_microbatches = num_microbatches,
                 .group_size = group_size,
                 .global_batch = global_batch / dp,
                 .selfcond = p > 0.0,
                 .selfcond_prob = p > 0.0 ? p : 0.0,
                 .equal_replication = equal_replication};
  ValidatePlanConfig(cfg, cluster);

  PlanReport r;
  r.world_size = cluster.world_size;
  r.comm = cluster.comm;
  r.global_batch = global_batch;
  r.bubble_min_len = options.bubble_min_len;
  r.plan = Partition(profile, cluster, cfg, options.partition);

  std::optional<Variant> plain;
  std::optional<Variant> sc;
  if (p < 1.0) plain = RunVariant(r.plan, profile, cluster, false, options);
  if (p > 0.0) sc = RunVariant(r.plan, profile, cluster, true, options);
  // p-weighted expectation; a single variant is taken as is.
  auto expect = [&](auto value) {
    if (!sc) return value(*plain);
    if (!plain) return value(*sc);
    return p * value(*sc) + (1.0 - p) * value(*plain);
  };
  r.pipeline_makespan = expect([](const Variant& v) { return v.pipeline_makespan; });
  r.bubble_ratio_before = expect([](const Variant& v) { return v.ratio_before; });
  r.bubble_ratio_after = expect([](const Variant& v) { return v.ratio_after; });
  r.predicted_iter_time =
      expect([](const Variant& v) { return v.schedule.makespan; });
  if (plain) {
    r.schedule = std::move(plain->schedule);
    r.fill = std::move(plain->fill);
  }
  if (sc) {
    r.selfcond_schedule = std::move(sc->schedule);
    r.selfcond_fill = std::move(sc->fill);
  }
  r.throughput = r.predicted_iter_time > 0.0
                     ? static_cast<double>(global_batch) / r.predicted_iter_time
                     : 0.0;
  return r;
}

std::vector<PointResult> ExpandSpace(const SearchSpace& space,
                                     const ClusterConfig& cluster) {
  const std::vector<int> groups = space.group_sizes.empty()
                                      ? Divisors(cluster.world_size)
                                      : space.group_sizes;
  const std::vector<int> micro = space.microbatch_counts.empty()
                                     ? std::vector<int>{1, 2, 4, 8, 16}
                                     : space.microbatch_counts;
  std::vector<PointResult> points;
  for (int d : groups) {
    std::vector<int> stages = space.stage_counts;
    if (stages.empty()) {
      for (int s = 1; s <= d; ++s) {
        if (!space.equal_replication || d % s == 0) stages.push_back(s);
      }
    }
    for (int s : stages) {
      for (int m : micro) {
        PointResult p;
        p.num_stages = s;
        p.num_microbatches = m;
        p.group_size = d;
        points.push_back(std::move(p));
      }
    }
  }
  auto key = [](const PointResult& p) {
    return std::make_tuple(p.num_stages, p.num_microbatches, p.group_size);
  };
  std::sort(points.begin(), points.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });
  points.erase(std::unique(points.begin(), points.end(),
                           [&](const auto& a, const auto& b) {
                             return key(a) == key(b);
                           }),
               points.end());
  return points;
}

PlanReport Search(const ModelProfile& profile, const ClusterConfig& cluster,
                  const SearchSpace& space, const SearchOptions& options) {
  ValidateProfile(profile);
  ValidateCluster(cluster);
  if (space.global_batch < 1) throw ValidationError("batch must be >= 1");
  if (options.selfcond_prob &&
      !(*options.selfcond_prob >= 0.0 && *options.selfcond_prob <= 1.0)) {
    throw ValidationError("self-conditioning probability must be in [0, 1]");
  }
  std::vector<PointResult> points = ExpandSpace(space, cluster);
  if (points.empty()) throw ValidationError("search space is empty");

  std::vector<std::optional<PlanReport>> reports(points.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < points.size(); i = next++) {
      PointResult& pt = points[i];
      try {
        reports[i] = EvaluatePoint(profile, cluster, pt.num_stages,
                                   pt.num_microbatches, pt.group_size,
                                   space.global_batch, space.equal_replication,
                                   options);
        pt.feasible = true;
        pt.predicted_iter_time = reports[i]->predicted_iter_time;
      } catch (const InfeasibleError& e) {
        pt.reason = e.what();
      } catch (const ExtrapolationError& e) {
        pt.reason = e.what();
      }
    }
  };
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int threads = std::clamp(options.threads > 0 ? options.threads
                                                     : std::max(1, hw),
                                 1, static_cast<int>(points.size()));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  // Points are in (S, M, D) order, so keeping the first minimum breaks ties
  // lexicographically.
  std::optional<size_t> best;
  for (size_t i = 0; i < points.size(); ++i) {
    if (!points[i].feasible) continue;
    if (!best || points[i].predicted_iter_time <
                     points[*best].predicted_iter_time) {
      best = i;
    }
  }
  if (!best) {
    std::ostringstream ss;
    ss << "no feasible plan in " << points.size() << " grid points:";
    for (const PointResult& p : points) {
      ss << "\n  " << PointLabel(p.num_stages, p.num_microbatches, p.group_size)
         << ": " << p.reason;
    }
    throw NoFeasiblePlanError(ss.str());
  }
  PlanReport out = std::move(*reports[*best]);
  out.diagnostics = std::move(points);
  return out;
}

std::string EmitPlan(const PlanReport& r) {
  const PlanConfig& c = r.plan.config;
  Json doc;
  doc["format"] = kPlanFormat;
  doc["version"] = kPlanVersion;
  doc["config"] = {{"world_size", r.world_size},
                   {"comm", CommToJson(r.comm)},
                   {"global_batch", r.global_batch},
                   {"bubble_min_len", r.bubble_min_len},
                   {"num_stages", c.num_stages},
                   {"num_microbatches", c.num_microbatches},
                   {"group_size", c.group_size},
                   {"data_parallel", r.data_parallel()},
                   {"group_batch", c.global_batch},
                   {"selfcond", c.selfcond},
                   {"selfcond_prob", c.selfcond_prob},
                   {"equal_replication", c.equal_replication}};
  Json stages = Json::array();
  for (size_t i = 0; i < r.plan.stages.size(); ++i) {
    stages.push_back(StageToJson(r.plan.stages[i], r.plan.per_stage[i]));
  }
  doc["stages"] = std::move(stages);
  Json bounds{{"objective", r.plan.objective},
              {"t_max", r.plan.t_max},
              {"feedback_time", r.plan.feedback_time},
              {"paired_stage_count", r.plan.paired_stage_count}};
  if (r.plan.t_max_sc) bounds["t_max_sc"] = *r.plan.t_max_sc;
  doc["bounds"] = std::move(bounds);

  Json schedule{{"pipeline_makespan", r.pipeline_makespan}};
  if (r.schedule) schedule["plain"] = ScheduleToJson(*r.schedule, *r.fill);
  if (r.selfcond_schedule) {
    schedule["selfcond"] =
        ScheduleToJson(*r.selfcond_schedule, *r.selfcond_fill);
  }
  doc["schedule"] = std::move(schedule);
  if (HasFillWork(r.fill) || HasFillWork(r.selfcond_fill)) {
    Json fills = Json::object();
    if (r.fill) fills["plain"] = FillsToJson(*r.fill);
    if (r.selfcond_fill) fills["selfcond"] = FillsToJson(*r.selfcond_fill);
    doc["fills"] = std::move(fills);
  }
  doc["metrics"] = {{"predicted_iter_time", r.predicted_iter_time},
                    {"bubble_ratio_before", r.bubble_ratio_before},
                    {"bubble_ratio_after", r.bubble_ratio_after},
                    {"throughput", r.throughput}};
  Json diag = Json::array();
  for (const PointResult& p : r.diagnostics) diag.push_back(PointToJson(p));
  doc["diagnostics"] = std::move(diag);
  return doc.dump(2) + "\n";
}

PlanReport ParsePlan(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plan: malformed JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kPlanFormat) {
      throw ParseError(std::string("plan: format tag must be '") + kPlanFormat +
                       "'");
    }
    if (doc.at("version").get<int>() != kPlanVersion) {
      throw ParseError("plan: unsupported version " + doc["version"].dump());
    }
    PlanReport r;
    const Json& cfg = doc.at("config");
    r.world_size = cfg.at("world_size").get<int>();
    r.comm = CommFromJson(cfg.at("comm"));
    r.global_batch = cfg.at("global_batch").get<int64_t>();
    r.bubble_min_len = cfg.at("bubble_min_len").get<double>();
    PlanConfig& c = r.plan.config;
    c.num_stages = cfg.at("num_stages").get<int>();
    c.num_microbatches = cfg.at("num_microbatches").get<int>();
    c.group_size = cfg.at("group_size").get<int>();
    c.global_batch = cfg.at("group_batch").get<int64_t>();
    c.selfcond = cfg.at("selfcond").get<bool>();
    c.selfcond_prob = cfg.at("selfcond_prob").get<double>();
    c.equal_replication = cfg.at("equal_replication").get<bool>();
    if (c.group_size < 1 || r.world_size % c.group_size != 0) {
      throw ParseError("plan: group_size must divide world_size");
    }

    for (const Json& s : doc.at("stages")) {
      r.plan.stages.push_back(
          {.backbone = s.at("backbone").get<int>(),
           .lo = s.at("layers").at(0).get<int>(),
           .hi = s.at("layers").at(1).get<int>(),
           .replicas = s.at("replicas").get<int>(),
           .direction =
               DirectionFromName(s.at("direction").get<std::string>()),
           .first_device = s.at("first_device").get<int>()});
      r.plan.per_stage.push_back({.t0 = s.at("t0").get<double>(),
                                  .t_sync = s.at("t_sync").get<double>(),
                                  .t_comp = s.at("t_comp").get<double>(),
                                  .gap = s.at("gap").get<double>(),
                                  .compute = s.at("compute").get<double>(),
                                  .comm = s.at("comm").get<double>()});
    }
    const Json& b = doc.at("bounds");
    r.plan.objective = b.at("objective").get<double>();
    r.plan.t_max = b.at("t_max").get<double>();
    r.plan.feedback_time = b.at("feedback_time").get<double>();
    r.plan.paired_stage_count = b.at("paired_stage_count").get<int>();
    if (b.contains("t_max_sc")) r.plan.t_max_sc = b["t_max_sc"].get<double>();

    const Json& sched = doc.at("schedule");
    r.pipeline_makespan = sched.at("pipeline_makespan").get<double>();
    const Json* fills = doc.contains("fills") ? &doc["fills"] : nullptr;
    auto section = [&](const char* key) -> const Json* {
      return fills && fills->contains(key) ? &(*fills)[key] : nullptr;
    };
    if (sched.contains("plain")) {
      r.schedule = ScheduleFromJson(sched["plain"]);
      r.fill = FillsFromJson(section("plain"), sched["plain"]);
    }
    if (sched.contains("selfcond")) {
      r.selfcond_schedule = ScheduleFromJson(sched["selfcond"]);
      r.selfcond_fill = FillsFromJson(section("selfcond"), sched["selfcond"]);
    }
    const Json& m = doc.at("metrics");
    r.predicted_iter_time = m.at("predicted_iter_time").get<double>();
    r.bubble_ratio_before = m.at("bubble_ratio_before").get<double>();
    r.bubble_ratio_after = m.at("bubble_ratio_after").get<double>();
    r.throughput = m.at("throughput").get<double>();
    for (const Json& p : doc.at("diagnostics")) {
      r.diagnostics.push_back(PointFromJson(p));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
}

void SavePlan(const PlanReport& report, const std::filesystem::path& path) {
  internal::WriteStringToFile(path, EmitPlan(report));
}

PlanReport LoadPlan(const std::filesystem::path& path) {
  const std::string text = internal::ReadFileToString(path);
  try {
    return ParsePlan(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string EmitTrace(const PlanReport& report) {
  Json events = Json::array();
  // Self-conditioning iterations get their own block of device processes.
  auto add = [&](const Schedule& s, int pid_offset, const char* variant) {
    for (const Task& t : s.tasks) {
      Json args{{"variant", variant}};
      const Json fields = TaskToJson(t);
      for (auto it = fields.begin(); it != fields.end(); ++it) {
        const std::string& k = it.key();
        if (k != "device" && k != "kind" && k != "start" && k != "end") {
          args[k] = it.value();
        }
      }
      events.push_back({{"name", TaskLabel(t)},
                        {"cat", TaskKindName(t.kind)},
                        {"ph", "X"},
                        {"ts", t.start * 1e6},
                        {"dur", (t.end - t.start) * 1e6},
                        {"pid", pid_offset + t.device},
                        {"tid", IsComputeKind(t.kind) ? 0 : 1},
                        {"args", std::move(args)}});
    }
  };
  int offset = 0;
  if (report.schedule) {
    add(*report.schedule, 0, "plain");
    offset = report.schedule->device_count;
  }
  if (report.selfcond_schedule) add(*report.selfcond_schedule, offset, "selfcond");
  Json doc{{"traceEvents", std::move(events)},
           {"displayTimeUnit", "ms"},
           {"otherData",
            {{"predicted_iter_time", report.predicted_iter_time},
             {"bubble_ratio_before", report.bubble_ratio_before},
             {"bubble_ratio_after", report.bubble_ratio_after}}}};
  return doc.dump(1) + "\n";
}

void SaveTrace(const PlanReport& report, const std::filesystem::path& path) {
  internal::WriteStringToFile(path, EmitTrace(report));
}

}  // namespace pipeplan
