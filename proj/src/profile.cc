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

#include "pipeplan/profile.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>

#include "file_util.h"
#include "json.hpp"
#include "pipeplan/error.h"

namespace pipeplan {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kProfileFormat[] = "pipeplan.profile";
constexpr int kProfileVersion = 1;

template <typename V>
double Interpolate(const std::map<int64_t, V>& curve, double batch,
                   CostField field) {
  if (curve.empty()) {
    throw ExtrapolationError(std::string("empty ") + CostFieldName(field) +
                             " curve");
  }
  const double lo = static_cast<double>(curve.begin()->first);
  const double hi = static_cast<double>(curve.rbegin()->first);
  if (!(batch >= lo && batch <= hi)) {
    std::ostringstream ss;
    ss << CostFieldName(field) << " requested at batch " << batch
       << " outside profiled range [" << curve.begin()->first << ", "
       << curve.rbegin()->first << "]";
    throw ExtrapolationError(ss.str());
  }
  // First key strictly greater than batch; batch >= lo so it != begin().
  auto upper = curve.upper_bound(static_cast<int64_t>(std::floor(batch)));
  auto lower = std::prev(upper);
  const double k0 = static_cast<double>(lower->first);
  const double v0 = static_cast<double>(lower->second);
  if (batch == k0 || upper == curve.end()) return v0;
  const double k1 = static_cast<double>(upper->first);
  const double v1 = static_cast<double>(upper->second);
  return v0 + (v1 - v0) * ((batch - k0) / (k1 - k0));
}

std::string ComponentLabel(const char* group, size_t index,
                           const ComponentProfile& c) {
  std::ostringstream ss;
  ss << group << "[" << index << "] '" << c.name << "'";
  return ss.str();
}

template <typename V>
bool SameKeys(const std::map<int64_t, V>& a, const TimeCurve& b) {
  if (a.size() != b.size()) return false;
  return std::equal(a.begin(), a.end(), b.begin(),
                    [](const auto& x, const auto& y) {
                      return x.first == y.first;
                    });
}

void ValidateLayer(const LayerCost& layer, const std::string& where,
                   bool trainable) {
  auto fail = [&](const std::string& what) {
    throw ValidationError(where + ": " + what);
  };
  if (layer.fwd_time.empty()) fail("fwd_time curve is empty");
  for (const auto& [batch, value] : layer.fwd_time) {
    if (batch <= 0) fail("batch-size keys must be positive");
    if (!(value >= 0.0) || !std::isfinite(value)) {
      fail("fwd_time values must be finite and non-negative");
    }
  }
  for (const auto& [batch, value] : layer.bwd_time) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      fail("bwd_time values must be finite and non-negative");
    }
    if (!trainable && value != 0.0) {
      fail("frozen layers must have zero bwd_time");
    }
    (void)batch;
  }
  if (!SameKeys(layer.bwd_time, layer.fwd_time)) {
    fail("bwd_time key set differs from fwd_time");
  }
  if (!SameKeys(layer.fwd_comm_bytes, layer.fwd_time)) {
    fail("fwd_comm_bytes key set differs from fwd_time");
  }
  if (!SameKeys(layer.bwd_comm_bytes, layer.fwd_time)) {
    fail("bwd_comm_bytes key set differs from fwd_time");
  }
  if (!SameKeys(layer.grad_bytes, layer.fwd_time)) {
    fail("grad_bytes key set differs from fwd_time");
  }
  if (!SameKeys(layer.out_bytes, layer.fwd_time)) {
    fail("out_bytes key set differs from fwd_time");
  }
}

void ValidateComponent(const ComponentProfile& c, const std::string& label,
                       bool expect_trainable) {
  if (c.name.empty()) throw ValidationError(label + ": name is empty");
  if (c.trainable != expect_trainable) {
    throw ValidationError(label + (expect_trainable
                                       ? ": backbones must be trainable"
                                       : ": frozen components must not be "
                                         "trainable"));
  }
  if (c.layers.empty()) throw ValidationError(label + ": has no layers");
  for (size_t i = 0; i < c.layers.size(); ++i) {
    ValidateLayer(c.layers[i], label + " layer " + std::to_string(i),
                  expect_trainable);
  }
}

// ---- JSON <-> types -------------------------------------------------------

template <typename V>
Json CurveToJson(const std::map<int64_t, V>& curve) {
  Json out = Json::array();
  for (const auto& [batch, value] : curve) out.push_back({batch, value});
  return out;
}

template <typename V>
std::map<int64_t, V> CurveFromJson(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected array of pairs");
  std::map<int64_t, V> curve;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2 ||
        !entry[0].is_number_integer()) {
      throw ParseError(where + ": expected [integer batch, value] pairs");
    }
    const int64_t batch = entry[0].get<int64_t>();
    V value{};
    if constexpr (std::is_floating_point_v<V>) {
      if (!entry[1].is_number()) throw ParseError(where + ": value not a number");
      value = entry[1].get<double>();
    } else {
      if (!entry[1].is_number_unsigned() &&
          !(entry[1].is_number_integer() && entry[1].get<int64_t>() >= 0)) {
        throw ParseError(where + ": byte counts must be unsigned integers");
      }
      value = entry[1].get<uint64_t>();
    }
    if (!curve.emplace(batch, value).second) {
      throw ParseError(where + ": duplicate batch key " +
                       std::to_string(batch));
    }
  }
  return curve;
}

Json LayerToJson(const LayerCost& layer) {
  Json j;
  j["fwd_time"] = CurveToJson(layer.fwd_time);
  j["bwd_time"] = CurveToJson(layer.bwd_time);
  j["fwd_comm_bytes"] = CurveToJson(layer.fwd_comm_bytes);
  j["bwd_comm_bytes"] = CurveToJson(layer.bwd_comm_bytes);
  j["grad_bytes"] = CurveToJson(layer.grad_bytes);
  j["out_bytes"] = CurveToJson(layer.out_bytes);
  return j;
}

template <typename V>
std::map<int64_t, V> ZeroCurveLike(const TimeCurve& keys) {
  std::map<int64_t, V> out;
  for (const auto& [batch, unused] : keys) out.emplace(batch, V{});
  return out;
}

LayerCost LayerFromJson(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": layer must be an object");
  if (!j.contains("fwd_time")) throw ParseError(where + ": missing fwd_time");
  LayerCost layer;
  layer.fwd_time = CurveFromJson<double>(j.at("fwd_time"), where + ".fwd_time");
  // Everything but fwd_time may be omitted and defaults to zero on the
  // fwd_time key set (handy for frozen layers).
  auto time_or_zero = [&](const char* key) {
    return j.contains(key) ? CurveFromJson<double>(j.at(key), where + "." + key)
                           : ZeroCurveLike<double>(layer.fwd_time);
  };
  auto bytes_or_zero = [&](const char* key) {
    return j.contains(key)
               ? CurveFromJson<uint64_t>(j.at(key), where + "." + key)
               : ZeroCurveLike<uint64_t>(layer.fwd_time);
  };
  layer.bwd_time = time_or_zero("bwd_time");
  layer.fwd_comm_bytes = bytes_or_zero("fwd_comm_bytes");
  layer.bwd_comm_bytes = bytes_or_zero("bwd_comm_bytes");
  layer.grad_bytes = bytes_or_zero("grad_bytes");
  layer.out_bytes = bytes_or_zero("out_bytes");
  return layer;
}

Json ComponentToJson(const ComponentProfile& c) {
  Json j;
  j["name"] = c.name;
  j["trainable"] = c.trainable;
  Json layers = Json::array();
  for (const auto& layer : c.layers) layers.push_back(LayerToJson(layer));
  j["layers"] = std::move(layers);
  return j;
}

ComponentProfile ComponentFromJson(const Json& j, const std::string& where,
                                   bool default_trainable) {
  if (!j.is_object()) throw ParseError(where + ": component must be an object");
  ComponentProfile c;
  if (!j.contains("name") || !j.at("name").is_string()) {
    throw ParseError(where + ": missing string field 'name'");
  }
  c.name = j.at("name").get<std::string>();
  c.trainable = default_trainable;
  if (j.contains("trainable")) {
    if (!j.at("trainable").is_boolean()) {
      throw ParseError(where + ": 'trainable' must be a boolean");
    }
    c.trainable = j.at("trainable").get<bool>();
  }
  if (!j.contains("layers") || !j.at("layers").is_array()) {
    throw ParseError(where + ": missing array field 'layers'");
  }
  const Json& layers = j.at("layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    c.layers.push_back(
        LayerFromJson(layers[i], where + ".layers[" + std::to_string(i) + "]"));
  }
  return c;
}

}  // namespace

const char* CostFieldName(CostField field) {
  switch (field) {
    case CostField::kFwdTime:
      return "fwd_time";
    case CostField::kBwdTime:
      return "bwd_time";
    case CostField::kFwdCommBytes:
      return "fwd_comm_bytes";
    case CostField::kBwdCommBytes:
      return "bwd_comm_bytes";
    case CostField::kGradBytes:
      return "grad_bytes";
    case CostField::kOutBytes:
      return "out_bytes";
  }
  return "unknown";
}

double CostAt(const LayerCost& layer, CostField field, double batch) {
  switch (field) {
    case CostField::kFwdTime:
      return Interpolate(layer.fwd_time, batch, field);
    case CostField::kBwdTime:
      return Interpolate(layer.bwd_time, batch, field);
    case CostField::kFwdCommBytes:
      return Interpolate(layer.fwd_comm_bytes, batch, field);
    case CostField::kBwdCommBytes:
      return Interpolate(layer.bwd_comm_bytes, batch, field);
    case CostField::kGradBytes:
      return Interpolate(layer.grad_bytes, batch, field);
    case CostField::kOutBytes:
      return Interpolate(layer.out_bytes, batch, field);
  }
  throw ExtrapolationError("unknown cost field");
}

bool CostInRange(const LayerCost& layer, double batch) {
  if (layer.fwd_time.empty()) return false;
  return batch >= static_cast<double>(layer.fwd_time.begin()->first) &&
         batch <= static_cast<double>(layer.fwd_time.rbegin()->first);
}

void ValidateCluster(const ClusterConfig& cluster) {
  if (cluster.world_size < 1) {
    throw ValidationError("cluster: world_size must be >= 1");
  }
  const CommCosts& c = cluster.comm;
  if (!(c.bandwidth_ar > 0.0) || !(c.bandwidth_p2p > 0.0)) {
    throw ValidationError("cluster: bandwidths must be strictly positive");
  }
  if (!(c.latency_ar >= 0.0) || !(c.latency_p2p >= 0.0)) {
    throw ValidationError("cluster: latencies must be non-negative");
  }
}

std::vector<int> FrozenTopologicalOrder(const ModelProfile& profile) {
  const int n = static_cast<int>(profile.frozen.size());
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indegree(n, 0);
  for (const auto& [from, to] : profile.frozen_deps) {
    if (from < 0 || from >= n || to < 0 || to >= n) {
      throw ValidationError("frozen_deps: edge [" + std::to_string(from) +
                            ", " + std::to_string(to) +
                            "] references a missing frozen component");
    }
    succ[from].push_back(to);
    ++indegree[to];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int c = ready.top();
    ready.pop();
    order.push_back(c);
    for (int next : succ[c]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  if (static_cast<int>(order.size()) == n) return order;

  // Walk predecessors among the unresolved nodes until one repeats.
  std::vector<int> pred(n, -1);
  for (const auto& [from, to] : profile.frozen_deps) {
    if (indegree[to] > 0 && indegree[from] > 0) pred[to] = from;
  }
  int start = 0;
  while (indegree[start] == 0) ++start;
  std::vector<int> seen(n, -1);
  int node = start;
  for (int step = 0; seen[node] < 0; ++step) {
    seen[node] = step;
    node = pred[node];
  }
  std::vector<int> cycle{node};
  for (int v = pred[node]; v != node; v = pred[v]) cycle.push_back(v);
  std::reverse(cycle.begin(), cycle.end());
  std::ostringstream ss;
  ss << "frozen_deps: dependency cycle ";
  for (int v : cycle) ss << "'" << profile.frozen[v].name << "' -> ";
  ss << "'" << profile.frozen[cycle.front()].name << "'";
  throw ValidationError(ss.str());
}

void ValidateProfile(const ModelProfile& profile) {
  if (profile.backbones.empty()) {
    throw ValidationError("profile: at least one backbone is required");
  }
  if (profile.backbones.size() > 2) {
    throw ValidationError("profile: at most two backbones are supported, got " +
                          std::to_string(profile.backbones.size()));
  }
  for (size_t i = 0; i < profile.backbones.size(); ++i) {
    ValidateComponent(profile.backbones[i],
                      ComponentLabel("backbones", i, profile.backbones[i]),
                      /*expect_trainable=*/true);
  }
  for (size_t i = 0; i < profile.frozen.size(); ++i) {
    ValidateComponent(profile.frozen[i],
                      ComponentLabel("frozen", i, profile.frozen[i]),
                      /*expect_trainable=*/false);
  }
  for (const auto& [from, to] : profile.frozen_deps) {
    if (from == to && from >= 0 &&
        from < static_cast<int>(profile.frozen.size())) {
      throw ValidationError("frozen_deps: dependency cycle '" +
                            profile.frozen[from].name + "' -> '" +
                            profile.frozen[from].name + "'");
    }
  }
  FrozenTopologicalOrder(profile);
  if (!(profile.selfcond_prob >= 0.0 && profile.selfcond_prob <= 1.0)) {
    throw ValidationError("profile: selfcond_prob must lie in [0, 1]");
  }
}

ModelProfile ParseProfile(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("profile is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("profile: top level must be an object");
  if (j.contains("format") && j.at("format") != kProfileFormat) {
    throw ParseError("profile: unexpected format tag");
  }
  if (j.contains("version") && j.at("version") != kProfileVersion) {
    throw ParseError("profile: unsupported version");
  }
  ModelProfile profile;
  try {
    if (!j.contains("backbones") || !j.at("backbones").is_array()) {
      throw ParseError("profile: missing array field 'backbones'");
    }
    const Json& backbones = j.at("backbones");
    for (size_t i = 0; i < backbones.size(); ++i) {
      profile.backbones.push_back(ComponentFromJson(
          backbones[i], "backbones[" + std::to_string(i) + "]", true));
    }
    if (j.contains("frozen")) {
      const Json& frozen = j.at("frozen");
      if (!frozen.is_array()) throw ParseError("profile: 'frozen' not an array");
      for (size_t i = 0; i < frozen.size(); ++i) {
        profile.frozen.push_back(ComponentFromJson(
            frozen[i], "frozen[" + std::to_string(i) + "]", false));
      }
    }
    if (j.contains("frozen_deps")) {
      const Json& deps = j.at("frozen_deps");
      if (!deps.is_array()) throw ParseError("profile: 'frozen_deps' not an array");
      for (const auto& edge : deps) {
        if (!edge.is_array() || edge.size() != 2 ||
            !edge[0].is_number_integer() || !edge[1].is_number_integer()) {
          throw ParseError("profile: frozen_deps entries must be [from, to]");
        }
        profile.frozen_deps.emplace_back(edge[0].get<int>(), edge[1].get<int>());
      }
    }
    if (j.contains("selfcond_prob")) {
      if (!j.at("selfcond_prob").is_number()) {
        throw ParseError("profile: selfcond_prob must be a number");
      }
      profile.selfcond_prob = j.at("selfcond_prob").get<double>();
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  ValidateProfile(profile);
  return profile;
}

std::string SerializeProfile(const ModelProfile& profile) {
  Json j;
  j["format"] = kProfileFormat;
  j["version"] = kProfileVersion;
  j["selfcond_prob"] = profile.selfcond_prob;
  Json backbones = Json::array();
  for (const auto& c : profile.backbones) backbones.push_back(ComponentToJson(c));
  j["backbones"] = std::move(backbones);
  Json frozen = Json::array();
  for (const auto& c : profile.frozen) frozen.push_back(ComponentToJson(c));
  j["frozen"] = std::move(frozen);
  Json deps = Json::array();
  for (const auto& [from, to] : profile.frozen_deps) deps.push_back({from, to});
  j["frozen_deps"] = std::move(deps);
  return j.dump(1) + "\n";
}

ModelProfile LoadProfile(const std::filesystem::path& path) {
  const std::string text = internal::ReadFileToString(path);
  try {
    return ParseProfile(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void SaveProfile(const ModelProfile& profile,
                 const std::filesystem::path& path) {
  internal::WriteStringToFile(path, SerializeProfile(profile));
}

}  // namespace pipeplan
