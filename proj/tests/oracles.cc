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

#include "oracles.h"

#include <algorithm>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

namespace pipeplan::testing {
namespace {

using Ranges = std::vector<std::pair<int64_t, int64_t>>;

bool Covers(const Ranges& ranges, int64_t lo, int64_t hi) {
  int64_t total = 0;
  for (auto [a, b] : ranges) {
    total += std::max<int64_t>(0, std::min(b, hi) - std::max(a, lo));
  }
  return total == hi - lo;
}

}  // namespace

FillOracleResult FillOracle(const ModelProfile& p, const FillState& s,
                            double budget, int d) {
  const int n = static_cast<int>(s.ready.size());
  std::vector<std::vector<double>> cum(n);
  for (int i = 0; i < n; ++i) {
    const int c = s.ready[i];
    cum[i] = {0.0};
    for (int l = s.cursor[c]; l < static_cast<int>(p.frozen[c].layers.size());
         ++l) {
      const double local = static_cast<double>(s.remaining[c][l]) / d;
      if (!CostInRange(p.frozen[c].layers[l], local)) break;
      cum[i].push_back(cum[i].back() +
                       CostAt(p.frozen[c].layers[l], CostField::kFwdTime,
                              local));
    }
  }
  auto max_prefix = [&](int i, double b) {
    int k = 0;
    while (k + 1 < static_cast<int>(cum[i].size()) && cum[i][k + 1] <= b) ++k;
    return k;
  };
  FillOracleResult r;
  std::vector<int> k(n, 0);
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      double base = 0.0;
      bool ffc = true;
      for (int j = 0; j < n; ++j) {
        const int m = max_prefix(j, budget - base);
        if (k[j] > m || (j == n - 1 && k[j] != m)) ffc = false;
        base += cum[j][k[j]];
      }
      if (base > budget) return;
      double best = base;
      for (int j = 0; j < n; ++j) {
        const int c = s.ready[j];
        const int l = s.cursor[c] + k[j];
        if (l >= static_cast<int>(p.frozen[c].layers.size())) continue;
        for (int64_t v : DefaultValidLocalBatches()) {
          if (v * d >= s.remaining[c][l]) continue;
          if (!CostInRange(p.frozen[c].layers[l], v)) continue;
          const double t = CostAt(p.frozen[c].layers[l], CostField::kFwdTime,
                                  static_cast<double>(v));
          if (base + t <= budget) best = std::max(best, base + t);
        }
      }
      r.any_prefix_best = std::max(r.any_prefix_best, best);
      if (ffc) r.ffc_best = std::max(r.ffc_best, best);
      return;
    }
    for (k[i] = 0; k[i] < static_cast<int>(cum[i].size()); ++k[i]) rec(i + 1);
  };
  rec(0);
  return r;
}

FillState RandomFillState(const ModelProfile& p, int64_t batch,
                          std::mt19937_64& rng) {
  FillState s = InitialFillState(p, batch);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int c : s.ready) {
    const int layers = static_cast<int>(p.frozen[c].layers.size());
    const int cur = std::uniform_int_distribution<int>(0, layers - 1)(rng);
    for (int l = 0; l < cur; ++l) s.remaining[c][l] = 0;
    s.cursor[c] = cur;
    if (pick(rng) == 0) {
      s.remaining[c][cur] =
          std::uniform_int_distribution<int64_t>(1, batch)(rng);
    }
  }
  return s;
}

std::string CheckFillPlan(const ModelProfile& p, const FillPlan& plan,
                          int64_t batch) {
  const size_t n = p.frozen.size();
  // covered[c][l]: sample ranges already run, in execution order.
  std::vector<std::vector<Ranges>> covered(n);
  for (size_t c = 0; c < n; ++c) covered[c].resize(p.frozen[c].layers.size());
  std::vector<int64_t> done_samples(n, 0);
  std::vector<int> done_at(n, -1);
  std::ostringstream err;

  // `when` orders bubbles, then tail items after every bubble.
  auto visit = [&](int c, int l, int64_t first, int64_t samples, int when) {
    if (samples <= 0) {
      err << "component " << c << " layer " << l << ": empty run";
      return false;
    }
    if (l > 0 && !Covers(covered[c][l - 1], first, first + samples)) {
      err << "component " << c << " layer " << l << ": samples [" << first
          << ", " << first + samples << ") run before their inputs";
      return false;
    }
    for (const auto& [from, to] : p.frozen_deps) {
      if (to == c && (done_at[from] < 0 || done_at[from] >= when)) {
        err << "component " << c << " runs at " << when
            << " before predecessor " << from << " completes";
        return false;
      }
    }
    covered[c][l].push_back({first, first + samples});
    done_samples[c] += samples;
    if (done_samples[c] ==
        batch * static_cast<int64_t>(covered[c].size())) {
      done_at[c] = when;
    }
    return true;
  };

  for (const BubbleFill& f : plan.fills) {
    if (f.fill_time > f.bubble.duration()) {
      err << "bubble " << f.bubble_index << ": fill " << f.fill_time
          << " exceeds duration " << f.bubble.duration();
      return err.str();
    }
    double prev_end = 0.0;
    for (const LayerRun& r : f.runs) {
      if (r.offset < prev_end - 1e-12) {
        err << "bubble " << f.bubble_index << ": overlapping runs";
        return err.str();
      }
      prev_end = r.offset + r.time;
      if (!visit(r.component, r.layer, r.first_sample, r.samples,
                 f.bubble_index)) {
        return err.str();
      }
    }
    if (prev_end > f.bubble.duration() * (1 + 1e-12)) {
      err << "bubble " << f.bubble_index << ": runs end at " << prev_end
          << " past duration " << f.bubble.duration();
      return err.str();
    }
  }
  const int tail_when = 1 << 29;
  for (size_t i = 0; i < plan.tail.size(); ++i) {
    const TailItem& t = plan.tail[i];
    if (!visit(t.component, t.layer, t.first_sample, t.samples,
               tail_when + static_cast<int>(i))) {
      return err.str();
    }
  }
  for (size_t c = 0; c < n; ++c) {
    for (size_t l = 0; l < covered[c].size(); ++l) {
      int64_t sum = 0;
      for (auto [a, b] : covered[c][l]) sum += b - a;
      if (sum != batch || !Covers(covered[c][l], 0, batch)) {
        err << "component " << c << " layer " << l << ": " << sum << " of "
            << batch << " samples covered";
        return err.str();
      }
    }
  }
  return "";
}

std::string CheckComputeLanes(const Schedule& schedule) {
  std::vector<std::vector<std::pair<double, double>>> lanes(
      schedule.device_count);
  for (const Task& t : schedule.tasks) {
    if (IsComputeKind(t.kind)) lanes.at(t.device).push_back({t.start, t.end});
  }
  const double eps = 1e-9 * std::max(1.0, schedule.makespan);
  for (size_t d = 0; d < lanes.size(); ++d) {
    std::sort(lanes[d].begin(), lanes[d].end());
    for (size_t i = 1; i < lanes[d].size(); ++i) {
      if (lanes[d][i].first < lanes[d][i - 1].second - eps) {
        std::ostringstream err;
        err << "device " << d << ": compute tasks overlap at "
            << lanes[d][i].first;
        return err.str();
      }
    }
  }
  return "";
}

}  // namespace pipeplan::testing
