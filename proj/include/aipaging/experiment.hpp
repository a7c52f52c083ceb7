/*
 * Copyright 2026 The aipaging Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Batch plumbing shared by the CLI and the acceptance binary: seed lists,
// parallel fan-out of independent runs, sweep axes and table layout.

#ifndef AIPAGING_EXPERIMENT_HPP_
#define AIPAGING_EXPERIMENT_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aipaging/metrics.hpp"
#include "aipaging/scenario.hpp"
#include "aipaging/simulator.hpp"

namespace aipaging {

/// "7", "1-10" and "1,3,5" forms; throws std::invalid_argument otherwise.
inline std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> out;
  auto num = [&](std::string_view s) {
    s = detail::trim(s);
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw std::invalid_argument("bad seed '" + std::string(s) + "'");
    return std::stoull(std::string(s));
  };
  for (const auto& part : detail::split(text, ',')) {
    auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(num(part));
      continue;
    }
    auto lo = num(std::string_view(part).substr(0, dash));
    auto hi = num(std::string_view(part).substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("empty seed range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

inline constexpr std::string_view kSweepAxes[] = {"relocation_probability", "stress_level", "overload_threshold"};

inline bool is_sweep_axis(std::string_view axis) {
  return std::find(std::begin(kSweepAxes), std::end(kSweepAxes), axis) != std::end(kSweepAxes);
}

inline void apply_axis(ScenarioConfig& c, std::string_view axis, double value) {
  if (axis == "relocation_probability") c.relocation_probability = value;
  else if (axis == "stress_level") c.stress_level = value;
  else if (axis == "overload_threshold") c.overload_threshold = value;
  else throw std::invalid_argument("unknown sweep axis '" + std::string(axis) + "'");
}

/// Runs every config, `jobs` at a time (0 = hardware concurrency). Results
/// keep input order; the first exception thrown by any run is rethrown.
inline std::vector<RunResult> run_batch(const std::vector<ScenarioConfig>& configs, unsigned jobs = 0,
                                        bool keep_traces = false) {
  std::vector<RunResult> out(configs.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, configs.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(configs.size());
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      try {
        out[i] = run_scenario(configs[i]);
        if (!keep_traces) out[i].trace = Trace{};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Seed-averaged reports for (policy, seeds) over one base config.
inline std::vector<MetricsReport> run_seeds(ScenarioConfig base, PolicyKind policy,
                                            const std::vector<std::uint64_t>& seeds, unsigned jobs = 0) {
  std::vector<ScenarioConfig> cfgs;
  base.policy_kind = policy;
  for (auto s : seeds) {
    base.seed = s;
    cfgs.push_back(base);
  }
  std::vector<MetricsReport> out;
  for (auto& r : run_batch(cfgs, jobs)) out.push_back(std::move(r.metrics));
  return out;
}

struct SweepPoint {
  double value = 0;
  AggregateReport agg;
};

/// One sweep curve per policy, every (value, seed) pair run in one batch.
inline std::map<PolicyKind, std::vector<SweepPoint>> run_sweep(const ScenarioConfig& base, std::string_view axis,
                                                               const std::vector<double>& values,
                                                               const std::vector<PolicyKind>& policies,
                                                               const std::vector<std::uint64_t>& seeds,
                                                               unsigned jobs = 0) {
  std::vector<ScenarioConfig> cfgs;
  for (auto p : policies)
    for (double v : values)
      for (auto s : seeds) {
        ScenarioConfig c = base;
        apply_axis(c, axis, v);
        c.policy_kind = p;
        c.seed = s;
        require_valid(c);
        cfgs.push_back(std::move(c));
      }
  auto results = run_batch(cfgs, jobs);
  std::map<PolicyKind, std::vector<SweepPoint>> out;
  std::size_t k = 0;
  for (auto p : policies)
    for (double v : values) {
      std::vector<MetricsReport> reps;
      for (std::size_t i = 0; i < seeds.size(); ++i) reps.push_back(std::move(results[k++].metrics));
      out[p].push_back({v, aggregate(std::move(reps))});
    }
  return out;
}

inline constexpr const char* kSweepCsvColumns =
    "runs,request_failure_rate,recovery_success_probability,evidence_traffic_rate,violation_rate_percent,"
    "txn_time_p50_ms,txn_time_p90_ms,relocation_count,overlap_mean_ms,overlap_max_ms";

inline void write_sweep_csv(std::ostream& out, std::string_view axis, const std::vector<SweepPoint>& points) {
  out << axis << ',' << kSweepCsvColumns << '\n';
  for (const auto& p : points) {
    const auto& a = p.agg;
    out << detail::fmt(p.value) << ',' << a.runs << ',' << fixed(a.request_failure_rate.mean) << ','
        << fixed(a.recovery_success_probability.mean) << ',' << fixed(a.evidence_traffic_rate.mean) << ','
        << fixed(a.violation_rate_percent.mean) << ',' << fixed(a.transaction_time_ms.p50, 3) << ','
        << fixed(a.transaction_time_ms.p90, 3) << ',' << fixed(a.relocation_count.mean, 3) << ','
        << fixed(a.overlap_mean_ms.mean, 3) << ',' << fixed(a.overlap_max_ms.mean, 3) << '\n';
  }
}

inline const std::vector<PolicyKind>& all_policies() {
  static const std::vector<PolicyKind> v{PolicyKind::kEndpointBound, PolicyKind::kBestEffort, PolicyKind::kAiPaging};
  return v;
}

/// Seed-averaged violation_rate_percent per (setup, policy).
struct CorrectnessTable {
  std::vector<std::string> setups;  // row labels in order
  std::vector<PolicyKind> policies;
  std::map<std::string, std::map<PolicyKind, double>> percent;
};

inline CorrectnessTable run_table2(const std::vector<ScenarioConfig>& setups, const std::vector<std::uint64_t>& seeds,
                                   const std::vector<PolicyKind>& policies = all_policies(), unsigned jobs = 0) {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& s : setups)
    for (auto p : policies)
      for (auto seed : seeds) {
        ScenarioConfig c = s;
        c.policy_kind = p;
        c.seed = seed;
        cfgs.push_back(std::move(c));
      }
  auto results = run_batch(cfgs, jobs);
  CorrectnessTable t;
  t.policies = policies;
  std::size_t k = 0;
  for (const auto& s : setups) {
    std::string label(to_string(s.setup_id));
    t.setups.push_back(label);
    for (auto p : policies) {
      std::vector<MetricsReport> reps;
      for (std::size_t i = 0; i < seeds.size(); ++i) reps.push_back(std::move(results[k++].metrics));
      t.percent[label][p] = aggregate(std::move(reps)).violation_rate_percent.mean;
    }
  }
  return t;
}

inline void print_table2(std::ostream& out, const CorrectnessTable& t) {
  out << std::left << std::setw(8) << "Setup";
  for (auto p : t.policies) out << std::right << std::setw(16) << to_string(p);
  out << '\n';
  for (const auto& s : t.setups) {
    out << std::left << std::setw(8) << s;
    for (auto p : t.policies) out << std::right << std::setw(16) << fixed(t.percent.at(s).at(p), 3);
    out << '\n';
  }
}

inline void write_table2_csv(std::ostream& out, const CorrectnessTable& t) {
  out << "setup";
  for (auto p : t.policies) out << ',' << to_string(p);
  out << '\n';
  for (const auto& s : t.setups) {
    out << s;
    for (auto p : t.policies) out << ',' << fixed(t.percent.at(s).at(p));
    out << '\n';
  }
}

}  // namespace aipaging

#endif  // AIPAGING_EXPERIMENT_HPP_
