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

// Run metrics computed from a trace alone, seed aggregation, and CSV output.

#ifndef AIPAGING_METRICS_HPP_
#define AIPAGING_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aipaging/core.hpp"
#include "aipaging/replay.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

struct MetricsReport {
  std::string setup;
  std::string policy;
  std::uint64_t seed = 0;
  SimTime horizon = 0;

  std::vector<double> transaction_time_samples;  // ms, one per served session
  std::uint64_t sessions = 0;
  std::uint64_t requests = 0;
  std::uint64_t failed_requests = 0;
  double request_failure_rate = 0.0;
  std::uint64_t recovery_events = 0;
  std::uint64_t recovered = 0;
  double recovery_success_probability = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t evidence_records = 0;
  double evidence_traffic_rate = 0.0;  // records per simulated second
  double violation_rate_percent = 0.0;
  std::uint64_t relocation_count = 0;
  std::uint64_t relocation_failures = 0;
  double overlap_mean_ms = 0.0;
  double overlap_max_ms = 0.0;
  std::uint64_t admission_rejects = 0;
};

/// Nearest-rank percentile: the smallest sample with at least p% of the
/// samples at or below it.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

//=============================================================================
// Violation rate

/// Per-Aisi time during which some steering entry exists without a valid
/// backing lease, clipped to [0, horizon).
inline std::map<AisiId, SimTime> violation_time_by_aisi(const TraceIndex& idx) {
  const SimTime horizon = idx.run.horizon;
  std::map<std::pair<AisiId, std::string>, std::vector<Interval>> valid_by_anchor;
  for (const auto& [id, l] : idx.leases) valid_by_anchor[{l.aisi, l.anchor}].push_back(l.validity());

  std::map<AisiId, std::vector<Interval>> bad;
  for (const auto& [id, e] : idx.entries) {
    Interval installed{std::max<SimTime>(e.installed, 0), std::min(e.removed.value_or(horizon), horizon)};
    if (installed.length() == 0) continue;
    std::vector<Interval> cover;
    if (e.lease == kUngated) {
      auto it = valid_by_anchor.find({e.aisi, e.anchor});
      if (it != valid_by_anchor.end()) cover = it->second;
    } else {
      auto it = idx.leases.find(e.lease);
      if (it == idx.leases.end())
        throw TraceFormatError("steering entry " + std::to_string(e.id.value) + " references unknown lease");
      cover.push_back(it->second.validity());
    }
    auto gaps = subtract_intervals(installed, std::move(cover));
    auto& dst = bad[e.aisi];
    dst.insert(dst.end(), gaps.begin(), gaps.end());
  }
  std::map<AisiId, SimTime> out;
  for (auto& [aisi, v] : bad) out[aisi] = total_length(v);
  return out;
}

/// Time-weighted percentage of (sessions x horizon) with steering present and
/// no valid lease behind it.
inline double compute_violation_rate(const TraceIndex& idx) {
  if (idx.sessions.empty()) return 0.0;
  long double total = 0;
  for (const auto& [_, t] : violation_time_by_aisi(idx)) total += static_cast<long double>(t);
  long double denom = static_cast<long double>(idx.sessions.size()) * static_cast<long double>(idx.run.horizon);
  return static_cast<double>(100.0L * total / denom);
}

inline double compute_violation_rate(const Trace& trace) { return compute_violation_rate(TraceIndex(trace)); }

//=============================================================================
// Full report

inline MetricsReport compute_metrics(const Trace& trace) {
  TraceIndex idx(trace);
  MetricsReport m;
  m.setup = idx.run.setup;
  m.policy = idx.run.policy;
  m.seed = idx.run.seed;
  m.horizon = idx.run.horizon;
  m.sessions = idx.sessions.size();

  for (auto sid : idx.session_order) {
    const auto& s = idx.sessions.at(sid);
    if (s.first_serving) m.transaction_time_samples.push_back(to_ms(*s.first_serving - s.start));
  }

  // Steering replay for recovery bookkeeping: top entry per Aisi.
  struct Live {
    AisiId aisi;
    std::string anchor;
    int prio;
  };
  std::map<EntryId, Live> live;
  auto serving_anchor = [&](AisiId aisi) -> const std::string* {
    const Live* best = nullptr;
    for (const auto& [_, l] : live)
      if (l.aisi == aisi && (best == nullptr || l.prio > best->prio)) best = &l;
    return best ? &best->anchor : nullptr;
  };
  struct Pending {
    SessionId session;
    SimTime failed_at;
    bool recovered = false;
  };
  std::vector<Pending> pending;
  const Duration window = [&] {
    auto w = trace.entries().front().find("recovery_window_us");
    return w ? trace.entries().front().num("recovery_window_us") : seconds(2);
  }();

  // Recovery only counts service over an admitted route: the outcome's own
  // lease, or for ungated steering a lease the Aisi held at that anchor.
  std::map<std::pair<AisiId, std::string>, std::vector<Interval>, std::less<>> held;
  for (const auto& [_, l] : idx.leases) held[{l.aisi, l.anchor}].push_back(l.validity());
  auto admitted_route = [&](const TraceEntry& e, SessionId sid, SimTime arrived) {
    if (!e.find("lease") || !e.find("anchor")) return false;
    auto lease = e.id<LeaseId>("lease");
    if (lease != kUngated) {
      auto it = idx.leases.find(lease);
      return it != idx.leases.end() && it->second.valid_at(arrived);
    }
    const auto& s = idx.sessions.at(sid);
    if (!s.aisi) return false;
    auto it = held.find({*s.aisi, std::string(e.str("anchor"))});
    if (it == held.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](const Interval& i) { return i.contains(arrived); });
  };

  std::vector<double> overlaps;
  for (const auto& e : trace.entries()) {
    const auto& c = e.category;
    if (c == "steer_install") {
      live[e.id<EntryId>("entry")] = {e.id<AisiId>("aisi"), std::string(e.str("anchor")),
                                      static_cast<int>(e.num("prio"))};
    } else if (c == "steer_remove") {
      live.erase(e.id<EntryId>("entry"));
    } else if (c == "steer_flip") {
      auto aisi = e.id<AisiId>("aisi");
      auto target = e.id<EntryId>("entry");
      for (auto& [id, l] : live)
        if (l.aisi == aisi) l.prio = id == target ? 10 : 5;
    } else if (c == "anchor_fail" && e.str("kind") == "hard") {
      std::string_view anchor = e.str("anchor");
      for (auto sid : idx.session_order) {
        const auto& s = idx.sessions.at(sid);
        if (!s.aisi || s.start > e.time) continue;
        if (s.end && *s.end < e.time + window) continue;
        if (!s.end && e.time + window > idx.run.horizon) continue;
        const std::string* a = serving_anchor(*s.aisi);
        if (a != nullptr && *a == anchor) pending.push_back({sid, e.time});
      }
    } else if (c == "outcome") {
      auto status = e.str("status");
      if (status == "truncated") continue;
      ++m.requests;
      if (status != "served") {
        ++m.failed_requests;
        continue;
      }
      auto sid = e.id<SessionId>("session");
      SimTime arrived = e.num("arrived");
      if (!admitted_route(e, sid, arrived)) continue;
      for (auto& p : pending)
        if (!p.recovered && p.session == sid && arrived >= p.failed_at && e.time <= p.failed_at + window)
          p.recovered = true;
    } else if (c == "evi") {
      ++m.evidence_records;
    } else if (c == "admit_reply" && e.str("result") == "reject") {
      ++m.admission_rejects;
    } else if (c == "reloc_fail") {
      ++m.relocation_failures;
    }
  }

  for (const auto& [_, r] : idx.relocations) {
    if (!r.done) continue;
    ++m.relocation_count;
    if (!r.flip_time) continue;
    SimTime removed = *r.flip_time;
    for (const auto& [__, en] : idx.entries)
      if (en.aisi == r.aisi && en.lease == r.old_lease && en.installed < *r.flip_time)
        removed = std::max(removed, en.removed.value_or(*r.done));
    overlaps.push_back(to_ms(removed - *r.flip_time));
  }
  if (!overlaps.empty()) {
    double sum = 0.0;
    for (double o : overlaps) sum += o;
    m.overlap_mean_ms = sum / static_cast<double>(overlaps.size());
    m.overlap_max_ms = *std::max_element(overlaps.begin(), overlaps.end());
  }

  m.request_failure_rate = m.requests ? static_cast<double>(m.failed_requests) / static_cast<double>(m.requests) : 0.0;
  m.recovery_events = pending.size();
  m.recovered = static_cast<std::uint64_t>(std::count_if(pending.begin(), pending.end(), [](const auto& p) { return p.recovered; }));
  if (m.recovery_events > 0)
    m.recovery_success_probability = static_cast<double>(m.recovered) / static_cast<double>(m.recovery_events);
  m.evidence_traffic_rate = static_cast<double>(m.evidence_records) / (to_ms(idx.run.horizon) / 1000.0);
  m.violation_rate_percent = compute_violation_rate(idx);
  return m;
}

//=============================================================================
// Aggregation over seeds

struct MetricSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double p50 = std::numeric_limits<double>::quiet_NaN();
  double p90 = std::numeric_limits<double>::quiet_NaN();
  double p99 = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;  // contributing samples (NaN samples are skipped)
};

inline MetricSummary summarize(const std::vector<double>& raw) {
  std::vector<double> v;
  for (double x : raw)
    if (!std::isnan(x)) v.push_back(x);
  MetricSummary s;
  s.n = v.size();
  if (v.empty()) return s;
  long double sum = 0;
  for (double x : v) sum += x;
  s.mean = static_cast<double>(sum / static_cast<long double>(v.size()));
  s.p50 = percentile(v, 50);
  s.p90 = percentile(v, 90);
  s.p99 = percentile(v, 99);
  return s;
}

struct AggregateReport {
  std::size_t runs = 0;
  MetricSummary transaction_time_ms;  // pooled over every run's samples
  MetricSummary request_failure_rate;
  MetricSummary recovery_success_probability;
  MetricSummary evidence_traffic_rate;
  MetricSummary violation_rate_percent;
  MetricSummary relocation_count;
  MetricSummary overlap_mean_ms;
  MetricSummary overlap_max_ms;
  std::vector<std::pair<double, double>> transaction_cdf;  // (ms, fraction)
};

/// Empirical CDF points, one per sample: (value, i/n).
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
  return out;
}

/// Reports are ordered by seed first so the result does not depend on the
/// order runs finished in.
inline AggregateReport aggregate(std::vector<MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: empty input");
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  AggregateReport a;
  a.runs = reports.size();
  std::vector<double> txn, fail, rec, evi, vio, rel, omean, omax;
  for (const auto& r : reports) {
    txn.insert(txn.end(), r.transaction_time_samples.begin(), r.transaction_time_samples.end());
    fail.push_back(r.request_failure_rate);
    rec.push_back(r.recovery_success_probability);
    evi.push_back(r.evidence_traffic_rate);
    vio.push_back(r.violation_rate_percent);
    rel.push_back(static_cast<double>(r.relocation_count));
    omean.push_back(r.overlap_mean_ms);
    omax.push_back(r.overlap_max_ms);
  }
  a.transaction_time_ms = summarize(txn);
  a.request_failure_rate = summarize(fail);
  a.recovery_success_probability = summarize(rec);
  a.evidence_traffic_rate = summarize(evi);
  a.violation_rate_percent = summarize(vio);
  a.relocation_count = summarize(rel);
  a.overlap_mean_ms = summarize(omean);
  a.overlap_max_ms = summarize(omax);
  a.transaction_cdf = empirical_cdf(txn);
  return a;
}

//=============================================================================
// CSV

inline std::string fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline constexpr const char* kMetricsCsvHeader =
    "setup,policy,seed,sessions,requests,failed_requests,request_failure_rate,recovery_events,recovered,"
    "recovery_success_probability,evidence_records,evidence_traffic_rate,violation_rate_percent,"
    "relocation_count,relocation_failures,overlap_mean_ms,overlap_max_ms,admission_rejects,"
    "txn_time_p50_ms,txn_time_p90_ms,txn_time_p99_ms";

inline std::string metrics_csv_row(const MetricsReport& m) {
  std::string s;
  bool first = true;
  auto add = [&](const std::string& v) {
    if (!first) s += ',';
    first = false;
    s += v;
  };
  add(m.setup);
  add(m.policy);
  add(std::to_string(m.seed));
  add(std::to_string(m.sessions));
  add(std::to_string(m.requests));
  add(std::to_string(m.failed_requests));
  add(fixed(m.request_failure_rate));
  add(std::to_string(m.recovery_events));
  add(std::to_string(m.recovered));
  add(fixed(m.recovery_success_probability));
  add(std::to_string(m.evidence_records));
  add(fixed(m.evidence_traffic_rate));
  add(fixed(m.violation_rate_percent));
  add(std::to_string(m.relocation_count));
  add(std::to_string(m.relocation_failures));
  add(fixed(m.overlap_mean_ms, 3));
  add(fixed(m.overlap_max_ms, 3));
  add(std::to_string(m.admission_rejects));
  add(fixed(percentile(m.transaction_time_samples, 50), 3));
  add(fixed(percentile(m.transaction_time_samples, 90), 3));
  add(fixed(percentile(m.transaction_time_samples, 99), 3));
  return s;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : reports) out << metrics_csv_row(r) << '\n';
}

inline void write_cdf_csv(std::ostream& out, const std::vector<std::pair<double, double>>& cdf) {
  out << "latency_ms,cumulative_fraction\n";
  for (const auto& [x, f] : cdf) out << fixed(x, 3) << ',' << fixed(f) << '\n';
}

}  // namespace aipaging

#endif  // AIPAGING_METRICS_HPP_
