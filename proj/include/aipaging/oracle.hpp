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

// Trace oracle: re-derives the safety invariants from the trace alone.
// Nothing here touches live simulator state.

#ifndef AIPAGING_ORACLE_HPP_
#define AIPAGING_ORACLE_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "aipaging/replay.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

/// Defect classes reported by oracle_check.
namespace defect {
inline constexpr const char* kLateRemoval = "late_removal";
inline constexpr const char* kLateExpiry = "late_expiry";
inline constexpr const char* kLeaseGate = "lease_gate";
inline constexpr const char* kStaleEntry = "stale_entry";
inline constexpr const char* kPostCommitTimeoutAttempt = "post_tc_attempt";
inline constexpr const char* kEarlyRelease = "early_release";
inline constexpr const char* kFlipBeforeInstall = "flip_before_install";
inline constexpr const char* kCommitInvalidAtFlip = "commit1_invalid_at_flip";
inline constexpr const char* kOverlapBound = "overlap_bound";
inline constexpr const char* kFailedRelocationChangedSteering = "failed_relocation_changed_steering";
inline constexpr const char* kDoubleTerminal = "double_terminal";
inline constexpr const char* kAisiReissue = "aisi_reissue";
inline constexpr const char* kAisiChanged = "aisi_changed";
}  // namespace defect

struct OracleViolation {
  std::string kind;
  SimTime time = 0;
  std::string detail;
};

namespace detail {

inline bool before(SimTime t1, std::uint64_t s1, SimTime t2, std::uint64_t s2) {
  return std::tie(t1, s1) < std::tie(t2, s2);
}

inline std::string ids(const char* what, std::uint64_t v) { return std::string(what) + " " + std::to_string(v); }

}  // namespace detail

/// Returns every invariant violation found in `trace`; empty for a conforming
/// run. Throws TraceFormatError on a structurally malformed trace.
inline std::vector<OracleViolation> oracle_check(const Trace& trace) {
  const TraceIndex idx(trace);
  std::vector<OracleViolation> out;
  auto report = [&](const char* kind, SimTime t, std::string detail) { out.push_back({kind, t, std::move(detail)}); };
  auto gated = [&](AisiId aisi) { return idx.policy_of(aisi) == "aipaging"; };
  const SimTime horizon = idx.run.horizon;

  // Identity stability.
  for (const auto& [aisi, owners] : idx.aisi_issues)
    if (owners.size() > 1) report(defect::kAisiReissue, 0, detail::ids("aisi", aisi.value) + " issued to several sessions");
  for (const auto& [sid, s] : idx.sessions)
    if (s.identity_count > 1) report(defect::kAisiReissue, s.start, detail::ids("session", sid.value) + " received several identities");
  for (const auto& [job, r] : idx.relocations) {
    const auto& s = idx.sessions.find(r.session);
    if (s == idx.sessions.end()) throw TraceFormatError("relocation for unknown session");
    if (s->second.aisi && *s->second.aisi != r.aisi)
      report(defect::kAisiChanged, r.started, detail::ids("job", job.value) + " moves a different aisi than the session's");
  }

  // Terminal states are absorbing; expiry happens exactly at expires_at.
  for (const auto& [id, l] : idx.leases) {
    if (l.terminals.size() > 1) report(defect::kDoubleTerminal, l.terminals[1].time, detail::ids("lease", id.value));
    for (const auto& t : l.terminals)
      if (t.category == "lease_expire" && t.time != l.expires)
        report(defect::kLateExpiry, t.time, detail::ids("lease", id.value) + " expired away from its expires_at");
    if (gated(l.aisi) && l.terminals.empty() && l.expires < horizon)
      report(defect::kLateExpiry, l.expires, detail::ids("lease", id.value) + " never left the active state");
  }

  // Lease gate.
  for (const auto& [eid, e] : idx.entries) {
    if (!gated(e.aisi)) continue;
    auto it = idx.leases.find(e.lease);
    if (it == idx.leases.end()) {
      report(defect::kLeaseGate, e.installed, detail::ids("entry", eid.value) + " installed without a lease");
      continue;
    }
    const Interval valid = it->second.validity();
    if (!valid.contains(e.installed))
      report(defect::kLeaseGate, e.installed, detail::ids("entry", eid.value) + " installed outside its lease validity");
    if (valid.end < horizon && (!e.removed || *e.removed > valid.end))
      report(defect::kLateRemoval, e.removed.value_or(horizon),
             detail::ids("entry", eid.value) + " outlived lease " + std::to_string(e.lease.value));
  }
  for (const auto* v : idx.violations)
    if (v->str("kind") == "stale_entry") report(defect::kStaleEntry, v->time, "stale entry hit at classification");
  for (const auto& e : trace.entries()) {
    if (e.category != "outcome" || !e.find("lease")) continue;
    const auto& s = idx.sessions.find(e.id<SessionId>("session"));
    if (s == idx.sessions.end() || !s->second.aisi || !gated(*s->second.aisi)) continue;
    auto lease = idx.leases.find(e.id<LeaseId>("lease"));
    SimTime arrived = e.num("arrived");
    if (lease == idx.leases.end() || !lease->second.valid_at(arrived))
      report(defect::kLeaseGate, arrived, "request routed without a valid lease (" + e.where() + ")");
  }

  // Commit-timeout bound.
  for (const auto& [id, t] : idx.txns) {
    if (!gated(t.aisi)) continue;
    for (SimTime a : t.attempts)
      if (a >= t.start + idx.run.commit_timeout)
        report(defect::kPostCommitTimeoutAttempt, a, detail::ids("txn", id.value));
  }

  // Make-before-break ordering.
  for (const auto& [job, r] : idx.relocations) {
    if (r.mode != "mbb") continue;
    const std::string tag = detail::ids("job", job.value);
    if (r.failed) {
      for (const auto& [eid, e] : idx.entries)
        if (e.aisi == r.aisi && e.install_seq > r.start_seq && e.install_seq < r.end_seq)
          report(defect::kFailedRelocationChangedSteering, e.installed, tag + " installed entry " + std::to_string(eid.value));
      for (const auto& f : idx.flips)
        if (f.aisi == r.aisi && f.seq > r.start_seq && f.seq < r.end_seq)
          report(defect::kFailedRelocationChangedSteering, f.time, tag + " flipped priority");
      continue;
    }
    if (!r.done || !r.new_lease) continue;
    const FlipInfo* flip = nullptr;
    for (const auto& f : idx.flips)
      if (f.aisi == r.aisi && f.lease == *r.new_lease) flip = &f;
    if (flip == nullptr) {
      report(defect::kFlipBeforeInstall, *r.done, tag + " completed without a flip");
      continue;
    }
    const EntryInfo* installed = nullptr;
    for (const auto& [_, e] : idx.entries)
      if (e.aisi == r.aisi && e.lease == *r.new_lease && (installed == nullptr || e.install_seq < installed->install_seq))
        installed = &e;
    if (installed == nullptr || detail::before(flip->time, flip->seq, installed->installed, installed->install_seq))
      report(defect::kFlipBeforeInstall, flip->time, tag);
    auto fresh = idx.leases.find(*r.new_lease);
    if (fresh == idx.leases.end() || !fresh->second.valid_at(flip->time))
      report(defect::kCommitInvalidAtFlip, flip->time, tag);
    auto old = idx.leases.find(r.old_lease);
    if (old != idx.leases.end() && !old->second.terminals.empty()) {
      const auto& t = old->second.terminals.front();
      if (!detail::before(flip->time, flip->seq, t.time, t.seq))
        report(defect::kEarlyRelease, t.time, tag + " old lease ended before the flip");
    }
    const SimTime bound = flip->time + idx.run.drain_timeout;
    for (const auto& [eid, e] : idx.entries) {
      if (e.aisi != r.aisi || e.lease != r.old_lease) continue;
      if (e.removed ? *e.removed > bound : bound < horizon)
        report(defect::kOverlapBound, e.removed.value_or(horizon), tag + " old entry " + std::to_string(eid.value));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

}  // namespace aipaging

#endif  // AIPAGING_ORACLE_HPP_
