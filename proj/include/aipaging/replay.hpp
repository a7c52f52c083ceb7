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

// Structured view of a run trace, rebuilt from the trace entries alone.

#ifndef AIPAGING_REPLAY_HPP_
#define AIPAGING_REPLAY_HPP_

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aipaging/core.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

/// Half-open interval [begin, end).
struct Interval {
  SimTime begin = 0;
  SimTime end = 0;

  SimTime length() const { return end > begin ? end - begin : 0; }
  bool contains(SimTime t) const { return begin <= t && t < end; }
};

/// Sorts and merges overlapping or touching intervals.
inline std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::erase_if(v, [](const Interval& i) { return i.length() == 0; });
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.begin <= out.back().end)
      out.back().end = std::max(out.back().end, i.end);
    else
      out.push_back(i);
  }
  return out;
}

/// `a` minus the union of `b` (b need not be merged).
inline std::vector<Interval> subtract_intervals(const Interval& a, std::vector<Interval> b) {
  b = merge_intervals(std::move(b));
  std::vector<Interval> out;
  SimTime cursor = a.begin;
  for (const auto& x : b) {
    if (x.end <= cursor) continue;
    if (x.begin >= a.end) break;
    if (x.begin > cursor) out.push_back({cursor, std::min(x.begin, a.end)});
    cursor = std::max(cursor, x.end);
    if (cursor >= a.end) break;
  }
  if (cursor < a.end) out.push_back({cursor, a.end});
  return out;
}

inline SimTime total_length(const std::vector<Interval>& v) {
  SimTime n = 0;
  for (const auto& i : merge_intervals(v)) n += i.length();
  return n;
}

struct RunInfo {
  std::string setup;
  std::string policy;
  std::uint64_t seed = 0;
  SimTime horizon = 0;
  Duration commit_timeout = 0;
  Duration drain_timeout = 0;
};

struct SessionInfo {
  SessionId id;
  std::string policy;
  SimTime start = 0;
  std::optional<SimTime> end;
  std::optional<AisiId> aisi;
  int identity_count = 0;
  std::optional<SimTime> first_serving;
};

struct TerminalInfo {
  std::string category;  // lease_expire | lease_revoke | lease_release
  SimTime time = 0;
  std::uint64_t seq = 0;
};

struct LeaseInfo {
  LeaseId id;
  AisiId aisi;
  std::string anchor;
  SimTime granted = 0;
  SimTime expires = 0;
  std::vector<TerminalInfo> terminals;

  std::optional<SimTime> terminal_time() const {
    if (terminals.empty()) return std::nullopt;
    return terminals.front().time;
  }
  /// Validity window: [granted, min(expires, first terminal)).
  Interval validity() const {
    SimTime end = expires;
    if (auto t = terminal_time()) end = std::min(end, *t);
    return {granted, end};
  }
  bool valid_at(SimTime t) const { return validity().contains(t); }
};

struct EntryInfo {
  EntryId id;
  AisiId aisi;
  std::string anchor;
  LeaseId lease;
  int priority = 0;
  SimTime installed = 0;
  std::uint64_t install_seq = 0;
  std::optional<SimTime> removed;
  std::uint64_t remove_seq = 0;
};

struct FlipInfo {
  SimTime time = 0;
  std::uint64_t seq = 0;
  AisiId aisi;
  EntryId entry;
  LeaseId lease;
};

struct RelocationInfo {
  JobId job;
  SessionId session;
  AisiId aisi;
  LeaseId old_lease;
  std::string mode;
  SimTime started = 0;
  std::uint64_t start_seq = 0;
  std::optional<SimTime> done;
  std::optional<LeaseId> new_lease;
  std::optional<SimTime> flip_time;
  std::optional<SimTime> failed;
  std::uint64_t end_seq = 0;
};

struct TxnInfo {
  TxnId txn;
  AisiId aisi;
  SimTime start = 0;
  std::string kind;
  std::vector<SimTime> attempts;
};

/// Index over a complete trace. Throws TraceFormatError on structural
/// problems (missing fields, references to unknown entities).
class TraceIndex {
 public:
  explicit TraceIndex(const Trace& trace) {
    const auto& es = trace.entries();
    if (es.empty() || es.front().category != "run") throw TraceFormatError("trace does not start with run");
    if (es.back().category != "run_end") throw TraceFormatError("trace-incomplete: no run_end entry");
    const auto& r = es.front();
    run.setup = std::string(r.str("setup"));
    run.policy = std::string(r.str("policy"));
    run.seed = static_cast<std::uint64_t>(r.num("seed"));
    run.horizon = r.num("horizon_us");
    run.commit_timeout = r.num("commit_timeout_us");
    run.drain_timeout = r.num("drain_timeout_us");
    if (run.horizon <= 0) throw TraceFormatError("run horizon must be positive");

    for (const auto& e : es) {
      const auto& c = e.category;
      if (c == "session_start") {
        SessionInfo s;
        s.id = e.id<SessionId>("session");
        s.policy = std::string(e.str("policy"));
        s.start = e.time;
        sessions[s.id] = s;
        session_order.push_back(s.id);
      } else if (c == "identity") {
        auto& s = session(e, e.id<SessionId>("session"));
        auto aisi = e.id<AisiId>("aisi");
        ++s.identity_count;
        if (!s.aisi) s.aisi = aisi;
        aisi_issues[aisi].push_back(s.id);
        if (!aisi_session.contains(aisi)) aisi_session[aisi] = s.id;
      } else if (c == "serving") {
        auto& s = session(e, e.id<SessionId>("session"));
        if (!s.first_serving) s.first_serving = e.time;
      } else if (c == "session_end") {
        session(e, e.id<SessionId>("session")).end = e.time;
      } else if (c == "lease_grant") {
        LeaseInfo l;
        l.id = e.id<LeaseId>("lease");
        l.aisi = e.id<AisiId>("aisi");
        l.anchor = std::string(e.str("anchor"));
        l.granted = e.time;
        l.expires = e.num("expires");
        leases[l.id] = l;
      } else if (c == "lease_expire" || c == "lease_revoke" || c == "lease_release") {
        auto id = e.id<LeaseId>("lease");
        auto it = leases.find(id);
        if (it == leases.end()) throw TraceFormatError(e.where() + ": unknown lease " + std::to_string(id.value));
        it->second.terminals.push_back({c, e.time, e.seq});
      } else if (c == "steer_install") {
        EntryInfo en;
        en.id = e.id<EntryId>("entry");
        en.aisi = e.id<AisiId>("aisi");
        en.anchor = std::string(e.str("anchor"));
        en.lease = e.id<LeaseId>("lease");
        en.priority = static_cast<int>(e.num("prio"));
        en.installed = e.time;
        en.install_seq = e.seq;
        entries[en.id] = en;
      } else if (c == "steer_remove") {
        auto id = e.id<EntryId>("entry");
        auto it = entries.find(id);
        if (it == entries.end()) throw TraceFormatError(e.where() + ": unknown entry " + std::to_string(id.value));
        it->second.removed = e.time;
        it->second.remove_seq = e.seq;
      } else if (c == "steer_flip") {
        flips.push_back(FlipInfo{e.time, e.seq, e.id<AisiId>("aisi"), e.id<EntryId>("entry"), e.id<LeaseId>("lease")});
      } else if (c == "violation") {
        violations.push_back(&e);
      } else if (c == "reloc_start") {
        RelocationInfo ri;
        ri.job = e.id<JobId>("job");
        ri.session = e.id<SessionId>("session");
        ri.aisi = e.id<AisiId>("aisi");
        ri.old_lease = e.id<LeaseId>("old_lease");
        ri.mode = std::string(e.str("mode"));
        ri.started = e.time;
        ri.start_seq = e.seq;
        relocations[ri.job] = ri;
      } else if (c == "reloc_done") {
        auto& ri = relocation(e);
        ri.done = e.time;
        ri.end_seq = e.seq;
        ri.new_lease = e.id<LeaseId>("new_lease");
        ri.flip_time = e.num("flip");
      } else if (c == "reloc_fail") {
        auto& ri = relocation(e);
        ri.failed = e.time;
        ri.end_seq = e.seq;
      } else if (c == "txn_start") {
        TxnInfo t;
        t.txn = e.id<TxnId>("txn");
        t.aisi = e.id<AisiId>("aisi");
        t.start = e.time;
        t.kind = std::string(e.str("kind"));
        txns[t.txn] = t;
      } else if (c == "admit_attempt") {
        auto id = e.id<TxnId>("txn");
        auto it = txns.find(id);
        if (it == txns.end()) throw TraceFormatError(e.where() + ": attempt for unknown txn");
        it->second.attempts.push_back(e.time);
      }
    }
  }

  const SessionInfo* session_of(AisiId aisi) const {
    auto it = aisi_session.find(aisi);
    if (it == aisi_session.end()) return nullptr;
    return &sessions.at(it->second);
  }

  std::string policy_of(AisiId aisi) const {
    auto s = session_of(aisi);
    return s ? s->policy : run.policy;
  }

  RunInfo run;
  std::map<SessionId, SessionInfo> sessions;
  std::vector<SessionId> session_order;
  std::map<AisiId, SessionId> aisi_session;
  std::map<AisiId, std::vector<SessionId>> aisi_issues;
  std::map<LeaseId, LeaseInfo> leases;
  std::map<EntryId, EntryInfo> entries;
  std::vector<FlipInfo> flips;
  std::map<JobId, RelocationInfo> relocations;
  std::map<TxnId, TxnInfo> txns;
  std::vector<const TraceEntry*> violations;  // tripwire entries, pointing into the trace

 private:
  SessionInfo& session(const TraceEntry& e, SessionId id) {
    auto it = sessions.find(id);
    if (it == sessions.end()) throw TraceFormatError(e.where() + ": unknown session " + std::to_string(id.value));
    return it->second;
  }
  RelocationInfo& relocation(const TraceEntry& e) {
    auto id = e.id<JobId>("job");
    auto it = relocations.find(id);
    if (it == relocations.end()) throw TraceFormatError(e.where() + ": unknown relocation job");
    return it->second;
  }
};

}  // namespace aipaging

#endif  // AIPAGING_REPLAY_HPP_
