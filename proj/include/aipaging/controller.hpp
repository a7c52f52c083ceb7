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

// Intent-to-execution transaction: ASP derivation, identity issuance,
// candidate ranking and the commit-timeout-bounded admission loop.

#ifndef AIPAGING_CONTROLLER_HPP_
#define AIPAGING_CONTROLLER_HPP_

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "aipaging/core.hpp"
#include "aipaging/enforcement.hpp"
#include "aipaging/lease_manager.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

/// Operator policy. Tier lists in `tier_policy` are ordered by capability,
/// most capable first; key "*" is the default intent class.
struct OperatorPolicy {
  EligibilityFn eligible_anchors;
  std::map<std::string, std::vector<std::string>> tier_policy;
  std::vector<std::string> allowed_regions;  // empty: any region
  Duration default_lease_duration = ms(5000);
  Duration commit_timeout = ms(100);
  Duration drain_timeout = ms(200);
  EvidenceMode default_evidence = EvidenceMode::kMinimal;
  double default_max_relocation_rate = 2.0;
  Duration token_lifetime = seconds(3600);

  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    if (commit_timeout <= 0) bad.emplace_back("commit_timeout");
    if (drain_timeout <= 0) bad.emplace_back("drain_timeout");
    if (default_lease_duration <= 0) bad.emplace_back("default_lease_duration");
    return bad;
  }
};

inline Expected<Asp, RejectCause> derive_asp(const Intent& intent, const OperatorPolicy& policy) {
  auto tiers = policy.tier_policy.find(intent.outcome_tag);
  if (tiers == policy.tier_policy.end()) tiers = policy.tier_policy.find("*");
  if (tiers == policy.tier_policy.end() || tiers->second.empty()) return unexpected(RejectCause::kPolicy);

  std::vector<std::string> regions = intent.locality_requirement;
  if (!policy.allowed_regions.empty()) {
    if (regions.empty()) {
      regions = policy.allowed_regions;
    } else {
      std::erase_if(regions, [&](const std::string& r) {
        return std::find(policy.allowed_regions.begin(), policy.allowed_regions.end(), r) ==
               policy.allowed_regions.end();
      });
      if (regions.empty()) return unexpected(RejectCause::kPolicy);
    }
  }

  Asp asp;
  asp.target_latency = intent.target_latency;
  asp.max_jitter = static_cast<Duration>(std::llround(0.2 * static_cast<double>(intent.target_latency)));
  asp.max_loss_rate = 1.0 - intent.reliability_target;
  asp.locality_region = std::move(regions);
  asp.allowed_fallback_tiers = tiers->second;
  asp.evidence_requirements = policy.default_evidence;
  asp.max_relocation_rate = policy.default_max_relocation_rate;
  asp.lease_duration = policy.default_lease_duration;
  return asp;
}

/// Issues a fresh Aisi and a token scoped to the Asp. Creates no
/// enforcement state.
inline std::pair<Aisi, Aist> issue_identity(const Asp& asp, SimTime now, IdSource& ids,
                                            Duration token_lifetime = 0) {
  Aisi aisi{ids.next<AisiId>(), now};
  Aist aist;
  aist.token_id = ids.next<TokenId>();
  aist.bound_aisi = aisi.id;
  aist.scope_tiers = asp.allowed_fallback_tiers;
  aist.scope_regions = asp.locality_region;
  aist.expires_at = now + std::max(asp.lease_duration, token_lifetime);
  return {aisi, aist};
}

//=============================================================================
// Candidate generation

struct AnchorObservation {
  double load_fraction = 0.0;
  Duration path_latency = 0;
};

/// Per-anchor load/path observations as seen by the controller.
using Telemetry = std::map<std::string, AnchorObservation, std::less<>>;

inline AnchorObservation observe(const Anchor& a, const Telemetry& telemetry) {
  auto it = telemetry.find(a.anchor_id);
  if (it != telemetry.end()) return it->second;
  return AnchorObservation{0.0, a.path_latency};
}

/// Feasibility predictor, in milliseconds.
inline double predicted_latency_ms(const AnchorObservation& obs, const ModelTier& tier) {
  return to_ms(obs.path_latency) + to_ms(tier.mean_service) * (1.0 + obs.load_fraction);
}

/// Ranking order: score, then within-budget first, then cost, then anchor id.
inline bool candidate_before(const Candidate& a, const Candidate& b, double budget) {
  auto key = [budget](const Candidate& c) {
    return std::make_tuple(c.score, budget > 0.0 && c.tier.cost > budget, c.tier.cost, c.anchor_id);
  };
  return key(a) < key(b);
}

inline bool anchor_admissible(const Anchor& a, const Asp& asp, const EligibilityFn& eligible) {
  return region_allowed(a, asp) && a.health != Health::kFailed && (!eligible || eligible(a, asp));
}

/// Hard constraints filter (locality, health, policy eligibility, allowed
/// tier); the predictor ranks. One candidate per anchor using the most
/// capable allowed tier it offers.
inline std::vector<Candidate> generate_candidates(const Asp& asp, const AnchorMap& anchors,
                                                  const Telemetry& telemetry,
                                                  const EligibilityFn& eligible = {}, double budget = 0.0) {
  std::vector<Candidate> out;
  for (const auto& [id, a] : anchors) {
    if (!anchor_admissible(a, asp, eligible)) continue;
    for (const auto& t : asp.allowed_fallback_tiers) {
      const ModelTier* tier = a.tier(t);
      if (tier == nullptr) continue;
      out.push_back(Candidate{id, *tier, predicted_latency_ms(observe(a, telemetry), *tier), true});
      break;
    }
  }
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) { return candidate_before(x, y, budget); });
  return out;
}

/// Every less-preferred allowed tier variant per admissible anchor, ranked.
inline std::vector<Candidate> fallback_variants(const Asp& asp, const AnchorMap& anchors,
                                                const Telemetry& telemetry,
                                                const EligibilityFn& eligible = {}, double budget = 0.0) {
  std::vector<Candidate> out;
  for (const auto& [id, a] : anchors) {
    if (!anchor_admissible(a, asp, eligible)) continue;
    bool preferred_seen = false;
    for (const auto& t : asp.allowed_fallback_tiers) {
      const ModelTier* tier = a.tier(t);
      if (tier == nullptr) continue;
      if (!preferred_seen) {
        preferred_seen = true;
        continue;
      }
      out.push_back(Candidate{id, *tier, predicted_latency_ms(observe(a, telemetry), *tier), true});
    }
  }
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) { return candidate_before(x, y, budget); });
  return out;
}

//=============================================================================
// Admission loop

/// One attempt decided by the loop: the candidate to request and the instant
/// the reply is due.
struct Attempt {
  Candidate candidate;
  SimTime sent_at = 0;
  SimTime reply_at = 0;
  bool timed_out = false;  // reply would land after start + T_C
};

/// Stepwise form of the admission loop so an event engine can interleave
/// other events between an attempt and its reply:
///
///   while (auto a = loop.next_attempt(now)) {
///     ... at a->reply_at: loop.on_reply(decision) or loop.on_timeout()
///   }
class AdmissionLoop {
 public:
  AdmissionLoop(TxnId txn, AisiId aisi, std::vector<Candidate> ranked, std::vector<Candidate> fallbacks,
                SimTime start, Duration commit_timeout, Duration round_trip, Trace* trace = nullptr)
      : txn_(txn),
        aisi_(aisi),
        pending_(ranked.begin(), ranked.end()),
        fallbacks_(std::move(fallbacks)),
        start_(start),
        commit_timeout_(commit_timeout),
        round_trip_(round_trip),
        trace_(trace) {
    for (const auto& c : pending_) enqueued_.emplace(c.anchor_id, c.tier.tier_id);
  }

  /// Loop guard: elapsed < T_C and candidates remain.
  bool can_attempt(SimTime now) const { return !done_ && now - start_ < commit_timeout_ && !pending_.empty(); }

  std::optional<Attempt> next_attempt(SimTime now) {
    if (!can_attempt(now)) return std::nullopt;
    Candidate c = pending_.front();
    pending_.pop_front();
    attempted_anchors_.insert(c.anchor_id);
    ++attempts_;
    if (trace_ != nullptr)
      trace_->append(now, "admit_attempt",
                     {{"txn", txn_}, {"aisi", aisi_}, {"anchor", c.anchor_id}, {"tier", c.tier.tier_id}});
    Attempt a{std::move(c), now, now + round_trip_, false};
    a.timed_out = a.reply_at > start_ + commit_timeout_;
    return a;
  }

  /// Feeds the lease manager's answer. Returns the commit on accept.
  std::optional<Commit> on_reply(const Attempt& a, const AdmissionDecision& d) {
    if (d.accepted()) {
      done_ = true;
      trace_reply(a, "accept", std::nullopt);
      return d.commit;
    }
    causes_.add(d.cause);
    trace_reply(a, "reject", d.cause);
    if (d.cause == RejectCause::kCapacity || d.cause == RejectCause::kHealth) {
      exhausted_anchors_.insert(a.candidate.anchor_id);
      expand_with_fallbacks();
    }
    return std::nullopt;
  }

  /// The reply missed the commit deadline; no lease is created.
  void on_timeout(const Attempt& a) {
    causes_.add(RejectCause::kTimeout);
    trace_reply(a, "reject", RejectCause::kTimeout);
  }

  void finish() { done_ = true; }

  const CauseStats& causes() const { return causes_; }
  int attempts() const { return attempts_; }
  SimTime start() const { return start_; }
  TxnId txn() const { return txn_; }
  AisiId aisi() const { return aisi_; }
  std::size_t remaining() const { return pending_.size(); }

 private:
  // Reject causes that a weaker tier elsewhere can cure; policy and locality
  // rejects never expand the set.
  void expand_with_fallbacks() {
    for (const auto& f : fallbacks_) {
      if (exhausted_anchors_.contains(f.anchor_id)) continue;
      if (!enqueued_.emplace(f.anchor_id, f.tier.tier_id).second) continue;
      pending_.push_back(f);
    }
  }

  void trace_reply(const Attempt& a, const char* result, std::optional<RejectCause> cause) {
    if (trace_ == nullptr) return;
    std::vector<Field> f{{"txn", txn_}, {"aisi", aisi_}, {"anchor", a.candidate.anchor_id}, {"result", result}};
    if (cause) f.emplace_back("cause", to_string(*cause));
    trace_->append(a.reply_at, "admit_reply", std::move(f));
  }

  TxnId txn_;
  AisiId aisi_;
  std::deque<Candidate> pending_;
  std::vector<Candidate> fallbacks_;
  std::set<std::pair<std::string, std::string>> enqueued_;
  std::set<std::string> attempted_anchors_;
  std::set<std::string> exhausted_anchors_;
  SimTime start_;
  Duration commit_timeout_;
  Duration round_trip_;
  Trace* trace_;
  CauseStats causes_;
  int attempts_ = 0;
  bool done_ = false;
};

/// Everything a synchronous transaction needs besides the intent.
struct TransactionContext {
  const AnchorMap& anchors;
  const Telemetry& telemetry;
  LeaseManager& leases;
  SteeringTable& steering;
  IdSource& ids;
  Duration round_trip = ms(5);
  Trace* trace = nullptr;
  TxnId txn{1};
};

/// The full transaction run to completion with no other events interleaved:
/// derive Asp, issue identity, rank candidates, then request leases in rank
/// order until one is accepted (install steering, SUCCESS), candidates run
/// out, or T_C elapses (REJECT with the cause histogram).
inline TransactionOutcome run_transaction(const Intent& intent, const OperatorPolicy& policy, SimTime now,
                                          TransactionContext& ctx) {
  auto asp = derive_asp(intent, policy);
  if (!asp) {
    Aisi none{AisiId{}, now};
    CauseStats c;
    c.add(asp.error());
    return TransactionOutcome{TransactionReject{none, c}, 0};
  }
  auto [aisi, aist] = issue_identity(*asp, now, ctx.ids, policy.token_lifetime);
  auto ranked = generate_candidates(*asp, ctx.anchors, ctx.telemetry, policy.eligible_anchors, intent.budget);
  auto fallbacks = fallback_variants(*asp, ctx.anchors, ctx.telemetry, policy.eligible_anchors, intent.budget);
  AdmissionLoop loop(ctx.txn, aisi.id, std::move(ranked), std::move(fallbacks), now, policy.commit_timeout,
                     ctx.round_trip, ctx.trace);
  if (ctx.trace != nullptr)
    ctx.trace->append(now, "txn_start", {{"txn", ctx.txn}, {"aisi", aisi.id}, {"kind", "initial"}});
  SimTime clock = now;
  while (auto attempt = loop.next_attempt(clock)) {
    clock = attempt->reply_at;
    if (attempt->timed_out) {
      loop.on_timeout(*attempt);
      continue;
    }
    auto decision = ctx.leases.request_lease(attempt->candidate, aisi.id, *asp, clock);
    if (auto commit = loop.on_reply(*attempt, decision)) {
      auto entry = ctx.steering.install_steering(Classifier{aisi.id, aist.token_id}, *commit, kActivePriority, clock);
      if (!entry) throw std::logic_error("install refused right after admission");
      return TransactionOutcome{TransactionSuccess{aisi, aist, *commit}, clock - now};
    }
  }
  return TransactionOutcome{TransactionReject{aisi, loop.causes()}, clock - now};
}

//=============================================================================
// Policy behaviors

/// How a session behaves under each policy.
struct SessionBehavior {
  bool gate_on_lease = false;      // install only with a valid lease
  bool renew_leases = false;       // keep the lease alive while serving
  bool relocate = false;           // react to relocation triggers
  bool make_before_break = false;  // transactional relocation
  bool walk_candidates = false;    // try further candidates on reject
  int retries = 0;                 // application retries to the same anchor
};

inline SessionBehavior select_action(PolicyKind kind, int endpoint_retries = 3) {
  switch (kind) {
    case PolicyKind::kAiPaging: return {true, true, true, true, true, 0};
    case PolicyKind::kBestEffort: return {false, false, true, false, false, 0};
    case PolicyKind::kEndpointBound: return {false, false, false, false, false, endpoint_retries};
  }
  return {};
}

}  // namespace aipaging

#endif  // AIPAGING_CONTROLLER_HPP_
