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

#ifndef AIPAGING_LEASE_MANAGER_HPP_
#define AIPAGING_LEASE_MANAGER_HPP_

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aipaging/core.hpp"
#include "aipaging/evidence.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

enum class LeaseError { kNotFound, kAlreadyTerminal };

inline std::string_view to_string(LeaseError e) {
  return e == LeaseError::kNotFound ? "not-found" : "already-terminal";
}

using EligibilityFn = std::function<bool(const Anchor&, const Asp&)>;

inline QosBinding derive_qos(const Asp& asp) {
  return QosBinding{asp.target_latency <= ms(100) ? "low-latency" : "standard", asp.target_latency};
}

inline bool region_allowed(const Anchor& anchor, const Asp& asp) {
  return asp.locality_region.empty() ||
         std::find(asp.locality_region.begin(), asp.locality_region.end(), anchor.region) !=
             asp.locality_region.end();
}

/// Accept(Commit) or Reject(cause).
struct AdmissionDecision {
  std::optional<Commit> commit;
  RejectCause cause = RejectCause::kCapacity;

  bool accepted() const { return commit.has_value(); }
  static AdmissionDecision accept(Commit c) { return {std::move(c), RejectCause::kCapacity}; }
  static AdmissionDecision reject(RejectCause c) { return {std::nullopt, c}; }
};

/// Issues, expires, revokes and releases admission leases, and owns the
/// anchor-side capacity accounting (one token per active lease). It is the
/// single source of truth for lease validity: validity is [issued_at,
/// expires_at) while the lease is active.
class LeaseManager {
 public:
  /// Invoked at the instant a lease leaves the active state.
  using TerminalHook = std::function<void(const Commit&, SimTime)>;

  LeaseManager(const AnchorMap& anchors, IdSource& ids, Trace* trace = nullptr,
               EvidenceLog* evidence = nullptr)
      : anchors_(anchors), ids_(ids), trace_(trace), evidence_(evidence) {}

  void set_eligibility(EligibilityFn fn) { eligible_ = std::move(fn); }

  /// Anchor load fraction used to escalate admission_reject evidence.
  /// Defaults to active leases over capacity.
  void set_load_probe(std::function<double(const std::string&)> probe) { load_probe_ = std::move(probe); }

  /// Sessions the anchor is actually serving, other than `aisi`. Admission
  /// counts the larger of this and the lease count, so traffic steered
  /// without a lease still occupies capacity.
  void set_occupancy_probe(std::function<int(const std::string&, AisiId)> probe) {
    occupancy_probe_ = std::move(probe);
  }
  void add_terminal_hook(TerminalHook hook) { hooks_.push_back(std::move(hook)); }

  AdmissionDecision request_lease(const Candidate& candidate, AisiId aisi, const Asp& asp,
                                  SimTime now) {
    if (!candidate.feasibility) throw std::logic_error("request_lease on infeasible candidate");
    return admit(candidate.anchor_id, candidate.tier.tier_id, aisi, asp, now, std::nullopt);
  }

  /// Renewal: a fresh lease on the same anchor and tier. The old lease's token
  /// is counted as transferring, so a full anchor can still renew its own
  /// sessions. The caller rebinds steering and then releases the old lease.
  AdmissionDecision renew(LeaseId old_id, const Asp& asp, SimTime now) {
    const Commit* old = find(old_id);
    if (old == nullptr || old->terminal() || !is_valid(old_id, now))
      return AdmissionDecision::reject(RejectCause::kPolicy);
    std::string anchor = old->anchor_id;
    std::string tier = old->tier_id;
    return admit(anchor, tier, old->aisi, asp, now, old_id);
  }

  /// Transitions every active lease with expires_at <= now to expired and
  /// returns the affected ids in lease_id order.
  std::vector<LeaseId> expire_due(SimTime now) {
    std::vector<LeaseId> due;
    while (!expiry_queue_.empty() && expiry_queue_.begin()->first <= now) {
      due.push_back(expiry_queue_.begin()->second);
      expiry_queue_.erase(expiry_queue_.begin());
    }
    std::sort(due.begin(), due.end());
    for (auto id : due) {
      terminate(leases_.at(id), LeaseState::kExpired, now, "lease_expire", {});
      if (evidence_ != nullptr) {
        const Commit& c = leases_.at(id);
        evidence_->emit(EviRecord{now, c.aisi, {c.lease_id}, c.anchor_id, c.tier_id,
                                  EviKind::kLeaseExpiry, std::nullopt},
                        EvidenceMode::kMinimal);
      }
    }
    return due;
  }

  Expected<Ok, LeaseError> revoke(LeaseId id, std::string_view cause, SimTime now) {
    auto it = leases_.find(id);
    if (it == leases_.end()) return unexpected(LeaseError::kNotFound);
    if (it->second.terminal()) return unexpected(LeaseError::kAlreadyTerminal);
    expiry_queue_.erase({it->second.expires_at, id});
    terminate(it->second, LeaseState::kRevoked, now, "lease_revoke", {{"cause", cause}});
    if (evidence_ != nullptr) {
      const Commit& c = it->second;
      evidence_->emit(EviRecord{now, c.aisi, {c.lease_id}, c.anchor_id, c.tier_id,
                                EviKind::kLeaseRevocation, std::nullopt},
                      EvidenceMode::kMinimal);
    }
    return Ok{};
  }

  Expected<Ok, LeaseError> release(LeaseId id, SimTime now) {
    auto it = leases_.find(id);
    if (it == leases_.end()) return unexpected(LeaseError::kNotFound);
    if (it->second.terminal()) return unexpected(LeaseError::kAlreadyTerminal);
    expiry_queue_.erase({it->second.expires_at, id});
    terminate(it->second, LeaseState::kReleased, now, "lease_release", {});
    return Ok{};
  }

  bool is_valid(LeaseId id, SimTime now) const {
    const Commit* c = find(id);
    return c != nullptr && c->state == LeaseState::kActive && c->issued_at <= now && now < c->expires_at;
  }

  const Commit* find(LeaseId id) const {
    auto it = leases_.find(id);
    return it == leases_.end() ? nullptr : &it->second;
  }

  int usage(std::string_view anchor_id) const {
    auto it = usage_.find(anchor_id);
    return it == usage_.end() ? 0 : it->second;
  }

  std::optional<SimTime> next_expiry() const {
    if (expiry_queue_.empty()) return std::nullopt;
    return expiry_queue_.begin()->first;
  }

  std::size_t active_count() const { return expiry_queue_.size(); }

  /// Sweep check of the table invariants: usage equals the number of active
  /// leases per anchor, the expiry queue holds exactly the active leases, and
  /// no anchor exceeds its capacity unless the capacity was lowered under it.
  bool check_invariants() const {
    std::map<std::string, int, std::less<>> counted;
    std::size_t active = 0;
    for (const auto& [id, c] : leases_) {
      if (c.state != LeaseState::kActive) continue;
      ++counted[c.anchor_id];
      ++active;
      if (!expiry_queue_.contains({c.expires_at, id})) return false;
    }
    if (active != expiry_queue_.size()) return false;
    for (const auto& [a, n] : usage_)
      if (n != (counted.contains(a) ? counted.at(a) : 0)) return false;
    for (const auto& [a, n] : counted)
      if (usage(a) != n) return false;
    return true;
  }

  const std::map<LeaseId, Commit>& leases() const { return leases_; }

 private:
  AdmissionDecision admit(const std::string& anchor_id, const std::string& tier_id, AisiId aisi,
                          const Asp& asp, SimTime now, std::optional<LeaseId> transferring) {
    auto reject = [&](RejectCause cause) {
      if (trace_ != nullptr)
        trace_->append(now, "lease_reject",
                       {{"aisi", aisi}, {"anchor", anchor_id}, {"tier", tier_id}, {"cause", to_string(cause)}});
      if (evidence_ != nullptr)
        evidence_->emit(EviRecord{now, aisi, {}, anchor_id, tier_id, EviKind::kAdmissionReject, std::nullopt},
                        asp.evidence_requirements, load_of(anchor_id));
      return AdmissionDecision::reject(cause);
    };
    auto it = anchors_.find(anchor_id);
    if (it == anchors_.end()) return reject(RejectCause::kPolicy);
    const Anchor& anchor = it->second;
    if (anchor.health == Health::kFailed) return reject(RejectCause::kHealth);
    int in_use = usage(anchor_id) - (transferring ? 1 : 0);
    if (occupancy_probe_) in_use = std::max(in_use, occupancy_probe_(anchor_id, aisi));
    if (in_use >= anchor.capacity) return reject(RejectCause::kCapacity);
    if (!region_allowed(anchor, asp)) return reject(RejectCause::kLocality);
    if (anchor.tier(tier_id) == nullptr || (eligible_ && !eligible_(anchor, asp)))
      return reject(RejectCause::kPolicy);

    Commit c;
    c.lease_id = ids_.next<LeaseId>();
    c.aisi = aisi;
    c.anchor_id = anchor_id;
    c.tier_id = tier_id;
    c.qos = derive_qos(asp);
    c.issued_at = now;
    c.expires_at = now + asp.lease_duration;
    c.state = LeaseState::kActive;
    leases_.emplace(c.lease_id, c);
    expiry_queue_.emplace(c.expires_at, c.lease_id);
    ++usage_[anchor_id];
    if (trace_ != nullptr) {
      std::vector<Field> f{{"lease", c.lease_id}, {"aisi", aisi},       {"anchor", anchor_id},
                           {"tier", tier_id},     {"issued", c.issued_at}, {"expires", c.expires_at}};
      if (transferring) f.emplace_back("renews", *transferring);
      trace_->append(now, "lease_grant", std::move(f));
    }
    return AdmissionDecision::accept(c);
  }

  double load_of(const std::string& anchor_id) const {
    if (load_probe_) return load_probe_(anchor_id);
    auto it = anchors_.find(anchor_id);
    if (it == anchors_.end()) return 0.0;
    if (it->second.capacity <= 0) return usage(anchor_id) > 0 ? 1e9 : 0.0;
    return static_cast<double>(usage(anchor_id)) / it->second.capacity;
  }

  void terminate(Commit& c, LeaseState to, SimTime now, const char* category, std::vector<Field> extra) {
    c.transition(to);
    auto u = usage_.find(c.anchor_id);
    if (u != usage_.end() && --u->second == 0) usage_.erase(u);
    if (trace_ != nullptr) {
      std::vector<Field> f{{"lease", c.lease_id}, {"aisi", c.aisi}, {"anchor", c.anchor_id}};
      for (auto& x : extra) f.push_back(std::move(x));
      trace_->append(now, category, std::move(f));
    }
    Commit snapshot = c;
    for (const auto& hook : hooks_) hook(snapshot, now);
  }

  const AnchorMap& anchors_;
  IdSource& ids_;
  Trace* trace_;
  EvidenceLog* evidence_;
  EligibilityFn eligible_;
  std::function<double(const std::string&)> load_probe_;
  std::function<int(const std::string&, AisiId)> occupancy_probe_;
  std::vector<TerminalHook> hooks_;
  std::map<LeaseId, Commit> leases_;
  std::set<std::pair<SimTime, LeaseId>> expiry_queue_;
  std::map<std::string, int, std::less<>> usage_;
};

}  // namespace aipaging

#endif  // AIPAGING_LEASE_MANAGER_HPP_
