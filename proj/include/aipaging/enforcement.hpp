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

#ifndef AIPAGING_ENFORCEMENT_HPP_
#define AIPAGING_ENFORCEMENT_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aipaging/core.hpp"
#include "aipaging/lease_manager.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

inline constexpr int kActivePriority = 10;
inline constexpr int kStandbyPriority = 5;

enum class SteeringError { kLeaseInvalid, kNoSuchEntry, kPriorityTaken, kGateRequired };

inline std::string_view to_string(SteeringError e) {
  switch (e) {
    case SteeringError::kLeaseInvalid: return "lease-invalid";
    case SteeringError::kNoSuchEntry: return "no-such-entry";
    case SteeringError::kPriorityTaken: return "priority-taken";
    case SteeringError::kGateRequired: return "gate-required";
  }
  return "?";
}

/// Where an ungated entry sends traffic.
struct Placement {
  std::string anchor_id;
  std::string tier_id;
  QosBinding qos;
};

struct Route {
  EntryId entry;
  std::string anchor_id;
  std::string tier_id;
  QosBinding qos;
  LeaseId backing_lease;
};

/// User-plane steering table. Under AiPaging every entry must be backed by a
/// valid lease at install time and disappears at the instant its lease leaves
/// the active state (wire `on_lease_terminal` to the LeaseManager). The
/// baselines bypass the gate and carry the kUngated sentinel.
class SteeringTable {
 public:
  SteeringTable(PolicyKind policy, const LeaseManager* leases, Trace* trace = nullptr)
      : policy_(policy), leases_(leases), trace_(trace) {}

  PolicyKind policy() const { return policy_; }
  bool gated() const { return policy_ == PolicyKind::kAiPaging; }

  Expected<SteeringEntry, SteeringError> install_steering(const Classifier& cls, const Commit& lease,
                                                          int priority, SimTime now) {
    if (gated()) {
      if (leases_ == nullptr || !leases_->is_valid(lease.lease_id, now) || lease.aisi != cls.aisi)
        return unexpected(SteeringError::kLeaseInvalid);
      return insert(cls, Placement{lease.anchor_id, lease.tier_id, lease.qos}, lease.lease_id, priority, now);
    }
    return insert(cls, Placement{lease.anchor_id, lease.tier_id, lease.qos}, kUngated, priority, now);
  }

  /// Baseline install with no lease at all.
  Expected<SteeringEntry, SteeringError> install_ungated(const Classifier& cls, const Placement& where,
                                                         int priority, SimTime now) {
    if (gated()) return unexpected(SteeringError::kGateRequired);
    return insert(cls, where, kUngated, priority, now);
  }

  /// Removes every entry backed by `lease`; idempotent.
  std::size_t remove_steering(LeaseId lease, SimTime now) {
    if (!lease.valid()) return 0;
    std::size_t n = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.backing_lease == lease) {
        trace_remove(it->second, now);
        it = entries_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  bool remove_entry(EntryId id, SimTime now) {
    auto it = entries_.find(id);
    if (it == entries_.end()) return false;
    trace_remove(it->second, now);
    entries_.erase(it);
    return true;
  }

  std::size_t remove_aisi(AisiId aisi, SimTime now) {
    std::size_t n = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.classifier.aisi == aisi) {
        trace_remove(it->second, now);
        it = entries_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  /// Makes the entry backed by `new_lease` the unique highest-priority entry
  /// for `aisi`; the previous active entry drops to standby. One trace entry.
  Expected<Ok, SteeringError> flip_priority(AisiId aisi, LeaseId new_lease, SimTime now) {
    SteeringEntry* target = nullptr;
    for (auto& [_, e] : entries_)
      if (e.classifier.aisi == aisi && e.backing_lease == new_lease && new_lease.valid()) target = &e;
    if (target == nullptr) return unexpected(SteeringError::kNoSuchEntry);
    EntryId demoted{};
    for (auto& [_, e] : entries_) {
      if (e.classifier.aisi != aisi || &e == target) continue;
      if (e.priority == kActivePriority) demoted = e.entry_id;
      e.priority = kStandbyPriority;
    }
    target->priority = kActivePriority;
    ++version_;
    if (trace_ != nullptr)
      trace_->append(now, "steer_flip",
                     {{"aisi", aisi}, {"entry", target->entry_id}, {"lease", new_lease}, {"demoted", demoted}});
    return Ok{};
  }

  /// Renewal: swaps the backing lease of `old_lease`'s entries for `fresh`,
  /// keeping route and priority. Remove and install share `now`.
  std::size_t rebind(LeaseId old_lease, const Commit& fresh, SimTime now) {
    std::vector<SteeringEntry> moved;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.backing_lease == old_lease && old_lease.valid()) {
        moved.push_back(it->second);
        trace_remove(it->second, now);
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    for (const auto& e : moved) insert(e.classifier, Placement{e.anchor_id, e.tier_id, e.qos}, fresh.lease_id, e.priority, now);
    return moved.size();
  }

  /// Highest-priority route for the classifier. Under AiPaging a stale entry
  /// (backing lease no longer valid) yields no route and is counted as a
  /// latent-state violation; correct removal means this never fires.
  std::optional<Route> classify(AisiId aisi, TokenId aist, SimTime now) {
    const SteeringEntry* best = nullptr;
    for (const auto& [_, e] : entries_) {
      if (e.classifier.aisi != aisi || e.classifier.aist != aist) continue;
      if (best == nullptr || e.priority > best->priority) best = &e;
    }
    if (best == nullptr) return std::nullopt;
    if (gated() && (leases_ == nullptr || !leases_->is_valid(best->backing_lease, now))) {
      ++tripwire_hits_;
      if (trace_ != nullptr)
        trace_->append(now, "violation",
                       {{"kind", "stale_entry"}, {"aisi", aisi}, {"entry", best->entry_id}, {"lease", best->backing_lease}});
      return std::nullopt;
    }
    return Route{best->entry_id, best->anchor_id, best->tier_id, best->qos, best->backing_lease};
  }

  std::vector<SteeringEntry> entries_for(AisiId aisi) const {
    std::vector<SteeringEntry> out;
    for (const auto& [_, e] : entries_)
      if (e.classifier.aisi == aisi) out.push_back(e);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.priority > b.priority; });
    return out;
  }

  /// Anchor of the top entry for `aisi`, ignoring lease validity.
  std::optional<std::string> serving_anchor(AisiId aisi) const {
    const SteeringEntry* best = nullptr;
    for (const auto& [_, e] : entries_)
      if (e.classifier.aisi == aisi && (best == nullptr || e.priority > best->priority)) best = &e;
    if (best == nullptr) return std::nullopt;
    return best->anchor_id;
  }

  /// Top-entry anchor for every steered Aisi, in one pass.
  std::map<AisiId, std::string> serving_anchors() const {
    std::map<AisiId, const SteeringEntry*> top;
    for (const auto& [_, e] : entries_) {
      auto& t = top[e.classifier.aisi];
      if (t == nullptr || e.priority > t->priority) t = &e;
    }
    std::map<AisiId, std::string> out;
    for (const auto& [aisi, e] : top) out.emplace(aisi, e->anchor_id);
    return out;
  }

  /// Bumped on every install, removal and flip.
  std::uint64_t version() const { return version_; }

  std::size_t size() const { return entries_.size(); }
  std::size_t tripwire_hits() const { return tripwire_hits_; }

  /// Lease-terminal hook: removal shares the terminal transition's timestamp.
  void on_lease_terminal(const Commit& c, SimTime now) { remove_steering(c.lease_id, now); }

 private:
  Expected<SteeringEntry, SteeringError> insert(const Classifier& cls, const Placement& where, LeaseId backing,
                                                int priority, SimTime now) {
    for (const auto& [_, e] : entries_)
      if (e.classifier.aisi == cls.aisi && e.priority == priority) return unexpected(SteeringError::kPriorityTaken);
    SteeringEntry e;
    e.entry_id = ids_.next();
    e.classifier = cls;
    e.anchor_id = where.anchor_id;
    e.tier_id = where.tier_id;
    e.qos = where.qos;
    e.backing_lease = backing;
    e.priority = priority;
    e.installed_at = now;
    entries_.emplace(e.entry_id, e);
    ++version_;
    if (trace_ != nullptr)
      trace_->append(now, "steer_install",
                     {{"entry", e.entry_id},
                      {"aisi", cls.aisi},
                      {"aist", cls.aist},
                      {"anchor", e.anchor_id},
                      {"tier", e.tier_id},
                      {"lease", backing},
                      {"prio", priority}});
    return e;
  }

  void trace_remove(const SteeringEntry& e, SimTime now) {
    ++version_;
    if (trace_ != nullptr)
      trace_->append(now, "steer_remove", {{"entry", e.entry_id}, {"aisi", e.classifier.aisi}, {"lease", e.backing_lease}});
  }

  PolicyKind policy_;
  const LeaseManager* leases_;
  Trace* trace_;
  Counter<EntryId> ids_;
  std::map<EntryId, SteeringEntry> entries_;
  std::size_t tripwire_hits_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace aipaging

#endif  // AIPAGING_ENFORCEMENT_HPP_
