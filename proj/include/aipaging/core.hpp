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

#ifndef AIPAGING_CORE_HPP_
#define AIPAGING_CORE_HPP_

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace aipaging {

// Simulation time and durations are integer microseconds.
using SimTime = std::int64_t;
using Duration = std::int64_t;

constexpr Duration ms(std::int64_t v) { return v * 1000; }
constexpr Duration seconds(std::int64_t v) { return v * 1000000; }

/// Converts a millisecond quantity from a config to microseconds, rounding
/// to the nearest microsecond.
inline Duration from_ms(double v) { return static_cast<Duration>(std::llround(v * 1000.0)); }
inline double to_ms(Duration d) { return static_cast<double>(d) / 1000.0; }

//=============================================================================
// Opaque identifiers

template <class Tag>
struct Id {
  std::uint64_t value = 0;

  constexpr bool valid() const { return value != 0; }
  friend constexpr auto operator<=>(Id, Id) = default;
};

using AisiId = Id<struct AisiTag>;
using TokenId = Id<struct TokenTag>;
using LeaseId = Id<struct LeaseTag>;
using EntryId = Id<struct EntryTag>;
using SessionId = Id<struct SessionTag>;
using JobId = Id<struct JobTag>;
using TxnId = Id<struct TxnTag>;
using RequestId = Id<struct RequestTag>;

/// Sentinel backing reference carried by steering entries installed without a
/// lease (baseline policies).
inline constexpr LeaseId kUngated{0};

/// Per-run monotone source for protocol identifiers (Aisi, Aist, leases).
/// Plumbing identifiers (entries, jobs, ...) use their own counters.
class IdSource {
 public:
  template <class T>
  T next() {
    return T{++last_};
  }
  std::uint64_t last() const { return last_; }

 private:
  std::uint64_t last_ = 0;
};

template <class T>
class Counter {
 public:
  T next() { return T{++last_}; }

 private:
  std::uint64_t last_ = 0;
};

//=============================================================================
// Minimal expected<T, E>; GCC 11 has no std::expected.

template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected<E> unexpected(E e) {
  return Unexpected<E>{std::move(e)};
}

using Ok = std::monostate;

template <class T, class E>
class Expected {
 public:
  Expected(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Expected(Unexpected<E> e) : v_(std::in_place_index<1>, std::move(e.error)) {}

  bool has_value() const { return v_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  const T& value() const {
    if (!has_value()) throw std::logic_error("Expected: no value");
    return std::get<0>(v_);
  }
  T& value() {
    if (!has_value()) throw std::logic_error("Expected: no value");
    return std::get<0>(v_);
  }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }
  const T& operator*() const { return value(); }
  T& operator*() { return value(); }
  const E& error() const {
    if (has_value()) throw std::logic_error("Expected: no error");
    return std::get<1>(v_);
  }

 private:
  std::variant<T, E> v_;
};

//=============================================================================
// Enumerations

enum class SiteClass { kEdge, kCloud };
enum class Health { kHealthy, kDegraded, kFailed };
enum class EvidenceMode { kMinimal = 0, kPerEvent = 1, kPerRequest = 2 };
enum class LeaseState { kActive, kExpired, kRevoked, kReleased };
enum class RejectCause { kCapacity, kPolicy, kLocality, kHealth, kTimeout };
enum class EviKind {
  kServe,
  kRelocation,
  kLeaseExpiry,
  kLeaseRevocation,
  kAdmissionReject,
  kViolation,
  kHealthChange,
};
enum class PolicyKind { kAiPaging, kEndpointBound, kBestEffort };

inline constexpr RejectCause kAllRejectCauses[] = {RejectCause::kCapacity, RejectCause::kPolicy,
                                                   RejectCause::kLocality, RejectCause::kHealth,
                                                   RejectCause::kTimeout};

inline std::string_view to_string(SiteClass v) { return v == SiteClass::kEdge ? "edge" : "cloud"; }

inline std::string_view to_string(Health v) {
  switch (v) {
    case Health::kHealthy: return "healthy";
    case Health::kDegraded: return "degraded";
    case Health::kFailed: return "failed";
  }
  return "?";
}

inline std::string_view to_string(EvidenceMode v) {
  switch (v) {
    case EvidenceMode::kMinimal: return "minimal";
    case EvidenceMode::kPerEvent: return "per-event";
    case EvidenceMode::kPerRequest: return "per-request";
  }
  return "?";
}

inline std::string_view to_string(LeaseState v) {
  switch (v) {
    case LeaseState::kActive: return "active";
    case LeaseState::kExpired: return "expired";
    case LeaseState::kRevoked: return "revoked";
    case LeaseState::kReleased: return "released";
  }
  return "?";
}

inline std::string_view to_string(RejectCause v) {
  switch (v) {
    case RejectCause::kCapacity: return "capacity";
    case RejectCause::kPolicy: return "policy";
    case RejectCause::kLocality: return "locality";
    case RejectCause::kHealth: return "health";
    case RejectCause::kTimeout: return "timeout";
  }
  return "?";
}

inline std::string_view to_string(EviKind v) {
  switch (v) {
    case EviKind::kServe: return "serve";
    case EviKind::kRelocation: return "relocation";
    case EviKind::kLeaseExpiry: return "lease_expiry";
    case EviKind::kLeaseRevocation: return "lease_revocation";
    case EviKind::kAdmissionReject: return "admission_reject";
    case EviKind::kViolation: return "violation";
    case EviKind::kHealthChange: return "health_change";
  }
  return "?";
}

inline std::string_view to_string(PolicyKind v) {
  switch (v) {
    case PolicyKind::kAiPaging: return "aipaging";
    case PolicyKind::kEndpointBound: return "endpointbound";
    case PolicyKind::kBestEffort: return "besteffort";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view s) {
  if (s == "aipaging") return PolicyKind::kAiPaging;
  if (s == "endpointbound") return PolicyKind::kEndpointBound;
  if (s == "besteffort") return PolicyKind::kBestEffort;
  return std::nullopt;
}

inline std::optional<EvidenceMode> parse_evidence_mode(std::string_view s) {
  if (s == "minimal") return EvidenceMode::kMinimal;
  if (s == "per-event") return EvidenceMode::kPerEvent;
  if (s == "per-request") return EvidenceMode::kPerRequest;
  return std::nullopt;
}

inline std::optional<RejectCause> parse_reject_cause(std::string_view s) {
  for (auto c : kAllRejectCauses)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

//=============================================================================
// Domain types

struct Intent {
  std::string outcome_tag;
  Duration target_latency = 0;
  double reliability_target = 0.0;
  std::vector<std::string> locality_requirement;  // empty: unconstrained
  std::vector<std::string> trust_requirements;
  double budget = 0.0;
};

/// The enforceable service contract derived from an intent under policy.
struct Asp {
  Duration target_latency = 0;
  Duration max_jitter = 0;
  double max_loss_rate = 0.0;
  std::vector<std::string> locality_region;
  std::vector<std::string> allowed_fallback_tiers;  // preferred first
  EvidenceMode evidence_requirements = EvidenceMode::kMinimal;
  double max_relocation_rate = 0.0;  // relocations per second
  Duration lease_duration = 0;
};

/// Returns the names of every violated Asp field; empty means valid.
inline std::vector<std::string> validate_asp(const Asp& asp) {
  std::vector<std::string> bad;
  if (asp.target_latency <= 0) bad.emplace_back("target_latency");
  if (asp.max_jitter <= 0) bad.emplace_back("max_jitter");
  if (!(asp.max_loss_rate >= 0.0 && asp.max_loss_rate <= 1.0)) bad.emplace_back("max_loss_rate");
  if (asp.allowed_fallback_tiers.empty()) bad.emplace_back("allowed_fallback_tiers");
  if (!(asp.max_relocation_rate > 0.0)) bad.emplace_back("max_relocation_rate");
  if (asp.lease_duration <= 0) bad.emplace_back("lease_duration");
  return bad;
}

inline std::vector<std::string> validate_intent(const Intent& intent) {
  std::vector<std::string> bad;
  if (intent.target_latency <= 0) bad.emplace_back("target_latency");
  if (!(intent.reliability_target >= 0.0 && intent.reliability_target <= 1.0))
    bad.emplace_back("reliability_target");
  if (!(intent.budget >= 0.0)) bad.emplace_back("budget");
  return bad;
}

struct Aisi {
  AisiId id;
  SimTime created_at = 0;

  friend bool operator==(const Aisi&, const Aisi&) = default;
};

struct Aist {
  TokenId token_id;
  AisiId bound_aisi;
  std::vector<std::string> scope_tiers;
  std::vector<std::string> scope_regions;
  SimTime expires_at = 0;
};

struct ModelTier {
  std::string tier_id;
  Duration mean_service = 0;
  Duration service_jitter = 0;  // mean of the optional exponential add-on
  double cost = 0.0;
};

/// An execution anchor (edge or cloud site).
struct Anchor {
  std::string anchor_id;
  SiteClass site_class = SiteClass::kEdge;
  std::string region;
  std::vector<ModelTier> tiers_offered;
  int capacity = 0;
  Health health = Health::kHealthy;
  Duration path_latency = 0;

  const ModelTier* tier(std::string_view id) const {
    for (const auto& t : tiers_offered)
      if (t.tier_id == id) return &t;
    return nullptr;
  }
};

using AnchorMap = std::map<std::string, Anchor, std::less<>>;

struct QosBinding {
  std::string treatment_class;
  Duration latency_budget = 0;

  friend bool operator==(const QosBinding&, const QosBinding&) = default;
};

/// A feasible (anchor, tier) pairing; lower score is better.
struct Candidate {
  std::string anchor_id;
  ModelTier tier;
  double score = 0.0;
  bool feasibility = false;
};

inline bool can_transition(LeaseState from, LeaseState to) {
  return from == LeaseState::kActive && to != LeaseState::kActive;
}

/// Admission lease. Terminal states are absorbing.
struct Commit {
  LeaseId lease_id;
  AisiId aisi;
  std::string anchor_id;
  std::string tier_id;
  QosBinding qos;
  SimTime issued_at = 0;
  SimTime expires_at = 0;
  LeaseState state = LeaseState::kActive;

  bool terminal() const { return state != LeaseState::kActive; }

  void transition(LeaseState to) {
    if (!can_transition(state, to))
      throw std::logic_error("illegal lease transition " + std::string(to_string(state)) + " -> " +
                             std::string(to_string(to)));
    state = to;
  }
};

struct Classifier {
  AisiId aisi;
  TokenId aist;

  friend bool operator==(const Classifier&, const Classifier&) = default;
};

struct SteeringEntry {
  EntryId entry_id;
  Classifier classifier;
  std::string anchor_id;
  std::string tier_id;
  QosBinding qos;
  LeaseId backing_lease;  // kUngated for baseline entries
  int priority = 0;
  SimTime installed_at = 0;
};

struct Observables {
  Duration delivery_latency = 0;
  Duration queueing_delay = 0;
  bool lost = false;
};

struct EviRecord {
  SimTime timestamp = 0;
  AisiId aisi;
  std::vector<LeaseId> lease_refs;
  std::string anchor_id;
  std::string tier_id;
  EviKind event_kind = EviKind::kServe;
  std::optional<Observables> observables;

  /// Relocation records bind two leases, admission rejects none, the rest one.
  bool well_formed() const {
    switch (event_kind) {
      case EviKind::kRelocation: return lease_refs.size() == 2;
      case EviKind::kAdmissionReject: return lease_refs.empty();
      default: return lease_refs.size() == 1;
    }
  }
};

struct CauseStats {
  std::map<RejectCause, int> histogram;

  void add(RejectCause c) { ++histogram[c]; }
  int count(RejectCause c) const {
    auto it = histogram.find(c);
    return it == histogram.end() ? 0 : it->second;
  }
  int total() const {
    int n = 0;
    for (const auto& [_, v] : histogram) n += v;
    return n;
  }
  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : histogram) {
      if (!out.empty()) out += ',';
      out += std::string(aipaging::to_string(k)) + ":" + std::to_string(v);
    }
    return out.empty() ? "-" : out;
  }
};

struct TransactionSuccess {
  Aisi aisi;
  Aist aist;
  Commit commit;
};

struct TransactionReject {
  Aisi aisi;
  CauseStats causes;
};

struct TransactionOutcome {
  std::variant<TransactionSuccess, TransactionReject> variant;
  Duration elapsed = 0;

  bool success() const { return variant.index() == 0; }
  const TransactionSuccess& accepted() const { return std::get<0>(variant); }
  const TransactionReject& rejected() const { return std::get<1>(variant); }
};

}  // namespace aipaging

#endif  // AIPAGING_CORE_HPP_
