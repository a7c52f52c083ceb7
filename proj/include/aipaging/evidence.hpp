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

#ifndef AIPAGING_EVIDENCE_HPP_
#define AIPAGING_EVIDENCE_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

#include "aipaging/core.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

/// Lowest evidence mode under which a record of this kind is always kept.
inline EvidenceMode required_mode(EviKind kind) {
  switch (kind) {
    case EviKind::kRelocation:
    case EviKind::kLeaseExpiry:
    case EviKind::kLeaseRevocation:
    case EviKind::kViolation: return EvidenceMode::kMinimal;
    case EviKind::kAdmissionReject:
    case EviKind::kHealthChange: return EvidenceMode::kPerEvent;
    case EviKind::kServe: return EvidenceMode::kPerRequest;
  }
  return EvidenceMode::kPerRequest;
}

/// Kinds that are promoted to per-event when the anchor they concern runs
/// above the overload threshold.
inline bool escalates(EviKind kind) {
  return kind == EviKind::kAdmissionReject || kind == EviKind::kHealthChange;
}

/// Writes EVI records into the run trace, filtered by the session's evidence
/// requirements and the overload escalation threshold.
class EvidenceLog {
 public:
  EvidenceLog(Trace* trace, double overload_threshold)
      : trace_(trace), overload_threshold_(overload_threshold) {}

  /// Returns true when the record was kept. `anchor_load` is the live load
  /// fraction of the record's anchor.
  bool emit(const EviRecord& rec, EvidenceMode mode, double anchor_load = 0.0) {
    if (!rec.well_formed())
      throw std::logic_error("malformed EVI record of kind " + std::string(to_string(rec.event_kind)));
    bool keep = static_cast<int>(mode) >= static_cast<int>(required_mode(rec.event_kind)) ||
                (escalates(rec.event_kind) && anchor_load > overload_threshold_);
    if (!keep) {
      ++suppressed_;
      return false;
    }
    ++emitted_;
    if (trace_ != nullptr) {
      std::string refs;
      for (auto id : rec.lease_refs) {
        if (!refs.empty()) refs += ',';
        refs += std::to_string(id.value);
      }
      std::vector<Field> f{{"kind", to_string(rec.event_kind)},
                           {"aisi", rec.aisi},
                           {"leases", refs.empty() ? std::string("-") : refs},
                           {"anchor", rec.anchor_id.empty() ? std::string("-") : rec.anchor_id},
                           {"tier", rec.tier_id.empty() ? std::string("-") : rec.tier_id}};
      if (rec.observables) {
        f.emplace_back("latency_us", rec.observables->delivery_latency);
        f.emplace_back("queue_us", rec.observables->queueing_delay);
        f.emplace_back("loss", rec.observables->lost ? 1 : 0);
      }
      trace_->append(rec.timestamp, "evi", std::move(f));
    }
    return true;
  }

  std::size_t emitted() const { return emitted_; }
  std::size_t suppressed() const { return suppressed_; }
  double overload_threshold() const { return overload_threshold_; }

 private:
  Trace* trace_;
  double overload_threshold_;
  std::size_t emitted_ = 0;
  std::size_t suppressed_ = 0;
};

}  // namespace aipaging

#endif  // AIPAGING_EVIDENCE_HPP_
