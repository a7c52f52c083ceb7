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

// Make-before-break anchor relocation.
//
// A job walks selecting -> admitting -> installing -> flipped -> draining ->
// done, or ends in failed before the flip with the old path untouched. The
// new lease's steering is installed at standby priority, flipped to active in
// one trace entry, and the old path is released exactly T_D after the flip
// (or earlier, if the old lease expires on its own while draining).

#ifndef AIPAGING_RELOCATION_HPP_
#define AIPAGING_RELOCATION_HPP_

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aipaging/controller.hpp"
#include "aipaging/core.hpp"
#include "aipaging/enforcement.hpp"
#include "aipaging/evidence.hpp"
#include "aipaging/lease_manager.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

enum class RelocationTrigger { kMobility, kOverload, kHealth, kFailure, kMaintenance };
enum class RelocationPhase { kSelecting, kAdmitting, kInstalling, kFlipped, kDraining, kDone, kFailed };
enum class RelocationFailure { kNoFeasibleTarget, kAdmissionTimeout, kRateLimited, kOldLeaseLost, kJobPending };

inline std::string_view to_string(RelocationTrigger t) {
  switch (t) {
    case RelocationTrigger::kMobility: return "mobility";
    case RelocationTrigger::kOverload: return "overload";
    case RelocationTrigger::kHealth: return "health";
    case RelocationTrigger::kFailure: return "failure";
    case RelocationTrigger::kMaintenance: return "maintenance";
  }
  return "?";
}

inline std::string_view to_string(RelocationFailure f) {
  switch (f) {
    case RelocationFailure::kNoFeasibleTarget: return "no-feasible-target";
    case RelocationFailure::kAdmissionTimeout: return "admission-timeout";
    case RelocationFailure::kRateLimited: return "rate-limited";
    case RelocationFailure::kOldLeaseLost: return "old-lease-lost";
    case RelocationFailure::kJobPending: return "job-pending";
  }
  return "?";
}

struct RelocationConfig {
  double hysteresis = 1.2;          // H
  double improvement_margin = 0.2;  // M
  Duration rate_window = seconds(10);
};

/// Relocations allowed inside one rate window.
inline int relocation_budget(const Asp& asp, const RelocationConfig& cfg) {
  return static_cast<int>(std::floor(asp.max_relocation_rate * to_ms(cfg.rate_window) / 1000.0 + 1e-9));
}

inline int count_in_window(std::span<const SimTime> history, SimTime now, Duration window) {
  int n = 0;
  for (auto t : history)
    if (t > now - window && t <= now) ++n;
  return n;
}

struct RelocationInputs {
  const Anchor& current;
  double current_predicted_ms = 0.0;
  std::optional<double> best_alternative_ms;  // best candidate excluding current
  bool path_changed = false;                  // explicit mobility event
  std::span<const SimTime> recent_relocations;
  SimTime now = 0;
};

/// Trigger when the current anchor has become infeasible or suboptimal:
/// failed/degraded health, predicted latency above H x target, or a path
/// change that makes another candidate better by margin M. Rate-limited by
/// the Asp's max relocation rate over the configured window.
inline std::optional<RelocationTrigger> should_relocate(const RelocationInputs& in, const Asp& asp,
                                                        const RelocationConfig& cfg = {}) {
  std::optional<RelocationTrigger> trigger;
  if (in.current.health == Health::kFailed) {
    trigger = RelocationTrigger::kFailure;
  } else if (in.current.health == Health::kDegraded) {
    trigger = RelocationTrigger::kHealth;
  } else if (in.path_changed && in.best_alternative_ms &&
             *in.best_alternative_ms < in.current_predicted_ms * (1.0 - cfg.improvement_margin)) {
    trigger = RelocationTrigger::kMobility;
  } else if (in.current_predicted_ms > to_ms(asp.target_latency) * cfg.hysteresis) {
    trigger = in.path_changed ? RelocationTrigger::kMobility : RelocationTrigger::kOverload;
  }
  if (!trigger) return std::nullopt;
  if (count_in_window(in.recent_relocations, in.now, cfg.rate_window) >= relocation_budget(asp, cfg))
    return std::nullopt;
  return trigger;
}

struct RelocationJob {
  JobId id;
  TxnId txn;
  SessionId session;
  Classifier classifier;
  LeaseId old_lease;
  std::string old_anchor;
  std::optional<LeaseId> new_lease;
  RelocationPhase phase = RelocationPhase::kSelecting;
  RelocationTrigger trigger = RelocationTrigger::kMobility;
  SimTime started_at = 0;
  SimTime flipped_at = 0;
  SimTime drain_deadline = 0;
  Asp asp;
  std::optional<AdmissionLoop> loop;
  std::optional<RelocationFailure> failure;
};

/// What the caller must do after feeding a reply.
struct RelocationStep {
  enum Kind { kContinue, kFlipped, kFailed } kind = kContinue;
  std::optional<Attempt> next;                // kContinue: next attempt to schedule
  SimTime drain_deadline = 0;                 // kFlipped
  std::optional<RelocationFailure> failure;   // kFailed
};

class RelocationEngine {
 public:
  RelocationEngine(LeaseManager& leases, SteeringTable& steering, EvidenceLog* evidence, Trace* trace,
                   Duration commit_timeout, Duration drain_timeout, Duration round_trip,
                   RelocationConfig cfg = {})
      : leases_(leases),
        steering_(steering),
        evidence_(evidence),
        trace_(trace),
        commit_timeout_(commit_timeout),
        drain_timeout_(drain_timeout),
        round_trip_(round_trip),
        cfg_(cfg) {}

  struct Started {
    JobId job;
    std::optional<Attempt> first;  // empty: the job already failed
  };

  /// Step (1): selects targets (the caller passes candidates generated under
  /// the current Asp, with the old anchor still present; it is dropped here)
  /// and opens the admission loop restricted to relocation.
  Expected<Started, RelocationFailure> begin(SessionId session, const Classifier& cls, const Asp& asp,
                                             LeaseId old_lease, RelocationTrigger trigger,
                                             std::vector<Candidate> ranked, std::vector<Candidate> fallbacks,
                                             TxnId txn, SimTime now) {
    if (active_job(cls.aisi) != nullptr) return unexpected(RelocationFailure::kJobPending);
    const Commit* old = leases_.find(old_lease);
    if (old == nullptr || old->terminal()) return unexpected(RelocationFailure::kOldLeaseLost);

    RelocationJob job;
    job.id = job_ids_.next();
    job.txn = txn;
    job.session = session;
    job.classifier = cls;
    job.old_lease = old_lease;
    job.old_anchor = old->anchor_id;
    job.trigger = trigger;
    job.started_at = now;
    job.asp = asp;
    if (trace_ != nullptr)
      trace_->append(now, "reloc_start",
                     {{"job", job.id},
                      {"session", session},
                      {"aisi", cls.aisi},
                      {"old_lease", old_lease},
                      {"old_anchor", job.old_anchor},
                      {"trigger", to_string(trigger)},
                      {"mode", "mbb"}});
    auto& history = history_[cls.aisi];
    bool limited = count_in_window(history, now, cfg_.rate_window) >= relocation_budget(asp, cfg_);
    if (!limited) history.push_back(now);

    std::erase_if(ranked, [&](const Candidate& c) { return c.anchor_id == job.old_anchor; });
    std::erase_if(fallbacks, [&](const Candidate& c) { return c.anchor_id == job.old_anchor; });
    // Tier downshift is the only way out when no anchor offers a preferred tier.
    if (ranked.empty()) std::swap(ranked, fallbacks);

    auto [it, _] = jobs_.emplace(job.id, std::move(job));
    RelocationJob& j = it->second;
    by_aisi_[cls.aisi] = j.id;
    if (limited) {
      fail(j, RelocationFailure::kRateLimited, now);
      return Started{j.id, std::nullopt};
    }
    if (ranked.empty()) {
      fail(j, RelocationFailure::kNoFeasibleTarget, now);
      return Started{j.id, std::nullopt};
    }
    if (trace_ != nullptr)
      trace_->append(now, "txn_start", {{"txn", txn}, {"aisi", cls.aisi}, {"kind", "relocation"}});
    j.phase = RelocationPhase::kAdmitting;
    j.loop.emplace(txn, cls.aisi, std::move(ranked), std::move(fallbacks), now, commit_timeout_, round_trip_,
                   trace_);
    return Started{j.id, j.loop->next_attempt(now)};
  }

  /// Steps (2)-(4) at the reply instant.
  RelocationStep on_reply(JobId id, const Attempt& attempt, SimTime now) {
    RelocationJob& j = jobs_.at(id);
    if (j.phase != RelocationPhase::kAdmitting) return {RelocationStep::kFailed, {}, 0, j.failure};
    if (attempt.timed_out) {
      j.loop->on_timeout(attempt);
    } else {
      auto decision = leases_.request_lease(attempt.candidate, j.classifier.aisi, j.asp, now);
      if (auto commit = j.loop->on_reply(attempt, decision)) {
        if (!leases_.is_valid(j.old_lease, now)) {
          leases_.release(commit->lease_id, now);
          fail(j, RelocationFailure::kOldLeaseLost, now);
          return {RelocationStep::kFailed, {}, 0, j.failure};
        }
        j.phase = RelocationPhase::kInstalling;
        j.new_lease = commit->lease_id;
        auto entry = steering_.install_steering(j.classifier, *commit, kStandbyPriority, now);
        if (!entry) throw std::logic_error("relocation install refused: " + std::string(to_string(entry.error())));
        if (!steering_.flip_priority(j.classifier.aisi, commit->lease_id, now))
          throw std::logic_error("relocation flip found no entry");
        j.phase = RelocationPhase::kDraining;
        j.flipped_at = now;
        j.drain_deadline = now + drain_timeout_;
        trace_txn_end(j, now, "success");
        return {RelocationStep::kFlipped, {}, j.drain_deadline, {}};
      }
    }
    if (auto next = j.loop->next_attempt(now)) return {RelocationStep::kContinue, next, 0, {}};
    bool out_of_time = now - j.loop->start() >= commit_timeout_ ||
                       j.loop->causes().count(RejectCause::kTimeout) > 0;
    fail(j, out_of_time ? RelocationFailure::kAdmissionTimeout : RelocationFailure::kNoFeasibleTarget, now);
    return {RelocationStep::kFailed, {}, 0, j.failure};
  }

  /// Steps (5)-(7): release the old lease (an earlier terminal transition is
  /// tolerated), drop its steering, and emit the relocation evidence.
  void on_drain_deadline(JobId id, SimTime now) {
    RelocationJob& j = jobs_.at(id);
    if (j.phase != RelocationPhase::kDraining) return;
    leases_.release(j.old_lease, now);
    steering_.remove_steering(j.old_lease, now);
    j.phase = RelocationPhase::kDone;
    const Commit* fresh = leases_.find(*j.new_lease);
    if (evidence_ != nullptr)
      evidence_->emit(EviRecord{now, j.classifier.aisi, {j.old_lease, *j.new_lease},
                                fresh ? fresh->anchor_id : std::string(), fresh ? fresh->tier_id : std::string(),
                                EviKind::kRelocation, std::nullopt},
                      EvidenceMode::kMinimal);
    if (trace_ != nullptr)
      trace_->append(now, "reloc_done",
                     {{"job", j.id}, {"aisi", j.classifier.aisi}, {"old_lease", j.old_lease},
                      {"new_lease", *j.new_lease}, {"flip", j.flipped_at}});
    by_aisi_.erase(j.classifier.aisi);
  }

  /// Ends a job because its session went away; drains immediately.
  void abandon(AisiId aisi, SimTime now) {
    RelocationJob* j = active_job(aisi);
    if (j == nullptr) return;
    if (j->phase == RelocationPhase::kDraining) {
      on_drain_deadline(j->id, now);
    } else {
      fail(*j, RelocationFailure::kOldLeaseLost, now);
    }
  }

  RelocationJob* active_job(AisiId aisi) {
    auto it = by_aisi_.find(aisi);
    return it == by_aisi_.end() ? nullptr : &jobs_.at(it->second);
  }

  const RelocationJob* job(JobId id) const {
    auto it = jobs_.find(id);
    return it == jobs_.end() ? nullptr : &it->second;
  }

  std::span<const SimTime> history(AisiId aisi) const {
    auto it = history_.find(aisi);
    if (it == history_.end()) return {};
    return it->second;
  }

  const RelocationConfig& config() const { return cfg_; }

 private:
  void fail(RelocationJob& j, RelocationFailure why, SimTime now) {
    j.phase = RelocationPhase::kFailed;
    j.failure = why;
    if (j.loop) {
      j.loop->finish();
      trace_txn_end(j, now, "reject");
    }
    if (trace_ != nullptr)
      trace_->append(now, "reloc_fail", {{"job", j.id}, {"aisi", j.classifier.aisi}, {"reason", to_string(why)}});
    by_aisi_.erase(j.classifier.aisi);
  }

  void trace_txn_end(const RelocationJob& j, SimTime now, const char* result) {
    if (trace_ == nullptr) return;
    trace_->append(now, "txn_end",
                   {{"txn", j.txn}, {"aisi", j.classifier.aisi}, {"result", result},
                    {"elapsed_us", now - j.loop->start()}, {"causes", j.loop->causes().to_string()}});
  }

  LeaseManager& leases_;
  SteeringTable& steering_;
  EvidenceLog* evidence_;
  Trace* trace_;
  Duration commit_timeout_;
  Duration drain_timeout_;
  Duration round_trip_;
  RelocationConfig cfg_;
  Counter<JobId> job_ids_;
  std::map<JobId, RelocationJob> jobs_;
  std::map<AisiId, JobId> by_aisi_;
  std::map<AisiId, std::vector<SimTime>> history_;
};

struct RelocationResult {
  JobId job;
  Expected<Commit, RelocationFailure> outcome;
};

/// Synchronous relocation for callers with no interleaved events: runs the
/// admission loop to the flip. The drain deadline is left to the caller
/// (fire `on_drain_deadline(job, deadline)`).
inline RelocationResult relocate(RelocationEngine& engine, LeaseManager& leases, SessionId session,
                                 const Classifier& cls, const Asp& asp, LeaseId old_lease,
                                 RelocationTrigger trigger, std::vector<Candidate> ranked,
                                 std::vector<Candidate> fallbacks, TxnId txn, SimTime now) {
  auto started = engine.begin(session, cls, asp, old_lease, trigger, std::move(ranked), std::move(fallbacks), txn, now);
  if (!started) return {JobId{}, unexpected(started.error())};
  JobId id = started->job;
  std::optional<Attempt> attempt = started->first;
  while (attempt) {
    auto step = engine.on_reply(id, *attempt, attempt->reply_at);
    if (step.kind == RelocationStep::kFlipped) return {id, *leases.find(*engine.job(id)->new_lease)};
    if (step.kind == RelocationStep::kFailed) return {id, unexpected(*step.failure)};
    attempt = step.next;
  }
  return {id, unexpected(*engine.job(id)->failure)};
}

}  // namespace aipaging

#endif  // AIPAGING_RELOCATION_HPP_
