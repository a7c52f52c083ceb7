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

// Deterministic discrete-event harness: workload, mobility, overload and
// failure injection, the anchor service model, and the three policy drivers
// (AiPaging, EndpointBound, BestEffort). One run writes one trace.

#ifndef AIPAGING_SIMULATOR_HPP_
#define AIPAGING_SIMULATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aipaging/controller.hpp"
#include "aipaging/core.hpp"
#include "aipaging/enforcement.hpp"
#include "aipaging/evidence.hpp"
#include "aipaging/lease_manager.hpp"
#include "aipaging/metrics.hpp"
#include "aipaging/relocation.hpp"
#include "aipaging/rng.hpp"
#include "aipaging/scenario.hpp"
#include "aipaging/trace.hpp"

namespace aipaging {

//=============================================================================
// Anchor service model

/// FCFS queue in front of max(1, capacity) identical servers.
class AnchorQueue {
 public:
  explicit AnchorQueue(int servers = 1, SimTime now = 0) { resize(servers, now); }

  /// Shrinking drops the idlest servers first; busy ones finish their work.
  void resize(int servers, SimTime now) {
    auto n = static_cast<std::size_t>(std::max(1, servers));
    std::sort(free_at_.begin(), free_at_.end());
    if (free_at_.size() > n) free_at_.erase(free_at_.begin(), free_at_.begin() + static_cast<long>(free_at_.size() - n));
    while (free_at_.size() < n) free_at_.push_back(now);
  }

  void reset(SimTime now) { std::fill(free_at_.begin(), free_at_.end(), now); }

  /// Service start for a request reaching the queue at `arrive`.
  SimTime enqueue(SimTime arrive, Duration service) {
    auto it = std::min_element(free_at_.begin(), free_at_.end());
    SimTime start = std::max(arrive, *it);
    *it = start + service;
    return start;
  }

  std::size_t servers() const { return free_at_.size(); }

 private:
  std::vector<SimTime> free_at_;
};

struct ServeOutcome {
  bool lost = false;
  Duration latency = 0;
  Duration queueing = 0;
};

/// latency = path + queueing + service; a failed anchor loses the request.
inline ServeOutcome anchor_serve(const Anchor& anchor, AnchorQueue& queue, Duration path, Duration service,
                                 SimTime now) {
  if (anchor.health == Health::kFailed) return {true, 0, 0};
  SimTime start = queue.enqueue(now, service);
  return {false, path + (start - now) + service, start - now};
}

/// Samples a tier's service time: the mean plus an optional exponential
/// add-on whose mean is the tier's jitter.
inline Duration sample_service(const ModelTier& tier, CounterRng& rng) {
  Duration d = tier.mean_service;
  if (tier.service_jitter > 0) d += from_ms(rng.exponential(to_ms(tier.service_jitter)));
  return d;
}

//=============================================================================
// Injections

struct Injection {
  enum Kind { kFailHard, kFailSoft, kRecover, kCapacity } kind = kFailHard;
  std::string anchor;
  int capacity = 0;
  std::size_t recovers = 0;  // kRecover: index of the failure it undoes
  bool void_ = false;        // failure ignored because the anchor was already down
};

struct ScheduledInjection {
  SimTime at = 0;
  Injection injection;
};

/// Scripted plus stress-derived capacity drops.
inline std::vector<ScheduledInjection> inject_overload(const ScenarioConfig& c) {
  std::vector<ScheduledInjection> out;
  for (const auto& k : c.capacity_schedule) {
    Injection i;
    i.kind = Injection::kCapacity;
    i.anchor = k.anchor;
    i.capacity = k.capacity;
    out.push_back({k.at, i});
  }
  if (stress_overload_applies(c)) {
    for (const auto& a : c.anchors) {
      if (a.site_class != SiteClass::kEdge) continue;
      Injection i;
      i.kind = Injection::kCapacity;
      i.anchor = a.anchor_id;
      i.capacity = static_cast<int>(std::lround(a.capacity * (1.0 - c.overload_depth * c.stress_level)));
      out.push_back({c.horizon / 2, i});
    }
  }
  return out;
}

/// Scripted failures, then random edge failures at the stress-scaled rate.
/// Each failure with a recovery is followed by its kRecover entry.
inline std::vector<ScheduledInjection> inject_failure(const ScenarioConfig& c) {
  std::vector<ScheduledInjection> out;
  auto add = [&](SimTime at, const std::string& anchor, bool hard, Duration recover_after) {
    Injection f;
    f.kind = hard ? Injection::kFailHard : Injection::kFailSoft;
    f.anchor = anchor;
    out.push_back({at, f});
    if (recover_after > 0) {
      Injection r;
      r.kind = Injection::kRecover;
      r.anchor = anchor;
      r.recovers = out.size() - 1;
      out.push_back({at + recover_after, r});
    }
  };
  for (const auto& f : c.failure_schedule) {
    if (c.anchor(f.anchor) == nullptr) throw ConfigError("failure", "schedule references unknown anchor '" + f.anchor + "'");
    add(f.at, f.anchor, f.hard, f.recover_after);
  }
  const double rate = effective_load(c).failure_rate;
  std::vector<std::string> edges;
  for (const auto& a : c.anchors)
    if (a.site_class == SiteClass::kEdge) edges.push_back(a.anchor_id);
  if (rate > 0.0 && !edges.empty()) {
    CounterRng rng(c.seed, streams::kFailures);
    double t = 0.0;
    while (true) {
      t += rng.exponential(1000.0 / rate);
      SimTime at = from_ms(t);
      if (at >= c.horizon) break;
      const std::string& anchor = edges[rng.below(edges.size())];
      bool hard = !rng.bernoulli(c.failure_soft_fraction);
      add(at, anchor, hard, c.failure_downtime);
    }
  }
  return out;
}

//=============================================================================
// Simulator

struct RunResult {
  Trace trace;
  MetricsReport metrics;
};

class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        evidence_(&trace_, cfg_.overload_threshold),
        leases_(anchors_, ids_, &trace_, &evidence_),
        steering_(cfg_.policy_kind, &leases_, &trace_),
        reloc_(leases_, steering_, &evidence_, &trace_, cfg_.commit_timeout, cfg_.drain_timeout, cfg_.admission_rtt,
               RelocationConfig{cfg_.hysteresis, cfg_.improvement_margin, cfg_.relocation_window}),
        behavior_(select_action(cfg_.policy_kind, cfg_.endpoint_retries)) {
    require_valid(cfg_);
    for (const auto& a : cfg_.anchors) {
      anchors_.emplace(a.anchor_id, a);
      queues_.emplace(a.anchor_id, AnchorQueue(a.capacity, 0));
      telemetry_[a.anchor_id] = AnchorObservation{0.0, a.path_latency};
    }
    policy_.tier_policy["*"] = cfg_.tiers;
    policy_.default_lease_duration = cfg_.lease_duration;
    policy_.commit_timeout = cfg_.commit_timeout;
    policy_.drain_timeout = cfg_.drain_timeout;
    policy_.default_evidence = cfg_.evidence;
    policy_.default_max_relocation_rate = cfg_.max_relocation_rate;
    intent_.outcome_tag = "inference";
    intent_.target_latency = cfg_.target_latency;
    intent_.reliability_target = cfg_.reliability;
    intent_.locality_requirement = cfg_.regions;

    leases_.add_terminal_hook([this](const Commit& c, SimTime now) { steering_.on_lease_terminal(c, now); });
    leases_.add_terminal_hook([this](const Commit& c, SimTime now) { on_lease_terminal(c, now); });
    leases_.set_load_probe([this](const std::string& a) { return live_load(a); });
    // Handover guard: the last guard slots of an anchor are reserved for
    // sessions escaping a failed or degraded anchor.
    leases_.set_eligibility([this](const Anchor& a, const Asp&) {
      if (!guarded_) return true;
      int in_use = std::max(leases_.usage(a.anchor_id), static_cast<int>(steered_count(a.anchor_id, *guarded_)));
      int guard = static_cast<int>(std::floor(a.capacity * cfg_.handover_guard));
      return a.capacity - in_use > guard;
    });
    leases_.set_occupancy_probe([this](const std::string& a, AisiId self) {
      return static_cast<int>(steered_count(a, self));
    });
  }

  RunResult run() {
    if (ran_) throw std::logic_error("Simulator::run called twice");
    ran_ = true;
    const auto eff = effective_load(cfg_);
    trace_.append(0, "run",
                  {{"policy", to_string(cfg_.policy_kind)},
                   {"setup", to_string(cfg_.setup_id)},
                   {"seed", cfg_.seed},
                   {"horizon_us", cfg_.horizon},
                   {"commit_timeout_us", cfg_.commit_timeout},
                   {"drain_timeout_us", cfg_.drain_timeout},
                   {"recovery_window_us", cfg_.recovery_window},
                   {"lease_us", cfg_.lease_duration},
                   {"evidence", to_string(cfg_.evidence)},
                   {"arrival_rate", detail::fmt(eff.arrival_rate)},
                   {"relocation_probability", detail::fmt(eff.relocation_probability)},
                   {"stress_level", detail::fmt(cfg_.stress_level)},
                   {"overload_threshold", detail::fmt(cfg_.overload_threshold)}});
    schedule_sessions(eff.arrival_rate);
    for (auto& si : inject_overload(cfg_)) schedule_injection(si);
    auto failures = inject_failure(cfg_);
    const std::size_t base = injections_.size();
    for (auto& si : failures) {
      if (si.injection.kind == Injection::kRecover) si.injection.recovers += base;
      schedule_injection(si);
    }
    push(cfg_.telemetry_period, Ev::kTelemetry);

    while (true) {
      // Lease expiry runs at its own instant, ahead of any event at that time.
      SimTime next = queue_.empty() ? cfg_.horizon : std::min(queue_.top().time, cfg_.horizon);
      if (auto x = leases_.next_expiry(); x && *x <= next && *x < cfg_.horizon) {
        now_ = std::max(now_, *x);
        leases_.expire_due(now_);
        continue;
      }
      if (next >= cfg_.horizon) break;
      Event e = queue_.top();
      queue_.pop();
      now_ = e.time;
      dispatch(e);
    }
    finish();
    RunResult r;
    r.metrics = compute_metrics(trace_);
    r.trace = std::move(trace_);
    return r;
  }

  std::size_t events_processed() const { return events_; }

 private:
  enum class Ev {
    kSessionStart,
    kSessionEnd,
    kRequestArrival,
    kRequestComplete,
    kRequestRetry,
    kAdmissionReply,
    kBaselineAttempt,
    kBaselineReply,
    kRelocationReply,
    kDrainDeadline,
    kRenew,
    kReadmit,
    kMobility,
    kTelemetry,
    kInjection,
    kReevaluate,
  };

  struct Event {
    SimTime time = 0;
    std::uint64_t seq = 0;
    Ev kind = Ev::kTelemetry;
    std::size_t session = 0;
    std::uint64_t gen = 0;
    std::uint64_t ref = 0;  // request id, job id or injection index
    std::optional<Attempt> attempt;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  enum class Phase { kPending, kConnecting, kServing, kWaiting, kEnded };

  struct Session {
    SessionId id;
    SimTime start = 0;
    SimTime end = 0;
    CounterRng requests{0, 0};
    CounterRng mobility{0, 0};
    CounterRng service{0, 0};
    Asp asp;
    Aisi aisi;
    Aist aist;
    Phase phase = Phase::kPending;

    // Admission (all policies).
    std::optional<AdmissionLoop> loop;
    std::uint64_t txn_gen = 0;
    TxnId txn;
    int tries = 0;  // EndpointBound attempts on the current transaction
    std::optional<Candidate> target;
    bool relocating = false;  // BestEffort break-before-make gap
    JobId bbm_job;
    RelocationTrigger bbm_trigger = RelocationTrigger::kMobility;
    LeaseId bbm_old_lease;

    // AiPaging lease currently backing the active entry.
    std::optional<LeaseId> lease;
    std::uint64_t renew_gen = 0;

    // Baselines.
    std::string endpoint;
    std::vector<LeaseId> held;
    std::vector<SimTime> reloc_history;

    // Mobility.
    std::string penalized;
    SimTime penalty_from = 0;

    Classifier classifier() const { return Classifier{aisi.id, aist.token_id}; }
  };

  struct Request {
    RequestId id;
    std::size_t session = 0;
    SimTime arrived = 0;
    int retries = 0;
    std::string anchor;
    std::string tier;
    LeaseId lease;
    EntryId entry;
    Duration queueing = 0;
    Duration latency = 0;
  };

  //---------------------------------------------------------------------------
  // Scheduling

  Event& push(SimTime t, Ev kind, std::size_t session = 0, std::uint64_t gen = 0, std::uint64_t ref = 0,
              std::optional<Attempt> attempt = std::nullopt) {
    scratch_ = Event{t, ++seq_, kind, session, gen, ref, std::move(attempt)};
    queue_.push(scratch_);
    return scratch_;
  }

  void schedule_sessions(double arrival_rate) {
    CounterRng rng(cfg_.seed, streams::kSessions);
    double t = 0.0;
    while (true) {
      t += rng.exponential(1000.0 / arrival_rate);
      SimTime start = from_ms(t);
      if (start >= cfg_.horizon) break;
      Session s;
      s.id = SessionId{sessions_.size() + 1};
      s.start = start;
      s.end = start + from_ms(to_ms(cfg_.session_duration) * (0.5 + rng.uniform()));
      CounterRng own(cfg_.seed, streams::kSessionBase + sessions_.size());
      s.requests = own.split(1);
      s.mobility = own.split(2);
      s.service = own.split(3);
      sessions_.push_back(std::move(s));
      push(start, Ev::kSessionStart, sessions_.size() - 1);
    }
  }

  void schedule_injection(const ScheduledInjection& si) {
    injections_.push_back(si.injection);
    push(si.at, Ev::kInjection, 0, 0, injections_.size() - 1);
  }

  void dispatch(const Event& e) {
    ++events_;
    switch (e.kind) {
      case Ev::kSessionStart: session_start(e.session); break;
      case Ev::kSessionEnd: session_end(e.session); break;
      case Ev::kRequestArrival: request_arrival(e.session); break;
      case Ev::kRequestComplete: request_complete(RequestId{e.ref}); break;
      case Ev::kRequestRetry: request_retry(RequestId{e.ref}); break;
      case Ev::kAdmissionReply: admission_reply(e); break;
      case Ev::kBaselineAttempt: baseline_attempt(e); break;
      case Ev::kBaselineReply: baseline_reply(e); break;
      case Ev::kRelocationReply: relocation_reply(e); break;
      case Ev::kDrainDeadline:
        reloc_.on_drain_deadline(JobId{e.ref}, now_);
        evaluate(e.session, false);  // conditions may have changed while the job held the session
        break;
      case Ev::kRenew: renew(e); break;
      case Ev::kReadmit: readmit(e); break;
      case Ev::kMobility: mobility_tick(e.session); break;
      case Ev::kTelemetry: telemetry_tick(); break;
      case Ev::kInjection: apply_injection(e.ref); break;
      case Ev::kReevaluate: evaluate(e.session, false); break;
    }
  }

  //---------------------------------------------------------------------------
  // Observations

  Duration penalty(const Session& s, const std::string& anchor, bool effective_only) const {
    if (s.penalized != anchor) return 0;
    if (effective_only && now_ < s.penalty_from) return 0;
    return cfg_.mobility_penalty;
  }

  /// The controller's view for one session: stale load, live path.
  Telemetry view(const Session& s) const {
    Telemetry t = telemetry_;
    for (auto& [id, obs] : t) obs.path_latency = anchors_.at(id).path_latency + penalty(s, id, false);
    return t;
  }

  /// Live sessions per serving anchor, rebuilt when steering changes.
  const std::map<AisiId, std::string>& occupancy() const {
    if (occupancy_version_ != steering_.version()) {
      occupancy_ = steering_.serving_anchors();
      occupancy_count_.clear();
      for (const auto& [_, a] : occupancy_) ++occupancy_count_[a];
      occupancy_version_ = steering_.version();
    }
    return occupancy_;
  }

  std::size_t steered_count(const std::string& anchor, AisiId except = AisiId{}) const {
    const auto& at = occupancy();
    auto it = occupancy_count_.find(anchor);
    std::size_t n = it == occupancy_count_.end() ? 0 : it->second;
    if (auto self = at.find(except); self != at.end() && self->second == anchor) --n;
    return n;
  }

  double load_fraction(const std::string& anchor, std::size_t steered) const {
    int cap = anchors_.at(anchor).capacity;
    if (cap <= 0) return steered > 0 ? 1e3 : 0.0;
    return static_cast<double>(steered) / cap;
  }

  double live_load(const std::string& anchor) const { return load_fraction(anchor, steered_count(anchor)); }

  void refresh_telemetry(const std::string& anchor) {
    telemetry_[anchor].load_fraction = live_load(anchor);
  }

  std::vector<Candidate> ranked(const Session& s) const { return generate_candidates(s.asp, anchors_, view(s)); }
  std::vector<Candidate> fallbacks(const Session& s) const { return fallback_variants(s.asp, anchors_, view(s)); }

  std::optional<LeaseId> held_valid(const Session& s, const std::string& anchor) const {
    for (auto id : s.held) {
      const Commit* c = leases_.find(id);
      if (c != nullptr && c->anchor_id == anchor && leases_.is_valid(id, now_)) return id;
    }
    return std::nullopt;
  }

  void emit(EviRecord rec, const Session& s, double load = 0.0) {
    evidence_.emit(rec, s.asp.evidence_requirements, load);
  }

  //---------------------------------------------------------------------------
  // Session lifecycle

  void session_start(std::size_t idx) {
    Session& s = sessions_[idx];
    live_.insert(idx);
    trace_.append(now_, "session_start",
                  {{"session", s.id}, {"policy", to_string(cfg_.policy_kind)}, {"planned_end", s.end}});
    auto asp = derive_asp(intent_, policy_);
    if (!asp) throw std::logic_error("operator policy rejects the configured intent");
    s.asp = *asp;
    auto [aisi, aist] = issue_identity(s.asp, now_, ids_, policy_.token_lifetime);
    s.aisi = aisi;
    s.aist = aist;
    by_aisi_[aisi.id] = idx;
    trace_.append(now_, "identity", {{"session", s.id}, {"aisi", aisi.id}, {"aist", aist.token_id}});

    if (s.end < cfg_.horizon) push(s.end, Ev::kSessionEnd, idx);
    schedule_next_request(idx);
    if (now_ + cfg_.mobility_interval < std::min(s.end, cfg_.horizon))
      push(now_ + cfg_.mobility_interval, Ev::kMobility, idx);
    connect(idx, "initial");
  }

  void session_end(std::size_t idx) {
    Session& s = sessions_[idx];
    if (s.phase == Phase::kEnded) return;
    s.phase = Phase::kEnded;
    live_.erase(idx);
    ++s.txn_gen;
    ++s.renew_gen;
    trace_.append(now_, "session_end", {{"session", s.id}, {"aisi", s.aisi.id}});
    if (s.loop) {
      s.loop->finish();
      txn_end(s, "abandoned");
      s.loop.reset();
    }
    if (behavior_.gate_on_lease) {
      reloc_.abandon(s.aisi.id, now_);
      if (s.lease) leases_.release(*s.lease, now_);
      s.lease.reset();
      steering_.remove_aisi(s.aisi.id, now_);
    } else {
      steering_.remove_aisi(s.aisi.id, now_);
      for (auto id : s.held)
        if (const Commit* c = leases_.find(id); c != nullptr && !c->terminal()) leases_.release(id, now_);
    }
  }

  void connect(std::size_t idx, const char* kind) {
    Session& s = sessions_[idx];
    s.phase = Phase::kConnecting;
    ++s.txn_gen;
    s.txn = txn_ids_.next();
    s.tries = 0;
    if (cfg_.policy_kind == PolicyKind::kAiPaging) {
      s.loop.emplace(s.txn, s.aisi.id, ranked(s), fallbacks(s), now_, cfg_.commit_timeout, cfg_.admission_rtt,
                     &trace_);
      trace_.append(now_, "txn_start", {{"txn", s.txn}, {"aisi", s.aisi.id}, {"kind", kind}});
      next_admission(idx);
      return;
    }
    std::optional<Candidate> target;
    if (cfg_.policy_kind == PolicyKind::kEndpointBound) {
      if (s.endpoint.empty()) s.endpoint = pick_endpoint(s);
      if (!s.endpoint.empty()) target = endpoint_candidate(s);
    } else {
      auto r = ranked(s);
      if (!r.empty()) target = r.front();
    }
    if (!target) {
      wait_and_readmit(idx);
      return;
    }
    s.target = target;
    trace_.append(now_, "txn_start", {{"txn", s.txn}, {"aisi", s.aisi.id}, {"kind", kind}});
    baseline_send(idx);
  }

  void wait_and_readmit(std::size_t idx) {
    Session& s = sessions_[idx];
    s.phase = Phase::kWaiting;
    push(now_ + cfg_.readmit_backoff, Ev::kReadmit, idx, ++s.txn_gen);
  }

  void readmit(const Event& e) {
    Session& s = sessions_[e.session];
    if (s.phase != Phase::kWaiting || e.gen != s.txn_gen) return;
    connect(e.session, "readmit");
  }

  void txn_end(const Session& s, const char* result) {
    SimTime start = s.loop ? s.loop->start() : now_;
    std::vector<Field> f{{"txn", s.txn}, {"aisi", s.aisi.id}, {"result", result}, {"elapsed_us", now_ - start}};
    if (s.loop) f.emplace_back("causes", s.loop->causes().to_string());
    trace_.append(now_, "txn_end", std::move(f));
  }

  void mark_serving(Session& s) {
    s.phase = Phase::kServing;
    auto a = steering_.serving_anchor(s.aisi.id);
    trace_.append(now_, "serving", {{"session", s.id}, {"aisi", s.aisi.id}, {"anchor", a ? *a : std::string("-")}});
  }

  //---------------------------------------------------------------------------
  // AiPaging admission

  void next_admission(std::size_t idx) {
    Session& s = sessions_[idx];
    if (auto a = s.loop->next_attempt(now_)) {
      push(a->reply_at, Ev::kAdmissionReply, idx, s.txn_gen, 0, std::move(a));
      return;
    }
    txn_end(s, "reject");
    s.loop.reset();
    wait_and_readmit(idx);
  }

  void admission_reply(const Event& e) {
    Session& s = sessions_[e.session];
    if (s.phase != Phase::kConnecting || e.gen != s.txn_gen || !s.loop) return;
    const Attempt& a = *e.attempt;
    if (a.timed_out) {
      s.loop->on_timeout(a);
    } else {
      guarded_ = s.aisi.id;
      auto decision = leases_.request_lease(a.candidate, s.aisi.id, s.asp, now_);
      guarded_.reset();
      if (auto commit = s.loop->on_reply(a, decision)) {
        auto entry = steering_.install_steering(s.classifier(), *commit, kActivePriority, now_);
        if (!entry) throw std::logic_error("steering install refused right after admission");
        txn_end(s, "success");
        s.loop.reset();
        s.lease = commit->lease_id;
        mark_serving(s);
        schedule_renew(e.session);
        return;
      }
    }
    next_admission(e.session);
  }

  void schedule_renew(std::size_t idx) {
    Session& s = sessions_[idx];
    const Commit* c = leases_.find(*s.lease);
    push(std::max(now_, c->expires_at - cfg_.renew_lead), Ev::kRenew, idx, ++s.renew_gen);
  }

  void renew(const Event& e) {
    Session& s = sessions_[e.session];
    if (e.gen != s.renew_gen || s.phase != Phase::kServing || !s.lease) return;
    if (const RelocationJob* j = reloc_.active_job(s.aisi.id); j != nullptr && j->phase == RelocationPhase::kAdmitting) {
      push(now_ + cfg_.admission_rtt, Ev::kRenew, e.session, e.gen);
      return;
    }
    LeaseId old = *s.lease;
    auto d = leases_.renew(old, s.asp, now_);
    if (d.accepted()) {
      steering_.rebind(old, *d.commit, now_);
      s.lease = d.commit->lease_id;
      leases_.release(old, now_);
      schedule_renew(e.session);
      return;
    }
    // Renewal refused: move elsewhere if possible and retry renewal once more
    // before the lease runs out.
    start_relocation(e.session, RelocationTrigger::kOverload);
    const Commit* c = leases_.find(old);
    SimTime retry = now_ + cfg_.renew_lead / 2;
    if (s.lease && *s.lease == old && c != nullptr && retry < c->expires_at) push(retry, Ev::kRenew, e.session, e.gen);
  }

  void on_lease_terminal(const Commit& c, SimTime now) {
    auto it = by_aisi_.find(c.aisi);
    if (it == by_aisi_.end()) return;
    const std::size_t idx = it->second;
    Session& s = sessions_[idx];
    if (s.phase == Phase::kEnded) return;
    if (behavior_.gate_on_lease) {
      if (!s.lease || *s.lease != c.lease_id) return;
      s.lease.reset();
      ++s.renew_gen;
      auto entries = steering_.entries_for(s.aisi.id);
      if (!entries.empty()) {
        s.lease = entries.front().backing_lease;
        return;
      }
      if (s.phase == Phase::kServing) wait_and_readmit(idx);
      return;
    }
    if (c.state == LeaseState::kReleased) return;
    for (const auto& en : steering_.entries_for(s.aisi.id))
      if (en.anchor_id == c.anchor_id) {
        emit(EviRecord{now, s.aisi.id, {c.lease_id}, c.anchor_id, c.tier_id, EviKind::kViolation, std::nullopt}, s);
        break;
      }
  }

  //---------------------------------------------------------------------------
  // AiPaging relocation

  bool start_relocation(std::size_t idx, RelocationTrigger trigger) {
    Session& s = sessions_[idx];
    if (s.phase != Phase::kServing || !s.lease || reloc_.active_job(s.aisi.id) != nullptr) return false;
    TxnId txn = txn_ids_.next();
    auto started = reloc_.begin(s.id, s.classifier(), s.asp, *s.lease, trigger, ranked(s), fallbacks(s), txn, now_);
    if (!started) return false;
    if (started->first)
      push(started->first->reply_at, Ev::kRelocationReply, idx, 0, started->job.value, started->first);
    else
      retry_if_stranded(idx);
    return true;
  }

  /// A session left on a failed anchor retries after the readmission backoff
  /// instead of waiting for the next telemetry round.
  void retry_if_stranded(std::size_t idx) {
    const Session& s = sessions_[idx];
    auto a = steering_.serving_anchor(s.aisi.id);
    if (a && anchors_.at(*a).health == Health::kFailed) push(now_ + cfg_.readmit_backoff, Ev::kReevaluate, idx);
  }

  void relocation_reply(const Event& e) {
    Session& s = sessions_[e.session];
    const RelocationJob* job = reloc_.job(JobId{e.ref});
    if (job != nullptr && job->trigger != RelocationTrigger::kFailure && job->trigger != RelocationTrigger::kHealth)
      guarded_ = s.aisi.id;
    auto step = reloc_.on_reply(JobId{e.ref}, *e.attempt, now_);
    guarded_.reset();
    switch (step.kind) {
      case RelocationStep::kContinue:
        push(step.next->reply_at, Ev::kRelocationReply, e.session, 0, e.ref, step.next);
        break;
      case RelocationStep::kFlipped:
        s.lease = reloc_.job(JobId{e.ref})->new_lease;
        schedule_renew(e.session);
        push(step.drain_deadline, Ev::kDrainDeadline, e.session, 0, e.ref);
        break;
      case RelocationStep::kFailed: retry_if_stranded(e.session); break;
    }
  }

  //---------------------------------------------------------------------------
  // Baseline admission: one candidate, EndpointBound retries the same anchor.

  std::string pick_endpoint(const Session& s) const {
    // Configured endpoint: lowest nominal path + service, no load awareness.
    std::string best;
    double best_ms = std::numeric_limits<double>::infinity();
    for (const auto& [id, a] : anchors_) {
      if (!anchor_admissible(a, s.asp, {})) continue;
      for (const auto& t : s.asp.allowed_fallback_tiers) {
        const ModelTier* tier = a.tier(t);
        if (tier == nullptr) continue;
        double v = to_ms(a.path_latency + tier->mean_service);
        if (v < best_ms) {
          best_ms = v;
          best = id;
        }
        break;
      }
    }
    return best;
  }

  std::optional<Candidate> endpoint_candidate(const Session& s) const {
    const Anchor& a = anchors_.at(s.endpoint);
    for (const auto& t : s.asp.allowed_fallback_tiers)
      if (const ModelTier* tier = a.tier(t)) return Candidate{a.anchor_id, *tier, 0.0, true};
    return std::nullopt;
  }

  void baseline_send(std::size_t idx) {
    Session& s = sessions_[idx];
    ++s.tries;
    trace_.append(now_, "admit_attempt",
                  {{"txn", s.txn}, {"aisi", s.aisi.id}, {"anchor", s.target->anchor_id}, {"tier", s.target->tier.tier_id}});
    push(now_ + cfg_.admission_rtt, Ev::kBaselineReply, idx, s.txn_gen);
  }

  void baseline_attempt(const Event& e) {
    Session& s = sessions_[e.session];
    if (e.gen != s.txn_gen || s.phase != Phase::kConnecting) return;
    baseline_send(e.session);
  }

  void baseline_reply(const Event& e) {
    Session& s = sessions_[e.session];
    if (e.gen != s.txn_gen) return;
    if (s.phase != Phase::kConnecting && !s.relocating) return;
    const Candidate& t = *s.target;
    if (!s.relocating || (s.bbm_trigger != RelocationTrigger::kFailure && s.bbm_trigger != RelocationTrigger::kHealth))
      guarded_ = s.aisi.id;
    auto d = leases_.request_lease(t, s.aisi.id, s.asp, now_);
    guarded_.reset();
    std::vector<Field> f{{"txn", s.txn}, {"aisi", s.aisi.id}, {"anchor", t.anchor_id},
                         {"result", d.accepted() ? "accept" : "reject"}};
    if (!d.accepted()) f.emplace_back("cause", to_string(d.cause));
    trace_.append(now_, "admit_reply", std::move(f));
    if (!d.accepted() && !s.relocating && s.tries <= behavior_.retries) {
      push(now_ + t.tier.mean_service, Ev::kBaselineAttempt, e.session, s.txn_gen);
      return;
    }
    // Baselines steer regardless of the admission answer.
    if (d.accepted()) {
      s.held.push_back(d.commit->lease_id);
      steering_.install_steering(s.classifier(), *d.commit, kActivePriority, now_);
    } else {
      steering_.install_ungated(s.classifier(), Placement{t.anchor_id, t.tier.tier_id, derive_qos(s.asp)},
                                kActivePriority, now_);
      emit(EviRecord{now_, s.aisi.id, {kUngated}, t.anchor_id, t.tier.tier_id, EviKind::kViolation, std::nullopt}, s);
    }
    trace_.append(now_, "txn_end",
                  {{"txn", s.txn}, {"aisi", s.aisi.id}, {"result", d.accepted() ? "success" : "ungated"},
                   {"elapsed_us", now_ - (s.relocating ? now_ - cfg_.admission_rtt : 0)}});
    if (s.relocating) {
      s.relocating = false;
      trace_.append(now_, "reloc_done",
                    {{"job", s.bbm_job}, {"aisi", s.aisi.id}, {"old_lease", s.bbm_old_lease},
                     {"new_lease", d.accepted() ? d.commit->lease_id : kUngated}, {"flip", now_}});
      return;
    }
    mark_serving(s);
    evaluate(e.session, false);
  }

  /// BestEffort move: tear down first, re-steer after one admission round trip.
  void besteffort_relocate(std::size_t idx, RelocationTrigger trigger, const std::string& from) {
    Session& s = sessions_[idx];
    auto r = ranked(s);
    std::erase_if(r, [&](const Candidate& c) { return c.anchor_id == from; });
    s.bbm_job = bbm_jobs_.next();
    s.bbm_trigger = trigger;
    s.bbm_old_lease = held_valid(s, from).value_or(kUngated);
    trace_.append(now_, "reloc_start",
                  {{"job", s.bbm_job}, {"session", s.id}, {"aisi", s.aisi.id}, {"old_lease", s.bbm_old_lease},
                   {"old_anchor", from}, {"trigger", to_string(trigger)}, {"mode", "bbm"}});
    if (r.empty()) {
      trace_.append(now_, "reloc_fail", {{"job", s.bbm_job}, {"aisi", s.aisi.id}, {"reason", "no-feasible-target"}});
      return;
    }
    s.reloc_history.push_back(now_);
    steering_.remove_aisi(s.aisi.id, now_);
    for (auto id : s.held)
      if (const Commit* c = leases_.find(id); c != nullptr && !c->terminal()) leases_.release(id, now_);
    s.relocating = true;
    s.target = r.front();
    ++s.txn_gen;
    s.txn = txn_ids_.next();
    trace_.append(now_, "txn_start", {{"txn", s.txn}, {"aisi", s.aisi.id}, {"kind", "relocation"}});
    baseline_send(idx);
  }

  //---------------------------------------------------------------------------
  // Relocation triggers

  void evaluate(std::size_t idx, bool path_changed) {
    Session& s = sessions_[idx];
    if (!behavior_.relocate || s.phase != Phase::kServing || s.relocating) return;
    if (behavior_.make_before_break && (!s.lease || reloc_.active_job(s.aisi.id) != nullptr)) return;
    auto entries = steering_.entries_for(s.aisi.id);
    if (entries.empty()) return;
    const SteeringEntry& top = entries.front();
    const Anchor& current = anchors_.at(top.anchor_id);
    const ModelTier* tier = current.tier(top.tier_id);
    Telemetry v = view(s);
    double current_ms = predicted_latency_ms(observe(current, v), *tier);
    std::optional<double> best;
    for (const auto& c : generate_candidates(s.asp, anchors_, v))
      if (c.anchor_id != current.anchor_id) {
        best = c.score;
        break;
      }
    std::span<const SimTime> history =
        behavior_.make_before_break ? reloc_.history(s.aisi.id) : std::span<const SimTime>(s.reloc_history);
    RelocationInputs in{current, current_ms, best, path_changed, history, now_};
    auto trigger = should_relocate(in, s.asp, reloc_.config());
    if (!trigger) return;
    if (behavior_.make_before_break)
      start_relocation(idx, *trigger);
    else
      besteffort_relocate(idx, *trigger, current.anchor_id);
  }

  void evaluate_on(const std::string& anchor) {
    for (auto i : std::vector<std::size_t>(live_.begin(), live_.end())) {
      const Session& s = sessions_[i];
      if (s.phase != Phase::kServing) continue;
      auto a = steering_.serving_anchor(s.aisi.id);
      if (a && *a == anchor) evaluate(i, false);
    }
  }

  void telemetry_tick() {
    for (auto& [id, obs] : telemetry_) obs.load_fraction = live_load(id);
    for (auto i : std::vector<std::size_t>(live_.begin(), live_.end())) evaluate(i, false);
    push(now_ + cfg_.telemetry_period, Ev::kTelemetry);
  }

  void mobility_tick(std::size_t idx) {
    Session& s = sessions_[idx];
    if (s.phase == Phase::kEnded) return;
    if (now_ + cfg_.mobility_interval < std::min(s.end, cfg_.horizon))
      push(now_ + cfg_.mobility_interval, Ev::kMobility, idx);
    if (!s.mobility.bernoulli(effective_load(cfg_).relocation_probability)) return;
    auto current = steering_.serving_anchor(s.aisi.id);
    if (!current) return;
    s.penalized = *current;
    s.penalty_from = now_ + cfg_.mobility_grace;
    trace_.append(now_, "path_change",
                  {{"session", s.id}, {"aisi", s.aisi.id}, {"anchor", *current},
                   {"penalty_us", cfg_.mobility_penalty}, {"effective", s.penalty_from}});
    evaluate(idx, true);
  }

  //---------------------------------------------------------------------------
  // Injections

  void health_evidence(const std::string& anchor) {
    const double load = live_load(anchor);
    for (auto i : live_) {
      const Session& s = sessions_[i];
      auto entries = steering_.entries_for(s.aisi.id);
      if (entries.empty() || entries.front().anchor_id != anchor) continue;
      const auto& top = entries.front();
      LeaseId ref = top.backing_lease != kUngated ? top.backing_lease : held_valid(s, anchor).value_or(kUngated);
      emit(EviRecord{now_, s.aisi.id, {ref}, anchor, top.tier_id, EviKind::kHealthChange, std::nullopt}, s, load);
    }
  }

  void apply_injection(std::size_t i) {
    Injection& inj = injections_[i];
    Anchor& a = anchors_.at(inj.anchor);
    switch (inj.kind) {
      case Injection::kFailHard:
      case Injection::kFailSoft: {
        const bool hard = inj.kind == Injection::kFailHard;
        if (a.health == Health::kFailed || (!hard && a.health == Health::kDegraded)) {
          inj.void_ = true;
          return;
        }
        a.health = hard ? Health::kFailed : Health::kDegraded;
        trace_.append(now_, "anchor_fail", {{"anchor", a.anchor_id}, {"kind", hard ? "hard" : "soft"}});
        if (hard) lose_inflight(a.anchor_id);
        break;
      }
      case Injection::kRecover: {
        const Injection& f = injections_[inj.recovers];
        const Health expect = f.kind == Injection::kFailHard ? Health::kFailed : Health::kDegraded;
        if (f.void_ || a.health != expect) return;
        a.health = Health::kHealthy;
        queues_.at(a.anchor_id).reset(now_);
        trace_.append(now_, "anchor_recover", {{"anchor", a.anchor_id}});
        break;
      }
      case Injection::kCapacity:
        a.capacity = inj.capacity;
        queues_.at(a.anchor_id).resize(a.capacity, now_);
        trace_.append(now_, "capacity_change", {{"anchor", a.anchor_id}, {"capacity", a.capacity}});
        refresh_telemetry(a.anchor_id);
        break;
    }
    health_evidence(a.anchor_id);
    evaluate_on(a.anchor_id);
  }

  //---------------------------------------------------------------------------
  // Requests

  void schedule_next_request(std::size_t idx) {
    Session& s = sessions_[idx];
    SimTime t = now_ + std::max<Duration>(1, from_ms(s.requests.exponential(1000.0 / cfg_.request_rate)));
    if (t < std::min(s.end, cfg_.horizon)) push(t, Ev::kRequestArrival, idx);
  }

  void request_arrival(std::size_t idx) {
    Session& s = sessions_[idx];
    if (s.phase == Phase::kEnded) return;
    schedule_next_request(idx);
    Request r;
    r.id = request_ids_.next();
    r.session = idx;
    r.arrived = now_;
    auto [it, _] = requests_.emplace(r.id, r);
    serve(it->second);
  }

  void request_retry(RequestId id) {
    auto it = requests_.find(id);
    if (it == requests_.end()) return;
    serve(it->second);
  }

  void serve(Request& r) {
    Session& s = sessions_[r.session];
    auto route = steering_.classify(s.aisi.id, s.aist.token_id, now_);
    if (!route) {
      finish_request(r, "no_route");
      return;
    }
    r.anchor = route->anchor_id;
    r.tier = route->tier_id;
    r.entry = route->entry;
    r.lease = route->backing_lease;
    const Anchor& a = anchors_.at(r.anchor);
    const ModelTier* tier = a.tier(r.tier);
    Duration path = a.path_latency + penalty(s, r.anchor, true);
    auto out = anchor_serve(a, queues_.at(r.anchor), path, sample_service(*tier, s.service), now_);
    if (out.lost) {
      lost(r);
      return;
    }
    // Latency is end to end, so retries count the time already spent.
    r.latency = (now_ - r.arrived) + out.latency;
    r.queueing = out.queueing;
    inflight_[r.anchor].insert(r.id);
    push(std::max(now_, r.arrived + std::min(r.latency, cfg_.request_timeout)), Ev::kRequestComplete, r.session, 0,
         r.id.value);
  }

  /// Lost at the anchor; EndpointBound clients retry the same route.
  void lost(Request& r) {
    if (r.retries < behavior_.retries) {
      ++r.retries;
      const ModelTier* tier = anchors_.at(r.anchor).tier(r.tier);
      push(now_ + tier->mean_service, Ev::kRequestRetry, r.session, 0, r.id.value);
      return;
    }
    finish_request(r, "lost");
  }

  void request_complete(RequestId id) {
    auto it = requests_.find(id);
    if (it == requests_.end()) return;
    Request& r = it->second;
    inflight_[r.anchor].erase(id);
    finish_request(r, r.latency > cfg_.request_timeout ? "timeout" : "served");
  }

  void lose_inflight(const std::string& anchor) {
    auto ids = std::move(inflight_[anchor]);
    inflight_[anchor].clear();
    for (auto id : ids) lost(requests_.at(id));
  }

  void finish_request(Request& r, const char* status) {
    Session& s = sessions_[r.session];
    const std::string_view st = status;
    const bool routed = !r.anchor.empty() && st != "no_route";
    std::vector<Field> f{{"req", r.id}, {"session", s.id}, {"status", status}, {"arrived", r.arrived}};
    if (routed) {
      f.emplace_back("anchor", r.anchor);
      f.emplace_back("lease", r.lease);
      if (st != "lost") f.emplace_back("latency_us", std::min(r.latency, cfg_.request_timeout));
    }
    if (st != "truncated") {
      trace_.append(now_, "outcome", std::move(f));
      if (routed) {
        LeaseId ref = r.lease != kUngated ? r.lease : held_valid(s, r.anchor).value_or(kUngated);
        Observables obs{st == "lost" ? 0 : std::min(r.latency, cfg_.request_timeout), r.queueing, st != "served"};
        emit(EviRecord{now_, s.aisi.id, {ref}, r.anchor, r.tier, EviKind::kServe, obs}, s);
      }
    } else {
      trace_.append(now_, "outcome", std::move(f));
    }
    requests_.erase(r.id);
  }

  //---------------------------------------------------------------------------
  // Horizon

  void finish() {
    now_ = cfg_.horizon;
    leases_.expire_due(now_);
    for (std::size_t i = 0; i < sessions_.size(); ++i)
      if (sessions_[i].phase != Phase::kPending) session_end(i);
    std::vector<RequestId> open;
    for (const auto& [id, _] : requests_) open.push_back(id);
    for (auto id : open) finish_request(requests_.at(id), "truncated");
    if (!leases_.check_invariants()) throw std::logic_error("lease table invariants broken at horizon");
    trace_.append(now_, "run_end",
                  {{"sessions", sessions_.size()},
                   {"events", events_},
                   {"tripwire", steering_.tripwire_hits()},
                   {"evi", evidence_.emitted()}});
  }

  ScenarioConfig cfg_;
  AnchorMap anchors_;
  IdSource ids_;
  Trace trace_;
  EvidenceLog evidence_;
  LeaseManager leases_;
  SteeringTable steering_;
  RelocationEngine reloc_;
  SessionBehavior behavior_;
  OperatorPolicy policy_;
  Intent intent_;
  Telemetry telemetry_;
  std::map<std::string, AnchorQueue, std::less<>> queues_;
  std::map<std::string, std::set<RequestId>, std::less<>> inflight_;
  std::vector<Session> sessions_;
  std::set<std::size_t> live_;
  std::optional<AisiId> guarded_;
  mutable std::uint64_t occupancy_version_ = std::numeric_limits<std::uint64_t>::max();
  mutable std::map<AisiId, std::string> occupancy_;
  mutable std::map<std::string, std::size_t, std::less<>> occupancy_count_;
  std::map<AisiId, std::size_t> by_aisi_;
  std::map<RequestId, Request> requests_;
  std::vector<Injection> injections_;
  Counter<TxnId> txn_ids_;
  Counter<JobId> bbm_jobs_;
  Counter<RequestId> request_ids_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Event scratch_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::size_t events_ = 0;
  bool ran_ = false;
};

/// Runs one (config, seed, policy) to the horizon.
inline RunResult run_scenario(const ScenarioConfig& config) { return Simulator(config).run(); }

}  // namespace aipaging

#endif  // AIPAGING_SIMULATOR_HPP_
