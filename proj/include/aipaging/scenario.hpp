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

// Scenario configuration: schema, text format, defaults per setup, and the
// stress-level mapping.
//
// Format: `key = value` lines, `#` comments, and `[tier NAME]` /
// `[anchor NAME]` sections. Durations carry their unit in the key name
// (`_ms`, `_s`). `failure` and `capacity_change` may repeat; every other key
// may appear once. Unknown keys are errors.

#ifndef AIPAGING_SCENARIO_HPP_
#define AIPAGING_SCENARIO_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aipaging/core.hpp"

namespace aipaging {

enum class SetupId { kS1, kS2, kS3, kS4, kS5, kCustom };

inline std::string_view to_string(SetupId s) {
  switch (s) {
    case SetupId::kS1: return "S1";
    case SetupId::kS2: return "S2";
    case SetupId::kS3: return "S3";
    case SetupId::kS4: return "S4";
    case SetupId::kS5: return "S5";
    case SetupId::kCustom: return "custom";
  }
  return "?";
}

inline std::optional<SetupId> parse_setup_id(std::string_view s) {
  for (auto id : {SetupId::kS1, SetupId::kS2, SetupId::kS3, SetupId::kS4, SetupId::kS5, SetupId::kCustom})
    if (to_string(id) == s) return id;
  return std::nullopt;
}

inline std::string_view setup_label(SetupId s) {
  switch (s) {
    case SetupId::kS1: return "Nominal";
    case SetupId::kS2: return "HighMobility";
    case SetupId::kS3: return "HighLoad";
    case SetupId::kS4: return "MobilityLoad";
    case SetupId::kS5: return "FailureStress";
    case SetupId::kCustom: return "Custom";
  }
  return "?";
}

/// A scripted anchor failure. `recover_after` of 0 means no recovery.
struct FailureInjection {
  SimTime at = 0;
  std::string anchor;
  bool hard = true;
  Duration recover_after = 0;
};

struct CapacityChange {
  SimTime at = 0;
  std::string anchor;
  int capacity = 0;
};

/// Thrown for unreadable or invalid configuration; `field` names the key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ScenarioConfig {
  SetupId setup_id = SetupId::kCustom;
  std::vector<Anchor> anchors;
  Duration horizon = seconds(60);

  // Workload. arrival_rate counts intents (sessions) per second.
  double arrival_rate = 1.0;
  Duration session_duration = seconds(20);
  double request_rate = 5.0;
  Duration request_timeout = ms(150);

  // Intent and operator policy.
  Duration target_latency = ms(80);
  double reliability = 0.999;
  std::vector<std::string> regions{"eu-west"};
  std::vector<std::string> tiers{"large", "small"};
  Duration lease_duration = ms(5000);
  Duration renew_lead = ms(500);
  Duration readmit_backoff = ms(250);
  Duration commit_timeout = ms(100);
  Duration drain_timeout = ms(200);
  Duration admission_rtt = ms(5);
  double max_relocation_rate = 2.0;
  Duration relocation_window = seconds(10);
  double hysteresis = 1.2;
  double improvement_margin = 0.2;
  int endpoint_retries = 3;
  EvidenceMode evidence = EvidenceMode::kMinimal;

  // Dynamics.
  double relocation_probability = 0.05;
  Duration mobility_interval = seconds(1);
  Duration mobility_penalty = ms(200);
  Duration mobility_grace = ms(50);
  Duration telemetry_period = seconds(1);
  double stress_level = 0.0;
  double overload_threshold = 0.8;
  double overload_depth = 0.8;
  double handover_guard = 0.2;  // capacity share new sessions may not take
  double failure_rate = 0.0;
  Duration failure_downtime = ms(4000);
  double failure_soft_fraction = 0.0;
  Duration recovery_window = seconds(2);
  std::vector<FailureInjection> failure_schedule;
  std::vector<CapacityChange> capacity_schedule;

  std::uint64_t seed = 1;
  PolicyKind policy_kind = PolicyKind::kAiPaging;

  const Anchor* anchor(std::string_view id) const {
    for (const auto& a : anchors)
      if (a.anchor_id == id) return &a;
    return nullptr;
  }
};

//=============================================================================
// Stress mapping

/// Effective knobs after applying stress level s.
struct EffectiveLoad {
  double arrival_rate = 0.0;
  double failure_rate = 0.0;
  double relocation_probability = 0.0;
};

inline EffectiveLoad effective_load(const ScenarioConfig& c) {
  const double s = c.stress_level;
  return {c.arrival_rate * (1.0 + 4.0 * s), c.failure_rate * (1.0 + 2.0 * s),
          std::max(c.relocation_probability, s)};
}

/// Whether a stress-derived capacity drop applies to this setup.
inline bool stress_overload_applies(const ScenarioConfig& c) {
  return c.stress_level > 0.0 &&
         (c.setup_id == SetupId::kS3 || c.setup_id == SetupId::kS4 || c.setup_id == SetupId::kCustom);
}

//=============================================================================
// Validation

/// Returns the names of invalid fields (empty when valid).
inline std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* field) {
    if (!ok) bad.emplace_back(field);
  };
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  need(!c.anchors.empty(), "anchor");
  need(c.horizon > 0, "horizon_s");
  need(c.arrival_rate > 0.0 && std::isfinite(c.arrival_rate), "arrival_rate");
  need(c.session_duration > 0, "session_duration_s");
  need(c.request_rate > 0.0 && std::isfinite(c.request_rate), "request_rate");
  need(c.request_timeout > 0, "request_timeout_ms");
  need(c.target_latency > 0, "target_latency_ms");
  need(prob(c.reliability), "reliability");
  need(!c.tiers.empty(), "tiers");
  need(c.lease_duration > 0, "lease_duration_ms");
  need(c.renew_lead > 0 && c.renew_lead < c.lease_duration, "renew_lead_ms");
  need(c.readmit_backoff > 0, "readmit_backoff_ms");
  need(c.commit_timeout > 0, "commit_timeout_ms");
  need(c.drain_timeout > 0, "drain_timeout_ms");
  need(c.admission_rtt > 0, "admission_rtt_ms");
  need(c.max_relocation_rate > 0.0, "max_relocation_rate");
  need(c.relocation_window > 0, "relocation_window_ms");
  need(c.hysteresis >= 1.0, "hysteresis");
  need(c.improvement_margin >= 0.0 && c.improvement_margin < 1.0, "improvement_margin");
  need(c.endpoint_retries >= 0, "endpoint_retries");
  need(prob(c.relocation_probability), "relocation_probability");
  need(c.mobility_interval > 0, "mobility_interval_ms");
  need(c.mobility_penalty >= 0, "mobility_penalty_ms");
  need(c.mobility_grace >= 0, "mobility_grace_ms");
  need(c.telemetry_period > 0, "telemetry_period_ms");
  need(prob(c.stress_level), "stress_level");
  need(c.overload_threshold >= 0.0 && std::isfinite(c.overload_threshold), "overload_threshold");
  need(prob(c.overload_depth), "overload_depth");
  need(c.handover_guard >= 0.0 && c.handover_guard < 1.0, "handover_guard");
  need(c.failure_rate >= 0.0 && std::isfinite(c.failure_rate), "failure_rate");
  need(c.failure_downtime > 0, "failure_downtime_ms");
  need(prob(c.failure_soft_fraction), "failure_soft_fraction");
  need(c.recovery_window > 0, "recovery_window_ms");

  std::set<std::string> ids;
  for (const auto& a : c.anchors) {
    if (!ids.insert(a.anchor_id).second || a.capacity < 0 || a.path_latency < 0 || a.tiers_offered.empty())
      bad.push_back("anchor " + a.anchor_id);
    for (const auto& t : a.tiers_offered)
      if (t.mean_service <= 0 || t.service_jitter < 0 || t.cost < 0) bad.push_back("tier " + t.tier_id);
  }
  for (const auto& f : c.failure_schedule)
    if (c.anchor(f.anchor) == nullptr || f.at < 0 || f.recover_after < 0) bad.emplace_back("failure");
  for (const auto& k : c.capacity_schedule)
    if (c.anchor(k.anchor) == nullptr || k.at < 0 || k.capacity < 0) bad.emplace_back("capacity_change");
  return bad;
}

inline void require_valid(const ScenarioConfig& c) {
  auto bad = validate(c);
  if (bad.empty()) return;
  std::string msg = "invalid value";
  if (bad.size() > 1) msg += " (also: " + [&] {
    std::string s;
    for (std::size_t i = 1; i < bad.size(); ++i) s += (i > 1 ? ", " : "") + bad[i];
    return s;
  }() + ")";
  throw ConfigError(bad.front(), msg);
}

//=============================================================================
// Defaults

inline std::vector<ModelTier> default_tiers() {
  return {ModelTier{"large", ms(30), ms(5), 3.0}, ModelTier{"small", ms(12), ms(2), 1.0}};
}

inline std::vector<Anchor> default_anchors() {
  auto tiers = default_tiers();
  return {Anchor{"cloud", SiteClass::kCloud, "eu-west", tiers, 40, Health::kHealthy, ms(30)},
          Anchor{"edge-a", SiteClass::kEdge, "eu-west", tiers, 20, Health::kHealthy, ms(5)},
          Anchor{"edge-b", SiteClass::kEdge, "eu-west", tiers, 20, Health::kHealthy, ms(8)}};
}

/// Shipped parameter set for each setup. The files under scenarios/ mirror
/// these values exactly.
inline ScenarioConfig default_scenario(SetupId id) {
  ScenarioConfig c;
  c.setup_id = id;
  c.anchors = default_anchors();
  switch (id) {
    case SetupId::kS1:
    case SetupId::kCustom: break;
    case SetupId::kS2: c.relocation_probability = 0.5; break;
    case SetupId::kS3:
      c.arrival_rate = 5.0;
      c.capacity_schedule = {{seconds(30), "edge-a", 2}};
      break;
    case SetupId::kS4:
      c.arrival_rate = 5.0;
      c.relocation_probability = 0.5;
      c.capacity_schedule = {{seconds(30), "edge-a", 2}};
      break;
    case SetupId::kS5:
      c.failure_rate = 0.1;
      c.failure_schedule = {{seconds(20), "edge-a", true, ms(4000)}, {seconds(40), "edge-b", false, ms(3000)}};
      break;
  }
  return c;
}

//=============================================================================
// Text format

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  while (true) {
    auto pos = s.find(sep);
    auto part = trim(s.substr(0, pos));
    if (!part.empty()) out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

inline double parse_double(std::string_view v, const std::string& field) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(field, "expected a number, got '" + std::string(v) + "'");
  return out;
}

inline std::int64_t parse_int(std::string_view v, const std::string& field) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(field, "expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline Duration parse_ms(std::string_view v, const std::string& field) { return from_ms(parse_double(v, field)); }
inline Duration parse_s(std::string_view v, const std::string& field) {
  return from_ms(parse_double(v, field) * 1000.0);
}

/// Shortest decimal form that round-trips.
inline std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}
inline std::string fmt_ms(Duration d) { return fmt(to_ms(d)); }
inline std::string fmt_s(Duration d) { return fmt(to_ms(d) / 1000.0); }

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace detail

/// Parses a scenario document. Unknown keys, duplicates, malformed values and
/// invalid settings raise ConfigError naming the field.
inline ScenarioConfig parse_scenario(std::istream& in) {
  using namespace detail;
  ScenarioConfig c;
  c.anchors.clear();
  std::map<std::string, ModelTier> tiers;
  struct PendingAnchor {
    Anchor a;
    std::vector<std::string> tier_names;
    std::set<std::string> seen;
  };
  std::vector<PendingAnchor> anchors;
  std::set<std::string> seen_top;
  std::set<std::string> seen_tier_keys;

  enum class Section { kTop, kTier, kAnchor } section = Section::kTop;
  std::string section_name;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(line_no);

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", at + ": unterminated section header");
      auto parts = split(line.substr(1, line.size() - 2), ' ');
      if (parts.size() != 2) throw ConfigError("", at + ": section must be [tier NAME] or [anchor NAME]");
      section_name = parts[1];
      if (parts[0] == "tier") {
        section = Section::kTier;
        if (tiers.contains(section_name)) throw ConfigError("tier " + section_name, "defined twice");
        tiers[section_name] = ModelTier{section_name, 0, 0, 0.0};
        seen_tier_keys.clear();
      } else if (parts[0] == "anchor") {
        section = Section::kAnchor;
        for (const auto& p : anchors)
          if (p.a.anchor_id == section_name) throw ConfigError("anchor " + section_name, "defined twice");
        PendingAnchor p;
        p.a.anchor_id = section_name;
        anchors.push_back(std::move(p));
      } else {
        throw ConfigError("", at + ": unknown section '" + parts[0] + "'");
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("", at + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", at + ": empty key");

    if (section == Section::kTier) {
      const std::string field = "tier " + section_name + "." + key;
      if (!seen_tier_keys.insert(key).second) throw ConfigError(field, "set twice");
      ModelTier& t = tiers[section_name];
      if (key == "service_ms") t.mean_service = parse_ms(value, field);
      else if (key == "jitter_ms") t.service_jitter = parse_ms(value, field);
      else if (key == "cost") t.cost = parse_double(value, field);
      else throw ConfigError(field, "unknown key");
      continue;
    }
    if (section == Section::kAnchor) {
      PendingAnchor& p = anchors.back();
      const std::string field = "anchor " + section_name + "." + key;
      if (!p.seen.insert(key).second) throw ConfigError(field, "set twice");
      if (key == "site") {
        if (value == "edge") p.a.site_class = SiteClass::kEdge;
        else if (value == "cloud") p.a.site_class = SiteClass::kCloud;
        else throw ConfigError(field, "expected edge or cloud");
      } else if (key == "region") {
        p.a.region = std::string(value);
      } else if (key == "capacity") {
        p.a.capacity = static_cast<int>(parse_int(value, field));
      } else if (key == "path_ms") {
        p.a.path_latency = parse_ms(value, field);
      } else if (key == "tiers") {
        p.tier_names = split(value, ',');
      } else if (key == "health") {
        if (value == "healthy") p.a.health = Health::kHealthy;
        else if (value == "degraded") p.a.health = Health::kDegraded;
        else if (value == "failed") p.a.health = Health::kFailed;
        else throw ConfigError(field, "expected healthy, degraded or failed");
      } else {
        throw ConfigError(field, "unknown key");
      }
      continue;
    }

    if (key != "failure" && key != "capacity_change" && !seen_top.insert(key).second)
      throw ConfigError(key, "set twice");
    if (key == "setup") {
      auto s = parse_setup_id(value);
      if (!s) throw ConfigError(key, "expected S1..S5 or custom");
      c.setup_id = *s;
    } else if (key == "horizon_s") c.horizon = parse_s(value, key);
    else if (key == "arrival_rate") c.arrival_rate = parse_double(value, key);
    else if (key == "session_duration_s") c.session_duration = parse_s(value, key);
    else if (key == "request_rate") c.request_rate = parse_double(value, key);
    else if (key == "request_timeout_ms") c.request_timeout = parse_ms(value, key);
    else if (key == "target_latency_ms") c.target_latency = parse_ms(value, key);
    else if (key == "reliability") c.reliability = parse_double(value, key);
    else if (key == "regions") c.regions = split(value, ',');
    else if (key == "tiers") c.tiers = split(value, ',');
    else if (key == "lease_duration_ms") c.lease_duration = parse_ms(value, key);
    else if (key == "renew_lead_ms") c.renew_lead = parse_ms(value, key);
    else if (key == "readmit_backoff_ms") c.readmit_backoff = parse_ms(value, key);
    else if (key == "commit_timeout_ms") c.commit_timeout = parse_ms(value, key);
    else if (key == "drain_timeout_ms") c.drain_timeout = parse_ms(value, key);
    else if (key == "admission_rtt_ms") c.admission_rtt = parse_ms(value, key);
    else if (key == "max_relocation_rate") c.max_relocation_rate = parse_double(value, key);
    else if (key == "relocation_window_ms") c.relocation_window = parse_ms(value, key);
    else if (key == "hysteresis") c.hysteresis = parse_double(value, key);
    else if (key == "improvement_margin") c.improvement_margin = parse_double(value, key);
    else if (key == "endpoint_retries") c.endpoint_retries = static_cast<int>(parse_int(value, key));
    else if (key == "evidence") {
      auto m = parse_evidence_mode(value);
      if (!m) throw ConfigError(key, "expected minimal, per-event or per-request");
      c.evidence = *m;
    } else if (key == "relocation_probability") c.relocation_probability = parse_double(value, key);
    else if (key == "mobility_interval_ms") c.mobility_interval = parse_ms(value, key);
    else if (key == "mobility_penalty_ms") c.mobility_penalty = parse_ms(value, key);
    else if (key == "mobility_grace_ms") c.mobility_grace = parse_ms(value, key);
    else if (key == "telemetry_period_ms") c.telemetry_period = parse_ms(value, key);
    else if (key == "stress_level") c.stress_level = parse_double(value, key);
    else if (key == "overload_threshold") c.overload_threshold = parse_double(value, key);
    else if (key == "overload_depth") c.overload_depth = parse_double(value, key);
    else if (key == "handover_guard") c.handover_guard = parse_double(value, key);
    else if (key == "failure_rate") c.failure_rate = parse_double(value, key);
    else if (key == "failure_downtime_ms") c.failure_downtime = parse_ms(value, key);
    else if (key == "failure_soft_fraction") c.failure_soft_fraction = parse_double(value, key);
    else if (key == "recovery_window_ms") c.recovery_window = parse_ms(value, key);
    else if (key == "seed") {
      auto v = parse_int(value, key);
      if (v < 0) throw ConfigError(key, "must be non-negative");
      c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "policy") {
      auto p = parse_policy_kind(value);
      if (!p) throw ConfigError(key, "expected aipaging, endpointbound or besteffort");
      c.policy_kind = *p;
    } else if (key == "failure") {
      // failure = TIME_MS ANCHOR hard|soft [RECOVER_AFTER_MS]
      auto parts = split(value, ' ');
      if (parts.size() < 3 || parts.size() > 4 || (parts[2] != "hard" && parts[2] != "soft"))
        throw ConfigError(key, "expected: TIME_MS ANCHOR hard|soft [RECOVER_AFTER_MS]");
      FailureInjection f;
      f.at = parse_ms(parts[0], key);
      f.anchor = parts[1];
      f.hard = parts[2] == "hard";
      if (parts.size() == 4) f.recover_after = parse_ms(parts[3], key);
      c.failure_schedule.push_back(f);
    } else if (key == "capacity_change") {
      // capacity_change = TIME_MS ANCHOR CAPACITY
      auto parts = split(value, ' ');
      if (parts.size() != 3) throw ConfigError(key, "expected: TIME_MS ANCHOR CAPACITY");
      c.capacity_schedule.push_back(
          CapacityChange{parse_ms(parts[0], key), parts[1], static_cast<int>(parse_int(parts[2], key))});
    } else {
      throw ConfigError(key, "unknown key");
    }
  }

  for (auto& p : anchors) {
    for (const auto& name : p.tier_names) {
      auto it = tiers.find(name);
      if (it == tiers.end()) throw ConfigError("anchor " + p.a.anchor_id + ".tiers", "unknown tier '" + name + "'");
      p.a.tiers_offered.push_back(it->second);
    }
    c.anchors.push_back(std::move(p.a));
  }
  require_valid(c);
  return c;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  return parse_scenario(in);
}

/// Canonical text form; parse_scenario(to_config_text(c)) reproduces c.
inline std::string to_config_text(const ScenarioConfig& c) {
  using namespace detail;
  std::ostringstream o;
  o << "setup = " << to_string(c.setup_id) << '\n'
    << "horizon_s = " << fmt_s(c.horizon) << '\n'
    << "arrival_rate = " << fmt(c.arrival_rate) << '\n'
    << "session_duration_s = " << fmt_s(c.session_duration) << '\n'
    << "request_rate = " << fmt(c.request_rate) << '\n'
    << "request_timeout_ms = " << fmt_ms(c.request_timeout) << '\n'
    << "target_latency_ms = " << fmt_ms(c.target_latency) << '\n'
    << "reliability = " << fmt(c.reliability) << '\n'
    << "regions = " << join(c.regions) << '\n'
    << "tiers = " << join(c.tiers) << '\n'
    << "lease_duration_ms = " << fmt_ms(c.lease_duration) << '\n'
    << "renew_lead_ms = " << fmt_ms(c.renew_lead) << '\n'
    << "readmit_backoff_ms = " << fmt_ms(c.readmit_backoff) << '\n'
    << "commit_timeout_ms = " << fmt_ms(c.commit_timeout) << '\n'
    << "drain_timeout_ms = " << fmt_ms(c.drain_timeout) << '\n'
    << "admission_rtt_ms = " << fmt_ms(c.admission_rtt) << '\n'
    << "max_relocation_rate = " << fmt(c.max_relocation_rate) << '\n'
    << "relocation_window_ms = " << fmt_ms(c.relocation_window) << '\n'
    << "hysteresis = " << fmt(c.hysteresis) << '\n'
    << "improvement_margin = " << fmt(c.improvement_margin) << '\n'
    << "endpoint_retries = " << c.endpoint_retries << '\n'
    << "evidence = " << to_string(c.evidence) << '\n'
    << "relocation_probability = " << fmt(c.relocation_probability) << '\n'
    << "mobility_interval_ms = " << fmt_ms(c.mobility_interval) << '\n'
    << "mobility_penalty_ms = " << fmt_ms(c.mobility_penalty) << '\n'
    << "mobility_grace_ms = " << fmt_ms(c.mobility_grace) << '\n'
    << "telemetry_period_ms = " << fmt_ms(c.telemetry_period) << '\n'
    << "stress_level = " << fmt(c.stress_level) << '\n'
    << "overload_threshold = " << fmt(c.overload_threshold) << '\n'
    << "overload_depth = " << fmt(c.overload_depth) << '\n'
    << "handover_guard = " << fmt(c.handover_guard) << '\n'
    << "failure_rate = " << fmt(c.failure_rate) << '\n'
    << "failure_downtime_ms = " << fmt_ms(c.failure_downtime) << '\n'
    << "failure_soft_fraction = " << fmt(c.failure_soft_fraction) << '\n'
    << "recovery_window_ms = " << fmt_ms(c.recovery_window) << '\n'
    << "seed = " << c.seed << '\n'
    << "policy = " << to_string(c.policy_kind) << '\n';
  for (const auto& f : c.failure_schedule) {
    o << "failure = " << fmt_ms(f.at) << ' ' << f.anchor << ' ' << (f.hard ? "hard" : "soft");
    if (f.recover_after > 0) o << ' ' << fmt_ms(f.recover_after);
    o << '\n';
  }
  for (const auto& k : c.capacity_schedule)
    o << "capacity_change = " << fmt_ms(k.at) << ' ' << k.anchor << ' ' << k.capacity << '\n';

  std::map<std::string, ModelTier> tiers;
  for (const auto& a : c.anchors)
    for (const auto& t : a.tiers_offered) tiers.emplace(t.tier_id, t);
  for (const auto& [name, t] : tiers)
    o << "\n[tier " << name << "]\nservice_ms = " << fmt_ms(t.mean_service) << "\njitter_ms = "
      << fmt_ms(t.service_jitter) << "\ncost = " << fmt(t.cost) << '\n';
  for (const auto& a : c.anchors) {
    std::vector<std::string> names;
    for (const auto& t : a.tiers_offered) names.push_back(t.tier_id);
    o << "\n[anchor " << a.anchor_id << "]\nsite = " << to_string(a.site_class) << "\nregion = " << a.region
      << "\ncapacity = " << a.capacity << "\npath_ms = " << fmt_ms(a.path_latency) << "\ntiers = " << join(names)
      << '\n';
    if (a.health != Health::kHealthy) o << "health = " << to_string(a.health) << '\n';
  }
  return o.str();
}

}  // namespace aipaging

#endif  // AIPAGING_SCENARIO_HPP_
