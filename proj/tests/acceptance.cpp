// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "aipaging/experiment.hpp"
#include "aipaging/oracle.hpp"
#include "brute_force.hpp"

namespace fs = std::filesystem;
using namespace aipaging;

namespace {

const fs::path kRoot(AIPAGING_SOURCE_DIR);

std::vector<std::uint64_t> seeds10() { return parse_seeds("1-10"); }

std::vector<ScenarioConfig> shipped_setups() {
  std::vector<ScenarioConfig> v;
  for (const char* f : {"s1.cfg", "s2.cfg", "s3.cfg", "s4.cfg", "s5.cfg"})
    v.push_back(load_scenario((kRoot / "scenarios" / f).string()));
  return v;
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [" << why << "]";
    }
  }
};

double secs_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string f3(double v) { return fixed(v, 3); }

// Correctness table, seeds 1-10 per setup and policy; shared by criteria 1 and 2.
CorrectnessTable table;
double table_secs = 0;

void c1(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  table = run_table2(shipped_setups(), seeds10());
  table_secs = secs_since(t0);
  for (const auto& s : table.setups) {
    double v = table.percent[s][PolicyKind::kAiPaging];
    o.detail << " " << s << "=" << fixed(v, 3);
    o.require(v == 0.0, s + " not exactly zero");
  }
  o.detail << " runtime=" << fixed(table_secs, 1) << "s";
  o.require(table_secs < 60, "runtime >= 60 s");
}

void c2(Outcome& o) {
  for (auto p : {PolicyKind::kEndpointBound, PolicyKind::kBestEffort}) {
    auto v = [&](const char* s) { return table.percent[s][p]; };
    o.detail << " " << to_string(p) << ":";
    for (const auto& s : table.setups) {
      o.detail << " " << s << "=" << fixed(v(s.c_str()), 2);
      o.require(v(s.c_str()) > 0, std::string(to_string(p)) + " " + s + " not > 0");
    }
    for (const char* load : {"S3", "S4"})
      for (const char* other : {"S1", "S2", "S5"})
        o.require(v(load) >= v(other), std::string(to_string(p)) + " " + load + " < " + other);
  }
}

void c3(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> values;
  for (int i = 1; i <= 9; ++i) values.push_back(i / 10.0);
  auto base = load_scenario((kRoot / "scenarios" / "s2.cfg").string());
  auto sweep = run_sweep(base, "relocation_probability", values, all_policies(), seeds10());
  double worst = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double ai = sweep[PolicyKind::kAiPaging][i].agg.request_failure_rate.mean;
    double be = sweep[PolicyKind::kBestEffort][i].agg.request_failure_rate.mean;
    double eb = sweep[PolicyKind::kEndpointBound][i].agg.request_failure_rate.mean;
    worst = std::max(worst, ai);
    std::string at = "p=" + fixed(values[i], 1);
    o.require(ai <= be, at + " aipaging > besteffort");
    o.require(be <= eb, at + " besteffort > endpointbound");
    if (i == 0 || i == values.size() - 1)
      o.detail << " " << at << " ai/be/eb=" << fixed(ai, 4) << "/" << fixed(be, 4) << "/" << fixed(eb, 4);
  }
  o.require(worst <= 0.02, "aipaging failure rate above 0.02");
  double secs = secs_since(t0);
  o.detail << " max_ai=" << fixed(worst, 4) << " runtime=" << fixed(secs, 1) << "s";
  o.require(secs < 300, "runtime >= 5 min");
}

void c4(Outcome& o) {
  const std::vector<double> values{0, 0.25, 0.5, 0.75, 1.0};
  auto base = load_scenario((kRoot / "scenarios" / "s5.cfg").string());
  auto sweep = run_sweep(base, "stress_level", values, all_policies(), seeds10());
  auto rec = [&](PolicyKind p, std::size_t i) { return sweep[p][i].agg.recovery_success_probability.mean; };
  for (auto p : all_policies()) {
    o.detail << " " << to_string(p) << "=";
    for (std::size_t i = 0; i < values.size(); ++i) {
      o.detail << (i ? "/" : "") << f3(rec(p, i));
      o.require(!std::isnan(rec(p, i)), std::string(to_string(p)) + " no recovery events");
      if (i > 0) o.require(rec(p, i) <= rec(p, i - 1), std::string(to_string(p)) + " increases with stress");
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    o.require(rec(PolicyKind::kAiPaging, i) >= rec(PolicyKind::kBestEffort, i), "aipaging < besteffort");
    o.require(rec(PolicyKind::kBestEffort, i) >= rec(PolicyKind::kEndpointBound, i), "besteffort < endpointbound");
  }
}

void c5(Outcome& o) {
  auto base = load_scenario((kRoot / "scenarios" / "s1.cfg").string());
  auto ai = aggregate(run_seeds(base, PolicyKind::kAiPaging, seeds10())).transaction_time_ms.p50;
  auto be = aggregate(run_seeds(base, PolicyKind::kBestEffort, seeds10())).transaction_time_ms.p50;
  o.detail << " p50 aipaging=" << f3(ai) << "ms besteffort=" << f3(be) << "ms";
  o.require(!std::isnan(ai) && !std::isnan(be), "no samples");
  o.require(ai <= 1.5 * be, "aipaging median above 1.5x");
}

void c6(Outcome& o) {
  auto base = load_scenario((kRoot / "scenarios" / "s3.cfg").string());
  base.policy_kind = PolicyKind::kAiPaging;
  double prev = -1;
  o.detail << " modes=";
  for (auto mode : {EvidenceMode::kMinimal, EvidenceMode::kPerEvent, EvidenceMode::kPerRequest}) {
    base.evidence = mode;
    double rate = aggregate(run_seeds(base, PolicyKind::kAiPaging, seeds10())).evidence_traffic_rate.mean;
    o.detail << (prev < 0 ? "" : "/") << f3(rate);
    o.require(rate >= prev, std::string(to_string(mode)) + " below previous mode");
    prev = rate;
  }
  base.evidence = EvidenceMode::kMinimal;
  const std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  auto sweep = run_sweep(base, "overload_threshold", thresholds, {PolicyKind::kAiPaging}, seeds10());
  const auto& pts = sweep[PolicyKind::kAiPaging];
  o.detail << " threshold=";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double r = pts[i].agg.evidence_traffic_rate.mean;
    o.detail << (i ? "/" : "") << f3(r);
    o.require(std::isfinite(r), "non-finite rate");
    if (i > 0) o.require(r <= pts[i - 1].agg.evidence_traffic_rate.mean, "rate grows with threshold");
  }
  o.require(pts.front().agg.evidence_traffic_rate.mean > pts.back().agg.evidence_traffic_rate.mean,
            "threshold has no effect");
}

void c7(Outcome& o) {
  std::size_t runs = 0, relocations = 0;
  for (const auto& f : fs::directory_iterator(kRoot / "scenarios")) {
    auto base = load_scenario(f.path().string());
    std::vector<ScenarioConfig> cfgs;
    for (auto p : all_policies())
      for (auto s : seeds10()) {
        base.policy_kind = p;
        base.seed = s;
        cfgs.push_back(base);
      }
    auto results = run_batch(cfgs, 0, true);
    for (std::size_t i = 0; i < results.size(); ++i) {
      ++runs;
      auto v = oracle_check(results[i].trace);
      for (const auto& x : v) {
        o.require(false, f.path().filename().string() + " " + std::string(to_string(cfgs[i].policy_kind)) +
                             " seed " + std::to_string(cfgs[i].seed) + ": " + x.kind);
        break;
      }
      if (cfgs[i].policy_kind == PolicyKind::kAiPaging) {
        relocations += results[i].metrics.relocation_count;
        o.require(results[i].metrics.violation_rate_percent == 0.0, "aipaging violation time");
      }
    }
  }
  o.detail << " runs=" << runs << " aipaging_relocations=" << relocations;
  o.require(relocations > 0, "no relocations exercised");
}

Trace load_trace(const fs::path& p) {
  std::ifstream in(p);
  return Trace::parse(in);
}

void c8(Outcome& o) {
  std::set<std::string> classes;
  for (const auto& f : fs::directory_iterator(kRoot / "tests" / "data" / "defects")) {
    if (f.path().extension() != ".trace" || f.path().stem() == "truncated") continue;
    const auto want = f.path().stem().string();
    auto v = oracle_check(load_trace(f.path()));
    bool named = !v.empty() && std::all_of(v.begin(), v.end(), [&](const auto& x) { return x.kind == want; });
    o.require(named, want + " not reported as its class");
    if (named) classes.insert(want);
  }
  for (const char* need : {defect::kLateRemoval, defect::kEarlyRelease, defect::kFlipBeforeInstall,
                           defect::kDoubleTerminal, defect::kPostCommitTimeoutAttempt, defect::kAisiReissue})
    o.require(classes.contains(need), std::string("missing class ") + need);
  bool rejected = false;
  try {
    oracle_check(load_trace(kRoot / "tests" / "data" / "defects" / "truncated.trace"));
  } catch (const TraceFormatError&) {
    rejected = true;
  }
  o.require(rejected, "truncated trace accepted");
  std::size_t clean = 0;
  for (const auto& f : fs::directory_iterator(kRoot / "tests" / "data" / "conforming")) {
    bool ok = oracle_check(load_trace(f.path())).empty();
    o.require(ok, f.path().filename().string() + " flagged");
    clean += ok;
  }
  o.detail << " defect_classes=" << classes.size() << " conforming_clean=" << clean;
}

void c9(Outcome& o) {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& s : shipped_setups())
    for (auto p : all_policies()) {
      ScenarioConfig c = s;
      c.policy_kind = p;
      c.seed = 7;
      cfgs.push_back(c);
    }
  auto a = run_batch(cfgs, 0, true);
  auto b = run_batch(cfgs, 1, true);
  std::size_t h = 0;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    auto ta = a[i].trace.to_string();
    auto ha = std::hash<std::string>{}(ta), hb = std::hash<std::string>{}(b[i].trace.to_string());
    o.require(ha == hb, std::string(to_string(cfgs[i].setup_id)) + "/" + std::string(to_string(cfgs[i].policy_kind)) +
                            " trace differs");
    o.require(metrics_csv_row(a[i].metrics) == metrics_csv_row(b[i].metrics), "metrics differ");
    h ^= ha + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  std::ostringstream hex;
  hex << std::hex << h;
  o.detail << " runs=" << cfgs.size() << " combined_hash=" << hex.str();
}

void c10(Outcome& o) {
  std::mt19937_64 g(2024);
  double worst = 0;
  int runs = 0, nonzero = 0;
  while (runs < 20) {
    auto pick = [&](long long lo, long long hi) { return std::uniform_int_distribution<long long>(lo, hi)(g); };
    auto c = default_scenario(static_cast<SetupId>(pick(0, 4)));
    c.seed = static_cast<std::uint64_t>(pick(1, 100000));
    c.horizon = seconds(pick(5, 10));
    c.policy_kind = static_cast<PolicyKind>(pick(0, 2));
    c.lease_duration = ms(pick(400, 4000));
    c.renew_lead = std::min(c.lease_duration / 4, ms(pick(1, 300)));
    auto r = run_scenario(c);
    TraceIndex idx(r.trace);
    if (idx.sessions.empty()) continue;
    ++runs;
    double exact = compute_violation_rate(idx);
    double approx = testing::brute_force_violation(r.trace);
    nonzero += exact > 0;
    worst = std::max(worst, std::abs(exact - approx));
  }
  o.detail << " runs=" << runs << " nonzero=" << nonzero << " max_abs_diff=" << fixed(worst, 4) << "pp";
  o.require(worst <= 0.1, "difference above 0.1 pp");
  o.require(nonzero > 0, "no run exercised a nonzero rate");
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"1 aipaging violation exactly zero, S1-S5 x 10 seeds", c1},
      {"2 baseline violation positive, load setups worst", c2},
      {"3 relocation sweep failure ordering, aipaging <= 0.02", c3},
      {"4 recovery vs stress non-increasing and ordered", c4},
      {"5 S1 median transaction time within 1.5x", c5},
      {"6 evidence monotone in mode and threshold", c6},
      {"7 oracle invariants over shipped scenarios x 10 seeds", c7},
      {"8 oracle names every planted defect", c8},
      {"9 reruns are byte-identical", c9},
      {"10 violation algebra vs 1 ms brute force", c10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << " |" << o.detail.str() << " ("
              << fixed(secs_since(t0), 1) << "s)" << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
