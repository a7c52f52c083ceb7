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

// aipaging: run scenarios, sweep parameters, print the correctness table and
// verify traces.
//
// Exit codes: 0 ok, 2 usage or config error, 3 internal invariant abort,
// 4 verification failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aipaging/experiment.hpp"
#include "aipaging/oracle.hpp"
#include "aipaging/scenario.hpp"
#include "aipaging/simulator.hpp"

namespace fs = std::filesystem;
using namespace aipaging;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kInternal = 3;
constexpr int kVerifyFailed = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string config_dir = "scenarios";
  std::string seeds;
  std::vector<std::string> policies;
  std::string axis;
  std::string values;
  std::string out;
  std::string trace;
  bool verify = false;
  unsigned jobs = 0;
};

fs::path out_dir(const Options& o) {
  fs::path p = !o.out.empty() ? fs::path(o.out) : std::getenv("AIPAGING_OUT") ? fs::path(std::getenv("AIPAGING_OUT"))
                                                                               : fs::path("aipaging-out");
  fs::create_directories(p);
  return p;
}

std::vector<std::uint64_t> seeds_or(const Options& o, std::uint64_t fallback) {
  if (o.seeds.empty()) return {fallback};
  try {
    return parse_seeds(o.seeds);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--seeds: ") + e.what());
  }
}

std::vector<PolicyKind> policies_or(const Options& o, std::vector<PolicyKind> fallback) {
  if (o.policies.empty()) return fallback;
  std::vector<PolicyKind> out;
  for (const auto& s : o.policies) {
    auto p = parse_policy_kind(s);
    if (!p) throw UsageError("--policy: unknown policy '" + s + "' (aipaging, endpointbound, besteffort)");
    out.push_back(*p);
  }
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& v : detail::split(text, ',')) {
    try {
      std::size_t used = 0;
      std::string s(detail::trim(v));
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("--sweep-values: bad number '" + v + "'");
    }
  }
  if (out.empty()) throw UsageError("--sweep-values: empty list");
  return out;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
}

int report_oracle(const std::string& what, const Trace& trace) {
  auto found = oracle_check(trace);
  for (const auto& v : found) std::cout << what << ": " << v.kind << " at " << v.time << "us: " << v.detail << '\n';
  return found.empty() ? kOk : kVerifyFailed;
}

int cmd_run(const Options& o) {
  ScenarioConfig base = load_scenario(o.config);
  const auto seeds = seeds_or(o, base.seed);
  const auto policies = policies_or(o, {base.policy_kind});
  const fs::path dir = out_dir(o);
  const std::string stem = fs::path(o.config).stem().string();

  std::vector<ScenarioConfig> cfgs;
  for (auto p : policies)
    for (auto s : seeds) {
      ScenarioConfig c = base;
      c.policy_kind = p;
      c.seed = s;
      cfgs.push_back(std::move(c));
    }
  auto results = run_batch(cfgs, o.jobs, true);
  int rc = kOk;
  std::vector<MetricsReport> reports;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto name = stem + "_" + std::string(to_string(cfgs[i].policy_kind)) + "_seed" + std::to_string(cfgs[i].seed);
    write_file(dir / (name + ".trace"), results[i].trace.to_string());
    if (o.verify && report_oracle(name, results[i].trace) != kOk) rc = kVerifyFailed;
    reports.push_back(results[i].metrics);
  }
  std::ostringstream csv;
  write_metrics_csv(csv, reports);
  write_file(dir / (stem + "_metrics.csv"), csv.str());
  std::cout << csv.str();
  return rc;
}

int cmd_sweep(const Options& o) {
  if (!is_sweep_axis(o.axis))
    throw UsageError("--sweep-axis: unknown axis '" + o.axis +
                     "' (relocation_probability, stress_level, overload_threshold)");
  const auto values = parse_values(o.values);
  ScenarioConfig base = load_scenario(o.config);
  const auto seeds = seeds_or(o, base.seed);
  const auto policies = policies_or(o, all_policies());
  const fs::path dir = out_dir(o);
  auto curves = run_sweep(base, o.axis, values, policies, seeds, o.jobs);
  for (auto p : policies) {
    std::ostringstream csv;
    write_sweep_csv(csv, o.axis, curves.at(p));
    const auto name = "sweep_" + o.axis + "_" + std::string(to_string(p)) + ".csv";
    write_file(dir / name, csv.str());
    std::cout << "# " << to_string(p) << '\n' << csv.str();
  }
  return kOk;
}

int cmd_table2(const Options& o) {
  std::vector<ScenarioConfig> setups;
  for (const char* s : {"s1", "s2", "s3", "s4", "s5"}) setups.push_back(load_scenario((fs::path(o.config_dir) / (std::string(s) + ".cfg")).string()));
  const auto seeds = o.seeds.empty() ? parse_seeds("1-10") : seeds_or(o, 1);
  const auto policies = policies_or(o, all_policies());
  auto table = run_table2(setups, seeds, policies, o.jobs);
  std::ostringstream csv;
  write_table2_csv(csv, table);
  write_file(out_dir(o) / "table2.csv", csv.str());
  std::cout << "Violation rate (%), mean over " << seeds.size() << " seeds\n";
  print_table2(std::cout, table);
  return kOk;
}

int cmd_verify(const Options& o) {
  std::ifstream in(o.trace, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open trace '" + o.trace + "'");
  Trace t = Trace::parse(in);
  int rc = report_oracle(o.trace, t);
  if (rc == kOk) std::cout << o.trace << ": ok (" << t.size() << " entries)\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AI-Paging protocol simulator and trace verifier"};
  app.require_subcommand(1);
  app.footer("Output goes to --out, else $AIPAGING_OUT, else ./aipaging-out.\n"
             "Exit codes: 0 ok, 2 usage/config error, 3 internal invariant abort, 4 verification failure.");
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--seeds,--seed", o.seeds, "Seed, range (1-10) or list (1,4,7)");
    c->add_option("--policy", o.policies, "aipaging | endpointbound | besteffort (repeatable)");
    c->add_option("--out", o.out, "Output directory");
    c->add_option("-j,--jobs", o.jobs, "Parallel runs (0 = all cores)");
  };

  auto* run = app.add_subcommand("run", "Run one scenario per (policy, seed); write traces and a metrics CSV");
  run->add_option("--config", o.config, "Scenario file")->required();
  run->add_flag("--verify", o.verify, "Check every trace with the oracle (exit 4 on violations)");
  add_common(run);

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter; one aggregated CSV per policy");
  sweep->add_option("--config", o.config, "Base scenario file")->required();
  sweep->add_option("--sweep-axis", o.axis, "relocation_probability | stress_level | overload_threshold")->required();
  sweep->add_option("--sweep-values", o.values, "Comma-separated values")->required();
  add_common(sweep);

  auto* table2 = app.add_subcommand("table2", "Violation rate per setup and policy over s1..s5.cfg");
  table2->add_option("--config-dir", o.config_dir, "Directory holding s1.cfg..s5.cfg")->capture_default_str();
  add_common(table2);

  auto* verify = app.add_subcommand("verify", "Check a trace file against the protocol invariants");
  verify->add_option("trace", o.trace, "Trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*table2) return cmd_table2(o);
    return cmd_verify(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const TraceFormatError& e) {
    std::cerr << "malformed trace: " << e.what() << '\n';
    return kUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "internal invariant abort: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
