#include <gtest/gtest.h>

#include <sstream>

#include "aipaging/metrics.hpp"
#include "aipaging/simulator.hpp"

namespace aipaging {
namespace {

// One-session synthetic trace over a 1000 ms horizon.
struct Synth {
  Trace t;
  explicit Synth(const char* policy) {
    t.append(0, "run", {{"policy", policy}, {"setup", "custom"}, {"seed", 1}, {"horizon_us", ms(1000)},
                        {"commit_timeout_us", ms(100)}, {"drain_timeout_us", ms(200)}});
    t.append(0, "session_start", {{"session", 1}, {"policy", policy}});
    t.append(0, "identity", {{"session", 1}, {"aisi", 1}, {"aist", 2}});
  }
  void grant(SimTime at, int lease, SimTime expires) {
    t.append(at, "lease_grant", {{"lease", lease}, {"aisi", 1}, {"anchor", "a"}, {"tier", "large"},
                                 {"issued", at}, {"expires", expires}});
  }
  void install(SimTime at, int entry, int lease) {
    t.append(at, "steer_install", {{"entry", entry}, {"aisi", 1}, {"aist", 2}, {"anchor", "a"},
                                   {"tier", "large"}, {"lease", lease}, {"prio", kActivePriority}});
  }
  void remove(SimTime at, int entry) { t.append(at, "steer_remove", {{"entry", entry}, {"aisi", 1}}); }
  double rate() {
    t.append(ms(1000), "run_end");
    return compute_violation_rate(t);
  }
};

TEST(ViolationRate, UngatedEntryWithoutLeaseCountsWholeLifetime) {
  Synth s("besteffort");
  s.install(0, 1, 0);
  s.remove(ms(200), 1);
  EXPECT_DOUBLE_EQ(s.rate(), 20.0);
}

TEST(ViolationRate, BestEffortEntryOutlivingLease) {
  Synth s("besteffort");
  s.grant(0, 3, ms(500));
  s.install(0, 1, 0);
  EXPECT_DOUBLE_EQ(s.rate(), 50.0);
}

TEST(ViolationRate, GatedEntryRemovedAtExpiryIsClean) {
  Synth s("aipaging");
  s.grant(0, 3, ms(500));
  s.install(0, 1, 3);
  s.t.append(ms(500), "lease_expire", {{"lease", 3}, {"aisi", 1}, {"anchor", "a"}});
  s.remove(ms(500), 1);
  EXPECT_DOUBLE_EQ(s.rate(), 0.0);
}

TEST(ViolationRate, EarlyTerminalShortensValidity) {
  Synth s("aipaging");
  s.grant(0, 3, ms(900));
  s.install(0, 1, 3);
  s.t.append(ms(400), "lease_revoke", {{"lease", 3}, {"aisi", 1}, {"anchor", "a"}});
  s.remove(ms(600), 1);
  EXPECT_DOUBLE_EQ(s.rate(), 20.0);
}

TEST(ViolationRate, UnknownLeaseIsMalformed) {
  Synth s("aipaging");
  s.install(0, 1, 42);
  EXPECT_THROW(s.rate(), TraceFormatError);
}

TEST(Intervals, MergeAndSubtract) {
  auto m = merge_intervals({{5, 10}, {0, 3}, {3, 4}, {9, 12}, {20, 20}});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].begin, 0);
  EXPECT_EQ(m[0].end, 4);
  EXPECT_EQ(m[1].end, 12);
  auto gaps = subtract_intervals({0, 100}, {{10, 20}, {15, 30}, {90, 150}});
  ASSERT_EQ(gaps.size(), 2u);
  EXPECT_EQ(total_length(gaps), 10 + 60);
}

TEST(Percentile, NearestRank) {
  std::vector<double> v{40, 10, 30, 20};
  EXPECT_EQ(percentile(v, 50), 20);
  EXPECT_EQ(percentile(v, 90), 40);
  EXPECT_EQ(percentile(v, 0), 10);
  EXPECT_TRUE(std::isnan(percentile({}, 50)));
}

TEST(Summarize, SkipsNaN) {
  auto s = summarize({1.0, std::nan(""), 3.0});
  EXPECT_EQ(s.n, 2u);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
}

MetricsReport report(std::uint64_t seed, double vio) {
  MetricsReport r;
  r.seed = seed;
  r.violation_rate_percent = vio;
  r.transaction_time_samples = {5, 15};
  return r;
}

TEST(Aggregate, SingleReportIsItself) {
  auto a = aggregate({report(1, 7.5)});
  EXPECT_EQ(a.runs, 1u);
  EXPECT_DOUBLE_EQ(a.violation_rate_percent.mean, 7.5);
  EXPECT_DOUBLE_EQ(a.violation_rate_percent.p99, 7.5);
  EXPECT_EQ(a.transaction_cdf.back().second, 1.0);
}

TEST(Aggregate, IdenticalReportsAndOrderIndependence) {
  auto a = aggregate({report(1, 2.0), report(2, 2.0), report(3, 2.0)});
  EXPECT_DOUBLE_EQ(a.violation_rate_percent.mean, 2.0);
  EXPECT_EQ(a.transaction_time_ms.n, 6u);
  auto b = aggregate({report(3, 1.0), report(1, 4.0)});
  auto c = aggregate({report(1, 4.0), report(3, 1.0)});
  EXPECT_EQ(b.transaction_cdf, c.transaction_cdf);
  EXPECT_DOUBLE_EQ(b.violation_rate_percent.mean, c.violation_rate_percent.mean);
  EXPECT_THROW(aggregate({}), std::invalid_argument);
}

TEST(MetricsCsv, RowMatchesHeaderArity) {
  std::ostringstream os;
  write_metrics_csv(os, {report(1, 0)});
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(ComputeMetrics, LiveRunMatchesRunResult) {
  auto c = default_scenario(SetupId::kS4);
  c.horizon = seconds(15);
  auto r = run_scenario(c);
  auto m = compute_metrics(r.trace);
  EXPECT_EQ(metrics_csv_row(m), metrics_csv_row(r.metrics));
  EXPECT_EQ(m.violation_rate_percent, 0.0);
  EXPECT_GT(m.requests, 0u);
}

}  // namespace
}  // namespace aipaging
