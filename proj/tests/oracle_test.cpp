#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aipaging/oracle.hpp"
#include "aipaging/simulator.hpp"

namespace aipaging {
namespace {

namespace fs = std::filesystem;
const fs::path kData = fs::path(AIPAGING_SOURCE_DIR) / "tests" / "data";

Trace load(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return Trace::parse(in);
}

std::string describe(const std::vector<OracleViolation>& v) {
  std::string s;
  for (const auto& x : v) s += x.kind + " at " + std::to_string(x.time) + ": " + x.detail + "\n";
  return s;
}

TEST(Oracle, ConformingCorpusIsClean) {
  std::size_t n = 0;
  for (const auto& f : fs::directory_iterator(kData / "conforming")) {
    SCOPED_TRACE(f.path().filename().string());
    auto v = oracle_check(load(f.path()));
    EXPECT_TRUE(v.empty()) << describe(v);
    ++n;
  }
  EXPECT_EQ(n, 5u);
}

TEST(Oracle, EachDefectIsNamedAndAlone) {
  std::size_t n = 0;
  for (const auto& f : fs::directory_iterator(kData / "defects")) {
    if (f.path().extension() != ".trace" || f.path().stem() == "truncated") continue;
    const std::string expected = f.path().stem().string();
    SCOPED_TRACE(expected);
    auto v = oracle_check(load(f.path()));
    ASSERT_FALSE(v.empty());
    for (const auto& x : v) EXPECT_EQ(x.kind, expected) << describe(v);
    ++n;
  }
  EXPECT_EQ(n, 9u);
}

TEST(Oracle, TruncatedTraceIsMalformed) {
  EXPECT_THROW(oracle_check(load(kData / "defects" / "truncated.trace")), TraceFormatError);
}

TEST(Oracle, ResultsAreTimeOrdered) {
  auto t = load(kData / "conforming" / "besteffort_load_mobility.trace");
  // Baseline traces are clean by construction: AiPaging-only checks skip them.
  EXPECT_TRUE(oracle_check(t).empty());
  auto v = oracle_check(load(kData / "defects" / "late_removal.trace"));
  EXPECT_TRUE(std::is_sorted(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.time < b.time; }));
}

TEST(Oracle, LiveRunsAreClean) {
  for (auto id : {SetupId::kS1, SetupId::kS2, SetupId::kS3, SetupId::kS4, SetupId::kS5}) {
    for (auto p : {PolicyKind::kAiPaging, PolicyKind::kBestEffort, PolicyKind::kEndpointBound}) {
      auto c = default_scenario(id);
      c.policy_kind = p;
      c.horizon = seconds(20);
      auto r = run_scenario(c);
      auto v = oracle_check(r.trace);
      EXPECT_TRUE(v.empty()) << to_string(id) << "/" << to_string(p) << "\n" << describe(v);
    }
  }
}

TEST(Oracle, DoubleTerminalPlantedInMemory) {
  auto c = default_scenario(SetupId::kS1);
  c.horizon = seconds(5);
  auto t = run_scenario(c).trace;
  // Re-emit the first release one microsecond later as an expiry.
  std::string text = t.to_string();
  auto pos = text.find("\tlease_release\t");
  ASSERT_NE(pos, std::string::npos);
  auto line_end = text.find('\n', pos);
  auto line_start = text.rfind('\n', pos) + 1;
  std::string line = text.substr(line_start, line_end - line_start);
  auto tab = line.find('\t');
  auto time = std::stoll(line.substr(0, tab));
  auto rest = line.substr(line.find('\t', tab + 1));
  rest.replace(rest.find("lease_release"), 13, "lease_expire");
  // Insert right after the original with the same time; renumber seq below.
  std::string planted = std::to_string(time) + "\t0" + rest;
  text.insert(line_end + 1, planted + "\n");
  std::istringstream lines(text);
  std::string out, l;
  std::uint64_t seq = 1;
  while (std::getline(lines, l)) {
    auto a = l.find('\t'), b = l.find('\t', a + 1);
    out += l.substr(0, a) + "\t" + std::to_string(seq++) + l.substr(b) + "\n";
  }
  std::istringstream in(out);
  auto v = oracle_check(Trace::parse(in));
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const auto& x) { return x.kind == defect::kDoubleTerminal; }))
      << describe(v);
}

}  // namespace
}  // namespace aipaging
