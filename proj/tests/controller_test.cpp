#include <gtest/gtest.h>

#include "aipaging/controller.hpp"
#include "test_util.hpp"

namespace aipaging {
namespace {

using namespace aipaging::testing;

OperatorPolicy default_policy() {
  OperatorPolicy p;
  p.tier_policy["*"] = {"large", "small"};
  p.default_lease_duration = ms(500);
  return p;
}

TEST(DeriveAsp, FieldWiseMapping) {
  auto asp = derive_asp(Intent{"chat", ms(50), 0.99, {}, {}, 0}, default_policy());
  ASSERT_TRUE(asp);
  EXPECT_EQ(asp->target_latency, ms(50));
  EXPECT_NEAR(asp->max_loss_rate, 0.01, 1e-12);
}

TEST(DeriveAsp, JitterAndLeaseFromPolicy) {
  auto asp = derive_asp(Intent{"chat", ms(100), 0.999, {}, {}, 0}, default_policy());
  ASSERT_TRUE(asp);
  EXPECT_EQ(asp->lease_duration, ms(500));
  EXPECT_EQ(asp->max_jitter, ms(20));
  EXPECT_TRUE(validate_asp(*asp).empty());
}

TEST(DeriveAsp, NoEligibleRegionIsPolicyInfeasible) {
  auto p = default_policy();
  p.allowed_regions = {"us-east"};
  auto asp = derive_asp(Intent{"chat", ms(50), 0.99, {"EU"}, {}, 0}, p);
  ASSERT_FALSE(asp);
  EXPECT_EQ(asp.error(), RejectCause::kPolicy);
}

TEST(DeriveAsp, UnknownIntentClassWithoutDefault) {
  OperatorPolicy p;
  p.tier_policy["vision"] = {"large"};
  EXPECT_FALSE(derive_asp(Intent{"chat", ms(50), 0.99, {}, {}, 0}, p));
}

TEST(IssueIdentity, CounterBasedIds) {
  IdSource ids;
  auto [aisi, aist] = issue_identity(asp(500), 0, ids);
  EXPECT_EQ(aisi.id, AisiId{1});
  EXPECT_EQ(aist.token_id, TokenId{2});
  EXPECT_EQ(aist.bound_aisi, AisiId{1});
  EXPECT_GE(aist.expires_at, ms(500));
  auto second = issue_identity(asp(500), 0, ids);
  EXPECT_NE(second.first.id, aisi.id);
}

TEST(Candidates, FailedAnchorIsFiltered) {
  auto m = anchors({anchor("up", 4), anchor("down", 4)});
  m.at("down").health = Health::kFailed;
  auto c = generate_candidates(asp(), m, {});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].anchor_id, "up");
}

TEST(Candidates, EdgeBeatsCloudOnPredictedLatency) {
  auto m = anchors({anchor("edge", 4, 5), anchor("cloud", 4, 40, SiteClass::kCloud)});
  auto c = generate_candidates(asp(), m, {});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].anchor_id, "edge");
  EXPECT_DOUBLE_EQ(c[0].score, 15.0);
  EXPECT_DOUBLE_EQ(c[1].score, 50.0);
}

TEST(Candidates, LoadInflatesService) {
  auto m = anchors({anchor("edge", 4, 5)});
  Telemetry t{{"edge", AnchorObservation{0.5, ms(5)}}};
  EXPECT_DOUBLE_EQ(generate_candidates(asp(), m, t)[0].score, 20.0);
}

TEST(Candidates, EqualScoresCheaperFirst) {
  auto a = anchor("a", 4);
  auto b = anchor("b", 4);
  a.tiers_offered[0].cost = 2;
  b.tiers_offered[0].cost = 1;
  auto c = generate_candidates(asp(), anchors({a, b}), {});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].anchor_id, "b");
}

TEST(Candidates, FallbackVariantsHoldWeakerTiersOnly) {
  auto a = anchor("a", 4);
  a.tiers_offered.push_back(tier("small", 4));
  Asp s = asp();
  s.allowed_fallback_tiers = {"large", "small"};
  auto primary = generate_candidates(s, anchors({a}), {});
  auto fb = fallback_variants(s, anchors({a}), {});
  ASSERT_EQ(primary.size(), 1u);
  ASSERT_EQ(fb.size(), 1u);
  EXPECT_EQ(primary[0].tier.tier_id, "large");
  EXPECT_EQ(fb[0].tier.tier_id, "small");
}

struct TxnFixture : ::testing::Test {
  AnchorMap map;
  IdSource ids;
  Trace trace;
  std::unique_ptr<LeaseManager> lm;
  std::unique_ptr<SteeringTable> st;
  Telemetry telemetry;

  TransactionOutcome run(AnchorMap m, Duration rtt = ms(5), OperatorPolicy p = default_policy()) {
    map = std::move(m);
    lm = std::make_unique<LeaseManager>(map, ids, &trace);
    st = std::make_unique<SteeringTable>(PolicyKind::kAiPaging, lm.get(), &trace);
    TransactionContext ctx{map, telemetry, *lm, *st, ids, rtt, &trace, TxnId{1}};
    return run_transaction(Intent{"chat", ms(50), 0.99, {"eu-west"}, {}, 0}, p, 0, ctx);
  }
  int attempts() const { return static_cast<int>(trace.count("admit_attempt")); }
};

TEST_F(TxnFixture, SingleFeasibleAnchorSucceeds) {
  auto out = run(anchors({anchor("a", 2)}));
  ASSERT_TRUE(out.success());
  EXPECT_EQ(out.accepted().commit.anchor_id, "a");
  EXPECT_EQ(st->size(), 1u);
  EXPECT_EQ(st->serving_anchor(out.accepted().aisi.id), "a");
}

TEST_F(TxnFixture, NoCandidatesRejectsImmediately) {
  auto m = anchors({anchor("a", 2)});
  m.at("a").health = Health::kFailed;
  auto out = run(m);
  ASSERT_FALSE(out.success());
  EXPECT_EQ(out.rejected().causes.total(), 0);
  EXPECT_EQ(out.elapsed, 0);
  EXPECT_EQ(attempts(), 0);
}

TEST_F(TxnFixture, TwoCapacityRejectsThenAccept) {
  // Full anchors rank ahead of the free one by path latency.
  auto out = run(anchors({anchor("a", 0, 1), anchor("b", 0, 2), anchor("c", 3, 3)}));
  ASSERT_TRUE(out.success());
  EXPECT_EQ(out.accepted().commit.anchor_id, "c");
  EXPECT_EQ(attempts(), 3);
  EXPECT_EQ(out.elapsed, ms(15));
}

TEST_F(TxnFixture, CommitTimeoutBoundsAttempts) {
  auto out = run(anchors({anchor("a", 0, 1), anchor("b", 0, 2), anchor("c", 0, 3), anchor("d", 0, 4)}), ms(40));
  ASSERT_FALSE(out.success());
  EXPECT_EQ(attempts(), 3);
  const auto& causes = out.rejected().causes;
  EXPECT_EQ(causes.count(RejectCause::kCapacity), 2);
  EXPECT_EQ(causes.count(RejectCause::kTimeout), 1);
  EXPECT_EQ(causes.total(), attempts());
  for (const auto& e : trace.entries())
    if (e.category == "admit_attempt") EXPECT_LT(e.time, ms(100));
}

TEST(AdmissionLoop, StepwiseStopsAtDeadline) {
  auto m = anchors({anchor("a", 0), anchor("b", 0)});
  std::vector<Candidate> ranked{candidate(m.at("a")), candidate(m.at("b"))};
  AdmissionLoop loop(TxnId{1}, AisiId{1}, ranked, {}, ms(0), ms(100), ms(60));
  auto first = loop.next_attempt(0);
  ASSERT_TRUE(first);
  EXPECT_FALSE(first->timed_out);
  loop.on_reply(*first, AdmissionDecision::reject(RejectCause::kCapacity));
  auto second = loop.next_attempt(first->reply_at);
  ASSERT_TRUE(second);
  EXPECT_TRUE(second->timed_out);
  loop.on_timeout(*second);
  EXPECT_FALSE(loop.next_attempt(second->reply_at));
}

TEST(AdmissionLoop, CapacityRejectOpensFallbacksElsewhere) {
  auto a = anchor("a", 0);
  auto b = anchor("b", 1);
  Candidate small_b{"b", tier("small"), 1, true};
  AdmissionLoop loop(TxnId{1}, AisiId{1}, {candidate(a)}, {Candidate{"a", tier("small"), 1, true}, small_b}, 0,
                     ms(100), ms(5));
  auto first = loop.next_attempt(0);
  loop.on_reply(*first, AdmissionDecision::reject(RejectCause::kCapacity));
  auto next = loop.next_attempt(ms(5));
  ASSERT_TRUE(next);
  EXPECT_EQ(next->candidate.anchor_id, "b");
  EXPECT_EQ(loop.remaining(), 0u);
}

TEST(SelectAction, PolicyBehaviors) {
  auto ai = select_action(PolicyKind::kAiPaging);
  EXPECT_TRUE(ai.gate_on_lease && ai.renew_leases && ai.make_before_break);
  auto be = select_action(PolicyKind::kBestEffort);
  EXPECT_TRUE(be.relocate);
  EXPECT_FALSE(be.gate_on_lease || be.make_before_break);
  auto eb = select_action(PolicyKind::kEndpointBound, 3);
  EXPECT_FALSE(eb.relocate);
  EXPECT_EQ(eb.retries, 3);
}

}  // namespace
}  // namespace aipaging
