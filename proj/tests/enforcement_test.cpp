#include <gtest/gtest.h>

#include "aipaging/enforcement.hpp"
#include "test_util.hpp"

namespace aipaging {
namespace {

using namespace aipaging::testing;

struct SteeringFixture : ::testing::Test {
  AnchorMap map = anchors({anchor("a0", 4), anchor("a1", 4)});
  IdSource ids;
  Trace trace;
  LeaseManager lm{map, ids, &trace};
  SteeringTable st{PolicyKind::kAiPaging, &lm, &trace};
  Classifier cls{AisiId{50}, TokenId{51}};

  SteeringFixture() {
    lm.add_terminal_hook([this](const Commit& c, SimTime t) { st.on_lease_terminal(c, t); });
  }
  Commit lease(const std::string& a, SimTime now, double lease_ms = 500) {
    return *lm.request_lease(candidate(map.at(a)), cls.aisi, asp(lease_ms), now).commit;
  }
};

TEST_F(SteeringFixture, ValidLeaseInstallsAndRoutes) {
  auto c = lease("a0", 0);
  ASSERT_TRUE(st.install_steering(cls, c, kActivePriority, 0));
  auto r = st.classify(cls.aisi, cls.aist, ms(1));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->anchor_id, "a0");
  EXPECT_EQ(r->backing_lease, c.lease_id);
}

TEST_F(SteeringFixture, ExpiredLeaseIsRefusedAndTableUnchanged) {
  auto c = lease("a0", 0, 100);
  lm.expire_due(ms(100));
  auto r = st.install_steering(cls, c, kActivePriority, ms(100));
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error(), SteeringError::kLeaseInvalid);
  EXPECT_EQ(st.size(), 0u);
}

TEST_F(SteeringFixture, LeaseOfAnotherAisiIsRefused) {
  auto c = lease("a0", 0);
  EXPECT_FALSE(st.install_steering(Classifier{AisiId{99}, TokenId{1}}, c, kActivePriority, 0));
}

TEST(Steering, BestEffortInstallsUngated) {
  SteeringTable st(PolicyKind::kBestEffort, nullptr);
  auto e = st.install_ungated(Classifier{AisiId{1}, TokenId{2}}, Placement{"a0", "large", {}}, kActivePriority, 0);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->backing_lease, kUngated);
  EXPECT_EQ(st.classify(AisiId{1}, TokenId{2}, ms(5))->anchor_id, "a0");
}

TEST(Steering, AiPagingRefusesUngated) {
  SteeringTable st(PolicyKind::kAiPaging, nullptr);
  auto e = st.install_ungated(Classifier{AisiId{1}, TokenId{2}}, Placement{"a0", "large", {}}, kActivePriority, 0);
  ASSERT_FALSE(e);
  EXPECT_EQ(e.error(), SteeringError::kGateRequired);
}

TEST_F(SteeringFixture, RemoveIsIdempotent) {
  auto c = lease("a0", 0);
  st.install_steering(cls, c, kActivePriority, 0);
  EXPECT_EQ(st.remove_steering(c.lease_id, ms(10)), 1u);
  EXPECT_EQ(st.remove_steering(c.lease_id, ms(11)), 0u);
}

TEST_F(SteeringFixture, ExpiryAndRemovalShareTheTimestamp) {
  auto c = lease("a0", ms(20), 300);
  st.install_steering(cls, c, kActivePriority, ms(20));
  lm.expire_due(ms(320));
  SimTime expired = -1, removed = -1;
  for (const auto& e : trace.entries()) {
    if (e.category == "lease_expire") expired = e.time;
    if (e.category == "steer_remove") removed = e.time;
  }
  EXPECT_EQ(expired, ms(320));
  EXPECT_EQ(removed, ms(320));
  EXPECT_FALSE(st.classify(cls.aisi, cls.aist, ms(320)));
}

TEST_F(SteeringFixture, FlipSwapsPriorities) {
  auto c0 = lease("a0", 0);
  st.install_steering(cls, c0, kActivePriority, 0);
  auto c1 = lease("a1", ms(10));
  st.install_steering(cls, c1, kStandbyPriority, ms(10));
  EXPECT_EQ(st.classify(cls.aisi, cls.aist, ms(10))->anchor_id, "a0");
  ASSERT_TRUE(st.flip_priority(cls.aisi, c1.lease_id, ms(10)));
  EXPECT_EQ(st.classify(cls.aisi, cls.aist, ms(10))->anchor_id, "a1");
  auto entries = st.entries_for(cls.aisi);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].anchor_id, "a1");
  EXPECT_EQ(entries[0].priority, kActivePriority);
  EXPECT_EQ(entries[1].priority, kStandbyPriority);
  EXPECT_EQ(trace.count("steer_flip"), 1u);
  EXPECT_EQ(trace.entries().back().time, ms(10));
}

TEST_F(SteeringFixture, FlipWithoutEntryFails) {
  EXPECT_EQ(st.flip_priority(cls.aisi, LeaseId{77}, 0).error(), SteeringError::kNoSuchEntry);
}

TEST_F(SteeringFixture, DuplicatePriorityIsRefused) {
  st.install_steering(cls, lease("a0", 0), kActivePriority, 0);
  EXPECT_EQ(st.install_steering(cls, lease("a1", 0), kActivePriority, 0).error(), SteeringError::kPriorityTaken);
}

TEST_F(SteeringFixture, ClassifyCases) {
  EXPECT_FALSE(st.classify(cls.aisi, cls.aist, 0));
  auto c0 = lease("a0", 0);
  st.install_steering(cls, c0, kActivePriority, 0);
  EXPECT_EQ(st.classify(cls.aisi, cls.aist, 0)->anchor_id, "a0");
  st.install_steering(cls, lease("a1", ms(1)), kStandbyPriority, ms(1));
  EXPECT_EQ(st.classify(cls.aisi, cls.aist, ms(1))->anchor_id, "a0");
  EXPECT_FALSE(st.classify(cls.aisi, TokenId{999}, ms(1)));
}

TEST_F(SteeringFixture, StaleEntryTripsTheWire) {
  // Wired without the terminal hook, so the entry outlives its lease.
  SteeringTable loose(PolicyKind::kAiPaging, &lm, &trace);
  auto c = lease("a0", 0, 100);
  loose.install_steering(cls, c, kActivePriority, 0);
  lm.expire_due(ms(100));
  EXPECT_FALSE(loose.classify(cls.aisi, cls.aist, ms(150)));
  EXPECT_EQ(loose.tripwire_hits(), 1u);
  EXPECT_EQ(trace.count("violation"), 1u);
}

TEST_F(SteeringFixture, RebindKeepsRouteAndPriority) {
  auto old = lease("a0", 0);
  st.install_steering(cls, old, kActivePriority, 0);
  auto fresh = *lm.renew(old.lease_id, asp(), ms(400)).commit;
  EXPECT_EQ(st.rebind(old.lease_id, fresh, ms(400)), 1u);
  lm.release(old.lease_id, ms(400));
  auto r = st.classify(cls.aisi, cls.aist, ms(450));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->backing_lease, fresh.lease_id);
  EXPECT_EQ(st.size(), 1u);
}

}  // namespace
}  // namespace aipaging
