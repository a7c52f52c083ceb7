#ifndef AIPAGING_TESTS_TEST_UTIL_HPP_
#define AIPAGING_TESTS_TEST_UTIL_HPP_

#include <string>

#include "aipaging/core.hpp"

namespace aipaging::testing {

inline ModelTier tier(const std::string& id = "large", double mean_ms = 10, double jitter_ms = 0, double cost = 1) {
  return ModelTier{id, from_ms(mean_ms), from_ms(jitter_ms), cost};
}

inline Anchor anchor(const std::string& id, int capacity, double path_ms = 5, SiteClass site = SiteClass::kEdge) {
  return Anchor{id, site, "eu-west", {tier()}, capacity, Health::kHealthy, from_ms(path_ms)};
}

inline AnchorMap anchors(std::initializer_list<Anchor> list) {
  AnchorMap m;
  for (const auto& a : list) m.emplace(a.anchor_id, a);
  return m;
}

inline Asp asp(double lease_ms = 500) {
  Asp a;
  a.target_latency = ms(50);
  a.max_jitter = ms(10);
  a.max_loss_rate = 0.01;
  a.locality_region = {"eu-west"};
  a.allowed_fallback_tiers = {"large"};
  a.max_relocation_rate = 1.0;
  a.lease_duration = from_ms(lease_ms);
  return a;
}

inline Candidate candidate(const Anchor& a, double score = 0) { return Candidate{a.anchor_id, a.tiers_offered.front(), score, true}; }

}  // namespace aipaging::testing

#endif  // AIPAGING_TESTS_TEST_UTIL_HPP_
