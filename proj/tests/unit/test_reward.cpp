#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gcq/error.hpp"
#include "gcq/reward.hpp"
#include "gcq/rng.hpp"
#include "helpers.hpp"

using namespace gcq;
using namespace gcq::reward;
using gcq::testing::cav;
using gcq::testing::hdv;
using sim::Intention;

namespace {

const sim::RoadSpec kRoad{};

// Table of intention terms on the default corridor, written out case by case:
// ramps at 200 and 400, segments [0,200), [200,400), [400,500].
double oracle_term(const sim::Vehicle& v) {
  if (v.kind == sim::VehicleKind::HDV) return 0.0;
  const double p = v.position;
  const bool bottom = v.lane == 0;
  if (v.intention == Intention::Ramp1) {
    if (p < 200.0) return bottom ? 1.0 - p / 200.0 : -(p / 200.0);
    return 0.0;
  }
  if (v.intention == Intention::Ramp2) {
    if (p < 200.0) return bottom ? -(p / 200.0) : 0.0;
    if (p < 400.0) return bottom ? 1.0 - (p - 200.0) / 200.0 : -((p - 200.0) / 200.0);
    return 0.0;
  }
  return 0.0;
}

sim::SimState random_state(Rng& rng) {
  sim::SimState s = sim::SimState::make(1);
  const auto n = rng.below(9);
  for (std::uint64_t i = 0; i < n; ++i) {
    const int lane = static_cast<int>(rng.below(3));
    // Mix continuous positions with exact segment boundaries.
    double pos = rng.uniform(0.0, 500.0);
    if (rng.bernoulli(0.15)) pos = std::vector<double>{0.0, 199.999, 200.0, 400.0, 500.0}[rng.below(5)];
    if (rng.bernoulli(0.3)) {
      s.add(hdv(lane, pos));
    } else {
      s.add(cav(static_cast<Intention>(rng.below(3)), lane, pos, rng.uniform(0.0, 14.0)));
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("intention terms") {
  TEST_CASE("ramp 1 CAV on the bottom lane at the corridor start") {
    const auto t = intention_term(cav(Intention::Ramp1, 0, 0.0), kRoad);
    CHECK(t.category == IntentionCategory::r11);
    CHECK(t.value == 1.0);
    CHECK(t.signed_value == 1.0);
  }

  TEST_CASE("ramp 1 CAV off the bottom lane halfway through") {
    const auto t = intention_term(cav(Intention::Ramp1, 2, 100.0), kRoad);
    CHECK(t.category == IntentionCategory::p11);
    CHECK(t.value == 0.5);
    CHECK(t.signed_value == -0.5);
  }

  TEST_CASE("HDVs carry no term") {
    const auto t = intention_term(hdv(0, 150.0), kRoad);
    CHECK(t.category == IntentionCategory::none);
    CHECK(t.signed_value == 0.0);
  }

  TEST_CASE("ramp 2 categories by segment") {
    CHECK(intention_term(cav(Intention::Ramp2, 0, 50.0), kRoad).category == IntentionCategory::p21);
    CHECK(intention_term(cav(Intention::Ramp2, 1, 50.0), kRoad).category == IntentionCategory::none);
    CHECK(intention_term(cav(Intention::Ramp2, 1, 250.0), kRoad).category == IntentionCategory::p22);
    CHECK(intention_term(cav(Intention::Ramp2, 0, 250.0), kRoad).category == IntentionCategory::r22);
    CHECK(intention_term(cav(Intention::Ramp2, 0, 450.0), kRoad).category == IntentionCategory::none);
    CHECK(intention_term(cav(Intention::Ramp1, 0, 250.0), kRoad).category == IntentionCategory::none);
    CHECK(intention_term(cav(Intention::Through, 0, 50.0), kRoad).category == IntentionCategory::none);
  }

  TEST_CASE("literal top-lane reading of p21 is selectable") {
    CHECK(intention_term(cav(Intention::Ramp2, 2, 50.0), kRoad, true).category == IntentionCategory::p21);
    CHECK(intention_term(cav(Intention::Ramp2, 0, 50.0), kRoad, true).category == IntentionCategory::none);
  }

  TEST_CASE("segment boundary values") {
    CHECK(category_value(IntentionCategory::r11, 0.0, 200.0) == 1.0);
    CHECK(category_value(IntentionCategory::r11, 200.0, 200.0) == 0.0);
    CHECK(category_value(IntentionCategory::p11, 200.0, 200.0) == 1.0);
    CHECK(category_value(IntentionCategory::p11, 0.0, 200.0) == 0.0);
    CHECK(category_value(IntentionCategory::none, 50.0, 200.0) == 0.0);
  }

  TEST_CASE("monotone approach to ramp 1") {
    double prev_r = 2.0, prev_p = -1.0;
    for (double x = 0.0; x < 200.0; x += 7.3) {
      const double r = intention_term(cav(Intention::Ramp1, 0, x), kRoad).value;
      const double p = intention_term(cav(Intention::Ramp1, 1, x), kRoad).value;
      CHECK(r < prev_r);
      CHECK(p > prev_p);
      prev_r = r;
      prev_p = p;
    }
  }
}

TEST_SUITE("aggregate rewards") {
  TEST_CASE("single ramp 1 CAV at the start") {
    sim::SimState s = sim::SimState::make(1);
    s.add(cav(Intention::Ramp1, 0, 0.0));
    CHECK(intention_reward(s, kRoad) == 1.0);
  }

  TEST_CASE("a penalty and a reward cancel") {
    sim::SimState s = sim::SimState::make(1);
    s.add(cav(Intention::Ramp2, 0, 100.0));
    s.add(cav(Intention::Ramp1, 0, 100.0));
    CHECK(intention_reward(s, kRoad) == 0.0);
  }

  TEST_CASE("empty road") {
    const auto s = sim::SimState::make(1);
    CHECK(intention_reward(s, kRoad) == 0.0);
    CHECK(speed_reward(s, kRoad) == 0.0);
    CHECK(total_reward(s, {}, {}, kRoad).total == 0.0);
  }

  TEST_CASE("speed reward averages over CAVs only") {
    sim::SimState s = sim::SimState::make(1);
    s.add(cav(Intention::Through, 0, 100.0, 7.0));
    s.add(cav(Intention::Through, 1, 100.0, 14.0));
    s.add(hdv(2, 100.0, 1.0));
    CHECK(speed_reward(s, kRoad) == 0.75);
  }

  TEST_CASE("all CAVs at the limit") {
    sim::SimState s = sim::SimState::make(1);
    for (int i = 0; i < 4; ++i) s.add(cav(Intention::Through, i % 3, 50.0 * i, 14.0));
    CHECK(speed_reward(s, kRoad) == 1.0);
  }

  TEST_CASE("totals with and without a collision") {
    sim::SimState s = sim::SimState::make(1);
    s.add(cav(Intention::Ramp1, 0, 0.0, 7.0));
    s.add(cav(Intention::Through, 1, 300.0, 14.0));
    const auto quiet = total_reward(s, {}, {}, kRoad);
    CHECK(quiet.intention == 1.0);
    CHECK(quiet.speed == 0.75);
    CHECK(quiet.total == 1.75);
    sim::StepEvents crash;
    crash.collisions.push_back({5, 6});
    CHECK(total_reward(s, crash, {}, kRoad).total == -48.25);
  }

  TEST_CASE("only CAV lane changes are penalized") {
    sim::StepEvents ev;
    ev.lane_changes = {{.id = 1, .from_lane = 0, .to_lane = 1, .cav = true},
                       {.id = 2, .from_lane = 2, .to_lane = 1, .cav = false},
                       {.id = 3, .from_lane = 1, .to_lane = 2, .cav = true}};
    const auto r = total_reward(sim::SimState::make(1), ev, {}, kRoad);
    CHECK(r.lane_change_penalty == 1.0);
    CHECK(r.total == -1.0);
  }

  TEST_CASE("weights scale their terms") {
    sim::SimState s = sim::SimState::make(1);
    s.add(cav(Intention::Ramp1, 2, 100.0, 14.0));
    sim::StepEvents ev;
    ev.collisions.push_back({1, 2});
    ev.lane_changes.push_back({.id = 0, .from_lane = 1, .to_lane = 2, .cav = true});
    RewardWeights w;
    w.w_intention = 2.0;
    w.w_speed = 3.0;
    w.w_collision = 0.1;
    w.w_lane_change = 4.0;
    CHECK(total_reward(s, ev, w, kRoad).total == doctest::Approx(2.0 * -0.5 + 3.0 - 0.1 * 50.0 - 4.0 * 0.5));
  }

  TEST_CASE("negative weights are rejected") {
    RewardWeights w;
    w.w_speed = -1.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
  }
}

TEST_SUITE("properties") {
  TEST_CASE("intention reward matches the case-by-case oracle on random states") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto s = random_state(rng);
      double expected = 0.0;
      for (const auto& v : s.vehicles) {
        const double t = oracle_term(v);
        CHECK(std::abs(intention_term(v, kRoad).signed_value - t) <= 1e-12);
        expected += t;
      }
      CHECK(std::abs(intention_reward(s, kRoad) - expected) <= 1e-12);
    }
  }

  TEST_CASE("bounds and zero-action neutrality") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto s = random_state(rng);
      std::size_t cavs = 0;
      for (const auto& v : s.vehicles) cavs += v.is_cav();
      const double ri = intention_reward(s, kRoad);
      const double rv = speed_reward(s, kRoad);
      CHECK(std::abs(ri) <= static_cast<double>(cavs));
      CHECK(rv >= 0.0);
      CHECK(rv <= 1.0);
      CHECK(total_reward(s, {}, {}, kRoad).total == ri + rv);
    }
  }
}
