#pragma once

#include "gcq/traffic_sim.hpp"

namespace gcq::reward {

struct RewardWeights {
  double w_intention = 1.0;
  double w_speed = 1.0;
  double w_collision = 1.0;
  double w_lane_change = 1.0;
  double collision_penalty = 50.0;   // per colliding pair
  double lane_change_penalty = 0.5;  // per executed CAV lane change
  // Apply p21 to Ramp2 CAVs on the top lane instead of the bottom lane.
  bool p21_top_lane = false;

  void validate() const;
};

// First index: CAV type (1 = ramp 1, 2 = ramp 2); second: segment.
enum class IntentionCategory { p11, r11, p21, p22, r22, none };

const char* to_string(IntentionCategory c);

struct IntentionTerm {
  sim::VehicleId id = 0;
  IntentionCategory category = IntentionCategory::none;
  double value = 0.0;         // in [0, 1]
  double signed_value = 0.0;  // +value for rewards, -value for penalties
};

// Closed-form value of a category at in-segment offset x on a segment of length L.
double category_value(IntentionCategory c, double x, double segment_length);

IntentionTerm intention_term(const sim::Vehicle& v, const sim::RoadSpec& road,
                             bool p21_top_lane = false);

double intention_reward(const sim::SimState& state, const sim::RoadSpec& road,
                        bool p21_top_lane = false);

// Mean CAV speed over the CAV speed limit; 0 with no CAVs.
double speed_reward(const sim::SimState& state, const sim::RoadSpec& road);

struct RewardBreakdown {
  double intention = 0.0;
  double speed = 0.0;
  double collision_penalty = 0.0;
  double lane_change_penalty = 0.0;
  double total = 0.0;
};

// Shared reward for the step that produced `events` and left `state`.
RewardBreakdown total_reward(const sim::SimState& state, const sim::StepEvents& events,
                             const RewardWeights& weights, const sim::RoadSpec& road);

}  // namespace gcq::reward
