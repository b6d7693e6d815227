#include "gcq/reward.hpp"

#include "gcq/error.hpp"

namespace gcq::reward {

void RewardWeights::validate() const {
  if (w_intention < 0 || w_speed < 0 || w_collision < 0 || w_lane_change < 0 ||
      collision_penalty < 0 || lane_change_penalty < 0)
    throw ConfigError("reward weights and penalty values must be non-negative");
}

const char* to_string(IntentionCategory c) {
  switch (c) {
    case IntentionCategory::p11: return "p11";
    case IntentionCategory::r11: return "r11";
    case IntentionCategory::p21: return "p21";
    case IntentionCategory::p22: return "p22";
    case IntentionCategory::r22: return "r22";
    case IntentionCategory::none: return "none";
  }
  return "?";
}

double category_value(IntentionCategory c, double x, double segment_length) {
  switch (c) {
    case IntentionCategory::p11:
    case IntentionCategory::p21:
    case IntentionCategory::p22:
      return x / segment_length;
    case IntentionCategory::r11:
    case IntentionCategory::r22:
      return 1.0 - x / segment_length;
    case IntentionCategory::none:
      return 0.0;
  }
  return 0.0;
}

IntentionTerm intention_term(const sim::Vehicle& v, const sim::RoadSpec& road, bool p21_top_lane) {
  IntentionTerm term{.id = v.id};
  if (!v.is_cav()) return term;
  const std::size_t seg = road.segment_of(v.position);
  const double x = v.position - road.segment_start(seg);
  const bool bottom = v.lane == 0;

  IntentionCategory cat = IntentionCategory::none;
  if (v.intention == sim::Intention::Ramp1 && seg == 0) {
    cat = bottom ? IntentionCategory::r11 : IntentionCategory::p11;
  } else if (v.intention == sim::Intention::Ramp2 && seg == 0) {
    const bool penalized = p21_top_lane ? v.lane == road.lane_count - 1 : bottom;
    if (penalized) cat = IntentionCategory::p21;
  } else if (v.intention == sim::Intention::Ramp2 && seg == 1) {
    cat = bottom ? IntentionCategory::r22 : IntentionCategory::p22;
  }
  if (cat == IntentionCategory::none) return term;

  term.category = cat;
  term.value = category_value(cat, x, road.segment_length(seg));
  const bool is_reward = cat == IntentionCategory::r11 || cat == IntentionCategory::r22;
  term.signed_value = is_reward ? term.value : -term.value;
  return term;
}

double intention_reward(const sim::SimState& state, const sim::RoadSpec& road, bool p21_top_lane) {
  double total = 0.0;
  for (const auto& v : state.vehicles)
    if (v.alive && v.is_cav()) total += intention_term(v, road, p21_top_lane).signed_value;
  return total;
}

double speed_reward(const sim::SimState& state, const sim::RoadSpec& road) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : state.vehicles) {
    if (!v.alive || !v.is_cav()) continue;
    sum += v.speed / road.speed_limit_cav;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

RewardBreakdown total_reward(const sim::SimState& state, const sim::StepEvents& events,
                             const RewardWeights& weights, const sim::RoadSpec& road) {
  RewardBreakdown r;
  r.intention = intention_reward(state, road, weights.p21_top_lane);
  r.speed = speed_reward(state, road);
  r.collision_penalty = weights.collision_penalty * static_cast<double>(events.collisions.size());
  r.lane_change_penalty = weights.lane_change_penalty * static_cast<double>(events.cav_lane_changes());
  r.total = weights.w_intention * r.intention + weights.w_speed * r.speed -
            weights.w_collision * r.collision_penalty - weights.w_lane_change * r.lane_change_penalty;
  return r;
}

}  // namespace gcq::reward
