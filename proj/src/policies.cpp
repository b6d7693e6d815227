#include "gcq/policies.hpp"

#include <memory>

#include "gcq/gcq_model.hpp"

namespace gcq::harness {

using sim::LaneCommand;

namespace {

bool in_mandatory_zone(const sim::Vehicle& v, const sim::RoadSpec& road, double distance) {
  const auto ramp = v.target_ramp();
  if (!ramp || v.missed_ramp || *ramp >= road.ramp_positions.size()) return false;
  const double to_ramp = road.ramp_positions[*ramp] - v.position;
  return to_ramp >= 0.0 && to_ramp <= distance;
}

}  // namespace

sim::CommandMap rule_based_commands(const sim::SimState& state, const sim::Scenario& sc,
                                    const BaselineParams& baseline) {
  sim::SimState scratch = state.scratch_copy();
  for (const auto& [id, cmd] : sim::hdv_commands(state, sc))
    scratch.find(id)->lane += cmd == LaneCommand::Left ? 1 : -1;

  sim::CommandMap out;
  for (auto& v : scratch.vehicles) {
    if (!v.is_cav()) continue;
    LaneCommand cmd;
    if (in_mandatory_zone(v, sc.road, baseline.mandatory_distance)) {
      cmd = v.lane > 0 && sim::lane_change_safe(scratch, v, v.lane - 1, sc) ? LaneCommand::Right
                                                                           : LaneCommand::Keep;
    } else {
      cmd = sim::hdv_lane_policy(scratch, v.id, sc);
    }
    out[v.id] = cmd;
    if (cmd != LaneCommand::Keep) v.lane += cmd == LaneCommand::Left ? 1 : -1;
  }
  return out;
}

train::Policy rule_based_policy(BaselineParams baseline) {
  return [baseline](const train::TrafficEnv& env, const obs::ObservationTensor&, Rng&) {
    return rule_based_commands(env.state(), env.settings().scenario, baseline);
  };
}

train::Policy random_policy() {
  return [](const train::TrafficEnv& env, const obs::ObservationTensor&, Rng& rng) {
    return train::random_commands(env.state(), rng);
  };
}

train::Policy greedy_policy(nn::Network net) {
  auto shared = std::make_shared<const nn::Network>(std::move(net));
  return [shared](const train::TrafficEnv&, const obs::ObservationTensor& o, Rng& rng) {
    const auto compact = obs::CompactObservation::from(o);
    const obs::CompactObservation* one[] = {&compact};
    const auto q = nn::forward(*shared, model::make_batch(one));
    return model::select_actions(q, compact.mask, compact.slot_ids, 0.0, rng);
  };
}

}  // namespace gcq::harness
