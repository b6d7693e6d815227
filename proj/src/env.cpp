#include "gcq/env.hpp"

#include "gcq/error.hpp"

namespace gcq::train {

EnvSettings EnvSettings::from(const RunConfig& cfg) {
  return {cfg.scenario, cfg.flows, cfg.observation_params(), cfg.reward,
          cfg.schedule.episode_horizon};
}

TrafficEnv::TrafficEnv(EnvSettings settings, std::uint64_t seed) : settings_(std::move(settings)) {
  settings_.scenario.validate();
  reset(seed);
}

void TrafficEnv::reset(std::uint64_t seed) {
  state_ = sim::SimState::make(seed);
  finished_ = false;
}

obs::ObservationTensor TrafficEnv::observe() const {
  return obs::observe(state_, settings_.scenario.road, settings_.observation);
}

EnvStep TrafficEnv::step(const sim::CommandMap& cav_commands) {
  if (finished_) throw StateError("step called on a finished episode; reset first");
  EnvStep out;
  out.events = sim::step(state_, cav_commands, settings_.flows, settings_.scenario);
  out.reward = reward::total_reward(state_, out.events, settings_.reward, settings_.scenario.road);
  out.terminal = !out.events.collisions.empty();
  out.truncated = !out.terminal && state_.time_step >= settings_.horizon;
  finished_ = out.terminal || out.truncated;
  return out;
}

void EpisodeSummary::add(const EnvStep& s) {
  ++steps;
  reward_total += s.reward.total;
  reward_intention += s.reward.intention;
  reward_speed += s.reward.speed;
  penalty_collision += s.reward.collision_penalty;
  penalty_lane_change += s.reward.lane_change_penalty;
  collisions += static_cast<std::int64_t>(s.events.collisions.size());
  merges_ok += static_cast<std::int64_t>(s.events.merged_out.size());
  merges_failed += static_cast<std::int64_t>(s.events.missed_ramp.size());
  lane_changes += s.events.cav_lane_changes();
  terminated = terminated || s.terminal;
}

EpisodeSummary run_episode(TrafficEnv& env, const Policy& policy, Rng& policy_rng,
                           const StepObserver& observer) {
  EpisodeSummary summary;
  while (!env.finished()) {
    const auto o = env.observe();
    const auto commands = policy(env, o, policy_rng);
    const EnvStep s = env.step(commands);
    summary.add(s);
    if (observer) observer(env, o, commands, s);
  }
  return summary;
}

sim::CommandMap random_commands(const sim::SimState& state, Rng& rng) {
  sim::CommandMap out;
  for (const auto& v : state.vehicles)
    if (v.is_cav()) out[v.id] = static_cast<sim::LaneCommand>(rng.below(3));
  return out;
}

}  // namespace gcq::train
