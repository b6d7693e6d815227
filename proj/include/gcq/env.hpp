#pragma once

#include <cstdint>
#include <functional>

#include "gcq/config.hpp"
#include "gcq/observation.hpp"
#include "gcq/reward.hpp"
#include "gcq/traffic_sim.hpp"

namespace gcq::train {

struct EnvSettings {
  sim::Scenario scenario;
  sim::Flows flows;
  obs::ObservationParams observation;
  reward::RewardWeights reward;
  std::int64_t horizon = 600;

  static EnvSettings from(const RunConfig& cfg);
};

struct EnvStep {
  sim::StepEvents events;
  reward::RewardBreakdown reward;
  bool terminal = false;   // collision this step
  bool truncated = false;  // horizon reached without a collision
};

// One episode of the corridor: simulator + observation + shared reward.
class TrafficEnv {
 public:
  TrafficEnv(EnvSettings settings, std::uint64_t seed);

  void reset(std::uint64_t seed);
  EnvStep step(const sim::CommandMap& cav_commands);

  obs::ObservationTensor observe() const;
  const sim::SimState& state() const { return state_; }
  const EnvSettings& settings() const { return settings_; }
  std::int64_t steps() const { return state_.time_step; }
  bool finished() const { return finished_; }

 private:
  EnvSettings settings_;
  sim::SimState state_;
  bool finished_ = false;
};

using Policy =
    std::function<sim::CommandMap(const TrafficEnv&, const obs::ObservationTensor&, Rng&)>;

struct EpisodeSummary {
  std::int64_t steps = 0;
  double reward_total = 0.0;
  double reward_intention = 0.0;
  double reward_speed = 0.0;
  double penalty_collision = 0.0;
  double penalty_lane_change = 0.0;
  std::int64_t collisions = 0;
  std::int64_t merges_ok = 0;
  std::int64_t merges_failed = 0;
  std::int64_t lane_changes = 0;
  bool terminated = false;

  void add(const EnvStep& step);
};

using StepObserver = std::function<void(const TrafficEnv&, const obs::ObservationTensor&,
                                        const sim::CommandMap&, const EnvStep&)>;

// Runs `policy` from a fresh reset until collision or horizon.
EpisodeSummary run_episode(TrafficEnv& env, const Policy& policy, Rng& policy_rng,
                           const StepObserver& observer = {});

// Uniform random lane command for every CAV.
sim::CommandMap random_commands(const sim::SimState& state, Rng& rng);

}  // namespace gcq::train
