#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "gcq/env.hpp"

namespace gcq::harness {

struct RolloutOptions {
  std::int64_t steps = 600;
  bool dump_observations = false;
  std::uint64_t seed = 1;
};

struct RolloutResult {
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  train::EpisodeSummary totals;
};

// trajectories.csv: one row per vehicle per step, after the step. Vehicles
// removed during the step appear once more with their final state.
std::string trajectory_header();
std::string trajectory_rows(std::int64_t episode, const sim::SimState& state,
                            const sim::CommandMap& commands, const sim::StepEvents* events = nullptr);

// events.jsonl: one line per step with the reward decomposition and events.
std::string event_line(std::int64_t episode, std::int64_t step, const train::EnvStep& s);

// One JSON line per step with the observation the policy acted on.
std::string observation_line(std::int64_t episode, std::int64_t step,
                             const obs::ObservationTensor& o);

// Runs `policy` for exactly `steps` environment steps, starting a new
// episode whenever one ends, and writes trajectories.csv (plus
// observations.jsonl when requested), events.jsonl and rollout_summary.json
// into `out_dir`.
RolloutResult rollout(const train::Policy& policy, const train::EnvSettings& settings,
                      const RolloutOptions& options, const std::string& out_dir);

}  // namespace gcq::harness
