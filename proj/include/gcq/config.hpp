#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gcq/observation.hpp"
#include "gcq/reward.hpp"
#include "gcq/traffic_sim.hpp"

namespace gcq {

struct TrainSchedule {
  std::int64_t warmup_steps = 5'000;
  std::int64_t total_steps = 50'000;
  std::size_t batch_size = 32;
  double epsilon = 0.3;
  double gamma = 0.99;
  double lr = 1e-3;
  double tau = 1e-2;
  std::int64_t train_every = 1;
  std::int64_t episode_horizon = 600;
  std::size_t replay_capacity = 100'000;
  std::int64_t checkpoint_every = 10'000;  // 0 disables periodic checkpoints

  void validate() const;
};

struct Ablation {
  bool no_fusion = false;
  bool double_q = false;
  std::int64_t hard_target_every = 0;  // > 0 replaces soft updates by periodic copies
};

struct BaselineParams {
  double mandatory_distance = 100.0;
};

enum class Preset { Desk, Paper };

struct RunConfig {
  sim::Scenario scenario;
  sim::Flows flows;
  obs::ObservationParams observation;
  reward::RewardWeights reward;
  TrainSchedule schedule;
  Ablation ablation;
  BaselineParams baseline;
  std::uint64_t seed = 1;
  Preset preset = Preset::Desk;

  static RunConfig preset_config(Preset preset);

  void validate() const;

  // Sorted "key = value" lines; the basis for digests and config files.
  std::string canonical_text() const;
  // SHA-256 of canonical_text().
  std::string digest() const;
  // SHA-256 over the sections that change what a checkpoint means: road,
  // dynamics, observation, reward, and the fusion ablation. Flows, schedule,
  // and seed are excluded so density sweeps can reuse a checkpoint.
  std::string structural_digest() const;

  obs::ObservationParams observation_params() const;
};

const char* to_string(Preset preset);

// All recognised dotted keys in canonical order.
std::vector<std::string> config_keys();

// Sets one key from its text form. Throws ConfigError on unknown keys or
// unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

// Parses "key = value" lines ('#' starts a comment). A `preset` line is
// applied before all other keys regardless of its position.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies GCQ_<SECTION>__<KEY> variables (double underscore for each dot,
// case-insensitive) from `env`, e.g. GCQ_SCHEDULE__TOTAL_STEPS=2000.
void apply_env_overrides(RunConfig& cfg, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_environment();

// Round-trip text form of a double.
std::string format_double(double v);

std::string sha256_hex(const std::string& data);

}  // namespace gcq
