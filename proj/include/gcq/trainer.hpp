#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcq/checkpoint.hpp"
#include "gcq/config.hpp"
#include "gcq/env.hpp"
#include "gcq/gcq_model.hpp"
#include "gcq/optim.hpp"

namespace gcq::train {

using ObsPtr = std::shared_ptr<const obs::CompactObservation>;

// One replay record. `actions` and `next_alive` are indexed by the real
// slots of `s`; slots without a CAV hold model::kNoAction and 0.
struct Transition {
  ObsPtr s;
  std::vector<int> actions;
  double reward = 0.0;
  ObsPtr s_next;
  bool done = false;
  std::vector<std::uint8_t> next_alive;
};

// 1 where the CAV in slot i of `s` is still present in `s_next`.
std::vector<std::uint8_t> next_alive_mask(const obs::CompactObservation& s,
                                          const obs::CompactObservation& s_next);

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Uniform with replacement over the current contents.
  std::vector<std::size_t> sample_indices(std::size_t count);
  std::vector<const Transition*> sample(std::size_t count);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
  Rng rng_;
};

// Regression targets over the stacked real rows of every `s` in the batch,
// and a selection matrix that is 1 exactly at (CAV slot, taken action).
struct TargetBatch {
  nn::Matrix y;
  nn::Matrix sel;
};

// Bootstraps from `target` at the slot holding the same vehicle in s_next.
// With `double_q_online`, that network picks the argmax and `target`
// evaluates it.
TargetBatch compute_targets(std::span<const Transition* const> batch, const nn::Network& target,
                            double gamma, const nn::Network* double_q_online = nullptr);

struct CollectResult {
  EnvStep step;
  bool episode_over = false;
};

struct TrainerOptions {
  TrainSchedule schedule;
  Ablation ablation;
  model::ModelShape shape;
  std::uint64_t seed = 1;
};

// The learning state of one run: online and target networks, optimizer,
// replay memory and the environment being explored.
class Trainer {
 public:
  Trainer(EnvSettings env, TrainerOptions options);

  // Acts once (uniform random when `warmup`, else epsilon-greedy), steps the
  // environment and stores the transition. Resets the episode when it ends.
  CollectResult collect_step(bool warmup);

  // One gradient step on a sampled batch followed by the target update.
  // Returns nullopt (and does nothing) while the buffer holds less than a batch.
  std::optional<double> train_step();

  const nn::Network& online() const { return online_; }
  const nn::Network& target() const { return target_; }
  nn::Network& online() { return online_; }
  nn::Network& target() { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  TrafficEnv& env() { return env_; }
  std::int64_t train_steps() const { return train_steps_; }
  std::int64_t episode_index() const { return episode_; }

  static std::uint64_t episode_seed(std::uint64_t run_seed, std::int64_t episode);

 private:
  void start_episode();

  TrainerOptions options_;
  TrafficEnv env_;
  nn::Network online_;
  nn::Network target_;
  nn::AdamState adam_;
  ReplayBuffer buffer_;
  Rng act_rng_;
  ObsPtr current_;
  std::int64_t train_steps_ = 0;
  std::int64_t episode_ = 0;
};

// Per-episode metrics record.
struct EpisodeMetrics {
  std::int64_t episode = 0;
  EpisodeSummary summary;
  double mean_loss = 0.0;
  std::int64_t loss_count = 0;
  double epsilon = 0.0;
  double wallclock_s = 0.0;
};

struct TrainingResult {
  nn::Network network;
  std::vector<EpisodeMetrics> episodes;
  std::vector<std::string> checkpoints;
  std::string final_checkpoint;
};

struct TrainingHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  bool write_files = true;
};

// Warm-up then the main loop; writes metrics.jsonl, checkpoints/step_*.ckpt
// and final.ckpt under `out_dir` when write_files is set.
TrainingResult run_training(const RunConfig& config, const std::string& out_dir,
                            const TrainingHooks& hooks = {});

// JSON line for one episode (no trailing newline).
std::string metrics_line(const EpisodeMetrics& m);
std::string metrics_header_line(const RunConfig& config);

nn::Checkpoint make_checkpoint(const nn::Network& net, const RunConfig& config, std::uint64_t step);

}  // namespace gcq::train
