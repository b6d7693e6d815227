#include "gcq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "gcq/error.hpp"

namespace gcq::train {

std::vector<std::uint8_t> next_alive_mask(const obs::CompactObservation& s,
                                          const obs::CompactObservation& s_next) {
  std::vector<std::uint8_t> out(s.n_real(), 0);
  for (std::size_t i = 0; i < s.n_real(); ++i)
    if (s.mask[i] && s_next.slot_of(s.slot_ids[i]) >= 0) out[i] = 1;
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count) {
  if (items_.empty()) throw StateError("cannot sample from an empty replay buffer");
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = static_cast<std::size_t>(rng_.below(items_.size()));
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count) {
  std::vector<const Transition*> out;
  out.reserve(count);
  for (auto i : sample_indices(count)) out.push_back(&items_[i]);
  return out;
}

TargetBatch compute_targets(std::span<const Transition* const> batch, const nn::Network& target,
                            double gamma, const nn::Network* double_q_online) {
  if (batch.empty()) throw StateError("compute_targets: empty batch");
  std::size_t rows = 0;
  std::vector<const obs::CompactObservation*> next;
  for (const auto* t : batch) {
    rows += t->s->n_real();
    if (!t->done) next.push_back(t->s_next.get());
  }
  nn::Matrix q_next, q_pick;
  if (!next.empty()) {
    const auto next_batch = model::make_batch(next);
    q_next = nn::forward(target, next_batch);
    if (double_q_online) q_pick = nn::forward(*double_q_online, next_batch);
  }

  TargetBatch out{nn::Matrix(rows, model::kActionCount), nn::Matrix(rows, model::kActionCount)};
  std::size_t row = 0;
  std::size_t next_row = 0;
  for (const auto* t : batch) {
    for (std::size_t i = 0; i < t->s->n_real(); ++i) {
      const int a = t->actions.at(i);
      if (a == model::kNoAction) continue;
      double y = t->reward;
      if (!t->done && t->next_alive.at(i)) {
        const auto j = t->s_next->slot_of(t->s->slot_ids[i]);
        if (j < 0)
          throw StateError("vehicle " + std::to_string(t->s->slot_ids[i]) +
                           " marked alive but missing from the next observation");
        const std::size_t r = next_row + static_cast<std::size_t>(j);
        double bootstrap;
        if (double_q_online) {
          bootstrap = q_next(r, static_cast<std::size_t>(model::greedy_action(q_pick.row(r))));
        } else {
          bootstrap = std::max({q_next(r, 0), q_next(r, 1), q_next(r, 2)});
        }
        y += gamma * bootstrap;
      }
      out.y(row + i, static_cast<std::size_t>(a)) = y;
      out.sel(row + i, static_cast<std::size_t>(a)) = 1.0;
    }
    row += t->s->n_real();
    if (!t->done) next_row += t->s_next->n_real();
  }
  return out;
}

std::uint64_t Trainer::episode_seed(std::uint64_t run_seed, std::int64_t episode) {
  return mix_seed(mix_seed(run_seed) ^ static_cast<std::uint64_t>(episode));
}

Trainer::Trainer(EnvSettings env, TrainerOptions options)
    : options_(std::move(options)),
      env_(std::move(env), episode_seed(options_.seed, 0)),
      buffer_(options_.schedule.replay_capacity, mix_seed(options_.seed + 2)),
      act_rng_(mix_seed(options_.seed + 3)) {
  options_.schedule.validate();
  options_.shape.feature_width = obs::feature_width(env_.settings().scenario.road.lane_count);
  Rng init(mix_seed(options_.seed + 1));
  online_ = model::build_gcq(options_.shape, init);
  target_ = online_;
  adam_ = nn::AdamState::for_network(online_);
  current_ = std::make_shared<const obs::CompactObservation>(obs::CompactObservation::from(env_.observe()));
}

void Trainer::start_episode() {
  ++episode_;
  env_.reset(episode_seed(options_.seed, episode_));
  current_ = std::make_shared<const obs::CompactObservation>(obs::CompactObservation::from(env_.observe()));
}

CollectResult Trainer::collect_step(bool warmup) {
  const auto& s = *current_;
  sim::CommandMap commands;
  if (warmup) {
    commands = random_commands(env_.state(), act_rng_);
  } else {
    const obs::CompactObservation* one[] = {&s};
    const nn::Matrix q = nn::forward(online_, model::make_batch(one));
    commands = model::select_actions(q, s.mask, s.slot_ids, options_.schedule.epsilon, act_rng_);
  }

  Transition t;
  t.s = current_;
  t.actions.assign(s.n_real(), model::kNoAction);
  for (std::size_t i = 0; i < s.n_real(); ++i) {
    if (!s.mask[i]) continue;
    auto it = commands.find(s.slot_ids[i]);
    t.actions[i] = model::command_to_action(it == commands.end() ? sim::LaneCommand::Keep : it->second);
  }

  CollectResult out;
  out.step = env_.step(commands);
  t.reward = out.step.reward.total;
  t.done = out.step.terminal;
  t.s_next = std::make_shared<const obs::CompactObservation>(obs::CompactObservation::from(env_.observe()));
  t.next_alive = next_alive_mask(s, *t.s_next);
  current_ = t.s_next;
  buffer_.push(std::move(t));

  out.episode_over = env_.finished();
  if (out.episode_over) start_episode();
  return out;
}

std::optional<double> Trainer::train_step() {
  const auto& sch = options_.schedule;
  if (buffer_.size() < sch.batch_size) return std::nullopt;
  const auto indices = buffer_.sample_indices(sch.batch_size);
  std::vector<const Transition*> batch;
  std::vector<const obs::CompactObservation*> states;
  for (auto i : indices) {
    batch.push_back(&buffer_.at(i));
    states.push_back(batch.back()->s.get());
  }

  nn::Tape tape;
  const nn::Matrix q = nn::forward(online_, model::make_batch(states), &tape);
  const auto targets = compute_targets(batch, target_, sch.gamma,
                                       options_.ablation.double_q ? &online_ : nullptr);
  const auto loss = nn::masked_mse(q, targets.y, targets.sel);
  if (!std::isfinite(loss.loss)) {
    std::string ids;
    for (auto i : indices) ids += (ids.empty() ? "" : ",") + std::to_string(i);
    throw NumericError("non-finite loss at train step " + std::to_string(train_steps_) +
                       " (batch indices " + ids + ")");
  }
  const auto grads = nn::backward(online_, tape, loss.grad);
  nn::adam_step(online_, grads, adam_, sch.lr);
  ++train_steps_;

  if (options_.ablation.hard_target_every > 0) {
    if (train_steps_ % options_.ablation.hard_target_every == 0) target_ = online_;
  } else {
    nn::soft_update(target_, online_, sch.tau);
  }
  return loss.loss;
}

std::string metrics_line(const EpisodeMetrics& m) {
  nlohmann::ordered_json j;
  const auto& s = m.summary;
  j["episode"] = m.episode;
  j["steps"] = s.steps;
  j["reward_total"] = s.reward_total;
  j["reward_intention"] = s.reward_intention;
  j["reward_speed"] = s.reward_speed;
  j["penalty_collision"] = s.penalty_collision;
  j["penalty_lane_change"] = s.penalty_lane_change;
  j["collisions"] = s.collisions;
  j["merges_ok"] = s.merges_ok;
  j["merges_failed"] = s.merges_failed;
  if (m.loss_count > 0) {
    j["mean_loss"] = m.mean_loss;
  } else {
    j["mean_loss"] = nullptr;
  }
  j["epsilon"] = m.epsilon;
  j["wallclock_s"] = m.wallclock_s;
  return j.dump();
}

std::string metrics_header_line(const RunConfig& config) {
  nlohmann::ordered_json j;
  j["header"] = {{"config_digest", config.digest()},
                 {"structural_digest", config.structural_digest()},
                 {"preset", to_string(config.preset)},
                 {"seed", config.seed}};
  return j.dump();
}

nn::Checkpoint make_checkpoint(const nn::Network& net, const RunConfig& config, std::uint64_t step) {
  return {net, config.digest(), config.structural_digest(), config.canonical_text(), step};
}

TrainingResult run_training(const RunConfig& config, const std::string& out_dir,
                            const TrainingHooks& hooks) {
  config.validate();
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  const auto& sch = config.schedule;

  std::ofstream metrics;
  if (hooks.write_files) {
    fs::create_directories(fs::path(out_dir) / "checkpoints");
    metrics.open(fs::path(out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics to '" + out_dir + "'");
    metrics << metrics_header_line(config) << "\n";
  }

  Trainer trainer(EnvSettings::from(config),
                  TrainerOptions{sch, config.ablation, model::ModelShape{}, config.seed});
  TrainingResult result;

  EpisodeMetrics current;
  double loss_sum = 0.0;
  for (std::int64_t t = 0; t < sch.total_steps; ++t) {
    const bool warmup = t < sch.warmup_steps;
    CollectResult step;
    try {
      step = trainer.collect_step(warmup);
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " [episode " + std::to_string(trainer.episode_index()) +
                  ", episode seed " +
                  std::to_string(Trainer::episode_seed(config.seed, trainer.episode_index())) +
                  ", step " + std::to_string(trainer.env().steps()) + "]");
    }
    current.summary.add(step.step);
    if (!warmup && t % sch.train_every == 0) {
      if (auto loss = trainer.train_step()) {
        loss_sum += *loss;
        ++current.loss_count;
      }
    }
    if (step.episode_over) {
      current.episode = trainer.episode_index() - 1;
      current.mean_loss = current.loss_count ? loss_sum / static_cast<double>(current.loss_count) : 0.0;
      current.epsilon = warmup ? 1.0 : sch.epsilon;
      current.wallclock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      if (hooks.write_files) metrics << metrics_line(current) << "\n" << std::flush;
      if (hooks.on_episode) hooks.on_episode(current);
      result.episodes.push_back(current);
      current = EpisodeMetrics{};
      loss_sum = 0.0;
    }
    if (hooks.write_files && sch.checkpoint_every > 0 && (t + 1) % sch.checkpoint_every == 0 &&
        t + 1 < sch.total_steps) {
      const auto path = (fs::path(out_dir) / "checkpoints" /
                         ("step_" + std::to_string(t + 1) + ".ckpt")).string();
      nn::save_checkpoint(path, make_checkpoint(trainer.online(), config, static_cast<std::uint64_t>(t + 1)));
      result.checkpoints.push_back(path);
    }
  }

  result.network = trainer.online();
  if (hooks.write_files) {
    result.final_checkpoint = (fs::path(out_dir) / "checkpoints" / "final.ckpt").string();
    nn::save_checkpoint(result.final_checkpoint,
                        make_checkpoint(result.network, config, static_cast<std::uint64_t>(sch.total_steps)));
  }
  return result;
}

}  // namespace gcq::train
