#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "gcq/checkpoint.hpp"
#include "gcq/config.hpp"
#include "gcq/error.hpp"
#include "gcq/evaluate.hpp"
#include "gcq/gcq_model.hpp"
#include "gcq/policies.hpp"
#include "gcq/recording.hpp"
#include "gcq/trainer.hpp"

namespace {

using namespace gcq;

constexpr double kGradcheckTolerance = 1e-4;

struct Exit {
  int code;
};

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const DigestMismatchError*>(&e)) return "digest_mismatch";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
  if (dynamic_cast<const StateError*>(&e)) return "state";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
  if (dynamic_cast<const Error*>(&e)) return "runtime";
  return "internal";
}

std::vector<double> parse_inflows(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid inflow '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty inflow list");
  return out;
}

RunConfig resolve_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig::preset_config(Preset::Desk) : load_config(path);
  apply_env_overrides(cfg, process_environment());
  cfg.validate();
  return cfg;
}

train::Policy policy_from_spec(const std::string& spec, const RunConfig& cfg,
                               const std::string& config_path, RunConfig* resolved) {
  if (spec == "random") return harness::random_policy();
  if (spec == "rule_based") return harness::rule_based_policy(cfg.baseline);
  const auto ckpt = nn::load_checkpoint(spec);
  if (resolved) *resolved = config_path.empty() ? harness::checkpoint_config(ckpt) : cfg;
  harness::require_compatible(ckpt, resolved ? *resolved : cfg);
  return harness::greedy_policy(ckpt.network);
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out) {
  RunConfig cfg = resolve_config(config_path);
  if (seed) cfg.seed = *seed;
  const auto result = train::run_training(cfg, out);
  double last = 0.0;
  if (!result.episodes.empty()) last = result.episodes.back().summary.reward_total;
  nlohmann::ordered_json j{{"status", "ok"},
                           {"episodes", result.episodes.size()},
                           {"last_episode_reward", last},
                           {"checkpoint", result.final_checkpoint},
                           {"config_digest", cfg.digest()}};
  std::cout << j.dump() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& inflows, int episodes, const std::string& baselines,
             std::uint64_t seed, int workers, const std::string& out) {
  const auto ckpt = nn::load_checkpoint(checkpoint);
  RunConfig cfg = config_path.empty() ? harness::checkpoint_config(ckpt) : load_config(config_path);
  apply_env_overrides(cfg, process_environment());
  cfg.validate();
  harness::require_compatible(ckpt, cfg);

  std::vector<harness::NamedPolicy> policies{{"gcq", harness::greedy_policy(ckpt.network)}};
  std::stringstream in(baselines);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    if (name == "rule_based") {
      policies.push_back({name, harness::rule_based_policy(cfg.baseline)});
    } else if (name == "random") {
      policies.push_back({name, harness::random_policy()});
    } else {
      throw ConfigError("unknown baseline '" + name + "' (expected rule_based or random)");
    }
  }

  harness::EvalOptions options;
  if (!inflows.empty()) options.inflows = parse_inflows(inflows);
  options.episodes = episodes;
  options.seed = seed;
  options.workers = workers;
  const auto report = harness::evaluate(policies, cfg, options);
  harness::write_report(report, out);
  std::cout << harness::report_csv(report);
  return 0;
}

int run_rollout(const std::string& policy_spec, const std::string& config_path,
                std::int64_t steps, bool dump_obs, std::uint64_t seed, const std::string& out) {
  RunConfig cfg = resolve_config(config_path);
  RunConfig resolved = cfg;
  const auto policy = policy_from_spec(policy_spec, cfg, config_path, &resolved);
  train::EnvSettings settings = train::EnvSettings::from(resolved);
  const auto r = harness::rollout(policy, settings, {steps, dump_obs, seed}, out);
  nlohmann::ordered_json j{{"status", "ok"},
                           {"steps", r.steps},
                           {"episodes", r.episodes},
                           {"reward_total", r.totals.reward_total},
                           {"collisions", r.totals.collisions}};
  std::cout << j.dump() << "\n";
  return 0;
}

int run_gradcheck(int seeds, std::uint64_t first_seed) {
  double worst = 0.0;
  std::string worst_where;
  for (int i = 0; i < seeds; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    const auto r = model::gradcheck_gcq(seed);
    std::cout << "seed " << seed << "  max_relative_error " << r.max_relative_error << "  ("
              << r.parameters_checked << " parameters, worst " << r.worst_parameter << ")\n";
    if (!(r.max_relative_error <= worst)) {
      worst = r.max_relative_error;
      worst_where = r.worst_parameter;
    }
  }
  const bool ok = worst < kGradcheckTolerance;
  std::cout << "max relative error over " << seeds << " seeds: " << worst << " at " << worst_where
            << (ok ? "  [ok]" : "  [FAIL]") << "\n";
  return ok ? 0 : 1;
}

int run_describe(const std::string& checkpoint) {
  nn::Network net;
  if (checkpoint.empty()) {
    Rng rng(1);
    net = model::build_gcq(model::ModelShape{}, rng);
  } else {
    net = nn::load_checkpoint(checkpoint).network;
  }
  std::cout << model::describe(net);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCQ lab: cooperative lane changing on a three-lane off-ramp corridor"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, inflows, baselines = "rule_based,random",
                                                     policy_spec = "rule_based";
  std::uint64_t seed = 1;
  int episodes = 10, workers = 1, seeds = 20;
  std::int64_t steps = 600;
  bool dump_obs = false;

  auto* train_cmd = app.add_subcommand("train", "Train a GCQ model");
  train_cmd->add_option("--config", config_path, "Config file (defaults to the desk preset)")
      ->check(CLI::ExistingFile);
  auto* train_seed = train_cmd->add_option("--seed", seed, "Run seed (overrides the config)");
  train_cmd->add_option("--out", out, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Density sweep of a checkpoint against baselines");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--config", config_path, "Config (defaults to the one in the checkpoint)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--inflows", inflows, "Comma-separated HDV inflows in veh/s");
  eval_cmd->add_option("--episodes", episodes, "Episodes per cell")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--baselines", baselines, "Comma-separated: rule_based, random")
      ->capture_default_str();
  eval_cmd->add_option("--seed", seed, "Evaluation seed")->capture_default_str();
  eval_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", out, "Output directory")->required();

  auto* rollout_cmd = app.add_subcommand("rollout", "Record trajectories of one policy");
  rollout_cmd->add_option("--policy", policy_spec, "random, rule_based, or a checkpoint path")
      ->capture_default_str();
  rollout_cmd->add_option("--steps", steps, "Environment steps")->check(CLI::PositiveNumber);
  rollout_cmd->add_flag("--dump-obs", dump_obs, "Also write observations.jsonl");
  rollout_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  rollout_cmd->add_option("--seed", seed, "Rollout seed")->capture_default_str();
  rollout_cmd->add_option("--out", out, "Output directory")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  grad_cmd->add_option("--seeds", seeds, "Number of random seeds")->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad_cmd->add_option("--seed", seed, "First seed")->capture_default_str();

  auto* describe_cmd = app.add_subcommand("describe", "Layer table and parameter count");
  describe_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (defaults to a fresh model)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd)
      return run_train(config_path, train_seed->count() ? std::optional(seed) : std::nullopt, out);
    if (*eval_cmd)
      return run_eval(checkpoint, config_path, inflows, episodes, baselines, seed, workers, out);
    if (*rollout_cmd) return run_rollout(policy_spec, config_path, steps, dump_obs, seed, out);
    if (*grad_cmd) return run_gradcheck(seeds, seed);
    if (*describe_cmd) return run_describe(checkpoint);
  } catch (const std::exception& e) {
    nlohmann::ordered_json j{{"status", "error"}, {"kind", error_kind(e)}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 1;
  }
  return 2;
}
