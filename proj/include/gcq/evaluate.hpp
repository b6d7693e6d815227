#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcq/checkpoint.hpp"
#include "gcq/config.hpp"
#include "gcq/env.hpp"

namespace gcq::harness {

struct NamedPolicy {
  std::string name;
  train::Policy policy;
};

struct EvalOptions {
  std::vector<double> inflows{0.1, 0.2, 0.3, 0.4, 0.5};
  int episodes = 10;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct EvalCell {
  std::string policy;
  double hdv_inflow = 0.0;
  std::vector<train::EpisodeSummary> episodes;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  double collision_rate = 0.0;      // fraction of episodes ended by a collision
  double merge_success_rate = 0.0;  // merges_ok / (merges_ok + merges_failed), NaN if none

  std::vector<double> rewards() const;
};

struct EvalReport {
  std::string config_digest;
  std::string structural_digest;
  std::uint64_t seed = 0;
  int episodes = 0;
  std::vector<EvalCell> cells;

  const EvalCell& cell(const std::string& policy, double hdv_inflow) const;
};

// Seed of episode `e` at grid index `k`. Every policy sees the same seeds.
std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t k, int e);

// Runs every policy for E episodes at each HDV inflow of the grid; all other
// settings come from `config`.
EvalReport evaluate(const std::vector<NamedPolicy>& policies, const RunConfig& config,
                    const EvalOptions& options);

// Recomputes the summary statistics of a cell from its episodes.
void summarize(EvalCell& cell);

// Throws DigestMismatchError unless `config` has the structural digest the
// checkpoint was trained under.
void require_compatible(const nn::Checkpoint& ckpt, const RunConfig& config);

// The configuration embedded in a checkpoint.
RunConfig checkpoint_config(const nn::Checkpoint& ckpt);

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::string& out_dir);

}  // namespace gcq::harness
