#include "gcq/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "gcq/error.hpp"
#include "gcq/stats.hpp"

namespace gcq::harness {

std::vector<double> EvalCell::rewards() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.reward_total);
  return out;
}

const EvalCell& EvalReport::cell(const std::string& policy, double hdv_inflow) const {
  for (const auto& c : cells)
    if (c.policy == policy && c.hdv_inflow == hdv_inflow) return c;
  throw StateError("no evaluation cell for policy '" + policy + "' at inflow " +
                   format_double(hdv_inflow));
}

std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t k, int e) {
  return mix_seed(mix_seed(seed ^ 0x5eed'e7a1ULL) + (static_cast<std::uint64_t>(k) << 32) +
                  static_cast<std::uint64_t>(e));
}

void require_compatible(const nn::Checkpoint& ckpt, const RunConfig& config) {
  const auto digest = config.structural_digest();
  if (digest != ckpt.structural_digest)
    throw DigestMismatchError("checkpoint structural digest " + ckpt.structural_digest.substr(0, 12) +
                              " does not match the evaluation config " + digest.substr(0, 12));
}

RunConfig checkpoint_config(const nn::Checkpoint& ckpt) {
  RunConfig cfg = parse_config(ckpt.config_text);
  require_compatible(ckpt, cfg);
  return cfg;
}

void summarize(EvalCell& cell) {
  if (cell.episodes.empty()) throw StateError("evaluation cell without episodes");
  const auto r = cell.rewards();
  cell.mean = stats::mean(r);
  cell.median = stats::median(r);
  cell.std = stats::sample_std(r);
  std::int64_t collided = 0, ok = 0, failed = 0;
  for (const auto& e : cell.episodes) {
    collided += e.collisions > 0 ? 1 : 0;
    ok += e.merges_ok;
    failed += e.merges_failed;
  }
  cell.collision_rate = static_cast<double>(collided) / static_cast<double>(cell.episodes.size());
  cell.merge_success_rate =
      ok + failed > 0 ? static_cast<double>(ok) / static_cast<double>(ok + failed) : NAN;
}

EvalReport evaluate(const std::vector<NamedPolicy>& policies, const RunConfig& config,
                    const EvalOptions& options) {
  if (options.episodes < 1) throw ConfigError("evaluation needs at least one episode");
  if (options.inflows.empty()) throw ConfigError("evaluation needs at least one inflow");
  for (double f : options.inflows)
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("inflow must be a finite value >= 0");
  config.validate();

  EvalReport report;
  report.config_digest = config.digest();
  report.structural_digest = config.structural_digest();
  report.seed = options.seed;
  report.episodes = options.episodes;

  struct Job {
    std::size_t cell;
    std::size_t k;
    int e;
  };
  std::vector<Job> jobs;
  for (const auto& p : policies) {
    for (std::size_t k = 0; k < options.inflows.size(); ++k) {
      EvalCell c;
      c.policy = p.name;
      c.hdv_inflow = options.inflows[k];
      c.episodes.resize(static_cast<std::size_t>(options.episodes));
      for (int e = 0; e < options.episodes; ++e) jobs.push_back({report.cells.size(), k, e});
      report.cells.push_back(std::move(c));
    }
  }

  auto run_job = [&](const Job& job) {
    const auto& cell = report.cells[job.cell];
    const auto& policy = policies[job.cell / options.inflows.size()].policy;
    train::EnvSettings settings = train::EnvSettings::from(config);
    settings.flows.hdv = cell.hdv_inflow;
    const std::uint64_t seed = eval_episode_seed(options.seed, job.k, job.e);
    train::TrafficEnv env(settings, seed);
    Rng policy_rng(mix_seed(seed + 1));
    return train::run_episode(env, policy, policy_rng);
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    for (const auto& job : jobs)
      report.cells[job.cell].episodes[static_cast<std::size_t>(job.e)] = run_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          try {
            const auto summary = run_job(jobs[i]);
            report.cells[jobs[i].cell].episodes[static_cast<std::size_t>(jobs[i].e)] = summary;
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (auto& c : report.cells) summarize(c);
  return report;
}

namespace {

nlohmann::ordered_json nan_to_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : ""; }

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "policy,hdv_inflow,episodes,mean,median,std,collision_rate,merge_success_rate\n";
  for (const auto& c : report.cells) {
    out << c.policy << ',' << format_double(c.hdv_inflow) << ',' << c.episodes.size() << ','
        << format_double(c.mean) << ',' << format_double(c.median) << ',' << format_double(c.std)
        << ',' << format_double(c.collision_rate) << ',' << csv_number(c.merge_success_rate)
        << '\n';
  }
  return out.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["config_digest"] = report.config_digest;
  j["structural_digest"] = report.structural_digest;
  j["seed"] = report.seed;
  j["episodes_per_cell"] = report.episodes;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json cj;
    cj["policy"] = c.policy;
    cj["hdv_inflow"] = c.hdv_inflow;
    cj["mean"] = c.mean;
    cj["median"] = c.median;
    cj["std"] = c.std;
    cj["collision_rate"] = c.collision_rate;
    cj["merge_success_rate"] = nan_to_null(c.merge_success_rate);
    auto& eps = cj["episodes"] = nlohmann::ordered_json::array();
    for (const auto& e : c.episodes) {
      eps.push_back({{"steps", e.steps},
                     {"reward_total", e.reward_total},
                     {"reward_intention", e.reward_intention},
                     {"reward_speed", e.reward_speed},
                     {"penalty_collision", e.penalty_collision},
                     {"penalty_lane_change", e.penalty_lane_change},
                     {"collisions", e.collisions},
                     {"merges_ok", e.merges_ok},
                     {"merges_failed", e.merges_failed},
                     {"lane_changes", e.lane_changes}});
    }
    cells.push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::trunc);
    if (!f) throw Error("cannot write " + (fs::path(out_dir) / name).string());
    f << text;
  };
  write("eval_report.csv", report_csv(report));
  write("eval_report.json", report_json(report));
}

}  // namespace gcq::harness
