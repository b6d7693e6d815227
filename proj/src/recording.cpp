#include "gcq/recording.hpp"

#include <filesystem>
#include <map>
#include <json.hpp>
#include <sstream>

#include "gcq/config.hpp"
#include "gcq/error.hpp"

namespace gcq::harness {

namespace {

const char* kind_name(sim::VehicleKind k) { return k == sim::VehicleKind::CAV ? "cav" : "hdv"; }

const char* intention_name(sim::Intention i) {
  switch (i) {
    case sim::Intention::Ramp1: return "ramp1";
    case sim::Intention::Ramp2: return "ramp2";
    case sim::Intention::Through: return "through";
    case sim::Intention::Unobserved: return "unobserved";
  }
  return "?";
}

const char* command_name(const sim::CommandMap& commands, sim::VehicleId id) {
  auto it = commands.find(id);
  if (it == commands.end()) return "";
  switch (it->second) {
    case sim::LaneCommand::Left: return "left";
    case sim::LaneCommand::Keep: return "keep";
    case sim::LaneCommand::Right: return "right";
  }
  return "";
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

}  // namespace

std::string trajectory_header() {
  return "episode,step,id,kind,intention,lane,position_m,speed_mps,command,event\n";
}

namespace {

std::map<sim::VehicleId, std::string> vehicle_events(const sim::StepEvents& ev) {
  std::map<sim::VehicleId, std::string> out;
  auto tag = [&](sim::VehicleId id, const char* what) {
    auto& s = out[id];
    if (!s.empty()) s += '|';
    s += what;
  };
  for (const auto& lc : ev.lane_changes) tag(lc.id, "lane_change");
  for (const auto& [a, b] : ev.collisions) {
    tag(a, "collision");
    tag(b, "collision");
  }
  for (const auto& [id, ramp] : ev.merged_out) tag(id, "merged");
  for (const auto& [id, ramp] : ev.missed_ramp) tag(id, "missed_ramp");
  for (auto id : ev.reached_end) tag(id, "reached_end");
  for (auto id : ev.spawned) tag(id, "spawned");
  return out;
}

void vehicle_row(std::ostringstream& out, std::int64_t episode, std::int64_t step,
                 const sim::Vehicle& v, const sim::CommandMap& commands, const std::string& event) {
  out << episode << ',' << step << ',' << v.id << ',' << kind_name(v.kind) << ','
      << intention_name(v.intention) << ',' << v.lane << ',' << format_double(v.position) << ','
      << format_double(v.speed) << ',' << command_name(commands, v.id) << ',' << event << '\n';
}

}  // namespace

std::string trajectory_rows(std::int64_t episode, const sim::SimState& state,
                            const sim::CommandMap& commands, const sim::StepEvents* events) {
  std::map<sim::VehicleId, std::string> tags;
  if (events) tags = vehicle_events(*events);
  auto event_of = [&](sim::VehicleId id) {
    auto it = tags.find(id);
    return it == tags.end() ? std::string() : it->second;
  };
  std::ostringstream out;
  if (events)
    for (const auto& v : events->removed)
      vehicle_row(out, episode, state.time_step, v, commands, event_of(v.id));
  for (const auto& v : state.vehicles)
    vehicle_row(out, episode, state.time_step, v, commands, event_of(v.id));
  return out.str();
}

std::string event_line(std::int64_t episode, std::int64_t step, const train::EnvStep& s) {
  nlohmann::ordered_json j;
  j["episode"] = episode;
  j["step"] = step;
  j["reward"] = {{"intention", s.reward.intention},
                 {"speed", s.reward.speed},
                 {"collision_penalty", s.reward.collision_penalty},
                 {"lane_change_penalty", s.reward.lane_change_penalty},
                 {"total", s.reward.total}};
  auto& lc = j["lane_changes"] = nlohmann::ordered_json::array();
  for (const auto& c : s.events.lane_changes)
    lc.push_back({{"id", c.id}, {"from", c.from_lane}, {"to", c.to_lane}, {"cav", c.cav}});
  j["boundary_clamped"] = s.events.boundary_clamped;
  auto& col = j["collisions"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : s.events.collisions) col.push_back({a, b});
  auto& merged = j["merged_out"] = nlohmann::ordered_json::array();
  for (const auto& [id, ramp] : s.events.merged_out) merged.push_back({{"id", id}, {"ramp", ramp + 1}});
  auto& missed = j["missed_ramp"] = nlohmann::ordered_json::array();
  for (const auto& [id, ramp] : s.events.missed_ramp) missed.push_back({{"id", id}, {"ramp", ramp + 1}});
  j["reached_end"] = s.events.reached_end;
  j["spawned"] = s.events.spawned;
  j["rejected"] = s.events.rejected;
  j["terminal"] = s.terminal;
  j["truncated"] = s.truncated;
  return j.dump();
}

std::string observation_line(std::int64_t episode, std::int64_t step,
                             const obs::ObservationTensor& o) {
  nlohmann::ordered_json j;
  j["episode"] = episode;
  j["step"] = step;
  j["n_real"] = o.n_real;
  j["n_max"] = o.n_max();
  j["slot_ids"] = std::vector<sim::VehicleId>(o.slot_ids.begin(), o.slot_ids.begin() + static_cast<std::ptrdiff_t>(o.n_real));
  j["mask"] = std::vector<int>(o.mask.begin(), o.mask.begin() + static_cast<std::ptrdiff_t>(o.n_real));
  auto& x = j["X"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < o.n_real; ++i) {
    const auto row = o.X.row(i);
    x.push_back(std::vector<double>(row.begin(), row.end()));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < o.n_real; ++i)
    for (std::size_t k = i + 1; k < o.n_real; ++k)
      if (o.A(i, k) != 0.0) edges.push_back({i, k});
  return j.dump();
}

RolloutResult rollout(const train::Policy& policy, const train::EnvSettings& settings,
                      const RolloutOptions& options, const std::string& out_dir) {
  if (options.steps < 1) throw ConfigError("rollout needs at least one step");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto traj = open_out(fs::path(out_dir) / "trajectories.csv");
  auto events_out = open_out(fs::path(out_dir) / "events.jsonl");
  std::ofstream obs_out;
  if (options.dump_observations) obs_out = open_out(fs::path(out_dir) / "observations.jsonl");
  traj << trajectory_header();

  RolloutResult result;
  std::int64_t episode = 0;
  auto episode_seed = [&](std::int64_t e) {
    return mix_seed(options.seed + static_cast<std::uint64_t>(e));
  };
  train::TrafficEnv env(settings, episode_seed(0));
  Rng policy_rng(mix_seed(options.seed ^ 0x9011c1ULL));
  traj << trajectory_rows(episode, env.state(), {});
  for (std::int64_t t = 0; t < options.steps; ++t) {
    if (env.finished()) {
      ++episode;
      env.reset(episode_seed(episode));
      traj << trajectory_rows(episode, env.state(), {});
    }
    const auto o = env.observe();
    if (options.dump_observations) obs_out << observation_line(episode, env.steps(), o) << '\n';
    const auto commands = policy(env, o, policy_rng);
    const auto s = env.step(commands);
    result.totals.add(s);
    traj << trajectory_rows(episode, env.state(), commands, &s.events);
    events_out << event_line(episode, env.steps(), s) << '\n';
    ++result.steps;
  }
  result.episodes = episode + 1;

  nlohmann::ordered_json j;
  const auto& s = result.totals;
  j["steps"] = result.steps;
  j["episodes"] = result.episodes;
  j["reward_total"] = s.reward_total;
  j["collisions"] = s.collisions;
  j["merges_ok"] = s.merges_ok;
  j["merges_failed"] = s.merges_failed;
  j["lane_changes"] = s.lane_changes;
  open_out(fs::path(out_dir) / "rollout_summary.json") << j.dump(2) << '\n';
  return result;
}

}  // namespace gcq::harness
