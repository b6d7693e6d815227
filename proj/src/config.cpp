#include "gcq/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "gcq/error.hpp"

extern char** environ;

namespace gcq {

void TrainSchedule::validate() const {
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps >= total_steps)
    throw ConfigError("schedule: need 0 <= warmup_steps < total_steps");
  if (batch_size == 0) throw ConfigError("schedule.batch_size must be positive");
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("schedule.epsilon must lie in [0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("schedule.gamma must lie in (0, 1)");
  if (!(lr > 0.0)) throw ConfigError("schedule.lr must be positive");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("schedule.tau must lie in [0, 1]");
  if (train_every <= 0) throw ConfigError("schedule.train_every must be positive");
  if (episode_horizon <= 0) throw ConfigError("schedule.episode_horizon must be positive");
  if (replay_capacity < batch_size)
    throw ConfigError("schedule.replay_capacity must hold at least one batch");
  if (checkpoint_every < 0) throw ConfigError("schedule.checkpoint_every must be >= 0");
}

const char* to_string(Preset preset) { return preset == Preset::Paper ? "paper" : "desk"; }

RunConfig RunConfig::preset_config(Preset preset) {
  RunConfig cfg;
  cfg.preset = preset;
  if (preset == Preset::Paper) {
    cfg.schedule.warmup_steps = 200'000;
    cfg.schedule.total_steps = 800'000;
    cfg.schedule.checkpoint_every = 100'000;
  }
  return cfg;
}

void RunConfig::validate() const {
  scenario.validate();
  reward.validate();
  schedule.validate();
  if (flows.hdv < 0 || flows.cav_ramp1 < 0 || flows.cav_ramp2 < 0)
    throw ConfigError("flows must be non-negative");
  if (flows.hdv * scenario.dt > 1.0 || flows.cav_ramp1 * scenario.dt > 1.0 ||
      flows.cav_ramp2 * scenario.dt > 1.0)
    throw ConfigError("flow * dt must not exceed 1 (one spawn per class per step)");
  if (!(observation.sensing_range >= 0.0)) throw ConfigError("observation.sensing_range must be >= 0");
  if (observation.n_max == 0) throw ConfigError("observation.n_max must be positive");
  if (ablation.hard_target_every < 0) throw ConfigError("ablation.hard_target_every must be >= 0");
  if (!(baseline.mandatory_distance >= 0.0))
    throw ConfigError("baseline.mandatory_distance must be >= 0");
}

obs::ObservationParams RunConfig::observation_params() const {
  obs::ObservationParams p = observation;
  p.no_fusion = ablation.no_fusion;
  return p;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec == std::errc() && res.ptr == v.data() + v.size()) return out;
  // Accept integral values written in scientific notation, e.g. 5e4.
  const double d = parse_double(key, v);
  if (d != static_cast<double>(static_cast<std::int64_t>(d)))
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<std::int64_t>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Entry real(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return format_double(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_double(key, v); }};
}

template <typename Access>
Entry integer(std::string key, Access access) {
  return {key,
          [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            const auto parsed = parse_int(key, v);
            if (std::is_unsigned_v<T> && parsed < 0)
              throw ConfigError("config key '" + key + "' must be non-negative");
            access(c) = static_cast<T>(parsed);
          }};
}

template <typename Access>
Entry boolean(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); }};
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> t;
    t.push_back(real("road.corridor_length", FIELD(scenario.road.corridor_length)));
    t.push_back(integer("road.lane_count", FIELD(scenario.road.lane_count)));
    t.push_back({"road.ramp_positions",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.scenario.road.ramp_positions.size(); ++i) {
                     if (i) s += ",";
                     s += format_double(c.scenario.road.ramp_positions[i]);
                   }
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   std::vector<double> out;
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) out.push_back(parse_double("road.ramp_positions", trim(item)));
                   c.scenario.road.ramp_positions = out;
                 }});
    t.push_back(real("road.speed_limit_cav", FIELD(scenario.road.speed_limit_cav)));
    t.push_back(real("road.speed_limit_hdv", FIELD(scenario.road.speed_limit_hdv)));
    t.push_back(real("road.merge_window", FIELD(scenario.road.merge_window)));
    t.push_back(real("road.vehicle_length", FIELD(scenario.vehicle_length)));
    t.push_back(real("sim.dt", FIELD(scenario.dt)));
    for (const char* kind : {"cav", "hdv"}) {
      const bool cav = std::string(kind) == "cav";
      auto idm = [cav](RunConfig& c) -> sim::IdmParams& { return cav ? c.scenario.idm_cav : c.scenario.idm_hdv; };
      const std::string p = std::string("idm.") + kind + ".";
      t.push_back(real(p + "max_accel", [idm](RunConfig& c) -> double& { return idm(c).max_accel; }));
      t.push_back(real(p + "comfortable_decel", [idm](RunConfig& c) -> double& { return idm(c).comfortable_decel; }));
      t.push_back(real(p + "min_gap", [idm](RunConfig& c) -> double& { return idm(c).min_gap; }));
      t.push_back(real(p + "headway_time", [idm](RunConfig& c) -> double& { return idm(c).headway_time; }));
      t.push_back(real(p + "accel_exponent", [idm](RunConfig& c) -> double& { return idm(c).accel_exponent; }));
      t.push_back(real(p + "emergency_decel", [idm](RunConfig& c) -> double& { return idm(c).emergency_decel; }));
    }
    t.push_back(real("lane_change.hysteresis", FIELD(scenario.lane_change.hysteresis)));
    t.push_back(real("flows.hdv", FIELD(flows.hdv)));
    t.push_back(real("flows.cav_ramp1", FIELD(flows.cav_ramp1)));
    t.push_back(real("flows.cav_ramp2", FIELD(flows.cav_ramp2)));
    t.push_back(real("observation.sensing_range", FIELD(observation.sensing_range)));
    t.push_back(integer("observation.n_max", FIELD(observation.n_max)));
    t.push_back(real("reward.w1", FIELD(reward.w_intention)));
    t.push_back(real("reward.w2", FIELD(reward.w_speed)));
    t.push_back(real("reward.w3", FIELD(reward.w_collision)));
    t.push_back(real("reward.w4", FIELD(reward.w_lane_change)));
    t.push_back(real("reward.collision_penalty", FIELD(reward.collision_penalty)));
    t.push_back(real("reward.lane_change_penalty", FIELD(reward.lane_change_penalty)));
    t.push_back(boolean("reward.p21_top_lane", FIELD(reward.p21_top_lane)));
    t.push_back(integer("schedule.warmup_steps", FIELD(schedule.warmup_steps)));
    t.push_back(integer("schedule.total_steps", FIELD(schedule.total_steps)));
    t.push_back(integer("schedule.batch_size", FIELD(schedule.batch_size)));
    t.push_back(real("schedule.epsilon", FIELD(schedule.epsilon)));
    t.push_back(real("schedule.gamma", FIELD(schedule.gamma)));
    t.push_back(real("schedule.lr", FIELD(schedule.lr)));
    t.push_back(real("schedule.tau", FIELD(schedule.tau)));
    t.push_back(integer("schedule.train_every", FIELD(schedule.train_every)));
    t.push_back(integer("schedule.episode_horizon", FIELD(schedule.episode_horizon)));
    t.push_back(integer("schedule.replay_capacity", FIELD(schedule.replay_capacity)));
    t.push_back(integer("schedule.checkpoint_every", FIELD(schedule.checkpoint_every)));
    t.push_back(boolean("ablation.no_fusion", FIELD(ablation.no_fusion)));
    t.push_back(boolean("ablation.double_q", FIELD(ablation.double_q)));
    t.push_back(integer("ablation.hard_target_every", FIELD(ablation.hard_target_every)));
    t.push_back(real("baseline.mandatory_distance", FIELD(baseline.mandatory_distance)));
    t.push_back(integer("seed", FIELD(seed)));
    t.push_back({"preset", [](const RunConfig& c) { return std::string(to_string(c.preset)); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "desk") c.preset = Preset::Desk;
                   else if (v == "paper") c.preset = Preset::Paper;
                   else throw ConfigError("preset must be 'desk' or 'paper', got '" + v + "'");
                 }});
    std::sort(t.begin(), t.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    return t;
  }();
  return entries;
}

#undef FIELD

const Entry& lookup(const std::string& key) {
  const auto& t = table();
  auto it = std::lower_bound(t.begin(), t.end(), key, [](const Entry& e, const std::string& k) { return e.key < k; });
  if (it == t.end() || it->key != key) throw ConfigError("unknown config key '" + key + "'");
  return *it;
}

bool structural(const std::string& key) {
  for (const char* prefix : {"flows.", "schedule.", "baseline."})
    if (key.rfind(prefix, 0) == 0) return false;
  return key != "seed" && key != "preset" && key != "ablation.double_q" &&
         key != "ablation.hard_target_every";
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : table()) keys.push_back(e.key);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  lookup(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return lookup(key).get(cfg);
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& e : table()) out += e.key + " = " + e.get(*this) + "\n";
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string RunConfig::digest() const { return sha256_hex(canonical_text()); }

std::string RunConfig::structural_digest() const {
  std::string text;
  for (const auto& e : table())
    if (structural(e.key)) text += e.key + " = " + e.get(*this) + "\n";
  return sha256_hex(text);
}

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  RunConfig cfg;
  for (const auto& [k, v] : pairs) {
    if (k == "preset") {
      set_config_value(cfg, k, v);
      cfg = RunConfig::preset_config(cfg.preset);
    }
  }
  for (const auto& [k, v] : pairs)
    if (k != "preset") set_config_value(cfg, k, v);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void apply_env_overrides(RunConfig& cfg, const std::map<std::string, std::string>& env) {
  constexpr std::string_view prefix = "GCQ_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string key;
    const std::string rest = name.substr(prefix.size());
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest[i] == '_' && i + 1 < rest.size() && rest[i + 1] == '_') {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
      }
    }
    set_config_value(cfg, key, value);
  }
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

}  // namespace gcq
