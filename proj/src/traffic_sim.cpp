#include "gcq/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gcq/error.hpp"

namespace gcq::sim {

const char* to_string(VehicleKind kind) { return kind == VehicleKind::CAV ? "CAV" : "HDV"; }

const char* to_string(Intention intention) {
  switch (intention) {
    case Intention::Ramp1: return "Ramp1";
    case Intention::Ramp2: return "Ramp2";
    case Intention::Through: return "Through";
    case Intention::Unobserved: return "Unobserved";
  }
  return "?";
}

const char* to_string(LaneCommand command) {
  switch (command) {
    case LaneCommand::Left: return "Left";
    case LaneCommand::Keep: return "Keep";
    case LaneCommand::Right: return "Right";
  }
  return "?";
}

void RoadSpec::validate() const {
  if (!(corridor_length > 0.0)) throw ConfigError("road.corridor_length must be positive");
  if (lane_count < 2) throw ConfigError("road.lane_count must be at least 2");
  if (ramp_positions.empty()) throw ConfigError("road.ramp_positions must not be empty");
  double prev = 0.0;
  for (double r : ramp_positions) {
    if (!(r > prev) || !(r < corridor_length))
      throw ConfigError("road.ramp_positions must be strictly increasing inside the corridor");
    prev = r;
  }
  if (!(speed_limit_cav > 0.0) || !(speed_limit_hdv > 0.0))
    throw ConfigError("speed limits must be positive");
  if (!(merge_window > 0.0)) throw ConfigError("road.merge_window must be positive");
}

double RoadSpec::segment_start(std::size_t k) const {
  return k == 0 ? 0.0 : ramp_positions.at(k - 1);
}

double RoadSpec::segment_end(std::size_t k) const {
  return k < ramp_positions.size() ? ramp_positions[k] : corridor_length;
}

std::size_t RoadSpec::segment_of(double position) const {
  std::size_t k = 0;
  while (k < ramp_positions.size() && position >= ramp_positions[k]) ++k;
  return k;
}

void IdmParams::validate() const {
  if (!(max_accel > 0 && comfortable_decel > 0 && min_gap > 0 && headway_time > 0 &&
        accel_exponent > 0 && desired_speed > 0 && emergency_decel > 0))
    throw ConfigError("IDM parameters must be strictly positive");
}

double idm_accel(double speed, double desired_speed, double gap, double closing_speed,
                 const IdmParams& p) {
  if (gap <= 0.0) return -p.emergency_decel;
  const double dynamic =
      speed * p.headway_time +
      speed * closing_speed / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel));
  const double desired_gap = p.min_gap + std::max(0.0, dynamic);
  const double free_term = std::pow(speed / desired_speed, p.accel_exponent);
  const double interaction = (desired_gap / gap) * (desired_gap / gap);
  const double accel = p.max_accel * (1.0 - free_term - interaction);
  return std::max(accel, -p.emergency_decel);
}

std::optional<std::size_t> Vehicle::target_ramp() const {
  if (kind != VehicleKind::CAV) return std::nullopt;
  if (intention == Intention::Ramp1) return 0;
  if (intention == Intention::Ramp2) return 1;
  return std::nullopt;
}

IdmParams Scenario::idm_for(VehicleKind kind) const {
  IdmParams p = kind == VehicleKind::CAV ? idm_cav : idm_hdv;
  p.desired_speed = road.speed_limit(kind);
  return p;
}

void Scenario::validate() const {
  road.validate();
  idm_for(VehicleKind::CAV).validate();
  idm_for(VehicleKind::HDV).validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(vehicle_length > 0.0)) throw ConfigError("vehicle length must be positive");
  if (road.ramp_positions.size() != 2)
    throw ConfigError("the scenario expects exactly two ramps");
}

const Vehicle* SimState::find(VehicleId id) const {
  auto it = std::lower_bound(vehicles.begin(), vehicles.end(), id,
                             [](const Vehicle& v, VehicleId key) { return v.id < key; });
  return (it != vehicles.end() && it->id == id) ? &*it : nullptr;
}

Vehicle* SimState::find(VehicleId id) {
  return const_cast<Vehicle*>(std::as_const(*this).find(id));
}

VehicleId SimState::add(Vehicle v) {
  v.id = next_id++;
  v.alive = true;
  vehicles.push_back(v);
  ++counters.spawned;
  return v.id;
}

std::int64_t StepEvents::cav_lane_changes() const {
  return std::count_if(lane_changes.begin(), lane_changes.end(),
                       [](const LaneChange& c) { return c.cav; });
}

void StepEvents::merge(StepEvents&& other) {
  auto append = [](auto& dst, auto& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
  };
  append(lane_changes, other.lane_changes);
  boundary_clamped += other.boundary_clamped;
  append(collisions, other.collisions);
  append(merged_out, other.merged_out);
  append(missed_ramp, other.missed_ramp);
  append(reached_end, other.reached_end);
  append(spawned, other.spawned);
  append(rejected, other.rejected);
  append(removed, other.removed);
}

namespace {

// Strict (position, id) order along a lane.
bool ahead_of(double pa, VehicleId ia, double pb, VehicleId ib) {
  return pa > pb || (pa == pb && ia > ib);
}

}  // namespace

const Vehicle* leader_on_lane(const SimState& state, int lane, double position, VehicleId id,
                              std::optional<VehicleId> exclude) {
  const Vehicle* best = nullptr;
  for (const auto& v : state.vehicles) {
    if (v.lane != lane || v.id == id || (exclude && v.id == *exclude)) continue;
    if (!ahead_of(v.position, v.id, position, id)) continue;
    if (!best || ahead_of(best->position, best->id, v.position, v.id)) best = &v;
  }
  return best;
}

const Vehicle* follower_on_lane(const SimState& state, int lane, double position, VehicleId id,
                                std::optional<VehicleId> exclude) {
  const Vehicle* best = nullptr;
  for (const auto& v : state.vehicles) {
    if (v.lane != lane || v.id == id || (exclude && v.id == *exclude)) continue;
    if (!ahead_of(position, id, v.position, v.id)) continue;
    if (!best || ahead_of(v.position, v.id, best->position, best->id)) best = &v;
  }
  return best;
}

double accel_on_lane(const SimState& state, const Vehicle& v, int lane, const Scenario& sc) {
  const IdmParams p = sc.idm_for(v.kind);
  const Vehicle* lead = leader_on_lane(state, lane, v.position, v.id);
  if (!lead) return idm_accel(v.speed, p.desired_speed, kFreeRoadGap, 0.0, p);
  return idm_accel(v.speed, p.desired_speed, gap_between(v, *lead), v.speed - lead->speed, p);
}

void spawn_step(SimState& state, const Flows& flows, const Scenario& sc, StepEvents* events) {
  struct SpawnClass {
    double flow;
    VehicleKind kind;
    Intention intention;
  };
  const SpawnClass classes[] = {
      {flows.hdv, VehicleKind::HDV, Intention::Unobserved},
      {flows.cav_ramp1, VehicleKind::CAV, Intention::Ramp1},
      {flows.cav_ramp2, VehicleKind::CAV, Intention::Ramp2},
  };
  for (const auto& cls : classes) {
    const double entry_cell = sc.idm_for(cls.kind).min_gap + sc.vehicle_length;
    // Draw every variate each step so the stream stays aligned across policies.
    const bool fire = state.rng.bernoulli(cls.flow * sc.dt);
    const int lane = static_cast<int>(state.rng.below(static_cast<std::uint64_t>(sc.road.lane_count)));
    const double speed = state.rng.uniform(0.5, 1.0) * sc.road.speed_limit(cls.kind);
    if (!fire) continue;
    const bool blocked = std::any_of(state.vehicles.begin(), state.vehicles.end(),
                                     [&](const Vehicle& v) { return v.lane == lane && v.rear() < entry_cell; });
    if (blocked) {
      ++state.counters.spawn_blocked;
      continue;
    }
    Vehicle v{.kind = cls.kind, .intention = cls.intention, .lane = lane, .position = 0.0,
              .speed = speed, .length = sc.vehicle_length};
    const VehicleId id = state.add(v);
    if (events) events->spawned.push_back(id);
  }
}

bool lane_change_safe(const SimState& state, const Vehicle& v, int lane, const Scenario& sc) {
  const IdmParams own = sc.idm_for(v.kind);
  if (const Vehicle* lead = leader_on_lane(state, lane, v.position, v.id)) {
    if (gap_between(v, *lead) < own.min_gap) return false;
  }
  if (const Vehicle* follow = follower_on_lane(state, lane, v.position, v.id)) {
    const IdmParams fp = sc.idm_for(follow->kind);
    const double gap = gap_between(*follow, v);
    if (gap <= 0.0) return false;
    const double a = idm_accel(follow->speed, fp.desired_speed, gap, follow->speed - v.speed, fp);
    if (a < -fp.comfortable_decel) return false;
  }
  return true;
}

LaneCommand hdv_lane_policy(const SimState& state, VehicleId id, const Scenario& sc) {
  const Vehicle* ego = state.find(id);
  if (!ego) throw StateError("hdv_lane_policy: unknown vehicle " + std::to_string(id));
  const double current = accel_on_lane(state, *ego, ego->lane, sc);
  LaneCommand choice = LaneCommand::Keep;
  double best_gain = sc.lane_change.hysteresis;
  // Right is evaluated first and wins ties.
  const std::pair<LaneCommand, int> options[] = {{LaneCommand::Right, ego->lane - 1},
                                                 {LaneCommand::Left, ego->lane + 1}};
  for (const auto& [cmd, lane] : options) {
    if (lane < 0 || lane >= sc.road.lane_count) continue;
    if (!lane_change_safe(state, *ego, lane, sc)) continue;
    const double gain = accel_on_lane(state, *ego, lane, sc) - current;
    if (gain > best_gain) {
      best_gain = gain;
      choice = cmd;
    }
  }
  return choice;
}

CommandMap hdv_commands(const SimState& state, const Scenario& sc) {
  CommandMap out;
  SimState scratch = state.scratch_copy();
  for (auto& v : scratch.vehicles) {
    if (v.kind != VehicleKind::HDV) continue;
    const LaneCommand cmd = hdv_lane_policy(scratch, v.id, sc);
    if (cmd == LaneCommand::Keep) continue;
    out[v.id] = cmd;
    v.lane += cmd == LaneCommand::Left ? 1 : -1;
  }
  return out;
}

StepEvents apply_lane_changes(SimState& state, const CommandMap& commands, const RoadSpec& road) {
  StepEvents ev;
  for (const auto& [id, cmd] : commands) {
    Vehicle* v = state.find(id);
    if (!v || !v->alive) {
      ev.rejected.push_back("lane command for unknown vehicle " + std::to_string(id));
      continue;
    }
    if (cmd == LaneCommand::Keep) continue;
    const int target = v->lane + (cmd == LaneCommand::Left ? 1 : -1);
    if (target < 0 || target >= road.lane_count) {
      ++ev.boundary_clamped;
      ++state.counters.boundary_clamped;
      continue;
    }
    ev.lane_changes.push_back({id, v->lane, target, v->is_cav()});
    ++state.counters.lane_changes;
    v->lane = target;
  }
  return ev;
}

std::vector<std::pair<VehicleId, VehicleId>> detect_collisions(const SimState& state) {
  struct Hit {
    double rear_position;
    VehicleId follower;
    VehicleId leader;
  };
  std::vector<Hit> hits;
  const auto& vs = state.vehicles;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      if (!vs[i].alive || !vs[j].alive || vs[i].lane != vs[j].lane) continue;
      const bool i_behind = !ahead_of(vs[i].position, vs[i].id, vs[j].position, vs[j].id);
      const Vehicle& f = i_behind ? vs[i] : vs[j];
      const Vehicle& l = i_behind ? vs[j] : vs[i];
      if (gap_between(f, l) < 0.0) hits.push_back({f.position, f.id, l.id});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.rear_position != b.rear_position ? a.rear_position < b.rear_position
                                              : a.follower != b.follower ? a.follower < b.follower
                                                                         : a.leader < b.leader;
  });
  std::vector<std::pair<VehicleId, VehicleId>> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.emplace_back(h.follower, h.leader);
  return out;
}

StepEvents process_exits(SimState& state, const RoadSpec& road) {
  StepEvents ev;
  for (auto& v : state.vehicles) {
    if (!v.alive) continue;
    if (auto ramp = v.target_ramp(); ramp && !v.missed_ramp && *ramp < road.ramp_positions.size()) {
      const double at = road.ramp_positions[*ramp];
      if (v.lane == 0 && v.position >= at - road.merge_window && v.position <= at) {
        v.alive = false;
        ev.merged_out.emplace_back(v.id, *ramp);
        ++state.counters.merged_ok;
        ev.removed.push_back(v);
        continue;
      }
      if (v.position > at) {
        v.missed_ramp = true;
        ev.missed_ramp.emplace_back(v.id, *ramp);
        ++state.counters.missed_ramp;
      }
    }
    if (v.position >= road.corridor_length) {
      v.alive = false;
      ev.reached_end.push_back(v.id);
      if (v.target_ramp()) {
        ++state.counters.merged_fail;
      } else {
        ++state.counters.reached_end_other;
      }
      ev.removed.push_back(v);
    }
  }
  std::erase_if(state.vehicles, [](const Vehicle& v) { return !v.alive; });
  return ev;
}

StepEvents step(SimState& state, const CommandMap& cav_commands, const Flows& flows,
                const Scenario& sc) {
  if (!(sc.dt > 0.0)) throw ConfigError("step: dt must be positive");
  StepEvents events;

  CommandMap commands = hdv_commands(state, sc);
  for (const auto& [id, cmd] : cav_commands) {
    const Vehicle* v = state.find(id);
    if (v && !v->is_cav()) {
      events.rejected.push_back("CAV command addressed to HDV " + std::to_string(id));
      continue;
    }
    commands[id] = cmd;
  }
  events.merge(apply_lane_changes(state, commands, sc.road));

  std::vector<double> accel(state.vehicles.size());
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    const Vehicle& v = state.vehicles[i];
    accel[i] = accel_on_lane(state, v, v.lane, sc);
  }
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    Vehicle& v = state.vehicles[i];
    v.speed = std::max(0.0, v.speed + accel[i] * sc.dt);
    v.position += v.speed * sc.dt;
  }

  auto pairs = detect_collisions(state);
  if (!pairs.empty()) {
    std::set<VehicleId> hit;
    for (const auto& [a, b] : pairs) {
      hit.insert(a);
      hit.insert(b);
    }
    for (auto& v : state.vehicles) {
      if (hit.contains(v.id)) {
        v.alive = false;
        events.removed.push_back(v);
      }
    }
    state.counters.collisions += static_cast<std::int64_t>(pairs.size());
    state.counters.collided_vehicles += static_cast<std::int64_t>(hit.size());
    std::erase_if(state.vehicles, [](const Vehicle& v) { return !v.alive; });
    events.collisions = std::move(pairs);
  }

  events.merge(process_exits(state, sc.road));
  spawn_step(state, flows, sc, &events);
  ++state.time_step;
  return events;
}

}  // namespace gcq::sim
