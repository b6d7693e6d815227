#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcq/rng.hpp"

namespace gcq::sim {

using VehicleId = std::int64_t;

enum class VehicleKind : std::uint8_t { CAV, HDV };
enum class Intention : std::uint8_t { Ramp1, Ramp2, Through, Unobserved };
// Left moves toward the top lane (higher index), Right toward lane 0.
enum class LaneCommand : std::uint8_t { Left = 0, Keep = 1, Right = 2 };

const char* to_string(VehicleKind kind);
const char* to_string(Intention intention);
const char* to_string(LaneCommand command);

struct RoadSpec {
  double corridor_length = 500.0;
  int lane_count = 3;
  std::vector<double> ramp_positions{200.0, 400.0};
  double speed_limit_cav = 14.0;
  double speed_limit_hdv = 10.0;
  double merge_window = 10.0;

  // Throws ConfigError when an invariant is broken.
  void validate() const;

  // Segment k spans [start(k), end(k)); the last one closes at corridor_length.
  std::size_t segment_count() const { return ramp_positions.size() + 1; }
  double segment_start(std::size_t k) const;
  double segment_end(std::size_t k) const;
  std::size_t segment_of(double position) const;
  // L_k: length of segment k.
  double segment_length(std::size_t k) const { return segment_end(k) - segment_start(k); }
  double speed_limit(VehicleKind kind) const {
    return kind == VehicleKind::CAV ? speed_limit_cav : speed_limit_hdv;
  }
};

struct IdmParams {
  double max_accel = 1.0;
  double comfortable_decel = 1.5;
  double min_gap = 2.0;
  double headway_time = 1.5;
  double accel_exponent = 4.0;
  double desired_speed = 14.0;
  double emergency_decel = 6.0;

  void validate() const;
};

// Gap used when a vehicle has no leader.
inline constexpr double kFreeRoadGap = 1e4;

// Intelligent Driver Model acceleration. `closing_speed` is v - v_leader.
// A non-positive gap returns -emergency_decel.
double idm_accel(double speed, double desired_speed, double gap, double closing_speed,
                 const IdmParams& p);

struct Vehicle {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::HDV;
  Intention intention = Intention::Unobserved;
  int lane = 0;
  double position = 0.0;  // front bumper, meters from corridor entry
  double speed = 0.0;
  double length = 5.0;
  bool alive = true;
  bool missed_ramp = false;

  bool is_cav() const { return kind == VehicleKind::CAV; }
  double rear() const { return position - length; }
  // Index of the target ramp, if the vehicle has one.
  std::optional<std::size_t> target_ramp() const;

  bool operator==(const Vehicle&) const = default;
};

struct LaneChangeParams {
  double hysteresis = 0.2;  // m/s^2 gain required before an incentive change
};

// Everything that stays fixed during an episode.
struct Scenario {
  RoadSpec road;
  IdmParams idm_cav;
  IdmParams idm_hdv{.desired_speed = 10.0};
  LaneChangeParams lane_change;
  double dt = 0.5;
  double vehicle_length = 5.0;

  // Copies of the per-kind IDM parameters with desired_speed set from the road.
  IdmParams idm_for(VehicleKind kind) const;
  void validate() const;
};

struct Flows {
  double hdv = 0.2;
  double cav_ramp1 = 0.1;
  double cav_ramp2 = 0.1;
};

struct Counters {
  std::int64_t spawned = 0;
  std::int64_t spawn_blocked = 0;
  std::int64_t merged_ok = 0;
  std::int64_t merged_fail = 0;        // reached the end with an unmet ramp intention
  std::int64_t reached_end_other = 0;  // reached the end without a ramp intention
  std::int64_t collisions = 0;         // pairs
  std::int64_t collided_vehicles = 0;  // distinct vehicles removed by collisions
  std::int64_t missed_ramp = 0;
  std::int64_t lane_changes = 0;
  std::int64_t boundary_clamped = 0;

  bool operator==(const Counters&) const = default;
};

struct SimState {
  std::int64_t time_step = 0;
  std::vector<Vehicle> vehicles;  // alive vehicles, ascending id
  Rng rng{0};
  Counters counters;
  VehicleId next_id = 0;

  static SimState make(std::uint64_t seed) {
    SimState s;
    s.rng = Rng(seed);
    return s;
  }
  // Same vehicles and clock, fresh counters and stream; for look-ahead.
  SimState scratch_copy() const {
    SimState s;
    s.time_step = time_step;
    s.vehicles = vehicles;
    return s;
  }

  const Vehicle* find(VehicleId id) const;
  Vehicle* find(VehicleId id);
  // Appends a vehicle with the next id; returns that id. Intended for tests
  // and scripted scenes.
  VehicleId add(Vehicle v);
};

struct LaneChange {
  VehicleId id = 0;
  int from_lane = 0;
  int to_lane = 0;
  bool cav = false;
};

struct StepEvents {
  std::vector<LaneChange> lane_changes;
  std::int64_t boundary_clamped = 0;
  std::vector<std::pair<VehicleId, VehicleId>> collisions;
  std::vector<std::pair<VehicleId, std::size_t>> merged_out;  // (id, ramp index)
  std::vector<std::pair<VehicleId, std::size_t>> missed_ramp;
  std::vector<VehicleId> reached_end;
  std::vector<VehicleId> spawned;
  std::vector<std::string> rejected;  // diagnostics for commands that could not apply
  std::vector<Vehicle> removed;       // final snapshot of every vehicle removed this step

  std::int64_t cav_lane_changes() const;
  void merge(StepEvents&& other);
};

using CommandMap = std::map<VehicleId, LaneCommand>;

// Bumper-to-bumper gap from `follower` to `leader`.
inline double gap_between(const Vehicle& follower, const Vehicle& leader) {
  return leader.rear() - follower.position;
}

// Nearest vehicle on `lane` ahead of / behind the reference point, ordering
// by (position, id). `exclude` is skipped.
const Vehicle* leader_on_lane(const SimState& state, int lane, double position, VehicleId id,
                              std::optional<VehicleId> exclude = std::nullopt);
const Vehicle* follower_on_lane(const SimState& state, int lane, double position, VehicleId id,
                                std::optional<VehicleId> exclude = std::nullopt);

// IDM acceleration of `v` against whatever leads it on `lane`.
double accel_on_lane(const SimState& state, const Vehicle& v, int lane, const Scenario& sc);

void spawn_step(SimState& state, const Flows& flows, const Scenario& sc,
                StepEvents* events = nullptr);

LaneCommand hdv_lane_policy(const SimState& state, VehicleId id, const Scenario& sc);

// True when `v` could move to `lane` without forcing the new follower to
// brake harder than its comfortable deceleration and with at least min_gap
// to the new leader.
bool lane_change_safe(const SimState& state, const Vehicle& v, int lane, const Scenario& sc);

// Lane commands for every HDV, decided one vehicle at a time so that HDVs
// see each other's moves within the step.
CommandMap hdv_commands(const SimState& state, const Scenario& sc);

StepEvents apply_lane_changes(SimState& state, const CommandMap& commands, const RoadSpec& road);

std::vector<std::pair<VehicleId, VehicleId>> detect_collisions(const SimState& state);

StepEvents process_exits(SimState& state, const RoadSpec& road);

StepEvents step(SimState& state, const CommandMap& cav_commands, const Flows& flows,
                const Scenario& sc);

}  // namespace gcq::sim
