#pragma once

#include <cmath>

#include "gcq/traffic_sim.hpp"

namespace gcq::testing {

inline sim::Vehicle cav(sim::Intention intention, int lane, double position, double speed = 10.0) {
  return {.kind = sim::VehicleKind::CAV, .intention = intention, .lane = lane,
          .position = position, .speed = speed};
}

inline sim::Vehicle hdv(int lane, double position, double speed = 8.0) {
  return {.kind = sim::VehicleKind::HDV, .intention = sim::Intention::Unobserved, .lane = lane,
          .position = position, .speed = speed};
}

// Textbook IDM, evaluated directly from its definition.
inline double idm_reference(double v, double v0, double gap, double dv, double a, double b,
                            double s0, double T, double delta) {
  const double s_star = s0 + std::max(0.0, v * T + v * dv / (2.0 * std::sqrt(a * b)));
  return a * (1.0 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
}

}  // namespace gcq::testing
