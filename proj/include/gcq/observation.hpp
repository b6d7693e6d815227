#pragma once

#include <cstdint>
#include <vector>

#include "gcq/matrix.hpp"
#include "gcq/traffic_sim.hpp"

namespace gcq::obs {

using nn::Matrix;
using sim::VehicleId;

inline constexpr VehicleId kPaddingSlot = -1;

// speed, position, one-hot lane (lane_count entries), one-hot intention (3).
inline constexpr std::size_t feature_width(int lane_count) {
  return 2 + static_cast<std::size_t>(lane_count) + 3;
}

struct ObservationParams {
  double sensing_range = 30.0;
  std::size_t n_max = 40;
  // Ablation: drop every edge so the normalized adjacency is the identity.
  bool no_fusion = false;
};

// The padded RL state (X, A, M) plus the slot -> vehicle correspondence.
struct ObservationTensor {
  Matrix X;                          // n_max x F
  Matrix A;                          // n_max x n_max, binary, symmetric, zero diagonal
  std::vector<std::uint8_t> mask;    // 1 where the slot holds a CAV
  std::vector<VehicleId> slot_ids;   // kPaddingSlot for padding
  std::size_t n_real = 0;

  std::size_t n_max() const { return mask.size(); }
  // Slot of `id`, or -1. Slots are in ascending id order.
  std::ptrdiff_t slot_of(VehicleId id) const;
};

// Per-vehicle feature row.
std::vector<double> node_feature(const sim::Vehicle& v, const sim::RoadSpec& road);

// Alive HDVs within `range` meters of the CAV, any lane, ascending id.
std::vector<VehicleId> sense_neighbors(const sim::SimState& state, VehicleId cav_id, double range);

struct FeatureRows {
  Matrix X;                         // n_real x F
  std::vector<VehicleId> slot_ids;  // ascending
  std::vector<std::uint8_t> mask;
};

// One row per visible vehicle: every CAV plus every HDV sensed by some CAV.
FeatureRows build_features(const sim::SimState& state, const sim::RoadSpec& road,
                           double sensing_range);

// Three-step wiring over the rows of build_features: CAV to sensed HDVs,
// CAV clique, and a clique over the HDVs sensed by each CAV.
Matrix build_adjacency(const sim::SimState& state, const std::vector<VehicleId>& ids,
                       double sensing_range);

// Throws CapacityError if there are more real rows than n_max.
ObservationTensor pad(const Matrix& X, const Matrix& A, const std::vector<std::uint8_t>& mask,
                      const std::vector<VehicleId>& slot_ids, std::size_t n_max);

// D^-1/2 (A + I) D^-1/2.
Matrix normalize_adjacency(const Matrix& A);

ObservationTensor observe(const sim::SimState& state, const sim::RoadSpec& road,
                          const ObservationParams& params);

// Real rows only; padding is implicit. Used to keep replay memory small and
// to skip padding rows during batched training.
struct CompactObservation {
  std::size_t n_max = 0;
  Matrix X;                          // n_real x F
  std::vector<std::uint8_t> adjacency;  // n_real x n_real, row-major
  std::vector<std::uint8_t> mask;       // n_real
  std::vector<VehicleId> slot_ids;      // n_real

  std::size_t n_real() const { return slot_ids.size(); }
  std::ptrdiff_t slot_of(VehicleId id) const;
  Matrix adjacency_matrix() const;
  ObservationTensor expand() const;
  static CompactObservation from(const ObservationTensor& obs);
};

}  // namespace gcq::obs
