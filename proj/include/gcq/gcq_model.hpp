#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gcq/network.hpp"
#include "gcq/observation.hpp"
#include "gcq/rng.hpp"
#include "gcq/traffic_sim.hpp"

namespace gcq::model {

using nn::Matrix;
using nn::Network;

inline constexpr std::size_t kActionCount = 3;  // Left, Keep, Right
inline constexpr int kNoAction = -1;

struct ModelShape {
  std::size_t feature_width = 8;
  std::vector<std::size_t> encoder{32, 32};
  std::size_t graph_conv = 32;
  std::vector<std::size_t> q_head{32, 32, 16};
  std::size_t actions = kActionCount;
};

// Encoder -> graph convolution -> CAV mask -> Q head -> linear output.
Network build_gcq(const ModelShape& shape, Rng& rng);

// Closed-form trainable parameter count of a shape.
std::size_t parameter_count(const ModelShape& shape);

// Q values for every slot of a padded observation (n_max x 3).
Matrix forward(const Network& net, const obs::ObservationTensor& obs);

// Stacks the real rows of several observations into one block-diagonal batch.
nn::GraphBatch make_batch(std::span<const obs::CompactObservation* const> observations);
nn::GraphBatch make_batch(const obs::ObservationTensor& obs);

// Index of the greedy action; ties prefer Keep, then Left.
int greedy_action(std::span<const double> q_row);

// epsilon-greedy per CAV slot; HDV and padding slots get no command.
sim::CommandMap select_actions(const Matrix& q, const obs::ObservationTensor& obs, double epsilon,
                               Rng& rng);
// Same rule over the first mask.size() rows of `q`.
sim::CommandMap select_actions(const Matrix& q, std::span<const std::uint8_t> mask,
                               std::span<const sim::VehicleId> slot_ids, double epsilon, Rng& rng);

sim::LaneCommand action_to_command(int action);
int command_to_action(sim::LaneCommand command);

// Layer table plus the parameter-count audit.
std::string describe(const Network& net);

struct GradcheckOptions {
  std::size_t nodes = 6;
  bool linear_only = false;
  double h = 1e-5;
  std::function<void(nn::Gradients&)> tamper;
};

// Builds a random GCQ stack and observation from `seed` and checks every
// parameter gradient against central differences.
nn::GradcheckResult gradcheck_gcq(std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace gcq::model
