#pragma once

#include <cstdint>
#include <vector>

#include "gcq/network.hpp"

namespace gcq::nn {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<LayerGrad> first;   // shaped like the parameters
  std::vector<LayerGrad> second;

  static AdamState for_network(const Network& net);
};

// One bias-corrected Adam update. Throws NumericError naming the layer if a
// gradient is not finite; parameters are untouched in that case.
void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr);

// target <- (1 - tau) * target + tau * online
void soft_update(Network& target, const Network& online, double tau);

// Largest absolute parameter difference between two networks of equal shape.
double parameter_distance(const Network& a, const Network& b);

}  // namespace gcq::nn
