#pragma once

#include <string>

#include "gcq/config.hpp"
#include "gcq/env.hpp"
#include "gcq/network.hpp"

namespace gcq::harness {

// HDV incentive/safety rule for every CAV, except that inside the mandatory
// zone upstream of its target ramp a CAV moves right whenever that is safe,
// and otherwise waits in its lane. Decisions see the HDV moves of the same
// step and earlier CAV decisions.
sim::CommandMap rule_based_commands(const sim::SimState& state, const sim::Scenario& sc,
                                    const BaselineParams& baseline);

train::Policy rule_based_policy(BaselineParams baseline);
train::Policy random_policy();
// Greedy (epsilon = 0) GCQ control from a trained network.
train::Policy greedy_policy(nn::Network net);

}  // namespace gcq::harness
