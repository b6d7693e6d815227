#include "gcq/rng.hpp"

#include <cmath>
#include <numbers>

namespace gcq {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t salt) const {
  // Copy so forking does not advance the parent.
  auto probe = engine_;
  return Rng(mix_seed(probe() ^ mix_seed(salt)));
}

}  // namespace gcq
