#pragma once

#include <cstdint>
#include <string>

#include "gcq/network.hpp"

namespace gcq::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, little-endian:
//   magic "GCQCKPT\0", u32 version,
//   str config_digest, str structural_digest, str config_text, u64 step,
//   u32 layer_count, per layer: str name, u8 kind, u8 activation,
//     u64 rows, u64 cols, rows*cols f64 (W, row-major), u64 cols, cols f64 (b),
//   u32 program_length, per step: u8 op, u64 layer
// where str = u64 length + bytes.
struct Checkpoint {
  Network network;
  std::string config_digest;
  std::string structural_digest;
  std::string config_text;
  std::uint64_t step = 0;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gcq::nn
