#pragma once

#include "slf/nn/optim.hpp"
#include "slf/nn/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace slf::nn {

inline constexpr char kCheckpointMagic[9] = "SLFCKPT1";

/// Binary layout (little endian):
///   "SLFCKPT1" | u32 header length | header text
///   u32 tensor count | per tensor: u32 rank, u32 dims[rank], f32 data
///   u8 has_optimizer | [u64 step, f64 beta1, beta2, eps, lr initial,
///                       lr decay_rate, i64 decay_steps, u8 staircase,
///                       m tensors, v tensors]
struct Checkpoint {
  std::string header;
  std::vector<Tensor<float>> tensors;
  std::optional<AdamState<float>> adam;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace slf::nn
