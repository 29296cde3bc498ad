#pragma once

#include "slf/net/refocusnet.hpp"
#include "slf/nn/checkpoint.hpp"

#include <filesystem>
#include <optional>

namespace slf::net {

struct LoadedModel {
  RefocusNet<float> model;
  std::optional<nn::AdamState<float>> adam;
};

nn::Checkpoint make_checkpoint(const RefocusNet<float>& model, const nn::AdamState<float>* adam = nullptr);
LoadedModel model_from_checkpoint(const nn::Checkpoint& ckpt);

/// Writes the checkpoint and a `model.json` with the architecture next to it.
void save_model(const std::filesystem::path& path, const RefocusNet<float>& model,
                const nn::AdamState<float>* adam = nullptr);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace slf::net
