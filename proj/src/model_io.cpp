#include "slf/net/model_io.hpp"

#include "slf/lf/io.hpp"

namespace slf::net {

nn::Checkpoint make_checkpoint(const RefocusNet<float>& model, const nn::AdamState<float>* adam) {
  nn::Checkpoint ckpt;
  ckpt.header = model.config().canonical_text();
  for (const Tensor<float>* p : model.parameters()) ckpt.tensors.push_back(*p);
  if (adam) ckpt.adam = *adam;
  return ckpt;
}

LoadedModel model_from_checkpoint(const nn::Checkpoint& ckpt) {
  const NetworkConfig config = NetworkConfig::from_json(nlohmann::json::parse(ckpt.header));
  std::mt19937_64 rng(0);
  LoadedModel out{RefocusNet<float>(config, rng), ckpt.adam};
  out.model.set_parameters(ckpt.tensors);
  return out;
}

void save_model(const std::filesystem::path& path, const RefocusNet<float>& model, const nn::AdamState<float>* adam) {
  nn::save_checkpoint(path, make_checkpoint(model, adam));
  nlohmann::json j = model.config().to_json();
  j["parameter_count"] = model.parameter_count();
  write_file(path.parent_path() / "model.json", j.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(nn::load_checkpoint(path)); }

}  // namespace slf::net
