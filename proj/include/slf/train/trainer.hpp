#pragma once

#include "slf/net/refocusnet.hpp"
#include "slf/synth/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace slf::train {

using net::NetworkConfig;
using net::RefocusNet;
using nn::Tensor;

struct TrainConfig {
  int epochs = 300;
  int batch_size = 32;
  int patches_per_epoch = 9600;
  int patch_size = 100;
  synth::FocusRange focus;
  synth::NoiseRange noise_sigma;
  std::uint64_t seed = 0;
  int eval_every = 1;  // epochs between validation passes; the last epoch is always validated
  std::filesystem::path checkpoint_dir;
  double learning_rate = 0.0005;
  double lr_decay_rate = 0.9;
  int lr_decay_epochs = 10;
  /// Focus values of the validation pass (run at sigma = 0).
  std::vector<double> val_focus = {-1.5, -1.1, -0.7, -0.3, 0.1, 0.5, 0.9, 1.3};

  /// 30 epochs of 960 patches of 48x48.
  static TrainConfig desk();

  int steps_per_epoch() const { return patches_per_epoch / batch_size; }
  std::int64_t decay_steps() const { return static_cast<std::int64_t>(lr_decay_epochs) * steps_per_epoch(); }
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct SampleInfo {
  int scene = 0;
  double pixels = 0;
  double noise_sigma = 0;
  Index top = 0;  // in target (cropped) coordinates
  Index left = 0;
};

struct Batch {
  Tensor<float> input;   // [B, 3 * views, P, P], noisy
  Tensor<float> target;  // [B, 3, P, P], clean
  std::vector<SampleInfo> samples;
};

/// Independent random streams per purpose, all derived from one seed.
class BatchSampler {
 public:
  BatchSampler(const synth::Dataset& dataset, const TrainConfig& config, const ApertureMask& input_mask);
  Batch next();

 private:
  const synth::Dataset& dataset_;
  TrainConfig config_;
  ApertureMask mask_;
  std::vector<double> focus_;
  std::mt19937_64 scene_rng_, focus_rng_, sigma_rng_, noise_rng_, position_rng_;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double train_l1 = 0;
  std::optional<double> val_psnr;
  std::optional<double> val_ssim;
  double lr = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  RefocusNet<float> best;
  RefocusNet<float> last;
  std::vector<EpochRecord> log;
  double best_val_psnr = 0;
  int best_epoch = 0;
  std::vector<double> step_losses;
};

struct ValidationScore {
  double psnr = 0;
  double ssim = 0;
};

/// Mean PSNR/SSIM of full-image inference over scenes x focus values at sigma = 0.
ValidationScore validate_model(const RefocusNet<float>& model, const std::vector<synth::SceneRecord>& scenes,
                               const std::vector<double>& focus, int crop_margin);

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Trains from a seeded Xavier initialization. When `config.checkpoint_dir`
/// is set, writes metrics.jsonl, best.ckpt, last.ckpt (with optimizer state)
/// and model.json there.
TrainResult train(const synth::Dataset& dataset, const TrainConfig& config, const NetworkConfig& network,
                  const ProgressFn& progress = {});

struct EvalRow {
  double sigma = 0;
  double psnr = 0;
  double ssim = 0;
  double naive_psnr = 0;
  double naive_ssim = 0;
  double seconds = 0;  // mean network inference time per image
  Index height = 0;    // scored (cropped) output size
  Index width = 0;
};

struct EvalOptions {
  std::vector<double> focus;  // empty: every 4th value of the dataset grid
  std::vector<double> sigmas = {0.0};
  double rescale = 1.0;
  std::uint64_t seed = 0;
};

/// Full-image inference on each scene and focus value for every sigma,
/// cropped and compared against the clean dense ground truth. The naive
/// columns score the shift-average of the same noisy input views.
std::vector<EvalRow> evaluate(const RefocusNet<float>& model, const synth::Dataset& dataset,
                              const std::vector<synth::SceneRecord>& scenes, const EvalOptions& options);

/// Table without timing, so it is a pure function of its inputs.
nlohmann::json eval_table_json(const std::vector<EvalRow>& rows);

}  // namespace slf::train
