#pragma once

#include "slf/synth/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace slf::synth {

/// Focus grid {lo + k * step} without the pole pixels = 1, values snapped to 1e-6.
struct FocusRange {
  double lo = -1.50;
  double hi = 1.30;
  double step = 0.05;

  std::vector<double> values() const;
  int size() const;
  /// Position of `pixels` in values(), or -1 when it is off the grid, out of
  /// range or the pole.
  int index_of(double pixels) const;
  void validate() const;
};

struct NoiseRange {
  double lo = 0.0;
  double hi = 0.08;
};

struct DatasetSpec {
  int n_train = 300;
  int n_val = 20;
  int n_test = 20;
  int angular = kGroundTruthGrid;
  FocusRange focus;
  NoiseRange noise_sigma;
  int patch_size = 100;
  Index height = 332;
  Index width = 497;
  int input_radius = 2;
  int crop_margin = kDefaultCropMargin;
  int min_layers = 2;
  int max_layers = 5;
  std::uint64_t seed = 0;

  /// Reduced scale: 128x192 images, 48x48 patches, 24/4/4 scenes.
  static DatasetSpec desk();
  /// Small enough for unit tests: 64x80 images, 24x24 patches, 3/1/1 scenes.
  static DatasetSpec tiny();
  void validate() const;

  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

/// splitmix64 finalizer; derives independent seeds from (seed, salt).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// Views stored for every example: union of all supported input patterns.
ApertureMask stored_view_mask(int angular, int radius);

struct TrainingExample {
  std::vector<Image> inputs;  // full-size, pre-shifted, possibly noisy
  Image target;               // clean, cropped by `crop_margin`
  int crop_margin = kDefaultCropMargin;
  double pixels = 0;
  double noise_sigma = 0;
};

/// Adds clamped i.i.d. Gaussian noise of standard deviation sigma.
void add_gaussian_noise(Image& img, double sigma, std::mt19937_64& rng);

/// Pre-shifted input views (with noise) and the clean target from sparse
/// views plus an already computed ground truth.
TrainingExample make_training_example(const LightField& views, const Image& target,
                                      const FocusParameter& focus, const ApertureMask& input_mask,
                                      double noise_sigma, std::mt19937_64& rng,
                                      int crop_margin = kDefaultCropMargin);
/// Renders inputs and ground truth from the scene.
TrainingExample make_training_example(const LayeredScene& scene, const FocusParameter& focus,
                                      const ApertureMask& input_mask, double noise_sigma,
                                      std::mt19937_64& rng, int crop_margin = kDefaultCropMargin);

struct Patch {
  std::vector<Plane<double>> input;  // channel 3*i + c is view i, color c
  Image target;
  Index top = 0;  // position in target coordinates
  Index left = 0;
};

Patch extract_patch(const TrainingExample& example, Index top, Index left, int patch_size);
std::vector<Patch> sample_patches(const TrainingExample& example, int patch_size, int count,
                                  std::mt19937_64& rng);

/// One stored scene: its sparse input views and one target per focus value.
struct SceneRecord {
  std::string name;
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  LightField views;
  std::vector<double> focus_values;

  std::filesystem::path target_path(double pixels) const;
  Image load_target(double pixels) const;
};

struct Dataset {
  DatasetSpec spec;
  std::filesystem::path root;
  std::vector<SceneRecord> train;
  std::vector<SceneRecord> val;
  std::vector<SceneRecord> test;

  const std::vector<SceneRecord>& split(const std::string& name) const;
};

std::string target_file_name(double pixels);

/// Materializes every scene of the spec below `root`. Pure function of the
/// spec (including its seed).
void generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);
/// Returns a list of problems; empty when `dataset.json` conforms.
std::vector<std::string> validate_dataset_json(const nlohmann::json& j);

}  // namespace slf::synth
