#pragma once

#include "slf/lf/light_field.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace slf::synth {

/// A fronto-parallel textured plane. `disparity` is the per-angular-step
/// translation of the layer between neighbouring views, in pixels.
struct Layer {
  Image texture;
  Plane<double> alpha;  // coverage in {0, 1}
  double disparity = 0;
};

/// Layers ordered back to front; the first layer covers the whole frame.
struct LayeredScene {
  std::vector<Layer> layers;
  Index height = 0;
  Index width = 0;
  std::uint64_t seed = 0;
};

struct SceneParams {
  Index height = 128;
  Index width = 192;
  int min_layers = 2;
  int max_layers = 5;
  /// Candidate disparities; k * 0.25 for k in [-6, 5] by default.
  std::vector<double> disparities = default_disparities();

  static std::vector<double> default_disparities();
};

/// Deterministic multi-scale colored texture with shapes and glyph strokes,
/// values inside [0.1, 0.9].
Image make_texture(Index height, Index width, std::mt19937_64& rng);

LayeredScene generate_scene(const SceneParams& params, std::uint64_t seed);
LayeredScene single_layer_scene(Image texture, double disparity);
/// Background at `back_disparity` plus one opaque rectangle in front.
LayeredScene two_layer_scene(Image back, Image front, Plane<double> front_alpha, double back_disparity,
                             double front_disparity);

/// Pinhole view: layers composited back to front, each translated by
/// disparity * (u - u_c, v - v_c) with premultiplied coverage.
Image render_view(const LayeredScene& scene, ViewIndex view, AngularCenter center);
LightField render_lightfield(const LayeredScene& scene, int grid_rows, int grid_cols);
/// Like render_lightfield but only the views selected by `mask`.
LightField render_views(const LayeredScene& scene, const ApertureMask& mask);

inline constexpr int kGroundTruthGrid = 17;

/// Shift-and-average over the 241-view circular aperture of a 17x17 field.
RefocusedImage ground_truth_refocus(const LayeredScene& scene, const FocusParameter& focus,
                                    int crop_margin = kDefaultCropMargin);
RefocusedImage ground_truth_refocus(const LightField& dense, const FocusParameter& focus,
                                    int crop_margin = kDefaultCropMargin);

}  // namespace slf::synth
