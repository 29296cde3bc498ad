#pragma once

#include "slf/lf/image.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slf {

struct ViewIndex {
  int u = 0;
  int v = 0;
  friend bool operator==(const ViewIndex&, const ViewIndex&) = default;
  friend auto operator<=>(const ViewIndex&, const ViewIndex&) = default;
};

struct AngularCenter {
  double u = 0;
  double v = 0;
};

/// Sub-pixel displacement of a view, in pixels.
struct Shift {
  double dy = 0;
  double dx = 0;
};

/// Discrete two-plane light field: a grid of sub-aperture views indexed
/// (u, v), each an RGB image of identical size. A view may be absent when a
/// container stores only a sparse subset of the grid.
class LightField {
 public:
  LightField() = default;
  LightField(int grid_rows, int grid_cols, Index height, Index width);

  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  Index height() const { return height_; }
  Index width() const { return width_; }
  AngularCenter center() const { return {(rows_ - 1) / 2.0, (cols_ - 1) / 2.0}; }

  bool has_view(ViewIndex i) const;
  const Image& view(ViewIndex i) const;
  /// Throws if the view's dimensions differ from the light field's.
  void set_view(ViewIndex i, Image img);
  std::vector<ViewIndex> present_views() const;

 private:
  std::size_t offset(ViewIndex i) const;

  int rows_ = 0;
  int cols_ = 0;
  Index height_ = 0;
  Index width_ = 0;
  std::vector<std::optional<Image>> views_;
};

/// The `pixels` focus control and its focal-plane scale alpha = 1/(1 - pixels).
class FocusParameter {
 public:
  explicit FocusParameter(double pixels);
  double pixels() const { return pixels_; }
  double alpha() const { return alpha_; }

 private:
  double pixels_;
  double alpha_;
};

/// Throws std::domain_error for pixels == 1.
double pixels_to_alpha(double pixels);
/// Inverse map; throws std::domain_error for alpha == 0.
double alpha_to_pixels(double alpha);

/// (dy, dx) = pixels * (u - u_c, v - v_c).
Shift view_shift(ViewIndex view, AngularCenter center, double pixels);

class ApertureMask {
 public:
  ApertureMask(int grid_rows, int grid_cols);

  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  bool selected(ViewIndex i) const;
  void select(ViewIndex i, bool on = true);
  int count() const;
  /// Selected views in row-major order; this is also the channel order of
  /// network input stacks.
  std::vector<ViewIndex> views() const;
  ApertureMask united(const ApertureMask& other) const;

  friend bool operator==(const ApertureMask&, const ApertureMask&) = default;

 private:
  int rows_;
  int cols_;
  std::vector<char> selected_;
};

enum class InputConfig { two_horizontal, four_rect, four_rhombus, eight };

std::string to_string(InputConfig c);
InputConfig input_config_from_string(const std::string& s);
int view_count(InputConfig c);

/// 241 of the 289 views of a 17x17 grid: every (u, v) with
/// (u-8)^2 + (v-8)^2 <= 74.
ApertureMask circular_mask(int grid_rows, int grid_cols);
ApertureMask dense_mask(int grid_rows, int grid_cols);
/// Every `stride`-th view in each direction, aligned on the grid center.
ApertureMask strided_mask(int grid_rows, int grid_cols, int stride);
/// Input patterns around the grid center at `radius` angular steps.
ApertureMask input_view_selection(InputConfig config, int grid_rows, int grid_cols, int radius = 2);

struct RefocusedImage {
  FocusParameter focus;
  Image image;
  int crop_margin = 0;
};

inline constexpr int kDefaultCropMargin = 6;

/// Shift-and-average refocusing over the masked views. Every selected view
/// is sampled at (y + dy, x + dx) with (dy, dx) from view_shift, the results
/// are averaged with equal weight in row-major view order, and `crop_margin`
/// pixels are removed from each side.
RefocusedImage refocus_shift_average(const LightField& lf, const ApertureMask& mask,
                                     const FocusParameter& focus,
                                     int crop_margin = kDefaultCropMargin);

/// Views of the mask, each pre-shifted for `focus` (uncropped, same order as
/// mask.views()). This is what the network consumes.
std::vector<Image> shifted_views(const LightField& lf, const ApertureMask& mask,
                                 const FocusParameter& focus);

/// Equal-weight mean of images of identical shape, in order.
Image average(const std::vector<Image>& images);

}  // namespace slf
