#include "slf/lf/light_field.hpp"

#include "slf/util/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace slf {

LightField::LightField(int grid_rows, int grid_cols, Index height, Index width)
    : rows_(grid_rows), cols_(grid_cols), height_(height), width_(width),
      views_(static_cast<std::size_t>(std::max(grid_rows, 0)) * std::max(grid_cols, 0)) {
  if (grid_rows < 1 || grid_cols < 1 || height < 1 || width < 1)
    throw std::invalid_argument("LightField: grid and image dimensions must be positive");
}

std::size_t LightField::offset(ViewIndex i) const {
  if (i.u < 0 || i.u >= rows_ || i.v < 0 || i.v >= cols_)
    throw std::out_of_range("LightField: view index outside grid");
  return static_cast<std::size_t>(i.u) * cols_ + i.v;
}

bool LightField::has_view(ViewIndex i) const { return views_[offset(i)].has_value(); }

const Image& LightField::view(ViewIndex i) const {
  const auto& slot = views_[offset(i)];
  if (!slot) throw std::out_of_range("LightField: view (" + std::to_string(i.u) + "," +
                                     std::to_string(i.v) + ") is not present");
  return *slot;
}

void LightField::set_view(ViewIndex i, Image img) {
  if (img.height() != height_ || img.width() != width_)
    throw std::invalid_argument("LightField: view dimensions differ from light field");
  views_[offset(i)] = std::move(img);
}

std::vector<ViewIndex> LightField::present_views() const {
  std::vector<ViewIndex> out;
  for (int u = 0; u < rows_; ++u)
    for (int v = 0; v < cols_; ++v)
      if (views_[static_cast<std::size_t>(u) * cols_ + v]) out.push_back({u, v});
  return out;
}

double pixels_to_alpha(double pixels) {
  if (pixels == 1.0) throw std::domain_error("pixels = 1 puts the focal plane at infinity (alpha undefined)");
  return 1.0 / (1.0 - pixels);
}

double alpha_to_pixels(double alpha) {
  if (alpha == 0.0) throw std::domain_error("alpha = 0 has no pixels equivalent");
  return 1.0 - 1.0 / alpha;
}

FocusParameter::FocusParameter(double pixels) : pixels_(pixels), alpha_(pixels_to_alpha(pixels)) {}

Shift view_shift(ViewIndex view, AngularCenter center, double pixels) {
  return {pixels * (view.u - center.u), pixels * (view.v - center.v)};
}

ApertureMask::ApertureMask(int grid_rows, int grid_cols)
    : rows_(grid_rows), cols_(grid_cols),
      selected_(static_cast<std::size_t>(std::max(grid_rows, 0)) * std::max(grid_cols, 0), 0) {
  if (grid_rows < 1 || grid_cols < 1) throw std::invalid_argument("ApertureMask: empty grid");
}

bool ApertureMask::selected(ViewIndex i) const {
  if (i.u < 0 || i.u >= rows_ || i.v < 0 || i.v >= cols_) return false;
  return selected_[static_cast<std::size_t>(i.u) * cols_ + i.v] != 0;
}

void ApertureMask::select(ViewIndex i, bool on) {
  if (i.u < 0 || i.u >= rows_ || i.v < 0 || i.v >= cols_)
    throw std::out_of_range("ApertureMask: view index outside grid");
  selected_[static_cast<std::size_t>(i.u) * cols_ + i.v] = on ? 1 : 0;
}

int ApertureMask::count() const {
  return static_cast<int>(std::count(selected_.begin(), selected_.end(), 1));
}

std::vector<ViewIndex> ApertureMask::views() const {
  std::vector<ViewIndex> out;
  for (int u = 0; u < rows_; ++u)
    for (int v = 0; v < cols_; ++v)
      if (selected({u, v})) out.push_back({u, v});
  return out;
}

ApertureMask ApertureMask::united(const ApertureMask& other) const {
  if (other.rows_ != rows_ || other.cols_ != cols_)
    throw std::invalid_argument("ApertureMask: union of masks with different grids");
  ApertureMask out = *this;
  for (std::size_t k = 0; k < selected_.size(); ++k) out.selected_[k] |= other.selected_[k];
  return out;
}

std::string to_string(InputConfig c) {
  switch (c) {
    case InputConfig::two_horizontal: return "two_horizontal";
    case InputConfig::four_rect: return "four_rect";
    case InputConfig::four_rhombus: return "four_rhombus";
    case InputConfig::eight: return "eight";
  }
  throw std::invalid_argument("unknown InputConfig");
}

InputConfig input_config_from_string(const std::string& s) {
  if (s == "two_horizontal" || s == "horizontal2") return InputConfig::two_horizontal;
  if (s == "four_rect" || s == "rect4") return InputConfig::four_rect;
  if (s == "four_rhombus" || s == "rhombus4") return InputConfig::four_rhombus;
  if (s == "eight") return InputConfig::eight;
  throw std::invalid_argument("unknown input configuration '" + s + "'");
}

int view_count(InputConfig c) {
  switch (c) {
    case InputConfig::two_horizontal: return 2;
    case InputConfig::four_rect:
    case InputConfig::four_rhombus: return 4;
    case InputConfig::eight: return 8;
  }
  throw std::invalid_argument("unknown InputConfig");
}

ApertureMask circular_mask(int grid_rows, int grid_cols) {
  if (grid_rows != 17 || grid_cols != 17)
    throw std::invalid_argument("circular_mask: the 241-view aperture is defined on a 17x17 grid");
  // Within [-8, 8]^2, r^2 = 74 is the smallest disc holding at least 241
  // cells and it holds exactly 241, so no tie-breaking removal is needed.
  constexpr int kRadiusSquared = 74;
  ApertureMask mask(17, 17);
  for (int u = 0; u < 17; ++u)
    for (int v = 0; v < 17; ++v)
      if ((u - 8) * (u - 8) + (v - 8) * (v - 8) <= kRadiusSquared) mask.select({u, v});
  return mask;
}

ApertureMask dense_mask(int grid_rows, int grid_cols) {
  ApertureMask mask(grid_rows, grid_cols);
  for (int u = 0; u < grid_rows; ++u)
    for (int v = 0; v < grid_cols; ++v) mask.select({u, v});
  return mask;
}

ApertureMask strided_mask(int grid_rows, int grid_cols, int stride) {
  if (stride < 1) throw std::invalid_argument("strided_mask: stride must be positive");
  if ((grid_rows - 1) % stride != 0 || (grid_cols - 1) % stride != 0)
    throw std::invalid_argument("strided_mask: stride does not tile the grid symmetrically");
  ApertureMask mask(grid_rows, grid_cols);
  for (int u = 0; u < grid_rows; u += stride)
    for (int v = 0; v < grid_cols; v += stride) mask.select({u, v});
  return mask;
}

ApertureMask input_view_selection(InputConfig config, int grid_rows, int grid_cols, int radius) {
  if (radius < 1) throw std::invalid_argument("input_view_selection: radius must be positive");
  if (grid_rows % 2 == 0 || grid_cols % 2 == 0)
    throw std::invalid_argument("input_view_selection: grid needs a center view (odd dimensions)");
  const int cu = grid_rows / 2;
  const int cv = grid_cols / 2;
  const bool fits_rows = cu - radius >= 0;
  const bool fits_cols = cv - radius >= 0;
  ApertureMask mask(grid_rows, grid_cols);
  auto need = [](bool ok) {
    if (!ok) throw std::invalid_argument("input_view_selection: pattern exceeds the grid");
  };
  switch (config) {
    case InputConfig::two_horizontal:
      need(fits_cols);
      mask.select({cu, cv - radius});
      mask.select({cu, cv + radius});
      break;
    case InputConfig::four_rhombus:
      need(fits_rows && fits_cols);
      mask.select({cu - radius, cv});
      mask.select({cu, cv - radius});
      mask.select({cu, cv + radius});
      mask.select({cu + radius, cv});
      break;
    case InputConfig::four_rect:
      need(fits_rows && fits_cols);
      mask.select({cu - radius, cv - radius});
      mask.select({cu - radius, cv + radius});
      mask.select({cu + radius, cv - radius});
      mask.select({cu + radius, cv + radius});
      break;
    case InputConfig::eight:
      return input_view_selection(InputConfig::four_rhombus, grid_rows, grid_cols, radius)
          .united(input_view_selection(InputConfig::four_rect, grid_rows, grid_cols, radius));
  }
  return mask;
}

namespace {

void check_mask(const LightField& lf, const ApertureMask& mask) {
  if (mask.grid_rows() != lf.grid_rows() || mask.grid_cols() != lf.grid_cols())
    throw std::invalid_argument("refocus: mask dimensions do not match the light field grid");
  if (mask.count() == 0) throw std::invalid_argument("refocus: aperture mask selects no views");
}

}  // namespace

std::vector<Image> shifted_views(const LightField& lf, const ApertureMask& mask,
                                 const FocusParameter& focus) {
  check_mask(lf, mask);
  std::vector<Image> out;
  for (const ViewIndex& vi : mask.views()) {
    const Shift s = view_shift(vi, lf.center(), focus.pixels());
    out.push_back(shift_image(lf.view(vi), -s.dy, -s.dx));
  }
  return out;
}

Image average(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("average: no images");
  Image acc = images.front();
  for (std::size_t k = 1; k < images.size(); ++k) {
    if (!same_shape(acc, images[k])) throw std::invalid_argument("average: shape mismatch");
    acc += images[k];
  }
  for (auto& c : acc.channels) c /= static_cast<double>(images.size());
  return acc;
}

RefocusedImage refocus_shift_average(const LightField& lf, const ApertureMask& mask,
                                     const FocusParameter& focus, int crop_margin) {
  check_mask(lf, mask);
  const std::vector<ViewIndex> views = mask.views();
  for (const ViewIndex& vi : views) (void)lf.view(vi);  // fail early on absent views

  Image acc(lf.height(), lf.width());
  // Row bands are independent and each pixel sums its views in mask order,
  // so the result does not depend on the thread count.
  parallel_for(static_cast<std::size_t>(lf.height()), [&](std::size_t b, std::size_t e) {
    for (const ViewIndex& vi : views) {
      const Shift s = view_shift(vi, lf.center(), focus.pixels());
      accumulate_shifted(lf.view(vi), -s.dy, -s.dx, acc, static_cast<Index>(b),
                         static_cast<Index>(e));
    }
  });
  for (auto& c : acc.channels) c /= static_cast<double>(views.size());
  clamp01_inplace(acc);
  return {focus, crop(acc, crop_margin), crop_margin};
}

}  // namespace slf
