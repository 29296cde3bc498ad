#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>

namespace slf {

using Index = Eigen::Index;

/// One color plane, row-major so that a row is contiguous in memory.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar RGB image. Values are expected in [0,1] wherever the image is a
/// photometric quantity; intermediate buffers may leave that range.
template <typename Scalar>
struct BasicImage {
  std::array<Plane<Scalar>, 3> channels;

  BasicImage() = default;
  BasicImage(Index height, Index width) {
    for (auto& c : channels) c.setZero(height, width);
  }

  static BasicImage constant(Index height, Index width, Scalar value) {
    BasicImage img(height, width);
    for (auto& c : img.channels) c.setConstant(value);
    return img;
  }

  Index height() const { return channels[0].rows(); }
  Index width() const { return channels[0].cols(); }
  bool empty() const { return channels[0].size() == 0; }

  Plane<Scalar>& operator[](int c) { return channels[c]; }
  const Plane<Scalar>& operator[](int c) const { return channels[c]; }

  template <typename Other>
  BasicImage<Other> cast() const {
    BasicImage<Other> out;
    for (int c = 0; c < 3; ++c) out.channels[c] = channels[c].template cast<Other>();
    return out;
  }

  BasicImage& operator+=(const BasicImage& o) {
    for (int c = 0; c < 3; ++c) channels[c] += o.channels[c];
    return *this;
  }
  BasicImage& operator*=(Scalar s) {
    for (auto& c : channels) c *= s;
    return *this;
  }

  friend bool operator==(const BasicImage& a, const BasicImage& b) {
    if (a.height() != b.height() || a.width() != b.width()) return false;
    for (int c = 0; c < 3; ++c)
      if ((a.channels[c] != b.channels[c]).any()) return false;
    return true;
  }
};

using Image = BasicImage<double>;

template <typename Scalar>
bool same_shape(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  return a.height() == b.height() && a.width() == b.width();
}

template <typename Scalar>
Scalar max_abs_diff(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  Scalar m = 0;
  for (int c = 0; c < 3; ++c) m = std::max(m, (a[c] - b[c]).abs().maxCoeff());
  return m;
}

/// Removes `margin` pixels from every side.
template <typename Scalar>
BasicImage<Scalar> crop(const BasicImage<Scalar>& img, Index margin) {
  if (margin == 0) return img;
  const Index h = img.height() - 2 * margin;
  const Index w = img.width() - 2 * margin;
  if (margin < 0 || h <= 0 || w <= 0) throw std::invalid_argument("crop: margin too large for image");
  BasicImage<Scalar> out;
  for (int c = 0; c < 3; ++c) out[c] = img[c].block(margin, margin, h, w);
  return out;
}

template <typename Scalar>
BasicImage<Scalar> window(const BasicImage<Scalar>& img, Index top, Index left, Index h, Index w) {
  if (top < 0 || left < 0 || top + h > img.height() || left + w > img.width())
    throw std::out_of_range("window: region outside image");
  BasicImage<Scalar> out;
  for (int c = 0; c < 3; ++c) out[c] = img[c].block(top, left, h, w);
  return out;
}

template <typename Scalar>
void clamp01_inplace(BasicImage<Scalar>& img) {
  for (auto& c : img.channels) c = c.max(Scalar(0)).min(Scalar(1));
}

template <typename Scalar>
BasicImage<Scalar> clamp01(BasicImage<Scalar> img) {
  clamp01_inplace(img);
  return img;
}

/// Single-plane form of accumulate_shifted.
void accumulate_shifted_plane(const Plane<double>& src, double dy, double dx, Plane<double>& acc,
                              Index row_begin, Index row_end);
Plane<double> shift_plane(const Plane<double>& src, double dy, double dx);

/// Adds `src` translated by (dy, dx) into rows [row_begin, row_end) of `acc`.
/// out(y, x) = src(y - dy, x - dx), sampled bilinearly with coordinates
/// clamped to the image (edge replication). Integer shifts copy pixels exactly.
void accumulate_shifted(const Image& src, double dy, double dx, Image& acc, Index row_begin,
                        Index row_end);

/// Translates the image content by (dy, dx) pixels; see accumulate_shifted.
Image shift_image(const Image& src, double dy, double dx);

/// Bilinear samples at source coordinates (y0 + y * step_y, x0 + x * step_x),
/// clamped at the edges.
Image resample_grid(const Image& src, Index out_h, Index out_w, double y0, double x0, double step_y,
                    double step_x);

struct RescaleGeometry {
  Index height = 0;
  Index width = 0;
  double step_y = 1;  // source pixels per output pixel
  double step_x = 1;
};
RescaleGeometry rescale_geometry(Index h, Index w, double factor);

/// Pixel-center aligned bilinear resize to round(h * factor) x round(w * factor).
Image rescale_image(const Image& src, double factor);

}  // namespace slf
