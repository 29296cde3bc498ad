#include "slf/lf/image.hpp"

#include <algorithm>
#include <cmath>

namespace slf {

namespace {

Index clamp_index(Index i, Index n) { return std::clamp<Index>(i, 0, n - 1); }

}  // namespace

void accumulate_shifted_plane(const Plane<double>& src, double dy, double dx, Plane<double>& acc,
                              Index row_begin, Index row_end) {
  const Index h = src.rows();
  const Index w = src.cols();
  if (h == 0 || w == 0) throw std::invalid_argument("shift: empty image");
  if (acc.rows() != h || acc.cols() != w) throw std::invalid_argument("shift: accumulator shape mismatch");

  // The sample position is (y - dy, x - dx); its integer part and fraction are
  // the same for every pixel, so the two passes use constant weights.
  const double sy = -dy;
  const double sx = -dx;
  const double fy_floor = std::floor(sy);
  const double fx_floor = std::floor(sx);
  const double fy = sy - fy_floor;
  const double fx = sx - fx_floor;
  const Index oy = static_cast<Index>(fy_floor);
  const Index ox = static_cast<Index>(fx_floor);

  const Index pad = std::abs(ox) + 2;
  Eigen::Array<double, 1, Eigen::Dynamic> row(w);
  Eigen::Array<double, 1, Eigen::Dynamic> ext(w + 2 * pad);
  for (Index y = row_begin; y < row_end; ++y) {
    const Index ya = clamp_index(y + oy, h);
    const Index yb = clamp_index(y + oy + 1, h);
    row = (1.0 - fy) * src.row(ya) + fy * src.row(yb);
    ext.segment(pad, w) = row;
    ext.head(pad).setConstant(row(0));
    ext.tail(pad).setConstant(row(w - 1));
    acc.row(y) += (1.0 - fx) * ext.segment(pad + ox, w) + fx * ext.segment(pad + ox + 1, w);
  }
}

Plane<double> shift_plane(const Plane<double>& src, double dy, double dx) {
  Plane<double> out = Plane<double>::Zero(src.rows(), src.cols());
  accumulate_shifted_plane(src, dy, dx, out, 0, src.rows());
  return out;
}

void accumulate_shifted(const Image& src, double dy, double dx, Image& acc, Index row_begin,
                        Index row_end) {
  if (src.empty()) throw std::invalid_argument("shift: empty image");
  if (!same_shape(src, acc)) throw std::invalid_argument("shift: accumulator shape mismatch");
  for (int c = 0; c < 3; ++c) accumulate_shifted_plane(src[c], dy, dx, acc[c], row_begin, row_end);
}

Image shift_image(const Image& src, double dy, double dx) {
  Image out(src.height(), src.width());
  accumulate_shifted(src, dy, dx, out, 0, src.height());
  return out;
}

Image resample_grid(const Image& src, Index out_h, Index out_w, double y0, double x0, double step_y,
                    double step_x) {
  if (src.empty()) throw std::invalid_argument("resample: empty image");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resample: empty output");
  std::vector<Index> xa(static_cast<std::size_t>(out_w)), xb(static_cast<std::size_t>(out_w));
  std::vector<double> wx(static_cast<std::size_t>(out_w));
  for (Index x = 0; x < out_w; ++x) {
    const double sx = x0 + x * step_x;
    const double f = std::floor(sx);
    xa[x] = clamp_index(static_cast<Index>(f), src.width());
    xb[x] = clamp_index(static_cast<Index>(f) + 1, src.width());
    wx[x] = sx - f;
  }

  Image out(out_h, out_w);
  for (Index y = 0; y < out_h; ++y) {
    const double sy = y0 + y * step_y;
    const double f = std::floor(sy);
    const Index ya = clamp_index(static_cast<Index>(f), src.height());
    const Index yb = clamp_index(static_cast<Index>(f) + 1, src.height());
    const double wy = sy - f;
    for (int c = 0; c < 3; ++c) {
      for (Index x = 0; x < out_w; ++x) {
        const double top = (1 - wx[x]) * src[c](ya, xa[x]) + wx[x] * src[c](ya, xb[x]);
        const double bot = (1 - wx[x]) * src[c](yb, xa[x]) + wx[x] * src[c](yb, xb[x]);
        out[c](y, x) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

RescaleGeometry rescale_geometry(Index h, Index w, double factor) {
  if (!(factor > 0)) throw std::invalid_argument("rescale: factor must be positive");
  RescaleGeometry g;
  g.height = std::max<Index>(1, static_cast<Index>(std::lround(h * factor)));
  g.width = std::max<Index>(1, static_cast<Index>(std::lround(w * factor)));
  g.step_y = static_cast<double>(h) / g.height;
  g.step_x = static_cast<double>(w) / g.width;
  return g;
}

Image rescale_image(const Image& src, double factor) {
  if (src.empty()) throw std::invalid_argument("rescale: empty image");
  const RescaleGeometry g = rescale_geometry(src.height(), src.width(), factor);
  return resample_grid(src, g.height, g.width, 0.5 * g.step_y - 0.5, 0.5 * g.step_x - 0.5, g.step_y, g.step_x);
}

}  // namespace slf
