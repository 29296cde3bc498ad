#include "slf/metrics/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace slf::metrics {

double mse(const Image& a, const Image& b) {
  if (!same_shape(a, b) || a.empty()) throw std::invalid_argument("mse: images must have equal, non-empty shape");
  double sum = 0;
  for (int c = 0; c < 3; ++c) sum += (a[c] - b[c]).square().sum();
  return sum / static_cast<double>(3 * a.height() * a.width());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

double psnr_masked(const Image& a, const Image& b, const Plane<double>& region) {
  if (!same_shape(a, b) || region.rows() != a.height() || region.cols() != a.width())
    throw std::invalid_argument("psnr_masked: shape mismatch");
  const auto sel = (region != 0.0).cast<double>();
  const double n = sel.sum();
  if (n == 0) throw std::invalid_argument("psnr_masked: empty region");
  double sum = 0;
  for (int c = 0; c < 3; ++c) sum += ((a[c] - b[c]).square() * sel).sum();
  const double m = sum / (3 * n);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

namespace {

// Separable "valid" filtering: output is (h - n + 1) x (w - n + 1).
Plane<double> filter_valid(const Plane<double>& in, const std::vector<double>& k) {
  const Index n = static_cast<Index>(k.size());
  const Index oh = in.rows() - n + 1;
  const Index ow = in.cols() - n + 1;
  Plane<double> tmp = Plane<double>::Zero(in.rows(), ow);
  for (Index t = 0; t < n; ++t) tmp += k[static_cast<std::size_t>(t)] * in.middleCols(t, ow);
  Plane<double> out = Plane<double>::Zero(oh, ow);
  for (Index t = 0; t < n; ++t) out += k[static_cast<std::size_t>(t)] * tmp.middleRows(t, oh);
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  if (!same_shape(a, b)) throw std::invalid_argument("ssim: shape mismatch");
  if (a.height() < p.window || a.width() < p.window)
    throw std::invalid_argument("ssim: image smaller than the " + std::to_string(p.window) + "px window");

  std::vector<double> kernel(static_cast<std::size_t>(p.window));
  const double half = (p.window - 1) / 2.0;
  double total = 0;
  for (int i = 0; i < p.window; ++i) {
    const double d = i - half;
    kernel[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * p.sigma * p.sigma));
    total += kernel[static_cast<std::size_t>(i)];
  }
  for (double& v : kernel) v /= total;

  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  double acc = 0;
  for (int c = 0; c < 3; ++c) {
    const Plane<double>& x = a[c];
    const Plane<double>& y = b[c];
    const Plane<double> mx = filter_valid(x, kernel);
    const Plane<double> my = filter_valid(y, kernel);
    const Plane<double> sxx = filter_valid(x * x, kernel) - mx * mx;
    const Plane<double> syy = filter_valid(y * y, kernel) - my * my;
    const Plane<double> sxy = filter_valid(x * y, kernel) - mx * my;
    const Plane<double> num = (2 * mx * my + c1) * (2 * sxy + c2);
    const Plane<double> den = (mx * mx + my * my + c1) * (sxx + syy + c2);
    acc += (num / den).mean();
  }
  return acc / 3.0;
}

}  // namespace slf::metrics
