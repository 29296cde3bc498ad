#pragma once

#include "slf/lf/image.hpp"

#include <chrono>

namespace slf::metrics {

/// 10 log10(1 / MSE) over all pixels and channels, for images in [0, 1].
/// Identical images give +infinity.
double psnr(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);

/// PSNR restricted to pixels where `region` is non-zero (all channels).
double psnr_masked(const Image& a, const Image& b, const Plane<double>& region);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean single-scale SSIM with a Gaussian window over the valid region,
/// computed per channel and averaged.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace slf::metrics
