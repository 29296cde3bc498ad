#pragma once

#include "slf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>

namespace slf::nn {

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  Index worst_index = 0;
  double analytic_at_worst = 0;
  double numeric_at_worst = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t min_coordinates = 200;
  /// Denominator floor so coordinates with vanishing gradient are judged absolutely.
  double scale_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Compares analytic gradients against central differences.
///
/// `objective(compute_grads)` returns the scalar objective for the current
/// values of `tensors`; when `compute_grads` is true it must also leave
/// d(objective)/d(tensor) in each tensor's grad(). At least
/// `min_coordinates` coordinates (or all, if fewer exist) are sampled
/// uniformly across the tensors.
template <typename Scalar>
GradCheckReport grad_check(const std::function<Scalar(bool)>& objective, std::span<Tensor<Scalar>* const> tensors,
                           const GradCheckOptions& opt = {}) {
  objective(true);
  std::vector<typename Tensor<Scalar>::Vector> analytic;
  std::size_t total = 0;
  for (Tensor<Scalar>* t : tensors) {
    analytic.push_back(t->grad());
    total += static_cast<std::size_t>(t->size());
  }

  std::vector<std::pair<std::size_t, Index>> coords;
  if (total <= opt.min_coordinates) {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      for (Index k = 0; k < tensors[i]->size(); ++k) coords.emplace_back(i, k);
  } else {
    // Every tensor contributes at least one coordinate so small ones (biases) are covered.
    std::mt19937_64 rng(opt.seed);
    for (std::size_t i = 0; i < tensors.size(); ++i)
      coords.emplace_back(i, std::uniform_int_distribution<Index>(0, tensors[i]->size() - 1)(rng));
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    while (coords.size() < opt.min_coordinates) {
      std::size_t flat = pick(rng);
      std::size_t i = 0;
      while (flat >= static_cast<std::size_t>(tensors[i]->size())) flat -= static_cast<std::size_t>(tensors[i++]->size());
      coords.emplace_back(i, static_cast<Index>(flat));
    }
  }

  GradCheckReport r;
  const Scalar h = static_cast<Scalar>(opt.step);
  for (const auto& [i, k] : coords) {
    Scalar& x = tensors[i]->data()[k];
    const Scalar saved = x;
    x = saved + h;
    const double fp = static_cast<double>(objective(false));
    x = saved - h;
    const double fm = static_cast<double>(objective(false));
    x = saved;
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double a = static_cast<double>(analytic[i][k]);
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.scale_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > r.max_rel_error || r.checked == 0) {
      r.max_rel_error = std::max(r.max_rel_error, rel);
      r.worst_tensor = i;
      r.worst_index = k;
      r.analytic_at_worst = a;
      r.numeric_at_worst = numeric;
    }
    ++r.checked;
  }
  r.passed = r.max_rel_error < opt.tolerance;
  return r;
}

}  // namespace slf::nn
