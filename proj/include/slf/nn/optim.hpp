#pragma once

#include "slf/nn/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace slf::nn {

struct LearningRateSchedule {
  double initial = 0.0005;
  double decay_rate = 0.9;
  std::int64_t decay_steps = 300;
  bool staircase = true;

  /// initial * decay_rate^(step / decay_steps), with the exponent floored
  /// in staircase mode. `step` counts completed updates.
  double at(std::int64_t step) const {
    const double e = static_cast<double>(step) / static_cast<double>(decay_steps);
    return initial * std::pow(decay_rate, staircase ? std::floor(e) : e);
  }
};

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::vector<typename Tensor<Scalar>::Vector> m;
  std::vector<typename Tensor<Scalar>::Vector> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LearningRateSchedule lr_schedule;

  void init(std::span<Tensor<Scalar>* const> params) {
    m.clear();
    v.clear();
    for (const Tensor<Scalar>* p : params) {
      m.push_back(Tensor<Scalar>::Vector::Zero(p->size()));
      v.push_back(Tensor<Scalar>::Vector::Zero(p->size()));
    }
    step = 0;
  }
};

/// One bias-corrected Adam update using each parameter's stored gradient.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, AdamState<Scalar>& state) {
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match parameters");
  const double lr = state.lr_schedule.at(state.step);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = static_cast<Scalar>(state.beta1);
  const Scalar b2 = static_cast<Scalar>(state.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, t));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, t));
  const Scalar eps = static_cast<Scalar>(state.eps);
  const Scalar rate = static_cast<Scalar>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& p = *params[i];
    if (state.m[i].size() != p.size()) throw std::invalid_argument("adam_step: moment shape mismatch");
    const auto& g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.data().array() -= rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

/// Glorot uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)), fans taken
/// over the kernel receptive field. Rank-1 shapes (biases) are zero.
template <typename Scalar>
Tensor<Scalar> xavier_init(const Shape& shape, std::mt19937_64& rng) {
  Tensor<Scalar> t(shape);
  if (shape.size() < 2) return t;
  Index receptive = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
  const double fan_in = static_cast<double>(shape[1] * receptive);
  const double fan_out = static_cast<double>(shape[0] * receptive);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(u(rng));
  return t;
}

}  // namespace slf::nn
