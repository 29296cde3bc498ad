#pragma once

#include "slf/nn/tensor.hpp"

#include <cmath>

namespace slf::nn {

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)));
}

/// Passes the gradient where x > 0; the subgradient at 0 is 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& x) {
  if (grad_out.shape() != x.shape()) throw std::invalid_argument("relu_backward: shape mismatch");
  return Tensor<Scalar>(x.shape(), (x.data().array() > Scalar(0)).select(grad_out.data(), Scalar(0)));
}

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Tensor<Scalar> grad;
};

/// Mean absolute error over every element; grad = sign(pred - target) / N.
template <typename Scalar>
LossResult<Scalar> l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("l1_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                                shape_string(target.shape()));
  const Index n = pred.size();
  if (n == 0) throw std::invalid_argument("l1_loss: empty tensors");
  const auto diff = (pred.data() - target.data()).array();
  LossResult<Scalar> r;
  r.loss = diff.abs().sum() / static_cast<Scalar>(n);
  r.grad = Tensor<Scalar>(pred.shape(), (diff.sign() / static_cast<Scalar>(n)).matrix());
  return r;
}

/// Groups channels as views x RGB and averages over views: [B, 3k, H, W] -> [B, 3, H, W].
template <typename Scalar>
Tensor<Scalar> view_average(const Tensor<Scalar>& x) {
  x.require_rank(4);
  if (x.dim(1) % 3 != 0) throw std::invalid_argument("view_average: channel count is not a multiple of 3");
  const Index views = x.dim(1) / 3;
  Tensor<Scalar> out(Shape{x.dim(0), 3, x.dim(2), x.dim(3)});
  for (Index b = 0; b < x.dim(0); ++b) {
    auto o = out.item(b);
    const auto in = x.item(b);
    for (Index v = 0; v < views; ++v) o += in.middleRows(3 * v, 3);
    o /= static_cast<Scalar>(views);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> view_average_backward(const Tensor<Scalar>& grad_out, Index in_channels) {
  grad_out.require_rank(4);
  const Index views = in_channels / 3;
  Tensor<Scalar> g(Shape{grad_out.dim(0), in_channels, grad_out.dim(2), grad_out.dim(3)});
  for (Index b = 0; b < grad_out.dim(0); ++b) {
    auto gi = g.item(b);
    const auto go = grad_out.item(b);
    for (Index v = 0; v < views; ++v) gi.middleRows(3 * v, 3) = go / static_cast<Scalar>(views);
  }
  return g;
}

template <typename Scalar>
void add_inplace(Tensor<Scalar>& acc, const Tensor<Scalar>& x) {
  if (acc.shape() != x.shape()) throw std::invalid_argument("add: shape mismatch");
  acc.data() += x.data();
}

}  // namespace slf::nn
