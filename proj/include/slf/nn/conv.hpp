#pragma once

#include "slf/nn/tensor.hpp"

#include <span>
#include <vector>

namespace slf::nn {

/// 3x3 convolution, stride 1, zero padding 1 (output size equals input size).
/// Computed as cross-correlation. Weight layout is [out, in, 3, 3].
template <typename Scalar>
struct Conv2D {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  Conv2D() = default;
  Conv2D(Index in_channels, Index out_channels)
      : weight(Shape{out_channels, in_channels, 3, 3}), bias(Shape{out_channels}) {}

  Index in_channels() const { return weight.dim(1); }
  Index out_channels() const { return weight.dim(0); }
  Index parameter_count() const { return weight.size() + bias.size(); }

  typename Tensor<Scalar>::ConstMatrixMap weight_matrix() const {
    return {weight.ptr(), out_channels(), in_channels() * 9};
  }
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

namespace detail {

template <typename Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row (c*9 + ky*3 + kx), column (y*W + x) holds input(c, y+ky-1, x+kx-1), zero outside.
template <typename Scalar, typename InMap>
void im2col(const InMap& in, Index h, Index w, ColMatrix<Scalar>& col) {
  const Index channels = in.rows();
  col.resize(channels * 9, h * w);
  for (Index c = 0; c < channels; ++c) {
    const Scalar* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = col.row(c * 9 + ky * 3 + kx).data();
        for (Index y = 0; y < h; ++y) {
          Scalar* d = dst + y * w;
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            std::fill(d, d + w, Scalar(0));
            continue;
          }
          const Scalar* s = src + sy * w;
          if (kx == 0) {
            d[0] = 0;
            std::copy(s, s + w - 1, d + 1);
          } else if (kx == 1) {
            std::copy(s, s + w, d);
          } else {
            std::copy(s + 1, s + w, d);
            d[w - 1] = 0;
          }
        }
      }
    }
  }
}

template <typename Scalar, typename OutMap>
void col2im_add(const ColMatrix<Scalar>& col, Index h, Index w, OutMap& out) {
  const Index channels = out.rows();
  for (Index c = 0; c < channels; ++c) {
    Scalar* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = col.row(c * 9 + ky * 3 + kx).data();
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Scalar* s = src + y * w;
          Scalar* d = dst + sy * w;
          if (kx == 0) {
            for (Index x = 1; x < w; ++x) d[x - 1] += s[x];
          } else if (kx == 1) {
            for (Index x = 0; x < w; ++x) d[x] += s[x];
          } else {
            for (Index x = 0; x + 1 < w; ++x) d[x + 1] += s[x];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Several convolutions reading the same input, computed with one im2col
/// and one stacked GEMM per batch item. Returns one output per layer.
template <typename Scalar>
std::vector<Tensor<Scalar>> conv2d_forward_fused(const Tensor<Scalar>& input,
                                                 std::span<const Conv2D<Scalar>* const> layers) {
  input.require_rank(4);
  const Index batch = input.dim(0), h = input.dim(2), w = input.dim(3);
  const Index k = input.dim(1) * 9;
  Index total = 0;
  for (const auto* l : layers) {
    if (l->in_channels() != input.dim(1))
      throw std::invalid_argument("conv2d: input has " + std::to_string(input.dim(1)) + " channels, layer expects " +
                                  std::to_string(l->in_channels()));
    total += l->out_channels();
  }
  detail::ColMatrix<Scalar> wst(total, k);
  typename Tensor<Scalar>::Vector bst(total);
  std::vector<Tensor<Scalar>> out;
  for (Index r = 0; const auto* l : layers) {
    wst.middleRows(r, l->out_channels()) = l->weight_matrix();
    bst.segment(r, l->out_channels()) = l->bias.data();
    r += l->out_channels();
    out.emplace_back(Shape{batch, l->out_channels(), h, w});
  }
  detail::ColMatrix<Scalar> col, res(total, h * w);
  for (Index b = 0; b < batch; ++b) {
    detail::im2col<Scalar>(input.item(b), h, w, col);
    res.noalias() = wst * col;
    res.colwise() += bst;
    for (Index r = 0, i = 0; i < static_cast<Index>(layers.size()); ++i) {
      const Index n = layers[static_cast<std::size_t>(i)]->out_channels();
      out[static_cast<std::size_t>(i)].item(b) = res.middleRows(r, n);
      r += n;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Conv2D<Scalar>& layer) {
  const Conv2D<Scalar>* l = &layer;
  return std::move(conv2d_forward_fused(input, std::span<const Conv2D<Scalar>* const>(&l, 1))[0]);
}

template <typename Scalar>
struct FusedConvGrads {
  Tensor<Scalar> input;  // empty unless requested
  std::vector<Tensor<Scalar>> weight;
  std::vector<Tensor<Scalar>> bias;
};

/// Backward pass of conv2d_forward_fused; the input gradient is the sum of
/// every layer's contribution.
template <typename Scalar>
FusedConvGrads<Scalar> conv2d_backward_fused(std::span<const Tensor<Scalar>* const> grad_outs,
                                             const Tensor<Scalar>& input,
                                             std::span<const Conv2D<Scalar>* const> layers,
                                             bool need_input_grad = true) {
  input.require_rank(4);
  if (grad_outs.size() != layers.size()) throw std::invalid_argument("conv2d_backward: one gradient per layer");
  const Index batch = input.dim(0), h = input.dim(2), w = input.dim(3);
  const Index k = input.dim(1) * 9;
  Index total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Tensor<Scalar>& go = *grad_outs[i];
    go.require_rank(4);
    if (go.dim(0) != batch || go.dim(1) != layers[i]->out_channels() || go.dim(2) != h || go.dim(3) != w ||
        layers[i]->in_channels() != input.dim(1))
      throw std::invalid_argument("conv2d_backward: shape mismatch");
    total += layers[i]->out_channels();
  }

  detail::ColMatrix<Scalar> wst(total, k);
  for (Index r = 0; const auto* l : layers) {
    wst.middleRows(r, l->out_channels()) = l->weight_matrix();
    r += l->out_channels();
  }
  detail::ColMatrix<Scalar> gw = detail::ColMatrix<Scalar>::Zero(total, k);
  typename Tensor<Scalar>::Vector gb = Tensor<Scalar>::Vector::Zero(total);

  FusedConvGrads<Scalar> g;
  if (need_input_grad) g.input = Tensor<Scalar>(input.shape());
  detail::ColMatrix<Scalar> col, dcol, gst(total, h * w);
  for (Index b = 0; b < batch; ++b) {
    for (Index r = 0, i = 0; i < static_cast<Index>(layers.size()); ++i) {
      const auto& go = *grad_outs[static_cast<std::size_t>(i)];
      gst.middleRows(r, go.dim(1)) = go.item(b);
      r += go.dim(1);
    }
    detail::im2col<Scalar>(input.item(b), h, w, col);
    gw.noalias() += gst * col.transpose();
    gb += gst.rowwise().sum();
    if (need_input_grad) {
      dcol.noalias() = wst.transpose() * gst;
      auto gi = g.input.item(b);
      detail::col2im_add<Scalar>(dcol, h, w, gi);
    }
  }
  for (Index r = 0; const auto* l : layers) {
    const Index n = l->out_channels();
    Tensor<Scalar> wt(l->weight.shape());
    typename Tensor<Scalar>::MatrixMap(wt.ptr(), n, k) = gw.middleRows(r, n);
    g.weight.push_back(std::move(wt));
    g.bias.emplace_back(l->bias.shape(), gb.segment(r, n));
    r += n;
  }
  return g;
}

/// Exact gradients of conv2d_forward given the upstream gradient.
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                  const Conv2D<Scalar>& layer, bool need_input_grad = true) {
  const Conv2D<Scalar>* l = &layer;
  const Tensor<Scalar>* go = &grad_out;
  auto f = conv2d_backward_fused(std::span<const Tensor<Scalar>* const>(&go, 1), input,
                                 std::span<const Conv2D<Scalar>* const>(&l, 1), need_input_grad);
  return {std::move(f.input), std::move(f.weight[0]), std::move(f.bias[0])};
}

}  // namespace slf::nn
