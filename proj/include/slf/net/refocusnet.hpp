#pragma once

#include "slf/net/config.hpp"
#include "slf/nn/conv.hpp"
#include "slf/nn/ops.hpp"
#include "slf/nn/optim.hpp"

#include <optional>
#include <random>
#include <vector>

namespace slf::net {

using nn::Shape;
using nn::Tensor;

/// Two-trajectory residual refocusing network.
///
/// Trajectory A is `depth` 3x3 convolutions, each followed by ReLU (the
/// first maps the stacked input views to `width` channels). Layer i of
/// trajectory B reads the i-th feature map of A and emits a linear residual
/// with `in_channels` channels; the residuals are summed into R. The head
/// depends on the variant; see Variant.
template <typename Scalar>
class RefocusNet {
 public:
  struct Cache {
    std::vector<Tensor<Scalar>> activations;  // [0] is the input, [i] is ReLU output of A_i
    Tensor<Scalar> residual_sum;
  };

  RefocusNet() = default;

  /// Xavier-initialized weights, zero biases.
  RefocusNet(const NetworkConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    const Index in = config_.in_channels, w = config_.width;
    for (int i = 0; i < config_.depth; ++i) traj_a_.push_back(make_layer(i == 0 ? in : w, w, rng));
    if (config_.variant == Variant::no_skip) {
      head_ = make_layer(w, 3, rng);
      return;
    }
    for (int i = 0; i < config_.depth; ++i) traj_b_.push_back(make_layer(w, in, rng));
    if (config_.variant != Variant::variant2) head_ = make_layer(in, 3, rng);
  }

  const NetworkConfig& config() const { return config_; }

  /// Parameters in declaration order: A weights/biases, B weights/biases, head.
  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> out;
    auto add = [&](nn::Conv2D<Scalar>& l) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    };
    for (auto& l : traj_a_) add(l);
    for (auto& l : traj_b_) add(l);
    if (head_) add(*head_);
    return out;
  }
  std::vector<const Tensor<Scalar>*> parameters() const {
    std::vector<const Tensor<Scalar>*> out;
    for (Tensor<Scalar>* p : const_cast<RefocusNet*>(this)->parameters()) out.push_back(p);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const Tensor<Scalar>* p : parameters()) n += p->size();
    return n;
  }

  void zero_grad() {
    for (Tensor<Scalar>* p : parameters()) p->zero_grad();
  }

  const std::vector<nn::Conv2D<Scalar>>& trajectory_a() const { return traj_a_; }
  const std::vector<nn::Conv2D<Scalar>>& trajectory_b() const { return traj_b_; }
  std::vector<nn::Conv2D<Scalar>>& trajectory_b() { return traj_b_; }
  const std::optional<nn::Conv2D<Scalar>>& head() const { return head_; }
  std::optional<nn::Conv2D<Scalar>>& head() { return head_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) const {
    Cache cache;
    return forward(input, cache);
  }

  /// [B, in_channels, H, W] -> [B, 3, H, W]; any spatial size is accepted.
  Tensor<Scalar> forward(const Tensor<Scalar>& input, Cache& cache) const {
    input.require_rank(4);
    if (input.dim(1) != config_.in_channels)
      throw std::invalid_argument("RefocusNet: input has " + std::to_string(input.dim(1)) +
                                  " channels, network expects " + std::to_string(config_.in_channels));
    const bool residual = config_.variant != Variant::no_skip;
    cache.activations.clear();
    cache.activations.push_back(input);
    if (residual) cache.residual_sum = Tensor<Scalar>(input.shape());

    // Stage i convolves activation i with A_i and, when present, B_{i-1}.
    const std::size_t depth = traj_a_.size();
    for (std::size_t i = 0; i <= depth; ++i) {
      std::vector<const nn::Conv2D<Scalar>*> layers;
      if (i < depth) layers.push_back(&traj_a_[i]);
      if (residual && i > 0) layers.push_back(&traj_b_[i - 1]);
      if (!residual && i == depth) break;
      auto outs = nn::conv2d_forward_fused<Scalar>(cache.activations[i], layers);
      if (residual && i > 0) nn::add_inplace(cache.residual_sum, outs.back());
      if (i < depth) {
        outs[0].data() = outs[0].data().cwiseMax(Scalar(0));
        cache.activations.push_back(std::move(outs[0]));
      }
    }

    switch (config_.variant) {
      case Variant::no_skip: return nn::conv2d_forward(cache.activations.back(), *head_);
      case Variant::final_net: {
        Tensor<Scalar> out = nn::view_average(cache.residual_sum);
        nn::add_inplace(out, nn::conv2d_forward(cache.residual_sum, *head_));
        return out;
      }
      case Variant::variant1: {
        Tensor<Scalar> out = nn::view_average(input);
        nn::add_inplace(out, nn::conv2d_forward(cache.residual_sum, *head_));
        return out;
      }
      case Variant::variant2: return nn::view_average(cache.residual_sum);
    }
    throw std::logic_error("RefocusNet: unhandled variant");
  }

  /// Accumulates parameter gradients into each parameter's grad(). Returns
  /// the gradient with respect to the input (empty if not requested).
  Tensor<Scalar> backward(const Cache& cache, const Tensor<Scalar>& grad_out, bool need_input_grad = true) {
    const auto& acts = cache.activations;
    const std::size_t depth = traj_a_.size();
    if (acts.size() != depth + 1) throw std::logic_error("RefocusNet::backward: cache does not match");

    auto accumulate = [](nn::Conv2D<Scalar>& layer, const Tensor<Scalar>& gw, const Tensor<Scalar>& gb) {
      layer.weight.grad() += gw.data();
      layer.bias.grad() += gb.data();
    };

    Tensor<Scalar> grad_input;
    Tensor<Scalar> grad_r;  // gradient of the residual sum
    Tensor<Scalar> grad_act;  // gradient at the activation of the current stage
    switch (config_.variant) {
      case Variant::no_skip: {
        auto g = nn::conv2d_backward(grad_out, acts.back(), *head_);
        accumulate(*head_, g.weight, g.bias);
        grad_act = std::move(g.input);
        break;
      }
      case Variant::final_net: {
        grad_r = nn::view_average_backward(grad_out, config_.in_channels);
        auto g = nn::conv2d_backward(grad_out, cache.residual_sum, *head_);
        accumulate(*head_, g.weight, g.bias);
        nn::add_inplace(grad_r, g.input);
        break;
      }
      case Variant::variant1: {
        if (need_input_grad) grad_input = nn::view_average_backward(grad_out, config_.in_channels);
        auto g = nn::conv2d_backward(grad_out, cache.residual_sum, *head_);
        accumulate(*head_, g.weight, g.bias);
        grad_r = std::move(g.input);
        break;
      }
      case Variant::variant2: grad_r = nn::view_average_backward(grad_out, config_.in_channels); break;
    }

    const bool residual = config_.variant != Variant::no_skip;
    for (std::size_t i = depth + 1; i-- > 0;) {
      std::vector<nn::Conv2D<Scalar>*> layers;
      std::vector<const Tensor<Scalar>*> grads;
      Tensor<Scalar> g_pre;
      if (i < depth) {
        // acts[i+1] = relu(z) is positive exactly where z is
        g_pre = nn::relu_backward(grad_act, acts[i + 1]);
        layers.push_back(&traj_a_[i]);
        grads.push_back(&g_pre);
      }
      if (residual && i > 0) {
        layers.push_back(&traj_b_[i - 1]);
        grads.push_back(&grad_r);
      }
      if (layers.empty()) continue;
      std::vector<const nn::Conv2D<Scalar>*> const_layers(layers.begin(), layers.end());
      const bool want_input = i > 0 || need_input_grad;
      auto g = nn::conv2d_backward_fused<Scalar>(grads, acts[i], const_layers, want_input);
      for (std::size_t k = 0; k < layers.size(); ++k) accumulate(*layers[k], g.weight[k], g.bias[k]);
      if (i > 0) {
        grad_act = std::move(g.input);
      } else if (need_input_grad) {
        if (grad_input.size() == 0) grad_input = Tensor<Scalar>(acts[0].shape());
        nn::add_inplace(grad_input, g.input);
      }
    }
    return grad_input;
  }

  template <typename Other>
  RefocusNet<Other> cast() const {
    RefocusNet<Other> out;
    out.config_ = config_;
    auto conv = [](const nn::Conv2D<Scalar>& l) {
      nn::Conv2D<Other> o;
      o.weight = l.weight.template cast<Other>();
      o.bias = l.bias.template cast<Other>();
      return o;
    };
    for (const auto& l : traj_a_) out.traj_a_.push_back(conv(l));
    for (const auto& l : traj_b_) out.traj_b_.push_back(conv(l));
    if (head_) out.head_ = conv(*head_);
    return out;
  }

  /// Replaces parameter values (declaration order); shapes must match.
  void set_parameters(const std::vector<Tensor<Scalar>>& values) {
    auto params = parameters();
    if (values.size() != params.size()) throw std::invalid_argument("RefocusNet: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (values[i].shape() != params[i]->shape())
        throw std::invalid_argument("RefocusNet: parameter " + std::to_string(i) + " has shape " +
                                    nn::shape_string(values[i].shape()) + ", expected " +
                                    nn::shape_string(params[i]->shape()));
      params[i]->data() = values[i].data();
    }
  }

 private:
  template <typename>
  friend class RefocusNet;

  static nn::Conv2D<Scalar> make_layer(Index in, Index out, std::mt19937_64& rng) {
    nn::Conv2D<Scalar> l;
    l.weight = nn::xavier_init<Scalar>(Shape{out, in, 3, 3}, rng);
    l.bias = Tensor<Scalar>(Shape{out});
    return l;
  }

  NetworkConfig config_;
  std::vector<nn::Conv2D<Scalar>> traj_a_;
  std::vector<nn::Conv2D<Scalar>> traj_b_;
  std::optional<nn::Conv2D<Scalar>> head_;
};

/// Views (already shifted) stacked as a [1, 3 * views, H, W] tensor.
template <typename Scalar>
Tensor<Scalar> stack_views(const std::vector<Image>& views) {
  if (views.empty()) throw std::invalid_argument("stack_views: no views");
  const Index h = views[0].height(), w = views[0].width();
  Tensor<Scalar> t(Shape{1, static_cast<Index>(3 * views.size()), h, w});
  auto m = t.item(0);
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].height() != h || views[i].width() != w) throw std::invalid_argument("stack_views: size mismatch");
    for (int c = 0; c < 3; ++c)
      m.row(static_cast<Index>(3 * i + c)) =
          Eigen::Map<const Eigen::Matrix<double, 1, Eigen::Dynamic>>(views[i][c].data(), h * w).template cast<Scalar>();
  }
  return t;
}

/// Batch item `b` of a [B, 3, H, W] tensor as an image.
template <typename Scalar>
Image to_image(const Tensor<Scalar>& t, Index b = 0) {
  t.require_rank(4);
  if (t.dim(1) != 3) throw std::invalid_argument("to_image: expected 3 channels");
  const Index h = t.dim(2), w = t.dim(3);
  Image img(h, w);
  const auto m = t.item(b);
  for (int c = 0; c < 3; ++c)
    Eigen::Map<Eigen::Matrix<double, 1, Eigen::Dynamic>>(img[c].data(), h * w) = m.row(c).template cast<double>();
  return img;
}

/// Full-image inference on pre-shifted views; output clamped to [0, 1] and uncropped.
template <typename Scalar>
Image run_network(const RefocusNet<Scalar>& model, const std::vector<Image>& shifted) {
  return clamp01(to_image(model.forward(stack_views<Scalar>(shifted))));
}

}  // namespace slf::net
