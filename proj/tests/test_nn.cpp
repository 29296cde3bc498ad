#include "slf/nn/checkpoint.hpp"
#include "slf/nn/conv.hpp"
#include "slf/nn/grad_check.hpp"
#include "slf/nn/ops.hpp"
#include "slf/nn/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace slf::nn;

namespace {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(shape);
  for (Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(u(rng));
  return t;
}

template <typename Scalar>
Conv2D<Scalar> random_conv(Index in, Index out, std::uint64_t seed) {
  Conv2D<Scalar> l(in, out);
  l.weight = random_tensor<Scalar>(l.weight.shape(), seed);
  l.bias = random_tensor<Scalar>(l.bias.shape(), seed + 1);
  return l;
}

// Six nested loops over (b, o, y, x, i, tap), zero outside the image.
Tensor<double> naive_conv(const Tensor<double>& in, const Conv2D<double>& l) {
  const Index B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3), O = l.out_channels();
  Tensor<double> out(Shape{B, O, H, W});
  for (Index b = 0; b < B; ++b)
    for (Index o = 0; o < O; ++o)
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) {
          double s = l.bias.data()[o];
          for (Index i = 0; i < C; ++i)
            for (Index t = 0; t < 9; ++t) {
              const Index yy = y + t / 3 - 1, xx = x + t % 3 - 1;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              s += l.weight.data()[(o * C + i) * 9 + t] * in.at(b, i, yy, xx);
            }
          out.at(b, o, y, x) = s;
        }
  return out;
}

double weighted_sum(const Tensor<double>& t, const Tensor<double>& w) { return t.data().dot(w.data()); }

}  // namespace

TEST_CASE("tensor basics") {
  Tensor<float> t(Shape{2, 3, 4, 5});
  CHECK(t.size() == 120);
  t.at(1, 2, 3, 4) = 7;
  CHECK(t.data()[119] == 7);
  CHECK(t.item(1)(2, 19) == 7);
  CHECK_THROWS(Tensor<float>(Shape{2, 2}, Tensor<float>::Vector::Zero(3)));
  CHECK_FALSE(t.has_grad());
  t.grad()[0] = 1;
  CHECK(t.has_grad());
  CHECK(shape_string(t.shape()) == "[2,3,4,5]");
}

TEST_CASE("conv identity and box kernels") {
  Conv2D<double> id(1, 1);
  id.weight.data()[4] = 1;
  const auto x = random_tensor<double>(Shape{1, 1, 6, 7}, 1);
  CHECK(conv2d_forward(x, id).data() == x.data());

  Conv2D<double> box(1, 1);
  box.weight.data().setOnes();
  Tensor<double> ones(Shape{1, 1, 5, 5});
  ones.data().setOnes();
  const auto y = conv2d_forward(ones, box);
  CHECK(y.at(0, 0, 2, 2) == 9);
  CHECK(y.at(0, 0, 0, 0) == 4);
  CHECK(y.at(0, 0, 0, 2) == 6);
}

TEST_CASE("conv matches a naive reference") {
  const auto x = random_tensor<double>(Shape{2, 3, 5, 5}, 2);
  const auto l = random_conv<double>(3, 4, 3);
  const auto y = conv2d_forward(x, l);
  CHECK((y.data() - naive_conv(x, l).data()).cwiseAbs().maxCoeff() < 1e-12);

  const auto xf = x.cast<float>();
  Conv2D<float> lf;
  lf.weight = l.weight.cast<float>();
  lf.bias = l.bias.cast<float>();
  CHECK((conv2d_forward(xf, lf).cast<double>().data() - y.data()).cwiseAbs().maxCoeff() < 1e-6);

  CHECK_THROWS(conv2d_forward(random_tensor<double>(Shape{1, 2, 5, 5}, 4), l));
}

TEST_CASE("fused convolution equals separate convolutions") {
  const auto x = random_tensor<double>(Shape{2, 3, 6, 4}, 5);
  const auto a = random_conv<double>(3, 5, 6), b = random_conv<double>(3, 2, 7);
  const Conv2D<double>* layers[] = {&a, &b};
  const auto outs = conv2d_forward_fused<double>(x, layers);
  CHECK(outs[0].data() == conv2d_forward(x, a).data());
  CHECK(outs[1].data() == conv2d_forward(x, b).data());

  const auto ga = random_tensor<double>(outs[0].shape(), 8), gb = random_tensor<double>(outs[1].shape(), 9);
  const Tensor<double>* grads[] = {&ga, &gb};
  const auto g = conv2d_backward_fused<double>(grads, x, layers);
  const auto sa = conv2d_backward(ga, x, a), sb = conv2d_backward(gb, x, b);
  CHECK((g.weight[0].data() - sa.weight.data()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.bias[1].data() - sb.bias.data()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.input.data() - sa.input.data() - sb.input.data()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv is linear in its input when the bias is zero") {
  auto l = random_conv<double>(2, 3, 10);
  l.bias.data().setZero();
  const auto x = random_tensor<double>(Shape{1, 2, 7, 7}, 11), y = random_tensor<double>(Shape{1, 2, 7, 7}, 12);
  Tensor<double> mix(x.shape(), 0.7 * x.data() - 1.9 * y.data());
  const auto lhs = conv2d_forward(mix, l);
  const Tensor<double>::Vector rhs = 0.7 * conv2d_forward(x, l).data() - 1.9 * conv2d_forward(y, l).data();
  CHECK((lhs.data() - rhs).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("conv backward special cases") {
  const auto x = random_tensor<double>(Shape{1, 2, 5, 6}, 13);
  const auto l = random_conv<double>(2, 3, 14);
  Tensor<double> zero(Shape{1, 3, 5, 6});
  const auto g0 = conv2d_backward(zero, x, l);
  CHECK(g0.input.data().isZero());
  CHECK(g0.weight.data().isZero());
  CHECK(g0.bias.data().isZero());

  // a unit gradient at one output pixel yields the input window as kernel gradient
  Tensor<double> one(Shape{1, 3, 5, 6});
  one.at(0, 1, 2, 3) = 1;
  const auto g = conv2d_backward(one, x, l);
  for (Index i = 0; i < 2; ++i)
    for (Index t = 0; t < 9; ++t) {
      CHECK(g.weight.data()[(1 * 2 + i) * 9 + t] == x.at(0, i, 2 + t / 3 - 1, 3 + t % 3 - 1));
      CHECK(g.weight.data()[(0 * 2 + i) * 9 + t] == 0);
    }
  CHECK(g.bias.data()[1] == 1);
  CHECK_THROWS(conv2d_backward(Tensor<double>(Shape{1, 2, 5, 6}), x, l));
}

TEST_CASE("conv gradients match central differences") {
  auto x = random_tensor<double>(Shape{2, 3, 5, 4}, 15);
  auto l = random_conv<double>(3, 2, 16);
  const auto w = random_tensor<double>(Shape{2, 2, 5, 4}, 17);
  std::function<double(bool)> obj = [&](bool grads) {
    const auto y = conv2d_forward(x, l);
    if (grads) {
      const auto g = conv2d_backward(w, x, l);
      x.grad() = g.input.data();
      l.weight.grad() = g.weight.data();
      l.bias.grad() = g.bias.data();
    }
    return weighted_sum(y, w);
  };
  Tensor<double>* params[] = {&x, &l.weight, &l.bias};
  GradCheckOptions opt;
  opt.step = 1e-4;
  const auto r = grad_check<double>(obj, params, opt);
  CHECK(r.checked == 120 + 54 + 2);  // fewer than 200, so every coordinate
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("relu") {
  const auto neg = random_tensor<double>(Shape{1, 1, 3, 3}, 18, -2, -0.1);
  CHECK(relu_forward(neg).data().isZero());
  CHECK(relu_backward(neg, neg).data().isZero());
  const auto pos = random_tensor<double>(Shape{1, 1, 3, 3}, 19, 0.1, 2);
  CHECK(relu_forward(pos).data() == pos.data());
  CHECK(relu_backward(neg, pos).data() == neg.data());

  auto x = random_tensor<double>(Shape{1, 2, 10, 12}, 20);
  for (Index k = 0; k < x.size(); ++k)
    if (std::abs(x.data()[k]) < 1e-3) x.data()[k] = 0.5;
  const auto w = random_tensor<double>(x.shape(), 21);
  std::function<double(bool)> obj = [&](bool grads) {
    if (grads) x.grad() = relu_backward(w, x).data();
    return weighted_sum(relu_forward(x), w);
  };
  Tensor<double>* params[] = {&x};
  CHECK(grad_check<double>(obj, params).max_rel_error < 1e-4);
}

TEST_CASE("l1 loss") {
  const auto a = random_tensor<double>(Shape{2, 3, 4, 4}, 22);
  auto r = l1_loss(a, a);
  CHECK(r.loss == 0);
  CHECK(r.grad.data().isZero());

  Tensor<double> b(a.shape(), a.data().array() - 0.5);
  r = l1_loss(a, b);
  CHECK(r.loss == doctest::Approx(0.5).epsilon(1e-14));
  CHECK((r.grad.data().array() == 1.0 / 96).all());
  CHECK_THROWS(l1_loss(a, Tensor<double>(Shape{2, 3, 4, 5})));

  auto p = random_tensor<double>(Shape{1, 3, 6, 6}, 23);
  const auto t = random_tensor<double>(p.shape(), 24);
  for (Index k = 0; k < p.size(); ++k)
    if (std::abs(p.data()[k] - t.data()[k]) < 1e-3) p.data()[k] += 0.01;
  std::function<double(bool)> obj = [&](bool grads) {
    const auto res = l1_loss(p, t);
    if (grads) p.grad() = res.grad.data();
    return res.loss;
  };
  Tensor<double>* params[] = {&p};
  CHECK(grad_check<double>(obj, params).max_rel_error < 1e-4);
}

TEST_CASE("view average") {
  Tensor<double> x(Shape{1, 6, 2, 2});
  const auto block = random_tensor<double>(Shape{1, 3, 2, 2}, 25);
  for (Index v = 0; v < 2; ++v) x.item(0).middleRows(3 * v, 3) = block.item(0);
  CHECK((view_average(x).data() - block.data()).cwiseAbs().maxCoeff() == 0);

  Tensor<double> y(Shape{1, 6, 1, 1});
  for (Index c = 0; c < 6; ++c) y.data()[c] = static_cast<double>(c);
  const auto avg = view_average(y);
  CHECK(avg.data()[0] == 1.5);
  CHECK(avg.data()[2] == 3.5);
  CHECK_THROWS(view_average(Tensor<double>(Shape{1, 4, 1, 1})));
}

TEST_CASE("learning-rate schedule") {
  LearningRateSchedule s{0.0005, 0.5, 100, true};
  CHECK(s.at(250) == doctest::Approx(0.0005 * 0.25).epsilon(1e-15));
  CHECK(s.at(99) == 0.0005);
  CHECK(s.at(100) == 0.00025);
  s.staircase = false;
  CHECK(s.at(50) == doctest::Approx(0.0005 * std::sqrt(0.5)));
}

TEST_CASE("adam") {
  Tensor<double> p = random_tensor<double>(Shape{50}, 26);
  const Tensor<double> start = p;
  Tensor<double>* params[] = {&p};
  AdamState<double> state;
  state.init(params);

  p.zero_grad();
  adam_step<double>(params, state);
  CHECK(p.data() == start.data());
  CHECK(state.step == 1);

  AdamState<double> fresh;
  fresh.init(params);
  p.grad() = random_tensor<double>(Shape{50}, 27).data();
  adam_step<double>(params, fresh);
  // first bias-corrected step moves every coordinate by lr * |g| / (|g| + eps)
  for (Index k = 0; k < 50; ++k) {
    const double g = p.grad()[k];
    CHECK(std::abs(std::abs(p.data()[k] - start.data()[k]) - 0.0005) < 1e-6);
    CHECK((p.data()[k] - start.data()[k]) * g < 0);
  }

  Tensor<float> q = random_tensor<float>(Shape{20}, 28);
  const Tensor<float> q0 = q;
  Tensor<float>* qs[] = {&q};
  AdamState<float> zero_lr;
  zero_lr.lr_schedule.initial = 0;
  zero_lr.init(qs);
  for (int i = 0; i < 5; ++i) {
    q.grad() = random_tensor<float>(Shape{20}, 29 + i).data();
    adam_step<float>(qs, zero_lr);
  }
  CHECK(q.data() == q0.data());
}

TEST_CASE("xavier init") {
  std::mt19937_64 a(30), b(30);
  const auto w = xavier_init<double>(Shape{64, 12, 3, 3}, a);
  CHECK(w.data() == xavier_init<double>(Shape{64, 12, 3, 3}, b).data());
  const double bound = std::sqrt(6.0 / (12 * 9 + 64 * 9));
  CHECK(w.data().cwiseAbs().maxCoeff() <= bound);
  CHECK(w.data().cwiseAbs().maxCoeff() > 0.99 * bound);
  CHECK(xavier_init<double>(Shape{8}, a).data().isZero());

  std::mt19937_64 c(31);
  const auto big = xavier_init<double>(Shape{1000, 100}, c);
  const double lim = std::sqrt(6.0 / 1100);
  const double mean = big.data().mean();
  const double var = (big.data().array() - mean).square().mean();
  CHECK(std::abs(var - lim * lim / 3) < 0.05 * lim * lim / 3);
}

TEST_CASE("grad check harness") {
  // linear objective: exact finite differences
  auto p = random_tensor<double>(Shape{300}, 32, -0.1, 0.1);
  const auto c = random_tensor<double>(Shape{300}, 33, 0.5, 1.5);
  std::function<double(bool)> linear = [&](bool grads) {
    if (grads) p.grad() = c.data();
    return p.data().dot(c.data());
  };
  Tensor<double>* params[] = {&p};
  const auto r = grad_check<double>(linear, params);
  CHECK(r.checked == 200);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.passed);

  std::function<double(bool)> corrupted = [&](bool grads) {
    if (grads) {
      p.grad() = c.data();
      p.grad() *= 1.01;
    }
    return p.data().dot(c.data());
  };
  const auto bad = grad_check<double>(corrupted, params);
  CHECK(bad.max_rel_error > 1e-4);
  CHECK_FALSE(bad.passed);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck;
  ck.header = R"({"depth":3})";
  ck.tensors.push_back(random_tensor<float>(Shape{4, 2, 3, 3}, 34));
  ck.tensors.push_back(random_tensor<float>(Shape{4}, 35));
  const std::string bytes = serialize_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "SLFCKPT1");
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.header == ck.header);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].shape() == ck.tensors[0].shape());
  CHECK(back.tensors[0].data() == ck.tensors[0].data());
  CHECK_FALSE(back.adam.has_value());

  AdamState<float> adam;
  std::vector<Tensor<float>*> ptrs = {&ck.tensors[0], &ck.tensors[1]};
  adam.init(ptrs);
  adam.step = 17;
  adam.m[1].setConstant(0.25f);
  adam.lr_schedule.decay_steps = 300;
  ck.adam = adam;
  const Checkpoint with = deserialize_checkpoint(serialize_checkpoint(ck));
  REQUIRE(with.adam.has_value());
  CHECK(with.adam->step == 17);
  CHECK(with.adam->m[1] == adam.m[1]);
  CHECK(with.adam->lr_schedule.decay_steps == 300);
  CHECK(serialize_checkpoint(with) == serialize_checkpoint(ck));

  CHECK_THROWS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(deserialize_checkpoint(bytes + "x"));
  CHECK_THROWS(deserialize_checkpoint("NOTACKPT" + bytes.substr(8)));
}
