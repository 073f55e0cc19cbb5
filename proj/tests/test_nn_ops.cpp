#include <cmath>
#include <vector>

#include "doctest.h"
#include "enrest/nn_ops.hpp"
#include "enrest/ops.hpp"
#include "enrest/parallel.hpp"
#include "enrest/reference.hpp"
#include "enrest/tape.hpp"
#include "support.hpp"

using namespace enrest;
using namespace enrest::test;

namespace {

// fixed random weighting turns any tensor into a scalar with nontrivial
// gradients everywhere
Tensor loss_weights(const Shape& s, DType dt) {
  Rng rng(777);
  Tensor w = Tensor::zeros(s, dt);
  for (std::int64_t i = 0; i < w.numel(); ++i) w.set(i, rng.uniform(-1.0, 1.0));
  return w;
}

Tensor weighted(const Tensor& y, const Tensor& w) { return sum_all(mul(y, w)); }

// checks d(sum(w*f(x)))/dx against central differences on every element
void gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
               double tol = 1e-6) {
  Tensor probe = f(x);
  Tensor w = loss_weights(probe.shape(), x.dtype());
  Tensor g;
  {
    Tape tape;
    tape.watch(x);
    tape.backward(weighted(f(x), w));
    g = tape.grad(x);
  }
  auto scalar = [&](const Tensor& xv) {
    double s = 0;
    Tensor y = f(xv);
    for (std::int64_t i = 0; i < y.numel(); ++i) s += y.at(i) * w.at(i);
    return s;
  };
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double fd = fd_grad(scalar, x, i);
    CHECK_MESSAGE(rel_err(g.at(i), fd) < tol,
                  "element " << i << ": analytic " << g.at(i) << " fd " << fd);
  }
}

}  // namespace

TEST_SUITE("nn_ops") {

TEST_CASE("conv2d matches the scalar reference") {
  Rng rng(21);
  Tensor x = rand_tensor({2, 6, 7, 7}, rng, DType::F64);
  struct Case {
    int out, k, stride, pad, groups;
    bool bias;
  };
  for (const Case c : {Case{4, 3, 1, 1, 1, true}, Case{4, 3, 1, 1, 2, false},
                       Case{6, 3, 2, 1, 3, true}, Case{4, 1, 1, 0, 1, true},
                       Case{4, 1, 1, 0, 2, false}, Case{4, 3, 1, 0, 1, false}}) {
    ConvParams p;
    p.weight = rand_tensor({c.out, 6 / c.groups, c.k, c.k}, rng, DType::F64);
    if (c.bias) p.bias = rand_tensor({c.out}, rng, DType::F64);
    p.stride = c.stride;
    p.pad = c.pad;
    p.groups = c.groups;
    Tensor got = conv2d(x, p);
    Tensor want = ref::conv2d(x, p.weight, p.bias, c.stride, c.pad, c.groups);
    CHECK(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("conv2d rejects inconsistent arguments") {
  Rng rng(22);
  Tensor x = rand_tensor({1, 4, 6, 6}, rng);
  ConvParams p;
  p.weight = rand_tensor({8, 4, 3, 3}, rng);
  p.pad = 1;
  CHECK(conv2d(x, p).dim(1) == 8);

  ConvParams bad_k = p;
  bad_k.weight = rand_tensor({8, 4, 5, 5}, rng);
  CHECK_THROWS_AS(conv2d(x, bad_k), ShapeError);

  ConvParams bad_g = p;
  bad_g.groups = 3;  // 4 channels do not split into 3 groups
  CHECK_THROWS_AS(conv2d(x, bad_g), ShapeError);

  ConvParams bad_w = p;
  bad_w.weight = rand_tensor({8, 2, 3, 3}, rng);  // claims groups=2 layout
  CHECK_THROWS_AS(conv2d(x, bad_w), ShapeError);

  ConvParams bad_b = p;
  bad_b.bias = rand_tensor({4}, rng);
  CHECK_THROWS_AS(conv2d(x, bad_b), ShapeError);

  CHECK_THROWS_AS(conv2d(rand_tensor({4, 6, 6}, rng), p), ShapeError);
}

TEST_CASE("conv2d gradients agree with finite differences") {
  Rng rng(23);
  Tensor x = rand_tensor({1, 4, 5, 5}, rng, DType::F64);
  Tensor w = rand_tensor({4, 2, 3, 3}, rng, DType::F64);
  Tensor b = rand_tensor({4}, rng, DType::F64);

  auto fwd = [&](const Tensor& xi, const Tensor& wi, const Tensor& bi) {
    ConvParams p;
    p.weight = wi;
    p.bias = bi;
    p.pad = 1;
    p.groups = 2;
    return conv2d(xi, p);
  };
  gradcheck([&](const Tensor& t) { return fwd(t, w, b); }, x);
  gradcheck([&](const Tensor& t) { return fwd(x, t, b); }, w);
  gradcheck([&](const Tensor& t) { return fwd(x, w, t); }, b);
}

TEST_CASE("strided conv gradients agree with finite differences") {
  Rng rng(24);
  Tensor x = rand_tensor({1, 2, 7, 7}, rng, DType::F64);
  Tensor w = rand_tensor({3, 2, 3, 3}, rng, DType::F64);
  auto fwd = [&](const Tensor& wi) {
    ConvParams p;
    p.weight = wi;
    p.stride = 2;
    p.pad = 1;
    return conv2d(x, p);
  };
  gradcheck([&](const Tensor& t) { return fwd(t); }, w);
}

TEST_CASE("relu clamps and routes gradients") {
  Tensor x = Tensor::from_data({5}, {-2, -0.5, 0, 0.5, 2}, DType::F64);
  Tensor y = relu(x);
  CHECK(y.to_vec() == std::vector<double>{0, 0, 0, 0.5, 2});

  Tape tape;
  tape.watch(x);
  tape.backward(sum_all(relu(x)));
  Tensor g = tape.grad(x);
  CHECK(g.to_vec() == std::vector<double>{0, 0, 0, 1, 1});  // subgradient 0 at the kink

  Rng rng(25);
  Tensor r = rand_tensor({2, 3, 4, 4}, rng, DType::F64);
  CHECK(max_abs_diff(relu(r), ref::relu(r)) == 0.0);
}

TEST_CASE("global_avg_pool means over space") {
  Rng rng(26);
  Tensor x = rand_tensor({2, 3, 4, 5}, rng, DType::F64);
  Tensor y = global_avg_pool(x);
  CHECK(y.shape() == Shape{2, 3, 1, 1});
  CHECK(max_abs_diff(y, ref::global_avg_pool(x)) < 1e-15);
  gradcheck([](const Tensor& t) { return global_avg_pool(t); }, x);
}

TEST_CASE("avg_pool2x2 halves each spatial axis") {
  Rng rng(27);
  Tensor x = rand_tensor({2, 3, 6, 8}, rng, DType::F64);
  Tensor y = avg_pool2x2(x);
  CHECK(y.shape() == Shape{2, 3, 3, 4});
  CHECK(max_abs_diff(y, ref::avg_pool2x2(x)) < 1e-15);
  CHECK_THROWS_AS(avg_pool2x2(rand_tensor({1, 1, 5, 4}, rng)), ShapeError);
  gradcheck([](const Tensor& t) { return avg_pool2x2(t); }, x);
}

TEST_CASE("bilinear_up2x doubles with edge clamping") {
  Rng rng(28);
  Tensor x = rand_tensor({2, 3, 3, 5}, rng, DType::F64);
  Tensor y = bilinear_up2x(x);
  CHECK(y.shape() == Shape{2, 3, 6, 10});
  CHECK(max_abs_diff(y, ref::bilinear_up2x(x)) < 1e-14);

  // a constant image stays exactly constant
  Tensor c = Tensor::full({1, 1, 4, 4}, 0.7, DType::F64);
  Tensor cu = bilinear_up2x(c);
  for (std::int64_t i = 0; i < cu.numel(); ++i) CHECK(cu.at(i) == 0.7);

  gradcheck([](const Tensor& t) { return bilinear_up2x(t); }, x);
}

TEST_CASE("weighted_spatial_pool contracts space with per-image weights") {
  Rng rng(29);
  Tensor x = rand_tensor({2, 3, 4, 4}, rng, DType::F64);
  Tensor w = rand_tensor({2, 16}, rng, DType::F64);
  Tensor y = weighted_spatial_pool(x, w);
  CHECK(y.shape() == Shape{2, 3, 1, 1});
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t c = 0; c < 3; ++c) {
      double s = 0;
      for (std::int64_t i = 0; i < 16; ++i) s += x.at((n * 3 + c) * 16 + i) * w.at(n * 16 + i);
      CHECK(y.at(n * 3 + c) == doctest::Approx(s).epsilon(1e-12));
    }
  CHECK_THROWS_AS(weighted_spatial_pool(x, rand_tensor({2, 15}, rng, DType::F64)), ShapeError);
  gradcheck([&](const Tensor& t) { return weighted_spatial_pool(t, w); }, x);
  gradcheck([&](const Tensor& t) { return weighted_spatial_pool(x, t); }, w);
}

TEST_CASE("resampling units match the plain-order reference") {
  Rng rng(30);
  Tensor x = rand_tensor({2, 4, 6, 6}, rng, DType::F64);
  ResampleParams down;
  down.proj = rand_tensor({6, 4, 1, 1}, rng, DType::F64);
  CHECK(max_abs_diff(downsample2x(x, down), ref::downsample2x(x, down.proj)) < 1e-13);

  // the optimized path projects before interpolating; linearity makes the
  // orders agree
  ResampleParams up;
  up.proj = rand_tensor({2, 4, 1, 1}, rng, DType::F64);
  CHECK(max_abs_diff(upsample2x(x, up), ref::upsample2x(x, up.proj)) < 1e-13);

  gradcheck([&](const Tensor& t) { return downsample2x(t, down); }, x);
  gradcheck([&](const Tensor& t) { return upsample2x(t, up); }, x);
}

TEST_CASE("softmax normalizes along the chosen axis") {
  Rng rng(31);
  Tensor x = rand_tensor({3, 4, 5}, rng, DType::F64, -5.0, 5.0);
  for (int axis = 0; axis < 3; ++axis) {
    Tensor y = softmax(x, axis);
    CHECK(y.shape() == x.shape());
    // sums over the axis are 1
    std::int64_t outer = 1, n = x.dim(axis), inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < 3; ++i) inner *= x.dim(i);
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t r = 0; r < inner; ++r) {
        double s = 0;
        for (std::int64_t k = 0; k < n; ++k) s += y.at((o * n + k) * inner + r);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
  }
  CHECK_THROWS_AS(softmax(x, 3), ShapeError);
  CHECK_THROWS_AS(softmax(x, -1), ShapeError);

  // shift invariance
  Tensor shifted = softmax(add(x, Tensor::full(x.shape(), 100.0, DType::F64)), 1);
  CHECK(max_abs_diff(shifted, softmax(x, 1)) < 1e-12);

  gradcheck([](const Tensor& t) { return softmax(t, 1); }, x);
}

TEST_CASE("matmul multiplies 2-D operands") {
  Rng rng(32);
  Tensor a = rand_tensor({3, 4}, rng, DType::F64);
  Tensor b = rand_tensor({4, 5}, rng, DType::F64);
  Tensor y = matmul(a, b);
  CHECK(y.shape() == Shape{3, 5});
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::int64_t k = 0; k < 4; ++k) s += a.at(i * 4 + k) * b.at(k * 5 + j);
      CHECK(y.at(i * 5 + j) == doctest::Approx(s).epsilon(1e-12));
    }
  CHECK_THROWS_AS(matmul(a, rand_tensor({5, 2}, rng, DType::F64)), ShapeError);
  gradcheck([&](const Tensor& t) { return matmul(t, b); }, a);
  gradcheck([&](const Tensor& t) { return matmul(a, t); }, b);
}

TEST_CASE("elementwise ops validate operands and differentiate") {
  Rng rng(33);
  Tensor a = rand_tensor({2, 3}, rng, DType::F64);
  Tensor b = rand_tensor({2, 3}, rng, DType::F64);
  CHECK(max_abs_diff(sub(add(a, b), b), a) < 1e-15);
  CHECK_THROWS_AS(add(a, rand_tensor({3, 2}, rng, DType::F64)), ShapeError);
  CHECK_THROWS_AS(mul(a, rand_tensor({2, 3}, rng, DType::F32)), ShapeError);

  gradcheck([&](const Tensor& t) { return add(t, b); }, a);
  gradcheck([&](const Tensor& t) { return sub(b, t); }, a);
  gradcheck([&](const Tensor& t) { return mul(t, b); }, a);
  gradcheck([](const Tensor& t) { return scale(t, -2.5); }, a);
}

TEST_CASE("concat and slice invert each other") {
  Rng rng(34);
  Tensor a = rand_tensor({2, 3, 4, 4}, rng, DType::F64);
  Tensor b = rand_tensor({2, 2, 4, 4}, rng, DType::F64);
  Tensor cat = concat({a, b}, 1);
  CHECK(cat.shape() == Shape{2, 5, 4, 4});
  CHECK(bitwise_equal(slice(cat, 1, 0, 3), a));
  CHECK(bitwise_equal(slice(cat, 1, 3, 2), b));

  CHECK_THROWS_AS(concat({a, rand_tensor({2, 2, 5, 4}, rng, DType::F64)}, 1), ShapeError);
  CHECK_THROWS_AS(concat({}, 0), ShapeError);
  CHECK_THROWS_AS(slice(cat, 1, 4, 2), ShapeError);

  gradcheck([&](const Tensor& t) { return concat({t, b}, 1); }, a);
  gradcheck([&](const Tensor& t) { return slice(t, 1, 1, 2); }, a);
}

TEST_CASE("broadcast ops expand per-channel scalars") {
  Rng rng(35);
  Tensor x = rand_tensor({2, 3, 4, 4}, rng, DType::F64);
  Tensor s = rand_tensor({2, 3, 1, 1}, rng, DType::F64);
  Tensor ya = broadcast_add(x, s);
  Tensor ym = broadcast_mul(x, s);
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < 16; ++i) {
        const std::int64_t at = (n * 3 + c) * 16 + i;
        CHECK(ya.at(at) == doctest::Approx(x.at(at) + s.at(n * 3 + c)).epsilon(1e-12));
        CHECK(ym.at(at) == doctest::Approx(x.at(at) * s.at(n * 3 + c)).epsilon(1e-12));
      }
  CHECK_THROWS_AS(broadcast_add(x, rand_tensor({2, 3}, rng, DType::F64)), ShapeError);
  CHECK_THROWS_AS(broadcast_mul(x, rand_tensor({2, 4, 1, 1}, rng, DType::F64)), ShapeError);

  gradcheck([&](const Tensor& t) { return broadcast_add(t, s); }, x);
  gradcheck([&](const Tensor& t) { return broadcast_add(x, t); }, s);
  gradcheck([&](const Tensor& t) { return broadcast_mul(t, s); }, x);
  gradcheck([&](const Tensor& t) { return broadcast_mul(x, t); }, s);
}

TEST_CASE("reshape and sum_all track gradients") {
  Rng rng(36);
  Tensor x = rand_tensor({2, 6}, rng, DType::F64);
  Tape tape;
  tape.watch(x);
  Tensor z = sum_all(reshape(x, {3, 4}));
  tape.backward(z);
  Tensor g = tape.grad(x);
  for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g.at(i) == 1.0);
  CHECK_THROWS_AS(reshape(x, {5, 2}), ShapeError);
}

TEST_CASE("forward and backward are bitwise stable across the parallel switch") {
  Rng rng(37);
  Tensor x = rand_tensor({2, 8, 12, 12}, rng);
  ConvParams p;
  p.weight = rand_tensor({8, 4, 3, 3}, rng);
  p.bias = rand_tensor({8}, rng);
  p.pad = 1;
  p.groups = 2;

  auto run = [&](bool par_on, Tensor& y, Tensor& gx, Tensor& gw) {
    par::set_enabled(par_on);
    Tape tape;
    tape.watch(x);
    tape.watch(p.weight);
    Tensor c = conv2d(x, p);
    Tensor u = bilinear_up2x(avg_pool2x2(relu(c)));
    y = u;
    tape.backward(sum_all(u));
    gx = tape.grad(x);
    gw = tape.grad(p.weight);
    par::set_enabled(true);
  };
  Tensor y1, gx1, gw1, y2, gx2, gw2;
  run(true, y1, gx1, gw1);
  run(false, y2, gx2, gw2);
  CHECK(bitwise_equal(y1, y2));
  CHECK(bitwise_equal(gx1, gx2));
  CHECK(bitwise_equal(gw1, gw2));
}

}  // TEST_SUITE
