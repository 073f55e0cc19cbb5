#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "enrest/analysis.hpp"
#include "enrest/reference.hpp"
#include "support.hpp"

using namespace enrest;
using namespace enrest::test;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.n_rrg = 1;
  cfg.n_mrb = 1;
  cfg.n_streams = 3;
  cfg.channels = {8, 12, 16};
  cfg.n_cols = 2;
  cfg.groups = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("psnr reproduces the textbook fixture") {
  // uniform difference of 10 at a peak of 255 scores 20*log10(25.5)
  Tensor a = Tensor::zeros({1, 1, 8, 8}, DType::F64);
  Tensor b = Tensor::full({1, 1, 8, 8}, 10.0, DType::F64);
  CHECK(std::abs(psnr(a, b, 255.0) - 28.1308) < 1e-3);

  // unit scale: uniform 0.1 difference scores exactly 20 dB
  Tensor c = Tensor::full({2, 5}, 0.4, DType::F64);
  Tensor d = Tensor::full({2, 5}, 0.5, DType::F64);
  CHECK(psnr(c, d) == doctest::Approx(20.0).epsilon(1e-12));

  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(psnr(a, b, 255.0) == psnr(b, a, 255.0));
  CHECK_THROWS_AS(psnr(a, Tensor::zeros({1, 1, 8, 9}, DType::F64)), ShapeError);
}

TEST_CASE("mae is a symmetric mean with a zero floor") {
  Tensor a = Tensor::from_data({2}, {0.0, 1.0}, DType::F64);
  Tensor b = Tensor::from_data({2}, {0.5, 0.5}, DType::F64);
  CHECK(mae(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mae(a, b) == mae(b, a));
  CHECK(mae(a, a) == 0.0);
}

TEST_CASE("ssim of an image with itself is exactly one") {
  Rng rng(101);
  Tensor img = rand_tensor({1, 3, 16, 16}, rng, DType::F32, 0.0, 1.0);
  CHECK(ssim(img, img) == 1.0);
  Tensor gray = rand_tensor({2, 1, 12, 12}, rng, DType::F64, 0.0, 1.0);
  CHECK(ssim(gray, gray) == 1.0);
}

TEST_CASE("separable ssim agrees with the direct windowed form") {
  Rng rng(102);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = rand_tensor({1, 3, 32, 32}, rng, DType::F32, 0.0, 1.0);
    Tensor noise = rand_tensor(a.shape(), rng, DType::F32, -0.08, 0.08);
    Tensor b = a.clone();
    for (std::int64_t i = 0; i < b.numel(); ++i)
      b.set(i, std::min(1.0, std::max(0.0, a.at(i) + noise.at(i))));
    const double fast = ssim(a, b);
    const double direct = ref::ssim(a, b);
    CHECK(std::abs(fast - direct) <= 1e-6);
    CHECK(fast < 1.0);
    CHECK(fast > 0.0);
  }
}

TEST_CASE("ssim drops as distortion grows") {
  Rng rng(103);
  Tensor a = rand_tensor({1, 1, 24, 24}, rng, DType::F64, 0.2, 0.8);
  Tensor small = a.clone(), large = a.clone();
  Rng noise(104);
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double n = noise.normal();
    small.set(i, a.at(i) + 0.02 * n);
    large.set(i, a.at(i) + 0.15 * n);
  }
  CHECK(ssim(a, small) > ssim(a, large));
}

TEST_CASE("ssim on 3 channels reduces to its luma") {
  Rng rng(105);
  Tensor a = rand_tensor({1, 3, 14, 14}, rng, DType::F64, 0.0, 1.0);
  Tensor b = rand_tensor({1, 3, 14, 14}, rng, DType::F64, 0.0, 1.0);
  Tensor la = Tensor::zeros({1, 1, 14, 14}, DType::F64);
  Tensor lb = Tensor::zeros({1, 1, 14, 14}, DType::F64);
  for (std::int64_t h = 0; h < 14; ++h)
    for (std::int64_t w = 0; w < 14; ++w) {
      la.set(h * 14 + w, 0.299 * a.at(a.offset(0, 0, h, w)) + 0.587 * a.at(a.offset(0, 1, h, w)) +
                             0.114 * a.at(a.offset(0, 2, h, w)));
      lb.set(h * 14 + w, 0.299 * b.at(b.offset(0, 0, h, w)) + 0.587 * b.at(b.offset(0, 1, h, w)) +
                             0.114 * b.at(b.offset(0, 2, h, w)));
    }
  CHECK(ssim(a, b) == doctest::Approx(ssim(la, lb)).epsilon(1e-9));
}

TEST_CASE("ssim rejects images smaller than its window") {
  Rng rng(106);
  Tensor tiny = rand_tensor({1, 1, 10, 16}, rng, DType::F32);
  CHECK_THROWS_AS(ssim(tiny, tiny), ShapeError);
  CHECK_THROWS_AS(ssim(rand_tensor({1, 2, 16, 16}, rng), rand_tensor({1, 2, 16, 16}, rng)),
                  ShapeError);
}

TEST_CASE("cost accounting enumerates the tiny model") {
  Model m = build_model(tiny_config());
  CostReport r = count_costs(m, 32, 32);
  CHECK(r.params == m.ps.total_elements());
  CHECK(r.params == 7791);
  // head + tail + rrg tail + 1 mrb: 2 entry downs, 2 cols * (3 rcb * 6 + 2
  // casc ups + 2 casc skff * 3) + 3 final ups + final skff * 4, all convs
  CHECK(r.conv_count == 64);
  CHECK(r.macs > 0);
  CHECK(r.other_flops > 0);
  CHECK(r.activations > 0);
  CHECK(r.flops() == r.macs + r.other_flops);
}

TEST_CASE("cost accounting matches the documented defaults") {
  Model m = build_model(ModelConfig{});
  CostReport r = count_costs(m, 256, 256);
  CHECK(r.params == 5932563);
  CHECK(r.conv_count == 494);
  CHECK(r.macs == 150851340800);
  CHECK(r.other_flops == 3381040880);
  CHECK(r.flops() == 154232381680);
  CHECK(r.activations == 1914875328);
}

TEST_CASE("compute is affine in pixel area, parameters are not") {
  // cost(H*W) = a * area + c; the constant is the work on globally pooled
  // vectors (attention bottlenecks), which ignores resolution. Three sizes
  // pin the affine claim exactly: areas 1024/2304/4096 have gaps 1280/1792.
  Model m = build_model(tiny_config());
  CostReport s = count_costs(m, 32, 32);
  CostReport mid = count_costs(m, 48, 48);
  CostReport big = count_costs(m, 64, 64);
  CHECK(5 * (big.macs - mid.macs) == 7 * (mid.macs - s.macs));
  CHECK(5 * (big.activations - mid.activations) == 7 * (mid.activations - s.activations));
  CHECK(5 * (big.other_flops - mid.other_flops) == 7 * (mid.other_flops - s.other_flops));
  CHECK(big.macs > 3 * s.macs);  // area term dominates the constant
  CHECK(big.params == s.params);
  CHECK(big.conv_count == s.conv_count);
  CHECK_THROWS_AS(count_costs(m, 30, 32), ShapeError);
}

TEST_CASE("the cost report prints every field") {
  Model m = build_model(tiny_config());
  std::ostringstream os;
  print_cost_report(os, count_costs(m, 32, 32));
  const std::string s = os.str();
  CHECK(s.find("input 32x32") != std::string::npos);
  CHECK(s.find("params 7791") != std::string::npos);
  CHECK(s.find("conv_applications 64") != std::string::npos);
  CHECK(s.find("macs ") != std::string::npos);
  CHECK(s.find("other_flops ") != std::string::npos);
  CHECK(s.find("total_flops ") != std::string::npos);
  CHECK(s.find("activations ") != std::string::npos);
}

}  // TEST_SUITE
