// Image metrics and static cost accounting for a built model.
#pragma once

#include <cstdint>
#include <iosfwd>

#include "enrest/blocks.hpp"
#include "enrest/tensor.hpp"

namespace enrest {

// Peak signal-to-noise ratio over all elements; +infinity for identical
// inputs. `peak` is the dynamic range (1.0 for unit-scaled images).
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean structural similarity over the batch: BT.601 luma for 3-channel
// input, 11x11 Gaussian windows (sigma 1.5) fully inside the image,
// K1=0.01/K2=0.03 at unit dynamic range. Separable filtering; the direct
// windowed form lives in the reference library.
double ssim(const Tensor& a, const Tensor& b);

double mae(const Tensor& a, const Tensor& b);

// Static per-forward cost of a model at a given input size. Multiply-adds
// are counted as one flop; everything else (bias adds, pooling, softmax,
// interpolation, elementwise arithmetic) lands in other_flops. Activations
// are the elements produced by op outputs. Parameters are deduplicated, so
// filter banks shared between columns count once.
struct CostReport {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t other_flops = 0;
  std::int64_t activations = 0;
  std::int64_t conv_count = 0;
  std::int64_t flops() const { return macs + other_flops; }
};

CostReport count_costs(const Model& m, std::int64_t height, std::int64_t width);

void print_cost_report(std::ostream& os, const CostReport& r);

}  // namespace enrest
