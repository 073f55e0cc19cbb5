// Differentiable NN building blocks over NCHW tensors. Convolution is direct
// (kernel sizes 1 and 3, zero padding, grouped); every kernel accumulates each
// output element in a fixed order so parallel and sequential runs agree
// bitwise.
#pragma once

#include "enrest/tensor.hpp"

namespace enrest {

struct ConvParams {
  Tensor weight;  // [Cout, Cin/groups, k, k]
  Tensor bias;    // [Cout], leave undefined for bias-free layers
  int stride = 1;
  int pad = 0;
  int groups = 1;
};

Tensor conv2d(const Tensor& x, const ConvParams& p);

Tensor relu(const Tensor& x);

// [N,C,H,W] -> [N,C,1,1] spatial mean.
Tensor global_avg_pool(const Tensor& x);

// 2x2 mean with stride 2; H and W must be even.
Tensor avg_pool2x2(const Tensor& x);

// Doubles H and W, half-pixel aligned sampling with edge clamping.
Tensor bilinear_up2x(const Tensor& x);

// out[n,c] = sum_i x[n,c,i] * w[n,i] over flattened spatial positions,
// result [N,C,1,1]. w has shape [N, H*W].
Tensor weighted_spatial_pool(const Tensor& x, const Tensor& w);

// Scale-change units used between resolution streams: both pair a 1x1
// channel projection (no bias) with a fixed spatial resampling.
struct ResampleParams {
  Tensor proj;  // [Cout, Cin, 1, 1]
};

// 2x2 average pooling then channel projection.
Tensor downsample2x(const Tensor& x, const ResampleParams& p);

// Channel projection then bilinear upsampling; projecting at the source
// resolution costs a quarter of the flops of the reverse order, and the two
// orders compute the same map because interpolation is linear and channelwise.
Tensor upsample2x(const Tensor& x, const ResampleParams& p);

}  // namespace enrest
