// Slow, single-threaded transcriptions of the layer formulas, kept as the
// oracle the optimized kernels are tested against and as the benchmark
// baseline. Everything here is scalar loops over at()/set(), accumulating in
// double, with no tape interaction. Where the optimized path reorders work
// for speed (the upsampling unit projects before interpolating), this path
// keeps the plain order so tests confirm the two agree.
#pragma once

#include "enrest/blocks.hpp"
#include "enrest/tensor.hpp"

namespace enrest::ref {

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, int groups);
Tensor relu(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);
Tensor avg_pool2x2(const Tensor& x);
Tensor bilinear_up2x(const Tensor& x);

Tensor downsample2x(const Tensor& x, const Tensor& proj);
// interpolate first, then project channels
Tensor upsample2x(const Tensor& x, const Tensor& proj);

Tensor skff_forward(const ParamStore& ps, const SkffSpec& spec, const std::vector<Tensor>& inputs);
Tensor fusion_forward(const ParamStore& ps, const FusionSpec& spec,
                      const std::vector<Tensor>& inputs);
Tensor rcb_forward(const ParamStore& ps, const RcbSpec& spec, const Tensor& x);
Tensor mrb_forward(const ParamStore& ps, const MrbSpec& spec, const Tensor& x);
Tensor rrg_forward(const ParamStore& ps, const RrgSpec& spec, const Tensor& x);
Tensor model_forward(const Model& m, const Tensor& x);

// Structural-similarity mean over the batch, computed with direct per-window
// loops (the fast path in analysis uses separable filtering instead).
double ssim(const Tensor& a, const Tensor& b);

}  // namespace enrest::ref
