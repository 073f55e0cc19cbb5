// Differentiable elementwise and structural ops. Every op computes its output
// eagerly and, when a live tape is tracking any input, records a backward
// closure on it. Outputs are fresh tensors; inputs are never mutated.
#pragma once

#include <vector>

#include "enrest/tensor.hpp"

namespace enrest {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// General 2-D product: a [m,k] x b [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax along `axis`; each 1-D slice along that axis sums to one.
Tensor softmax(const Tensor& x, int axis);

// Scalar [1] sum of all elements.
Tensor sum_all(const Tensor& x);

// Tape-tracked reshape (shares storage, numel must match).
Tensor reshape(const Tensor& x, const Shape& shape);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len);

// x [N,C,H,W] combined with a per-(n,c) scalar s [N,C,1,1].
Tensor broadcast_add(const Tensor& x, const Tensor& s);
Tensor broadcast_mul(const Tensor& x, const Tensor& s);

}  // namespace enrest
