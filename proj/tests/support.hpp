#pragma once

#include <cmath>
#include <functional>

#include "doctest.h"
#include "enrest/rng.hpp"
#include "enrest/tensor.hpp"

namespace enrest::test {

inline Tensor rand_tensor(Shape shape, Rng& rng, DType dt = DType::F32, double lo = -1.0,
                          double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a.at(i) != b.at(i)) return false;
  return true;
}

inline double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// central difference of a scalar-valued function wrt one element of x
inline double fd_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                      std::int64_t i, double h = 1e-5) {
  Tensor xp = x.clone(), xm = x.clone();
  xp.set(i, x.at(i) + h);
  xm.set(i, x.at(i) - h);
  return (f(xp) - f(xm)) / (2.0 * h);
}

}  // namespace enrest::test
