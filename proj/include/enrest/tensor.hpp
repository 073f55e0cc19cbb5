#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "enrest/error.hpp"

namespace enrest {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType dt) { return dt == DType::F32 ? 4 : 8; }
const char* dtype_name(DType dt);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Storage {
  DType dt = DType::F32;
  std::vector<float> f;
  std::vector<double> d;
};

// Links a tensor to the tape node that produced or watched it. Shared
// between copies, so watching a stored parameter also covers every copy
// handed out by the store.
struct GradLink {
  std::uint64_t gen = 0;
  std::int32_t node = -1;
};

}  // namespace detail

// Dense row-major tensor, NCHW for rank-4 feature maps. Copies share
// storage; once an op has produced a tensor it is never written again.
// Rank 0 is a scalar (numel 1).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt);
  static Tensor full(Shape shape, double value, DType dt);
  static Tensor from_data(Shape shape, const std::vector<double>& values, DType dt);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const;
  std::int64_t numel() const { return numel_; }
  DType dtype() const;

  float* f32();
  const float* f32() const;
  double* f64();
  const double* f64() const;

  double at(std::int64_t i) const;      // dtype-agnostic element read
  void set(std::int64_t i, double v);   // element write for construction and tests

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const;

  Tensor clone() const;
  Tensor astype(DType dt) const;
  // Same storage under a new shape, detached from the tape. Autodiff code
  // goes through ops::reshape, which records the node.
  Tensor view(Shape shape) const;

  std::vector<double> to_vec() const;

  detail::GradLink* grad_link() const { return link_.get(); }

 private:
  Shape shape_;
  std::int64_t numel_ = 0;
  std::shared_ptr<detail::Storage> storage_;
  std::shared_ptr<detail::GradLink> link_;

  void alloc(DType dt);
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* who);
void check_same_dtype(const Tensor& a, const Tensor& b, const char* who);

namespace detail {

template <class T>
T* data(Tensor& t);
template <class T>
const T* cdata(const Tensor& t);

template <>
inline float* data<float>(Tensor& t) {
  return t.f32();
}
template <>
inline double* data<double>(Tensor& t) {
  return t.f64();
}
template <>
inline const float* cdata<float>(const Tensor& t) {
  return t.f32();
}
template <>
inline const double* cdata<double>(const Tensor& t) {
  return t.f64();
}

template <class F>
void dispatch(DType dt, F&& f) {
  if (dt == DType::F32)
    f(float{});
  else
    f(double{});
}

}  // namespace detail

}  // namespace enrest
