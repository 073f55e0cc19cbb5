#include "enrest/tensor.hpp"

namespace enrest {

const char* dtype_name(DType dt) { return dt == DType::F32 ? "f32" : "f64"; }

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ',';
    r += std::to_string(s[i]);
  }
  return r + "]";
}

void Tensor::alloc(DType dt) {
  storage_ = std::make_shared<detail::Storage>();
  storage_->dt = dt;
  if (dt == DType::F32)
    storage_->f.assign(static_cast<std::size_t>(numel_), 0.0f);
  else
    storage_->d.assign(static_cast<std::size_t>(numel_), 0.0);
  link_ = std::make_shared<detail::GradLink>();
}

Tensor Tensor::zeros(Shape shape, DType dt) {
  for (auto d : shape)
    if (d <= 0) throw ShapeError("zeros: non-positive extent in shape " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  t.alloc(dt);
  return t;
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (dt == DType::F32) {
    auto v = static_cast<float>(value);
    for (auto& x : t.storage_->f) x = v;
  } else {
    for (auto& x : t.storage_->d) x = value;
  }
  return t;
}

Tensor Tensor::from_data(Shape shape, const std::vector<double>& values, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (static_cast<std::int64_t>(values.size()) != t.numel_)
    throw ShapeError("from_data: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(t.shape_));
  for (std::int64_t i = 0; i < t.numel_; ++i) t.set(i, values[static_cast<std::size_t>(i)]);
  return t;
}

std::int64_t Tensor::dim(int i) const {
  if (i < 0 || i >= rank()) throw ShapeError("dim: axis " + std::to_string(i) + " out of range for " + shape_str(shape_));
  return shape_[static_cast<std::size_t>(i)];
}

DType Tensor::dtype() const {
  if (!defined()) throw ShapeError("dtype: undefined tensor");
  return storage_->dt;
}

float* Tensor::f32() {
  if (dtype() != DType::F32) throw ShapeError("f32 data access on f64 tensor");
  return storage_->f.data();
}

const float* Tensor::f32() const {
  if (dtype() != DType::F32) throw ShapeError("f32 data access on f64 tensor");
  return storage_->f.data();
}

double* Tensor::f64() {
  if (dtype() != DType::F64) throw ShapeError("f64 data access on f32 tensor");
  return storage_->d.data();
}

const double* Tensor::f64() const {
  if (dtype() != DType::F64) throw ShapeError("f64 data access on f32 tensor");
  return storage_->d.data();
}

double Tensor::at(std::int64_t i) const {
  if (!defined() || i < 0 || i >= numel_) throw ShapeError("at: index " + std::to_string(i) + " out of range");
  return storage_->dt == DType::F32 ? static_cast<double>(storage_->f[static_cast<std::size_t>(i)])
                                    : storage_->d[static_cast<std::size_t>(i)];
}

void Tensor::set(std::int64_t i, double v) {
  if (!defined() || i < 0 || i >= numel_) throw ShapeError("set: index " + std::to_string(i) + " out of range");
  if (storage_->dt == DType::F32)
    storage_->f[static_cast<std::size_t>(i)] = static_cast<float>(v);
  else
    storage_->d[static_cast<std::size_t>(i)] = v;
}

std::int64_t Tensor::offset(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
  if (rank() != 4) throw ShapeError("offset: rank-4 tensor required, got " + shape_str(shape_));
  return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
}

Tensor Tensor::clone() const {
  if (!defined()) return Tensor();
  Tensor t = zeros(shape_, dtype());
  if (dtype() == DType::F32)
    t.storage_->f = storage_->f;
  else
    t.storage_->d = storage_->d;
  return t;
}

Tensor Tensor::astype(DType dt) const {
  if (!defined()) throw ShapeError("astype: undefined tensor");
  if (dt == dtype()) return clone();
  Tensor t = zeros(shape_, dt);
  for (std::int64_t i = 0; i < numel_; ++i) t.set(i, at(i));
  return t;
}

Tensor Tensor::view(Shape shape) const {
  if (!defined()) throw ShapeError("view: undefined tensor");
  if (shape_numel(shape) != numel_)
    throw ShapeError("view: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = numel_;
  t.storage_ = storage_;
  t.link_ = std::make_shared<detail::GradLink>();
  return t;
}

std::vector<double> Tensor::to_vec() const {
  std::vector<double> v(static_cast<std::size_t>(numel_));
  for (std::int64_t i = 0; i < numel_; ++i) v[static_cast<std::size_t>(i)] = at(i);
  return v;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_same_dtype(const Tensor& a, const Tensor& b, const char* who) {
  if (a.dtype() != b.dtype())
    throw ShapeError(std::string(who) + ": mixed dtypes " + dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()));
}

}  // namespace enrest
