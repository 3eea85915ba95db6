#include "ctnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "ctnet/errors.hpp"

namespace ctnet {

std::size_t shape_size(const Shape& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : dims_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape dims, std::vector<double> data, Precision precision)
    : dims_(std::move(dims)), data_(std::move(data)), precision_(precision) {
  if (dims_.empty()) throw ShapeError("tensor needs at least one dimension");
  for (std::size_t d : dims_) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims_));
  }
  if (data_.size() != shape_size(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     shape_string(dims_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericalError("non-finite tensor element at flat index " + std::to_string(i));
    }
    if (precision_ == Precision::f32) {
      const float f = static_cast<float>(data_[i]);
      if (!std::isfinite(f)) throw NumericalError("element overflows 32-bit float at flat index " + std::to_string(i));
      data_[i] = f;
    }
  }
}

Tensor Tensor::zeros(Shape dims, Precision precision) { return filled(std::move(dims), 0.0, precision); }

Tensor Tensor::filled(Shape dims, double value, Precision precision) {
  const std::size_t n = shape_size(dims);
  return Tensor(std::move(dims), std::vector<double>(n, value), precision);
}

Tensor Tensor::scalar(double value, Precision precision) { return Tensor({1}, {value}, precision); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(dims_));
  return dims_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor with dims " + shape_string(dims_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape dims) const {
  if (shape_size(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
  }
  return Tensor(std::move(dims), data_, precision_);
}

Tensor Tensor::with_precision(Precision precision) const { return Tensor(dims_, data_, precision); }

bool Tensor::identical(const Tensor& other) const noexcept {
  return dims_ == other.dims_ && precision_ == other.precision_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

Precision common_precision(std::initializer_list<const Tensor*> tensors) {
  for (const Tensor* t : tensors) {
    if (t->precision() == Precision::f64) return Precision::f64;
  }
  return Precision::f32;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.dims()));
  }
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

}  // namespace ctnet
