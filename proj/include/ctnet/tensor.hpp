#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ctnet {

enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense, immutable, row-major array of reals.
///
/// Values are always held as doubles. In f32 mode every element is rounded
/// to the nearest float at construction, so the stored values are exactly
/// the ones a 32-bit pipeline would carry. Construction rejects NaN/Inf
/// with NumericalError and mismatched data length with ShapeError.
class Tensor {
 public:
  /// A one-element zero, shaped {1}.
  Tensor();
  Tensor(Shape dims, std::vector<double> data, Precision precision = Precision::f64);

  static Tensor zeros(Shape dims, Precision precision = Precision::f64);
  static Tensor filled(Shape dims, double value, Precision precision = Precision::f64);
  static Tensor scalar(double value, Precision precision = Precision::f64);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  Precision precision() const noexcept { return precision_; }

  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double at(std::size_t i, std::size_t j) const noexcept { return data_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  /// Value of a {1}-shaped tensor.
  double item() const;

  Tensor reshaped(Shape dims) const;
  Tensor with_precision(Precision precision) const;

  /// Bitwise equality of dims, precision and every element.
  bool identical(const Tensor& other) const noexcept;

 private:
  Shape dims_;
  std::vector<double> data_;
  Precision precision_ = Precision::f64;
};

/// f32 only when every argument is f32.
Precision common_precision(std::initializer_list<const Tensor*> tensors);

void require_rank(const Tensor& t, std::size_t rank, const char* what);
void require_same_dims(const Tensor& a, const Tensor& b, const char* what);

}  // namespace ctnet
