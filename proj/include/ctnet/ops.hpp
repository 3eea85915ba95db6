#pragma once

#include <cstddef>

#include "ctnet/tape.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

/// Square sliding window over a grid of cells. Padding cells read as zero.
struct WindowSpec {
  std::size_t size = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  /// Output cells along an axis of `extent` input cells; 0 when the window
  /// does not fit.
  std::size_t output_extent(std::size_t extent) const;
  void validate() const;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Window extraction over an H x W x C tensor. Row k of the N x (size^2 C)
/// result is the window at output cell k (row-major), with channels
/// innermost within each window cell.
Tensor unfold(const Tensor& x, const WindowSpec& window);

/// Row-wise softmax of alpha * s with max subtraction.
Tensor softmax_rows(const Tensor& scores, double alpha);

/// Bilinear sampling of an H x W x C image at H' x W' x 2 coordinates given
/// as (row, col) in the pixel-center frame. Each of the four neighbors that
/// falls outside the image contributes zero.
Tensor bilinear_sample(const Tensor& image, const Tensor& coords);

/// Inner product of two equally shaped tensors with pairwise summation.
double dot(const Tensor& a, const Tensor& b);

class SoftmaxRowsOp final : public Operation {
 public:
  explicit SoftmaxRowsOp(double alpha);
  std::string_view name() const override { return "softmax_rows"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  double alpha_;
};

/// Inputs: image (H x W x C), coords (H' x W' x 2).
class BilinearSampleOp final : public Operation {
 public:
  std::string_view name() const override { return "bilinear_sample"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;
};

namespace detail {
/// Top-left neighbor of a sample point and its fractional offsets.
struct BilinearCorners {
  long r0, c0;
  double fr, fc;
};
BilinearCorners bilinear_corners(double row, double col);
}  // namespace detail

}  // namespace ctnet
