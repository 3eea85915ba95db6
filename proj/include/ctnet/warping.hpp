#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ctnet/correspondence.hpp"
#include "ctnet/tape.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

inline constexpr double kDefaultAlpha = 100.0;

// ---------------------------------------------------------------------------
// Dense softmax warping

/// W(u) = sum_v softmax_v(alpha * scores(u, v)) * x(v).
///
/// scores is N_t x N_s; x is h_s x w_s x C with h_s * w_s = N_s; the result
/// is out_h x out_w x C with out_h * out_w = N_t.
Tensor dense_warp_scores(const Tensor& scores, const Tensor& x, std::size_t out_h, std::size_t out_w,
                         double alpha = kDefaultAlpha);

/// Warps x given at the matrix's source-grid resolution onto its target grid.
Tensor dense_warp(const CorrespondenceMatrix& m, const Tensor& x, double alpha = kDefaultAlpha);

/// Warps a full-resolution image through a grid-resolution matrix by moving
/// whole pixel blocks: each grid cell carries its s x s block as channels
/// (s = image height / grid height), the blocks are warped, then unpacked.
Tensor dense_warp_blocks(const CorrespondenceMatrix& m, const Tensor& image, double alpha = kDefaultAlpha);

/// H x W x C -> (H/s) x (W/s) x (s*s*C), block pixels row-major, channels innermost.
Tensor space_to_depth(const Tensor& x, std::size_t block);
Tensor depth_to_space(const Tensor& x, std::size_t block);

/// Inputs: scores (N_t x N_s), x (h_s x w_s x C).
class DenseWarpOp final : public Operation {
 public:
  DenseWarpOp(std::size_t out_h, std::size_t out_w, double alpha = kDefaultAlpha);
  std::string_view name() const override { return "dense_warp"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  std::size_t out_h_, out_w_;
  double alpha_;
};

// ---------------------------------------------------------------------------
// Control grids and thin-plate splines

struct Point {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

struct LatticeRect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// G x G control points. `source` is a uniform lattice in the output frame;
/// `target` holds where each lattice point samples the input image.
struct ControlGrid {
  std::size_t grid = 5;
  std::vector<Point> source;
  std::vector<Point> target;

  static ControlGrid uniform(std::size_t grid, const LatticeRect& rect);

  std::size_t size() const noexcept { return source.size(); }
  void validate() const;
  /// K x 2 tensor of (x, y) targets.
  Tensor target_tensor() const;
  ControlGrid with_targets(const Tensor& targets) const;
};

/// Cell-centre span of a matrix's target-side grid; the default lattice rectangle.
LatticeRect cell_center_rect(const GridInfo& grid);

/// Replaces the trained regressor: each target-grid cell's row is softmaxed
/// and the expected source cell centre becomes that cell's correspondence.
/// Lattice points between cell centres blend the four surrounding cells'
/// expectations bilinearly. Throws BoundsError for points outside the
/// cell-centre rectangle.
ControlGrid soft_argmax_control_points(const CorrespondenceMatrix& m, std::size_t grid, double alpha,
                                       const LatticeRect& rect);
ControlGrid soft_argmax_control_points(const CorrespondenceMatrix& m, std::size_t grid = 5,
                                       double alpha = kDefaultAlpha);

/// Solved spline f(p) = affine(p) + sum_i w_i U(|p - s_i|), U(r) = r^2 log r^2,
/// mapping the output frame into the input image (backward warping).
struct TpsTransform {
  ControlGrid control;
  /// Rows give the x and y outputs; columns are (constant, x, y).
  std::array<std::array<double, 3>, 2> affine{};
  /// Per control point kernel coefficients for (x, y).
  std::vector<std::array<double, 2>> weights;
  double lambda = 1e-6;

  Point map(const Point& p) const;
};

double tps_kernel(double squared_distance);

/// Throws FitError naming duplicated or collinear control points when the
/// system is singular.
TpsTransform tps_fit(const ControlGrid& control, double lambda = 1e-6);

/// Backward warp: out(p) = bilinear(image, f(p)), zero outside the image.
Tensor tps_apply(const TpsTransform& transform, const Tensor& image);

/// Spacing and collinearity penalty over interior lattice targets.
///
/// For each interior p with lattice neighbours left p0, right p1, up p2,
/// down p3:
///   lambda_r (| |p-p0| - |p-p1| | + | |p-p2| - |p-p3| |)
/// + lambda_s (|Sh(p,p0) - Sh(p,p1)| + |Sv(p,p2) - Sv(p,p3)|)
/// with Sh(p,q) = dy / (dx + eps sgn dx) along rows and
/// Sv(p,q) = dx / (dy + eps sgn dy) along columns, eps = 1e-5, sgn 0 = +1.
double second_order_constraint(const ControlGrid& control, double lambda_r = 1.0, double lambda_s = 1.0);

struct TpsLossWeights {
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  double lambda_r = 1.0;
  double lambda_s = 1.0;
};

/// lambda1 * mean|truth - warped| + lambda2 * second_order_constraint.
double tps_loss(const Tensor& warped, const Tensor& truth, const ControlGrid& control,
                const TpsLossWeights& weights = {});

/// Inputs: targets (K x 2), image (H x W x C). Differentiates through the
/// spline solve.
class TpsApplyOp final : public Operation {
 public:
  TpsApplyOp(std::size_t grid, std::vector<Point> source, double lambda = 1e-6);
  std::string_view name() const override { return "tps_apply"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  ControlGrid lattice_;
  double lambda_;
};

/// Input: targets (K x 2) of a G x G lattice.
class SecondOrderConstraintOp final : public Operation {
 public:
  SecondOrderConstraintOp(std::size_t grid, double lambda_r = 1.0, double lambda_s = 1.0);
  std::string_view name() const override { return "second_order_constraint"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  std::size_t grid_;
  double lambda_r_, lambda_s_;
};

/// Inputs: warped, truth, targets (K x 2).
class TpsLossOp final : public Operation {
 public:
  TpsLossOp(std::size_t grid, TpsLossWeights weights = {});
  std::string_view name() const override { return "tps_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  std::size_t grid_;
  TpsLossWeights weights_;
};

}  // namespace ctnet
