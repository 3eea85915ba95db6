#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/reduce.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {
namespace {

constexpr double kSlopeEpsilon = 1e-5;

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
double sign_or_one(double v) { return v < 0.0 ? -1.0 : 1.0; }

// Value of the constraint over a G x G lattice of (x, y) targets. When grad
// is non-null, d value / d targets is accumulated into it (2 per point).
double evaluate(const double* pts, std::size_t grid, double lambda_r, double lambda_s, double* grad) {
  if (grid < 3) throw ValidationError("second_order_constraint needs a lattice of at least 3x3");
  auto idx = [grid](std::size_t i, std::size_t j) { return i * grid + j; };
  std::vector<double> terms;
  terms.reserve((grid - 2) * (grid - 2) * 4);

  // | |p - a| - |p - b| |
  auto spacing = [&](std::size_t p, std::size_t a, std::size_t b) {
    const double ax = pts[2 * p] - pts[2 * a], ay = pts[2 * p + 1] - pts[2 * a + 1];
    const double bx = pts[2 * p] - pts[2 * b], by = pts[2 * p + 1] - pts[2 * b + 1];
    const double da = std::hypot(ax, ay), db = std::hypot(bx, by);
    terms.push_back(lambda_r * std::abs(da - db));
    if (grad == nullptr) return;
    const double g = lambda_r * sign_or_zero(da - db);
    const double ua = da > 0.0 ? g / da : 0.0, ub = db > 0.0 ? g / db : 0.0;
    grad[2 * p] += ua * ax - ub * bx;
    grad[2 * p + 1] += ua * ay - ub * by;
    grad[2 * a] -= ua * ax;
    grad[2 * a + 1] -= ua * ay;
    grad[2 * b] += ub * bx;
    grad[2 * b + 1] += ub * by;
  };

  // Slope along axis `run` (0 = x, 1 = y) of the rise on the other axis.
  auto slope_change = [&](std::size_t p, std::size_t a, std::size_t b, int run) {
    const int rise = 1 - run;
    auto slope = [&](std::size_t q, double& d_run, double& d_rise) {
      const double r = pts[2 * q + run] - pts[2 * p + run];
      const double s = pts[2 * q + rise] - pts[2 * p + rise];
      const double den = r + kSlopeEpsilon * sign_or_one(r);
      d_run = -s / (den * den);
      d_rise = 1.0 / den;
      return s / den;
    };
    double ra, sa, rb, sb;
    const double diff = slope(a, ra, sa) - slope(b, rb, sb);
    terms.push_back(lambda_s * std::abs(diff));
    if (grad == nullptr) return;
    const double g = lambda_s * sign_or_zero(diff);
    grad[2 * a + run] += g * ra;
    grad[2 * a + rise] += g * sa;
    grad[2 * b + run] -= g * rb;
    grad[2 * b + rise] -= g * sb;
    grad[2 * p + run] -= g * (ra - rb);
    grad[2 * p + rise] -= g * (sa - sb);
  };

  for (std::size_t i = 1; i + 1 < grid; ++i) {
    for (std::size_t j = 1; j + 1 < grid; ++j) {
      const std::size_t p = idx(i, j);
      const std::size_t left = idx(i, j - 1), right = idx(i, j + 1), up = idx(i - 1, j), down = idx(i + 1, j);
      spacing(p, left, right);
      spacing(p, up, down);
      slope_change(p, left, right, 0);
      slope_change(p, up, down, 1);
    }
  }
  return pairwise_sum(terms);
}

std::vector<double> flat_targets(const ControlGrid& control) {
  std::vector<double> pts;
  pts.reserve(2 * control.size());
  for (const Point& p : control.target) {
    pts.push_back(p.x);
    pts.push_back(p.y);
  }
  return pts;
}

void require_lattice(const Tensor& targets, std::size_t grid) {
  if (targets.rank() != 2 || targets.dim(0) != grid * grid || targets.dim(1) != 2) {
    throw ShapeError("control targets must be " + std::to_string(grid * grid) + " x 2, got " +
                     shape_string(targets.dims()));
  }
}

double mean_abs_difference(const Tensor& a, const Tensor& b) {
  const auto x = a.data(), y = b.data();
  return pairwise_sum(0, x.size(), [&](std::size_t i) { return std::abs(x[i] - y[i]); }) /
         static_cast<double>(x.size());
}

}  // namespace

double second_order_constraint(const ControlGrid& control, double lambda_r, double lambda_s) {
  control.validate();
  const std::vector<double> pts = flat_targets(control);
  return evaluate(pts.data(), control.grid, lambda_r, lambda_s, nullptr);
}

double tps_loss(const Tensor& warped, const Tensor& truth, const ControlGrid& control,
                const TpsLossWeights& weights) {
  require_same_dims(warped, truth, "tps_loss");
  return weights.lambda1 * mean_abs_difference(truth, warped) +
         weights.lambda2 * second_order_constraint(control, weights.lambda_r, weights.lambda_s);
}

SecondOrderConstraintOp::SecondOrderConstraintOp(std::size_t grid, double lambda_r, double lambda_s)
    : grid_(grid), lambda_r_(lambda_r), lambda_s_(lambda_s) {
  if (grid < 3) throw ValidationError("second_order_constraint needs a lattice of at least 3x3");
}

Tensor SecondOrderConstraintOp::forward(std::span<const Tensor> inputs) const {
  require_lattice(inputs[0], grid_);
  return Tensor::scalar(evaluate(inputs[0].data().data(), grid_, lambda_r_, lambda_s_, nullptr),
                        inputs[0].precision());
}

std::vector<Tensor> SecondOrderConstraintOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                                 const Tensor& cotangent) const {
  std::vector<double> grad(inputs[0].size(), 0.0);
  evaluate(inputs[0].data().data(), grid_, lambda_r_, lambda_s_, grad.data());
  const double ct = cotangent.item();
  for (double& g : grad) g *= ct;
  return {Tensor(inputs[0].dims(), std::move(grad), inputs[0].precision())};
}

TpsLossOp::TpsLossOp(std::size_t grid, TpsLossWeights weights) : grid_(grid), weights_(weights) {
  if (grid < 3) throw ValidationError("tps_loss needs a lattice of at least 3x3");
}

Tensor TpsLossOp::forward(std::span<const Tensor> inputs) const {
  require_same_dims(inputs[0], inputs[1], "tps_loss");
  require_lattice(inputs[2], grid_);
  const double value =
      weights_.lambda1 * mean_abs_difference(inputs[1], inputs[0]) +
      weights_.lambda2 * evaluate(inputs[2].data().data(), grid_, weights_.lambda_r, weights_.lambda_s, nullptr);
  return Tensor::scalar(value, common_precision({&inputs[0], &inputs[1], &inputs[2]}));
}

std::vector<Tensor> TpsLossOp::vjp(std::span<const Tensor> inputs, const Tensor&, const Tensor& cotangent) const {
  const double ct = cotangent.item();
  const auto w = inputs[0].data(), t = inputs[1].data();
  const double scale = ct * weights_.lambda1 / static_cast<double>(w.size());
  std::vector<double> g_warped(w.size()), g_truth(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    g_warped[i] = scale * sign_or_zero(w[i] - t[i]);
    g_truth[i] = -g_warped[i];
  }
  std::vector<double> g_targets(inputs[2].size(), 0.0);
  evaluate(inputs[2].data().data(), grid_, weights_.lambda_r, weights_.lambda_s, g_targets.data());
  for (double& g : g_targets) g *= ct * weights_.lambda2;
  return {Tensor(inputs[0].dims(), std::move(g_warped), inputs[0].precision()),
          Tensor(inputs[1].dims(), std::move(g_truth), inputs[1].precision()),
          Tensor(inputs[2].dims(), std::move(g_targets), inputs[2].precision())};
}

}  // namespace ctnet
