#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/ops.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {
namespace {

std::string point_string(std::size_t index, const Point& p) {
  std::ostringstream os;
  os << '#' << index << " (" << p.x << ", " << p.y << ')';
  return os.str();
}

// Regularisation keeps the matrix invertible for coincident points, so
// degenerate layouts are caught before factorising.
void reject_degenerate(const ControlGrid& control) {
  const auto& s = control.source;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (std::hypot(s[i].x - s[j].x, s[i].y - s[j].y) < 1e-9) {
        throw FitError("tps_fit: singular system, control points " + point_string(i, s[i]) + " and " +
                       point_string(j, s[j]) + " coincide");
      }
    }
  }
  Eigen::MatrixXd affine(s.size(), 3);
  for (std::size_t i = 0; i < s.size(); ++i) affine.row(static_cast<Eigen::Index>(i)) << 1.0, s[i].x, s[i].y;
  if (Eigen::FullPivLU<Eigen::MatrixXd>(affine).rank() < 3) {
    throw FitError("tps_fit: singular system, control points " + point_string(0, s.front()) + " through " +
                   point_string(s.size() - 1, s.back()) + " are collinear");
  }
}

// The (K+3) x (K+3) bordered kernel matrix and its factorisation.
struct TpsSystem {
  Eigen::MatrixXd matrix;
  Eigen::FullPivLU<Eigen::MatrixXd> lu;
};

TpsSystem build_system(const ControlGrid& control, double lambda) {
  reject_degenerate(control);
  const auto& s = control.source;
  const Eigen::Index k = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k + 3, k + 3);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double dx = s[i].x - s[j].x, dy = s[i].y - s[j].y;
      l(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    l(i, i) += lambda;
    l(i, k) = 1.0;
    l(i, k + 1) = s[i].x;
    l(i, k + 2) = s[i].y;
    l(k, i) = 1.0;
    l(k + 1, i) = s[i].x;
    l(k + 2, i) = s[i].y;
  }
  TpsSystem sys{l, Eigen::FullPivLU<Eigen::MatrixXd>(l)};
  if (sys.lu.rank() < k + 3) throw FitError("tps_fit: singular system for the given control points");
  return sys;
}

// Basis row [U(|p - s_0|^2) .. U(|p - s_{K-1}|^2), 1, x, y].
void basis(const std::vector<Point>& source, const Point& p, double* out) {
  const std::size_t k = source.size();
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = p.x - source[i].x, dy = p.y - source[i].y;
    out[i] = tps_kernel(dx * dx + dy * dy);
  }
  out[k] = 1.0;
  out[k + 1] = p.x;
  out[k + 2] = p.y;
}

Tensor sampling_coords(const TpsTransform& t, std::size_t h, std::size_t w, Precision precision) {
  std::vector<double> coords(h * w * 2);
  parallel_for(h * w, [&](std::size_t idx) {
    const Point q = t.map(Point{static_cast<double>(idx % w), static_cast<double>(idx / w)});
    coords[2 * idx] = q.y;
    coords[2 * idx + 1] = q.x;
  });
  return Tensor({h, w, 2}, std::move(coords), precision);
}

}  // namespace

double tps_kernel(double squared_distance) {
  return squared_distance > 0.0 ? squared_distance * std::log(squared_distance) : 0.0;
}

ControlGrid ControlGrid::uniform(std::size_t grid, const LatticeRect& rect) {
  if (grid < 2) throw ValidationError("control grid needs at least 2 points per side");
  ControlGrid c;
  c.grid = grid;
  const double steps = static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      c.source.push_back(Point{rect.x0 + (rect.x1 - rect.x0) * static_cast<double>(j) / steps,
                               rect.y0 + (rect.y1 - rect.y0) * static_cast<double>(i) / steps});
    }
  }
  c.target = c.source;
  return c;
}

void ControlGrid::validate() const {
  if (grid < 2) throw ValidationError("control grid needs at least 2 points per side");
  if (source.size() != grid * grid || target.size() != grid * grid) {
    throw ValidationError("control grid of side " + std::to_string(grid) + " needs " + std::to_string(grid * grid) +
                          " source and target points");
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!std::isfinite(source[i].x) || !std::isfinite(source[i].y) || !std::isfinite(target[i].x) ||
        !std::isfinite(target[i].y)) {
      throw NumericalError("control point " + std::to_string(i) + " is not finite");
    }
  }
}

Tensor ControlGrid::target_tensor() const {
  std::vector<double> v;
  v.reserve(2 * target.size());
  for (const Point& p : target) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return Tensor({target.size(), 2}, std::move(v));
}

ControlGrid ControlGrid::with_targets(const Tensor& targets) const {
  if (targets.rank() != 2 || targets.dim(0) != source.size() || targets.dim(1) != 2) {
    throw ShapeError("control targets must be " + std::to_string(source.size()) + " x 2, got " +
                     shape_string(targets.dims()));
  }
  ControlGrid c = *this;
  for (std::size_t i = 0; i < c.target.size(); ++i) c.target[i] = Point{targets.at(i, 0), targets.at(i, 1)};
  return c;
}

LatticeRect cell_center_rect(const GridInfo& grid) {
  const auto first = grid.cell_center(0, 0);
  const auto last = grid.cell_center(grid.grid_h() - 1, grid.grid_w() - 1);
  return LatticeRect{first[1], first[0], last[1], last[0]};
}

ControlGrid soft_argmax_control_points(const CorrespondenceMatrix& m, std::size_t grid, double alpha,
                                       const LatticeRect& rect) {
  m.validate();
  ControlGrid control = ControlGrid::uniform(grid, rect);
  const Tensor weights = softmax_rows(m.scores, alpha);
  const std::size_t nt = weights.dim(0), ns = weights.dim(1);

  std::vector<Point> centers(ns);
  for (std::size_t v = 0; v < ns; ++v) {
    const auto c = m.cols.cell_center(v / m.cols.grid_w(), v % m.cols.grid_w());
    centers[v] = Point{c[1], c[0]};
  }
  std::vector<Point> expected(nt);
  parallel_for(nt, [&](std::size_t u) {
    const double* row = weights.data().data() + u * ns;
    expected[u] = Point{pairwise_sum(0, ns, [&](std::size_t v) { return row[v] * centers[v].x; }),
                        pairwise_sum(0, ns, [&](std::size_t v) { return row[v] * centers[v].y; })};
  });

  const std::size_t gh = m.rows.grid_h(), gw = m.rows.grid_w();
  const auto origin = m.rows.cell_center(0, 0);
  const double spacing = static_cast<double>(m.rows.feature_stride * m.rows.window.stride);
  auto locate = [&](double coord, double first, std::size_t cells, const char* axis, std::size_t index) {
    const double u = (coord - first) / spacing;
    const double top = static_cast<double>(cells - 1);
    if (u < -1e-9 || u > top + 1e-9) {
      throw BoundsError("soft_argmax_control_points: lattice point " + std::to_string(index) + " lies outside the " +
                        axis + " extent of the correspondence grid");
    }
    const double clamped = std::clamp(u, 0.0, top);
    const std::size_t lo = cells < 2 ? 0 : std::min(static_cast<std::size_t>(clamped), cells - 2);
    return std::pair<std::size_t, double>{lo, cells < 2 ? 0.0 : clamped - static_cast<double>(lo)};
  };
  for (std::size_t k = 0; k < control.source.size(); ++k) {
    const Point& s = control.source[k];
    const auto [i0, fi] = locate(s.y, origin[0], gh, "row", k);
    const auto [j0, fj] = locate(s.x, origin[1], gw, "column", k);
    const std::size_t i1 = std::min(i0 + 1, gh - 1), j1 = std::min(j0 + 1, gw - 1);
    const Point& e00 = expected[i0 * gw + j0];
    const Point& e01 = expected[i0 * gw + j1];
    const Point& e10 = expected[i1 * gw + j0];
    const Point& e11 = expected[i1 * gw + j1];
    auto blend = [&](double a, double b, double c, double d) {
      return (1 - fi) * ((1 - fj) * a + fj * b) + fi * ((1 - fj) * c + fj * d);
    };
    control.target[k] = Point{blend(e00.x, e01.x, e10.x, e11.x), blend(e00.y, e01.y, e10.y, e11.y)};
  }
  return control;
}

ControlGrid soft_argmax_control_points(const CorrespondenceMatrix& m, std::size_t grid, double alpha) {
  return soft_argmax_control_points(m, grid, alpha, cell_center_rect(m.rows));
}

Point TpsTransform::map(const Point& p) const {
  Point out{affine[0][0] + affine[0][1] * p.x + affine[0][2] * p.y,
            affine[1][0] + affine[1][1] * p.x + affine[1][2] * p.y};
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double dx = p.x - control.source[i].x, dy = p.y - control.source[i].y;
    const double u = tps_kernel(dx * dx + dy * dy);
    out.x += weights[i][0] * u;
    out.y += weights[i][1] * u;
  }
  return out;
}

TpsTransform tps_fit(const ControlGrid& control, double lambda) {
  control.validate();
  if (control.size() < 3) throw ValidationError("tps_fit needs at least 3 control points");
  if (!(lambda >= 0.0)) throw ValidationError("tps_fit: lambda must be non-negative");
  const TpsSystem sys = build_system(control, lambda);
  const Eigen::Index k = static_cast<Eigen::Index>(control.size());
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k + 3, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    rhs(i, 0) = control.target[i].x;
    rhs(i, 1) = control.target[i].y;
  }
  const Eigen::MatrixXd theta = sys.lu.solve(rhs);
  if (!theta.allFinite()) throw FitError("tps_fit: solution is not finite");

  TpsTransform t;
  t.control = control;
  t.lambda = lambda;
  t.weights.resize(control.size());
  for (Eigen::Index i = 0; i < k; ++i) t.weights[i] = {theta(i, 0), theta(i, 1)};
  for (int d = 0; d < 2; ++d) t.affine[d] = {theta(k, d), theta(k + 1, d), theta(k + 2, d)};
  return t;
}

Tensor tps_apply(const TpsTransform& transform, const Tensor& image) {
  require_rank(image, 3, "tps_apply");
  return bilinear_sample(image, sampling_coords(transform, image.dim(0), image.dim(1), image.precision()));
}

TpsApplyOp::TpsApplyOp(std::size_t grid, std::vector<Point> source, double lambda) : lambda_(lambda) {
  lattice_.grid = grid;
  lattice_.target = source;
  lattice_.source = std::move(source);
  lattice_.validate();
}

Tensor TpsApplyOp::forward(std::span<const Tensor> inputs) const {
  return tps_apply(tps_fit(lattice_.with_targets(inputs[0]), lambda_), inputs[1]);
}

std::vector<Tensor> TpsApplyOp::vjp(std::span<const Tensor> inputs, const Tensor& output,
                                    const Tensor& cotangent) const {
  const Tensor& targets = inputs[0];
  const Tensor& image = inputs[1];
  const ControlGrid control = lattice_.with_targets(targets);
  const TpsTransform t = tps_fit(control, lambda_);
  const std::size_t h = image.dim(0), w = image.dim(1);
  const Tensor coords = sampling_coords(t, h, w, Precision::f64);
  const Tensor sample_inputs[2] = {image, coords};
  std::vector<Tensor> sample_grads = BilinearSampleOp().vjp(sample_inputs, output, cotangent);

  const std::size_t k = control.size(), nb = k + 3, np = h * w;
  std::vector<double> phi(np * nb);
  parallel_for(np, [&](std::size_t p) {
    basis(control.source, Point{static_cast<double>(p % w), static_cast<double>(p / w)}, phi.data() + p * nb);
  });
  const auto g_coord = sample_grads[1].data();  // (row, col) per pixel
  Eigen::MatrixXd g(nb, 2);
  for (std::size_t b = 0; b < nb; ++b) {
    g(b, 0) = pairwise_sum(0, np, [&](std::size_t p) { return phi[p * nb + b] * g_coord[2 * p + 1]; });
    g(b, 1) = pairwise_sum(0, np, [&](std::size_t p) { return phi[p * nb + b] * g_coord[2 * p]; });
  }
  // The bordered system is symmetric, so the adjoint solve reuses it.
  const Eigen::MatrixXd z = build_system(control, lambda_).lu.solve(g);
  std::vector<double> g_targets(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    g_targets[2 * i] = z(static_cast<Eigen::Index>(i), 0);
    g_targets[2 * i + 1] = z(static_cast<Eigen::Index>(i), 1);
  }
  return {Tensor(targets.dims(), std::move(g_targets), targets.precision()), std::move(sample_grads[0])};
}

}  // namespace ctnet
