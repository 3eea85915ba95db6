#include <cmath>
#include <string>
#include <vector>

#include "ctnet/correspondence.hpp"
#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

constexpr double kCorrelationEpsilon = 1e-8;

// Rows of x minus their mean over positions, plus each centred row's norm.
struct Centred {
  std::vector<double> rows;
  std::vector<double> norms;
};

Centred centre_rows(const Tensor& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto src = x.data();
  std::vector<double> mean(d);
  for (std::size_t k = 0; k < d; ++k) {
    mean[k] = pairwise_sum(0, n, [&](std::size_t i) { return src[i * d + k]; }) / static_cast<double>(n);
  }
  Centred c{std::vector<double>(n * d), std::vector<double>(n)};
  parallel_for(n, [&](std::size_t i) {
    double* row = c.rows.data() + i * d;
    for (std::size_t k = 0; k < d; ++k) row[k] = src[i * d + k] - mean[k];
    c.norms[i] = std::sqrt(pairwise_dot(row, row, d));
  });
  return c;
}

}  // namespace

std::array<double, 2> GridInfo::cell_center(std::size_t i, std::size_t j) const {
  auto centre = [&](std::size_t cell) {
    const double feature = static_cast<double>(cell * window.stride) - static_cast<double>(window.padding) +
                           0.5 * static_cast<double>(window.size - 1);
    return static_cast<double>(feature_stride) * feature + 0.5 * static_cast<double>(feature_stride - 1);
  };
  return {centre(i), centre(j)};
}

GridInfo grid_for(const FeatureMap& features, const WindowSpec& window) {
  require_rank(features.features, 3, "grid_for");
  GridInfo g;
  g.feature_h = features.features.dim(0);
  g.feature_w = features.features.dim(1);
  g.image_h = g.feature_h * kFeatureStride;
  g.image_w = g.feature_w * kFeatureStride;
  g.window = window;
  return g;
}

Tensor aggregate_features(const FeatureMap& features, const WindowSpec& window) {
  return unfold(features.features, window);
}

void CorrespondenceMatrix::validate() const {
  require_rank(scores, 2, "correspondence matrix");
  if (scores.dim(0) != rows.cells() || scores.dim(1) != cols.cells()) {
    throw ShapeError("correspondence matrix " + shape_string(scores.dims()) + " does not match grid metadata (" +
                     std::to_string(rows.cells()) + " x " + std::to_string(cols.cells()) + ")");
  }
}

Tensor correlation(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "correlation lhs");
  require_rank(b, 2, "correlation rhs");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("correlation: feature lengths differ (" + std::to_string(a.dim(1)) + " vs " +
                     std::to_string(b.dim(1)) + ")");
  }
  const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
  const Centred ca = centre_rows(a);
  const Centred cb = centre_rows(b);
  std::vector<double> out(na * nb);
  parallel_for(na, [&](std::size_t i) {
    const double* ai = ca.rows.data() + i * d;
    for (std::size_t j = 0; j < nb; ++j) {
      const double num = pairwise_dot(ai, cb.rows.data() + j * d, d);
      out[i * nb + j] = num / (ca.norms[i] * cb.norms[j] + kCorrelationEpsilon);
    }
  });
  return Tensor({na, nb}, std::move(out), common_precision({&a, &b}));
}

CorrespondenceMatrix correspondence_matrix(const Tensor& a, const Tensor& b, const GridInfo& rows,
                                           const GridInfo& cols) {
  CorrespondenceMatrix m{correlation(a, b), rows, cols};
  m.validate();
  return m;
}

}  // namespace ctnet
