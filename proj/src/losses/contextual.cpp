#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/losses.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

constexpr double kRelativeEpsilon = 1e-5;
constexpr double kCosineEpsilon = 1e-12;

// Every intermediate of the forward pass, kept for the backward pass.
struct Context {
  std::size_t n = 0, m = 0, d = 0;
  std::vector<double> a, b;          // centred x and y
  std::vector<double> na, nb;        // their norms
  std::vector<double> dist;          // n x m cosine distances
  std::vector<std::size_t> nearest;  // argmin_k dist(i, k)
  std::vector<double> affinity;      // n x m, rows normalised
  std::vector<std::size_t> best;     // argmax_i affinity(i, j)
  double mean_best = 0.0;
};

Context evaluate(const Tensor& x, const Tensor& y, double h) {
  require_rank(x, 2, "contextual_loss");
  require_rank(y, 2, "contextual_loss");
  if (x.dim(1) != y.dim(1)) {
    throw ShapeError("contextual_loss: feature lengths differ (" + std::to_string(x.dim(1)) + " vs " +
                     std::to_string(y.dim(1)) + ")");
  }
  if (!(h > 0.0)) throw ValidationError("contextual_loss: bandwidth must be positive");
  Context c;
  c.n = x.dim(0);
  c.m = y.dim(0);
  c.d = x.dim(1);
  const auto xs = x.data(), ys = y.data();
  std::vector<double> mu(c.d);
  for (std::size_t k = 0; k < c.d; ++k) {
    mu[k] = pairwise_sum(0, c.m, [&](std::size_t j) { return ys[j * c.d + k]; }) / static_cast<double>(c.m);
  }
  auto centre = [&](std::span<const double> src, std::size_t rows, std::vector<double>& out, std::vector<double>& norms) {
    out.resize(rows * c.d);
    norms.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < c.d; ++k) out[i * c.d + k] = src[i * c.d + k] - mu[k];
      norms[i] = std::sqrt(pairwise_dot(&out[i * c.d], &out[i * c.d], c.d));
    }
  };
  centre(xs, c.n, c.a, c.na);
  centre(ys, c.m, c.b, c.nb);

  c.dist.resize(c.n * c.m);
  c.nearest.resize(c.n);
  c.affinity.resize(c.n * c.m);
  parallel_for(c.n, [&](std::size_t i) {
    double* row = &c.dist[i * c.m];
    for (std::size_t j = 0; j < c.m; ++j) {
      const double dot = pairwise_dot(&c.a[i * c.d], &c.b[j * c.d], c.d);
      row[j] = 1.0 - dot / (c.na[i] * c.nb[j] + kCosineEpsilon);
    }
    std::size_t k = 0;
    for (std::size_t j = 1; j < c.m; ++j) {
      if (row[j] < row[k]) k = j;
    }
    c.nearest[i] = k;
    const double denom = row[k] + kRelativeEpsilon;
    double* aff = &c.affinity[i * c.m];
    double top = -INFINITY;
    for (std::size_t j = 0; j < c.m; ++j) {
      aff[j] = (1.0 - row[j] / denom) / h;
      top = std::max(top, aff[j]);
    }
    for (std::size_t j = 0; j < c.m; ++j) aff[j] = std::exp(aff[j] - top);
    const double total = pairwise_sum(0, c.m, [&](std::size_t j) { return aff[j]; });
    for (std::size_t j = 0; j < c.m; ++j) aff[j] /= total;
  });

  c.best.resize(c.m);
  for (std::size_t j = 0; j < c.m; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.n; ++i) {
      if (c.affinity[i * c.m + j] > c.affinity[best * c.m + j]) best = i;
    }
    c.best[j] = best;
  }
  c.mean_best = pairwise_sum(0, c.m, [&](std::size_t j) { return c.affinity[c.best[j] * c.m + j]; }) /
                static_cast<double>(c.m);
  return c;
}

}  // namespace

double contextual_loss(const Tensor& x, const Tensor& y, double h) { return -std::log(evaluate(x, y, h).mean_best); }

ContextualLossOp::ContextualLossOp(double h) : h_(h) {
  if (!(h > 0.0)) throw ValidationError("contextual_loss: bandwidth must be positive");
}

Tensor ContextualLossOp::forward(std::span<const Tensor> inputs) const {
  return Tensor::scalar(contextual_loss(inputs[0], inputs[1], h_), common_precision({&inputs[0], &inputs[1]}));
}

std::vector<Tensor> ContextualLossOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                          const Tensor& cotangent) const {
  const Context c = evaluate(inputs[0], inputs[1], h_);
  const std::size_t n = c.n, m = c.m, d = c.d;

  // Through -log(mean), the column max and the row softmax.
  std::vector<double> g_aff(n * m, 0.0);
  const double g_best = -cotangent.item() / (static_cast<double>(m) * c.mean_best);
  for (std::size_t j = 0; j < m; ++j) g_aff[c.best[j] * m + j] += g_best;

  std::vector<double> g_dist(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* aff = &c.affinity[i * m];
    const double* ga = &g_aff[i * m];
    const double inner = pairwise_dot(aff, ga, m);
    const double denom = c.dist[i * m + c.nearest[i]] + kRelativeEpsilon;
    double g_denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double g_rel = -aff[j] * (ga[j] - inner) / h_;
      g_dist[i * m + j] += g_rel / denom;
      g_denom -= g_rel * c.dist[i * m + j] / (denom * denom);
    }
    g_dist[i * m + c.nearest[i]] += g_denom;
  }

  // Through the cosine distances.
  std::vector<double> g_a(n * d, 0.0), g_b(m * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = &c.a[i * d];
    for (std::size_t j = 0; j < m; ++j) {
      const double gc = -g_dist[i * m + j];
      if (gc == 0.0) continue;
      const double* bj = &c.b[j * d];
      const double q = c.na[i] * c.nb[j] + kCosineEpsilon;
      const double dot = pairwise_dot(ai, bj, d);
      const double ka = c.na[i] > 0.0 ? dot * c.nb[j] / (q * q * c.na[i]) : 0.0;
      const double kb = c.nb[j] > 0.0 ? dot * c.na[i] / (q * q * c.nb[j]) : 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        g_a[i * d + k] += gc * (bj[k] / q - ka * ai[k]);
        g_b[j * d + k] += gc * (ai[k] / q - kb * bj[k]);
      }
    }
  }

  // Centring by y's mean feeds back into every row of y.
  std::vector<double> g_y = g_b;
  for (std::size_t k = 0; k < d; ++k) {
    const double total = pairwise_sum(0, n, [&](std::size_t i) { return g_a[i * d + k]; }) +
                         pairwise_sum(0, m, [&](std::size_t j) { return g_b[j * d + k]; });
    for (std::size_t j = 0; j < m; ++j) g_y[j * d + k] -= total / static_cast<double>(m);
  }
  return {Tensor(inputs[0].dims(), std::move(g_a), inputs[0].precision()),
          Tensor(inputs[1].dims(), std::move(g_y), inputs[1].precision())};
}

}  // namespace ctnet
