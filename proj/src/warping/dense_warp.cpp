#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/ops.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {
namespace {

void check_warp_shapes(const Tensor& scores, const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(scores, 2, "dense_warp scores");
  require_rank(x, 3, "dense_warp input");
  if (x.dim(0) * x.dim(1) != scores.dim(1)) {
    throw ShapeError("dense_warp: input grid " + shape_string(x.dims()) + " does not match " +
                     std::to_string(scores.dim(1)) + " source cells");
  }
  if (out_h * out_w != scores.dim(0)) {
    throw ShapeError("dense_warp: output grid " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " does not match " + std::to_string(scores.dim(0)) + " target cells");
  }
}

Tensor weighted_rows(const Tensor& weights, const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const std::size_t nt = weights.dim(0), ns = weights.dim(1), c = x.dim(2);
  const double* p = weights.data().data();
  const double* src = x.data().data();
  std::vector<double> out(nt * c);
  parallel_for(nt, [&](std::size_t u) {
    const double* row = p + u * ns;
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[u * c + ch] = pairwise_sum(0, ns, [&](std::size_t v) { return row[v] * src[v * c + ch]; });
    }
  });
  return Tensor({out_h, out_w, c}, std::move(out), common_precision({&weights, &x}));
}

}  // namespace

Tensor dense_warp_scores(const Tensor& scores, const Tensor& x, std::size_t out_h, std::size_t out_w,
                         double alpha) {
  check_warp_shapes(scores, x, out_h, out_w);
  return weighted_rows(softmax_rows(scores, alpha), x, out_h, out_w);
}

Tensor dense_warp(const CorrespondenceMatrix& m, const Tensor& x, double alpha) {
  m.validate();
  require_rank(x, 3, "dense_warp input");
  if (x.dim(0) != m.cols.grid_h() || x.dim(1) != m.cols.grid_w()) {
    throw ShapeError("dense_warp: input " + shape_string(x.dims()) + " is not at the matrix source grid " +
                     std::to_string(m.cols.grid_h()) + "x" + std::to_string(m.cols.grid_w()));
  }
  return dense_warp_scores(m.scores, x, m.rows.grid_h(), m.rows.grid_w(), alpha);
}

Tensor space_to_depth(const Tensor& x, std::size_t block) {
  require_rank(x, 3, "space_to_depth");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (block == 0 || h % block != 0 || w % block != 0) {
    throw ShapeError("space_to_depth: " + shape_string(x.dims()) + " not divisible into blocks of " +
                     std::to_string(block));
  }
  const std::size_t gh = h / block, gw = w / block, depth = block * block * c;
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t q = 0; q < w; ++q) {
      const std::size_t cell = (r / block) * gw + q / block;
      const std::size_t offset = ((r % block) * block + q % block) * c;
      for (std::size_t ch = 0; ch < c; ++ch) out[cell * depth + offset + ch] = src[(r * w + q) * c + ch];
    }
  }
  return Tensor({gh, gw, depth}, std::move(out), x.precision());
}

Tensor depth_to_space(const Tensor& x, std::size_t block) {
  require_rank(x, 3, "depth_to_space");
  const std::size_t gh = x.dim(0), gw = x.dim(1), depth = x.dim(2);
  if (block == 0 || depth % (block * block) != 0) {
    throw ShapeError("depth_to_space: depth " + std::to_string(depth) + " not divisible by block area");
  }
  const std::size_t c = depth / (block * block), h = gh * block, w = gw * block;
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t q = 0; q < w; ++q) {
      const std::size_t cell = (r / block) * gw + q / block;
      const std::size_t offset = ((r % block) * block + q % block) * c;
      for (std::size_t ch = 0; ch < c; ++ch) out[(r * w + q) * c + ch] = src[cell * depth + offset + ch];
    }
  }
  return Tensor({h, w, c}, std::move(out), x.precision());
}

Tensor dense_warp_blocks(const CorrespondenceMatrix& m, const Tensor& image, double alpha) {
  m.validate();
  require_rank(image, 3, "dense_warp_blocks");
  const std::size_t gh = m.cols.grid_h(), gw = m.cols.grid_w();
  if (image.dim(0) % gh != 0 || image.dim(1) % gw != 0 || image.dim(0) / gh != image.dim(1) / gw) {
    throw ShapeError("dense_warp_blocks: image " + shape_string(image.dims()) + " does not tile the " +
                     std::to_string(gh) + "x" + std::to_string(gw) + " source grid");
  }
  const std::size_t block = image.dim(0) / gh;
  const Tensor packed = space_to_depth(image, block);
  return depth_to_space(dense_warp_scores(m.scores, packed, m.rows.grid_h(), m.rows.grid_w(), alpha), block);
}

DenseWarpOp::DenseWarpOp(std::size_t out_h, std::size_t out_w, double alpha)
    : out_h_(out_h), out_w_(out_w), alpha_(alpha) {
  if (!(alpha > 0.0)) throw ValidationError("dense_warp: alpha must be positive");
}

Tensor DenseWarpOp::forward(std::span<const Tensor> inputs) const {
  return dense_warp_scores(inputs[0], inputs[1], out_h_, out_w_, alpha_);
}

std::vector<Tensor> DenseWarpOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                     const Tensor& cotangent) const {
  const Tensor& scores = inputs[0];
  const Tensor& x = inputs[1];
  const std::size_t nt = scores.dim(0), ns = scores.dim(1), c = x.dim(2);
  const Tensor weights = softmax_rows(scores, alpha_);
  const double* p = weights.data().data();
  const double* src = x.data().data();
  const double* ct = cotangent.data().data();

  std::vector<double> g_scores(nt * ns);
  parallel_for(nt, [&](std::size_t u) {
    std::vector<double> g_p(ns);
    for (std::size_t v = 0; v < ns; ++v) g_p[v] = pairwise_dot(ct + u * c, src + v * c, c);
    const double inner = pairwise_dot(p + u * ns, g_p.data(), ns);
    for (std::size_t v = 0; v < ns; ++v) g_scores[u * ns + v] = alpha_ * p[u * ns + v] * (g_p[v] - inner);
  });

  std::vector<double> g_x(ns * c);
  parallel_for(ns, [&](std::size_t v) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      g_x[v * c + ch] = pairwise_sum(0, nt, [&](std::size_t u) { return p[u * ns + v] * ct[u * c + ch]; });
    }
  });
  return {Tensor(scores.dims(), std::move(g_scores), scores.precision()),
          Tensor(x.dims(), std::move(g_x), x.precision())};
}

}  // namespace ctnet
