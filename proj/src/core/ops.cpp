#include "ctnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {

std::size_t WindowSpec::output_extent(std::size_t extent) const {
  const std::size_t padded = extent + 2 * padding;
  if (size == 0 || stride == 0 || padded < size) return 0;
  return (padded - size) / stride + 1;
}

void WindowSpec::validate() const {
  if (size < 1) throw InvalidWindowError("window size must be >= 1");
  if (stride < 1) throw InvalidWindowError("window stride must be >= 1");
}

Tensor unfold(const Tensor& x, const WindowSpec& window) {
  require_rank(x, 3, "unfold");
  window.validate();
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t oh = window.output_extent(h), ow = window.output_extent(w);
  if (oh == 0 || ow == 0) {
    throw InvalidWindowError("window of size " + std::to_string(window.size) + " does not fit padded input " +
                             shape_string(x.dims()));
  }
  const std::size_t k = window.size;
  const std::size_t cols = k * k * c;
  std::vector<double> out(oh * ow * cols, 0.0);
  const auto src = x.data();
  parallel_for(oh * ow, [&](std::size_t cell) {
    const std::size_t oi = cell / ow, oj = cell % ow;
    double* row = out.data() + cell * cols;
    for (std::size_t di = 0; di < k; ++di) {
      const long r = static_cast<long>(oi * window.stride + di) - static_cast<long>(window.padding);
      if (r < 0 || r >= static_cast<long>(h)) continue;
      for (std::size_t dj = 0; dj < k; ++dj) {
        const long q = static_cast<long>(oj * window.stride + dj) - static_cast<long>(window.padding);
        if (q < 0 || q >= static_cast<long>(w)) continue;
        const double* px = src.data() + (static_cast<std::size_t>(r) * w + static_cast<std::size_t>(q)) * c;
        std::copy(px, px + c, row + (di * k + dj) * c);
      }
    }
  });
  return Tensor({oh * ow, cols}, std::move(out), x.precision());
}

Tensor softmax_rows(const Tensor& scores, double alpha) {
  require_rank(scores, 2, "softmax_rows");
  if (!(alpha > 0.0)) throw ValidationError("softmax_rows: alpha must be positive");
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  std::vector<double> out(n * m);
  const auto s = scores.data();
  parallel_for(n, [&](std::size_t i) {
    const double* row = s.data() + i * m;
    double* o = out.data() + i * m;
    const double top = alpha * *std::max_element(row, row + m);
    for (std::size_t j = 0; j < m; ++j) o[j] = std::exp(alpha * row[j] - top);
    const double total = pairwise_sum(0, m, [&](std::size_t j) { return o[j]; });
    for (std::size_t j = 0; j < m; ++j) o[j] /= total;
  });
  return Tensor(scores.dims(), std::move(out), scores.precision());
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "dot");
  return pairwise_dot(a.data().data(), b.data().data(), a.size());
}

namespace detail {
BilinearCorners bilinear_corners(double row, double col) {
  const double r0 = std::floor(row), c0 = std::floor(col);
  return {static_cast<long>(r0), static_cast<long>(c0), row - r0, col - c0};
}
}  // namespace detail

namespace {

void check_sampling_shapes(const Tensor& image, const Tensor& coords) {
  require_rank(image, 3, "bilinear_sample image");
  require_rank(coords, 3, "bilinear_sample coords");
  if (coords.dim(2) != 2) throw ShapeError("bilinear_sample: coords must have 2 components (row, col)");
}

}  // namespace

Tensor bilinear_sample(const Tensor& image, const Tensor& coords) {
  check_sampling_shapes(image, coords);
  const long h = static_cast<long>(image.dim(0)), w = static_cast<long>(image.dim(1));
  const std::size_t c = image.dim(2);
  const std::size_t oh = coords.dim(0), ow = coords.dim(1);
  std::vector<double> out(oh * ow * c, 0.0);
  const auto img = image.data();
  const auto crd = coords.data();
  parallel_for(oh * ow, [&](std::size_t p) {
    const auto [r0, c0, fr, fc] = detail::bilinear_corners(crd[2 * p], crd[2 * p + 1]);
    const double weights[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
    const long rows[4] = {r0, r0, r0 + 1, r0 + 1};
    const long cols[4] = {c0, c0 + 1, c0, c0 + 1};
    double* o = out.data() + p * c;
    for (int k = 0; k < 4; ++k) {
      if (rows[k] < 0 || rows[k] >= h || cols[k] < 0 || cols[k] >= w || weights[k] == 0.0) continue;
      const double* px = img.data() + (static_cast<std::size_t>(rows[k]) * w + cols[k]) * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] += weights[k] * px[ch];
    }
  });
  return Tensor({oh, ow, c}, std::move(out), common_precision({&image, &coords}));
}

SoftmaxRowsOp::SoftmaxRowsOp(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0)) throw ValidationError("softmax_rows: alpha must be positive");
}

Tensor SoftmaxRowsOp::forward(std::span<const Tensor> inputs) const { return softmax_rows(inputs[0], alpha_); }

std::vector<Tensor> SoftmaxRowsOp::vjp(std::span<const Tensor> inputs, const Tensor& output,
                                       const Tensor& cotangent) const {
  const std::size_t n = output.dim(0), m = output.dim(1);
  std::vector<double> g(n * m);
  parallel_for(n, [&](std::size_t i) {
    const double* p = output.data().data() + i * m;
    const double* ct = cotangent.data().data() + i * m;
    const double inner = pairwise_dot(p, ct, m);
    for (std::size_t j = 0; j < m; ++j) g[i * m + j] = alpha_ * p[j] * (ct[j] - inner);
  });
  return {Tensor(inputs[0].dims(), std::move(g), inputs[0].precision())};
}

Tensor BilinearSampleOp::forward(std::span<const Tensor> inputs) const {
  return bilinear_sample(inputs[0], inputs[1]);
}

std::vector<Tensor> BilinearSampleOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                          const Tensor& cotangent) const {
  const Tensor& image = inputs[0];
  const Tensor& coords = inputs[1];
  check_sampling_shapes(image, coords);
  const long h = static_cast<long>(image.dim(0)), w = static_cast<long>(image.dim(1));
  const std::size_t c = image.dim(2);
  const std::size_t np = coords.dim(0) * coords.dim(1);
  const auto img = image.data();
  const auto crd = coords.data();
  const auto ct = cotangent.data();

  std::vector<double> g_img(image.size(), 0.0);
  std::vector<double> g_crd(coords.size(), 0.0);
  auto pixel = [&](long r, long q) -> const double* {
    if (r < 0 || r >= h || q < 0 || q >= w) return nullptr;
    return img.data() + (static_cast<std::size_t>(r) * w + q) * c;
  };
  parallel_for(np, [&](std::size_t p) {
    const auto [r0, c0, fr, fc] = detail::bilinear_corners(crd[2 * p], crd[2 * p + 1]);
    const double* v00 = pixel(r0, c0);
    const double* v01 = pixel(r0, c0 + 1);
    const double* v10 = pixel(r0 + 1, c0);
    const double* v11 = pixel(r0 + 1, c0 + 1);
    auto val = [](const double* v, std::size_t ch) { return v ? v[ch] : 0.0; };
    double gr = 0.0, gc = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double t = ct[p * c + ch];
      const double a = val(v00, ch), b = val(v01, ch), d = val(v10, ch), e = val(v11, ch);
      gr += t * ((1 - fc) * (d - a) + fc * (e - b));
      gc += t * ((1 - fr) * (b - a) + fr * (e - d));
    }
    g_crd[2 * p] = gr;
    g_crd[2 * p + 1] = gc;
  });
  // Scatter in fixed pixel order so the accumulation is deterministic.
  for (std::size_t p = 0; p < np; ++p) {
    const auto [r0, c0, fr, fc] = detail::bilinear_corners(crd[2 * p], crd[2 * p + 1]);
    const double weights[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
    const long rows[4] = {r0, r0, r0 + 1, r0 + 1};
    const long cols[4] = {c0, c0 + 1, c0, c0 + 1};
    for (int k = 0; k < 4; ++k) {
      if (rows[k] < 0 || rows[k] >= h || cols[k] < 0 || cols[k] >= w) continue;
      double* g = g_img.data() + (static_cast<std::size_t>(rows[k]) * w + cols[k]) * c;
      for (std::size_t ch = 0; ch < c; ++ch) g[ch] += weights[k] * ct[p * c + ch];
    }
  }
  return {Tensor(image.dims(), std::move(g_img), image.precision()),
          Tensor(coords.dims(), std::move(g_crd), coords.precision())};
}

}  // namespace ctnet
