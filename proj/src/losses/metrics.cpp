#include "ctnet/metrics.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr std::size_t kHalf = kSsimWindow / 2;

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double x = static_cast<double>(i) - static_cast<double>(kHalf);
    taps[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid separable Gaussian filter of f(a, b) per pixel.
template <class Fn>
std::vector<double> filter(std::size_t h, std::size_t w, const Fn& value) {
  static const std::array<double, kSsimWindow> taps = gaussian_taps();
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow);
  parallel_for(h, [&](std::size_t r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < kSsimWindow; ++t) s += taps[t] * value(r * w + c + t);
      rows[r * ow + c] = s;
    }
  });
  std::vector<double> out(oh * ow);
  parallel_for(oh, [&](std::size_t r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < kSsimWindow; ++t) s += taps[t] * rows[(r + t) * ow + c];
      out[r * ow + c] = s;
    }
  });
  return out;
}

}  // namespace

Tensor to_luma(const Tensor& image) {
  if (image.rank() == 2) return image;
  require_rank(image, 3, "to_luma");
  if (image.dim(2) == 1) return image.reshaped({image.dim(0), image.dim(1)});
  if (image.dim(2) != 3) throw ShapeError("to_luma: expected 1 or 3 channels, got " + shape_string(image.dims()));
  const std::size_t n = image.dim(0) * image.dim(1);
  const auto x = image.data();
  std::vector<double> out(n);
  for (std::size_t p = 0; p < n; ++p) out[p] = 0.299 * x[3 * p] + 0.587 * x[3 * p + 1] + 0.114 * x[3 * p + 2];
  return Tensor({image.dim(0), image.dim(1)}, std::move(out), image.precision());
}

SsimResult ssim(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "ssim");
  const Tensor la = to_luma(a), lb = to_luma(b);
  const std::size_t h = la.dim(0), w = la.dim(1);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim: image " + shape_string(la.dims()) + " is smaller than the 11x11 window");
  }
  const auto x = la.data(), y = lb.data();
  const auto mx = filter(h, w, [&](std::size_t i) { return x[i]; });
  const auto my = filter(h, w, [&](std::size_t i) { return y[i]; });
  const auto xx = filter(h, w, [&](std::size_t i) { return x[i] * x[i]; });
  const auto yy = filter(h, w, [&](std::size_t i) { return y[i] * y[i]; });
  const auto xy = filter(h, w, [&](std::size_t i) { return x[i] * y[i]; });
  std::vector<double> map(mx.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double vx = xx[i] - mx[i] * mx[i];
    const double vy = yy[i] - my[i] * my[i];
    const double cov = xy[i] - mx[i] * my[i];
    map[i] = ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  SsimResult r;
  r.mean = pairwise_mean(map);
  r.map = Tensor({h - kSsimWindow + 1, w - kSsimWindow + 1}, std::move(map));
  return r;
}

double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask) {
  const SsimResult r = ssim(a, b);
  require_rank(mask, 2, "masked_ssim mask");
  const std::size_t h = a.dim(0), w = a.dim(1);
  if (mask.dim(0) != h || mask.dim(1) != w) {
    throw ShapeError("masked_ssim: mask " + shape_string(mask.dims()) + " does not match the image");
  }
  const std::size_t oh = r.map.dim(0), ow = r.map.dim(1);
  std::vector<double> picked;
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      if (mask.at(i + kHalf, j + kHalf) != 0.0) picked.push_back(r.map.at(i, j));
    }
  }
  if (picked.empty()) throw ValidationError("masked_ssim: mask selects no pixel with a full SSIM window");
  return pairwise_mean(picked);
}

double inception_score(const Tensor& probs) {
  require_rank(probs, 2, "inception_score");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  const auto p = probs.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      if (p[i * k + c] < 0.0) throw ValidationError("inception_score: row " + std::to_string(i) + " has a negative entry");
    }
    const double total = pairwise_sum(0, k, [&](std::size_t c) { return p[i * k + c]; });
    if (std::abs(total - 1.0) > 1e-5) {
      throw ValidationError("inception_score: row " + std::to_string(i) + " sums to " + std::to_string(total));
    }
  }
  std::vector<double> marginal(k);
  for (std::size_t c = 0; c < k; ++c) {
    marginal[c] = pairwise_sum(0, n, [&](std::size_t i) { return p[i * k + c]; }) / static_cast<double>(n);
  }
  const double mean_kl = pairwise_sum(0, n, [&](std::size_t i) {
                           return pairwise_sum(0, k, [&](std::size_t c) {
                             const double v = p[i * k + c];
                             return v > 0.0 ? v * std::log(v / marginal[c]) : 0.0;
                           });
                         }) /
                         static_cast<double>(n);
  return std::exp(mean_kl);
}

}  // namespace ctnet
