#include "ctnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

constexpr double kAdversarialEpsilon = 1e-7;

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_levels(std::span<const Tensor> inputs, std::size_t levels, const char* what) {
  if (levels == 0 || inputs.size() != 2 * levels) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(2 * levels) + " inputs, got " +
                          std::to_string(inputs.size()));
  }
  for (std::size_t j = 0; j < levels; ++j) {
    require_rank(inputs[j], 3, what);
    require_same_dims(inputs[j], inputs[levels + j], what);
  }
}

double rms_difference(const Tensor& a, const Tensor& b) {
  const auto x = a.data(), y = b.data();
  const double sq = pairwise_sum(0, x.size(), [&](std::size_t i) { return (x[i] - y[i]) * (x[i] - y[i]); });
  return std::sqrt(sq / static_cast<double>(x.size()));
}

std::vector<double> gram_values(const Tensor& f) {
  const std::size_t p = f.dim(0) * f.dim(1), c = f.dim(2);
  const double* x = f.data().data();
  std::vector<double> g(c * c);
  parallel_for(c, [&](std::size_t a) {
    for (std::size_t b = a; b < c; ++b) {
      const double v = pairwise_sum(0, p, [&](std::size_t i) { return x[i * c + a] * x[i * c + b]; }) /
                       static_cast<double>(p);
      g[a * c + b] = v;
      g[b * c + a] = v;
    }
  });
  return g;
}

// Gram difference of one level and its Frobenius norm.
struct GramGap {
  std::vector<double> diff;
  double norm;
};

GramGap gram_gap(const Tensor& a, const Tensor& b) {
  if (a.dim(2) != b.dim(2)) {
    throw ShapeError("style_loss: channel counts differ (" + std::to_string(a.dim(2)) + " vs " +
                     std::to_string(b.dim(2)) + ")");
  }
  std::vector<double> ga = gram_values(a);
  const std::vector<double> gb = gram_values(b);
  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= gb[i];
  const double norm = std::sqrt(pairwise_dot(ga.data(), ga.data(), ga.size()));
  return {std::move(ga), norm};
}

// d |G(f) - G(other)|_F / d f, scaled; sign is +1 for the first argument.
Tensor gram_gap_grad(const Tensor& f, const GramGap& gap, double scale) {
  const std::size_t p = f.dim(0) * f.dim(1), c = f.dim(2);
  std::vector<double> g(f.size(), 0.0);
  if (gap.norm > 0.0) {
    const double k = scale * 2.0 / (static_cast<double>(p) * gap.norm);
    const double* x = f.data().data();
    parallel_for(p, [&](std::size_t i) {
      for (std::size_t a = 0; a < c; ++a) {
        g[i * c + a] = k * pairwise_sum(0, c, [&](std::size_t b) { return x[i * c + b] * gap.diff[b * c + a]; });
      }
    });
  }
  return Tensor(f.dims(), std::move(g), f.precision());
}

void require_probabilities(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (v < 0.0 || v > 1.0) throw ValidationError(std::string(what) + ": score " + std::to_string(v) + " not in [0, 1]");
  }
}

double mean_log_clamped(const Tensor& t, bool complement) {
  const auto v = t.data();
  return pairwise_sum(0, v.size(), [&](std::size_t i) {
           return std::log(std::max(complement ? 1.0 - v[i] : v[i], kAdversarialEpsilon));
         }) /
         static_cast<double>(v.size());
}

}  // namespace

FeaturePyramid FeaturePyramid::uniform(std::vector<Tensor> levels) {
  FeaturePyramid p;
  p.weights.assign(levels.size(), levels.empty() ? 0.0 : 1.0 / static_cast<double>(levels.size()));
  p.levels = std::move(levels);
  return p;
}

void FeaturePyramid::validate() const {
  if (levels.empty()) throw ValidationError("feature pyramid needs at least one level");
  if (weights.size() != levels.size()) {
    throw ValidationError("feature pyramid has " + std::to_string(levels.size()) + " levels but " +
                          std::to_string(weights.size()) + " weights");
  }
  for (std::size_t j = 0; j < levels.size(); ++j) {
    require_rank(levels[j], 3, "feature pyramid level");
    if (!(weights[j] >= 0.0)) throw ValidationError("feature pyramid weight " + std::to_string(j) + " is negative");
  }
}

double perceptual_loss(const FeaturePyramid& a, const FeaturePyramid& b) {
  a.validate();
  b.validate();
  if (a.levels.size() != b.levels.size()) throw ValidationError("perceptual_loss: pyramids differ in depth");
  std::vector<Tensor> inputs = a.levels;
  inputs.insert(inputs.end(), b.levels.begin(), b.levels.end());
  return PerceptualLossOp(a.weights).forward(inputs).item();
}

Tensor gram_matrix(const Tensor& f) {
  require_rank(f, 3, "gram_matrix");
  return Tensor({f.dim(2), f.dim(2)}, gram_values(f), f.precision());
}

double style_loss(const FeaturePyramid& a, const FeaturePyramid& b) {
  a.validate();
  b.validate();
  if (a.levels.size() != b.levels.size()) throw ValidationError("style_loss: pyramids differ in depth");
  std::vector<Tensor> inputs = a.levels;
  inputs.insert(inputs.end(), b.levels.begin(), b.levels.end());
  return StyleLossOp(a.levels.size()).forward(inputs).item();
}

double adversarial_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  require_probabilities(real_scores, "adversarial_loss");
  require_probabilities(fake_scores, "adversarial_loss");
  return mean_log_clamped(real_scores, false) + mean_log_clamped(fake_scores, true);
}

double l1_loss(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "l1_loss");
  const auto x = a.data(), y = b.data();
  return pairwise_sum(0, x.size(), [&](std::size_t i) { return std::abs(x[i] - y[i]); }) /
         static_cast<double>(x.size());
}

TotalLoss total_loss(const LossComponents& components, const LossWeights& weights) {
  const auto c = components.as_array();
  const auto w = weights.as_array();
  TotalLoss out;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (!std::isfinite(c[k])) throw NumericalError("total_loss: component " + std::string(kLossNames[k]) + " is not finite");
    if (!(w[k] >= 0.0)) throw ValidationError("total_loss: weight for " + std::string(kLossNames[k]) + " is negative");
    out.weighted[k] = w[k] * c[k];
    out.total += out.weighted[k];
  }
  return out;
}

PerceptualLossOp::PerceptualLossOp(std::vector<double> level_weights) : weights_(std::move(level_weights)) {}

Tensor PerceptualLossOp::forward(std::span<const Tensor> inputs) const {
  const std::size_t n = weights_.size();
  require_levels(inputs, n, "perceptual_loss");
  std::vector<double> terms(n);
  for (std::size_t j = 0; j < n; ++j) terms[j] = weights_[j] * rms_difference(inputs[j], inputs[n + j]);
  return Tensor::scalar(pairwise_sum(terms));
}

std::vector<Tensor> PerceptualLossOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                          const Tensor& cotangent) const {
  const std::size_t n = weights_.size();
  std::vector<Tensor> grads(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor& a = inputs[j];
    const Tensor& b = inputs[n + j];
    const double rms = rms_difference(a, b);
    const double k = rms > 0.0 ? cotangent.item() * weights_[j] / (static_cast<double>(a.size()) * rms) : 0.0;
    const auto x = a.data(), y = b.data();
    std::vector<double> ga(a.size()), gb(a.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] = k * (x[i] - y[i]);
      gb[i] = -ga[i];
    }
    grads[j] = Tensor(a.dims(), std::move(ga), a.precision());
    grads[n + j] = Tensor(b.dims(), std::move(gb), b.precision());
  }
  return grads;
}

StyleLossOp::StyleLossOp(std::size_t levels) : levels_(levels) {
  if (levels == 0) throw ValidationError("style_loss needs at least one level");
}

Tensor StyleLossOp::forward(std::span<const Tensor> inputs) const {
  if (inputs.size() != 2 * levels_) throw ValidationError("style_loss: wrong number of inputs");
  std::vector<double> terms(levels_);
  for (std::size_t j = 0; j < levels_; ++j) {
    require_rank(inputs[j], 3, "style_loss");
    require_rank(inputs[levels_ + j], 3, "style_loss");
    terms[j] = gram_gap(inputs[j], inputs[levels_ + j]).norm;
  }
  return Tensor::scalar(pairwise_sum(terms));
}

std::vector<Tensor> StyleLossOp::vjp(std::span<const Tensor> inputs, const Tensor&, const Tensor& cotangent) const {
  std::vector<Tensor> grads(2 * levels_);
  for (std::size_t j = 0; j < levels_; ++j) {
    const GramGap gap = gram_gap(inputs[j], inputs[levels_ + j]);
    grads[j] = gram_gap_grad(inputs[j], gap, cotangent.item());
    grads[levels_ + j] = gram_gap_grad(inputs[levels_ + j], gap, -cotangent.item());
  }
  return grads;
}

Tensor AdversarialLossOp::forward(std::span<const Tensor> inputs) const {
  return Tensor::scalar(adversarial_loss(inputs[0], inputs[1]));
}

std::vector<Tensor> AdversarialLossOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                           const Tensor& cotangent) const {
  const double ct = cotangent.item();
  auto grad = [&](const Tensor& t, bool complement) {
    const auto v = t.data();
    const double k = ct / static_cast<double>(v.size());
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double arg = complement ? 1.0 - v[i] : v[i];
      g[i] = arg > kAdversarialEpsilon ? (complement ? -k / arg : k / arg) : 0.0;
    }
    return Tensor(t.dims(), std::move(g), t.precision());
  };
  return {grad(inputs[0], false), grad(inputs[1], true)};
}

Tensor L1LossOp::forward(std::span<const Tensor> inputs) const {
  return Tensor::scalar(l1_loss(inputs[0], inputs[1]), common_precision({&inputs[0], &inputs[1]}));
}

std::vector<Tensor> L1LossOp::vjp(std::span<const Tensor> inputs, const Tensor&, const Tensor& cotangent) const {
  const auto x = inputs[0].data(), y = inputs[1].data();
  const double k = cotangent.item() / static_cast<double>(x.size());
  std::vector<double> ga(x.size()), gb(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ga[i] = k * sign_or_zero(x[i] - y[i]);
    gb[i] = -ga[i];
  }
  return {Tensor(inputs[0].dims(), std::move(ga), inputs[0].precision()),
          Tensor(inputs[1].dims(), std::move(gb), inputs[1].precision())};
}

TotalLossOp::TotalLossOp(LossWeights weights) : weights_(weights) {}

Tensor TotalLossOp::forward(std::span<const Tensor> inputs) const {
  if (inputs[0].size() != 8) throw ShapeError("total_loss expects 8 components");
  const auto v = inputs[0].data();
  const LossComponents c{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  return Tensor::scalar(total_loss(c, weights_).total, inputs[0].precision());
}

std::vector<Tensor> TotalLossOp::vjp(std::span<const Tensor> inputs, const Tensor&, const Tensor& cotangent) const {
  const auto w = weights_.as_array();
  std::vector<double> g(w.begin(), w.end());
  for (double& x : g) x *= cotangent.item();
  return {Tensor(inputs[0].dims(), std::move(g), inputs[0].precision())};
}

}  // namespace ctnet
