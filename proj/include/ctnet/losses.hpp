#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "ctnet/tape.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

/// Feature levels phi_1..phi_N (each h x w x C) with per-level weights.
struct FeaturePyramid {
  std::vector<Tensor> levels;
  std::vector<double> weights;

  /// Weights 1/N each.
  static FeaturePyramid uniform(std::vector<Tensor> levels);
  void validate() const;
};

struct LossWeights {
  double l1 = 10.0;          // alpha1
  double tps = 10.0;         // alpha2
  double layout = 10.0;      // alpha3
  double perceptual = 1.0;   // alpha4
  double style = 1.0;        // alpha5
  double contextual = 1.0;   // alpha6
  double adversarial = 10.0; // alpha7
  double reg = 10.0;         // alpha8

  std::array<double, 8> as_array() const { return {l1, tps, layout, perceptual, style, contextual, adversarial, reg}; }
};

inline constexpr std::array<std::string_view, 8> kLossNames = {"l1",    "tps",        "layout", "perceptual",
                                                               "style", "contextual", "adv",    "reg"};

struct LossComponents {
  double l1 = 0.0;
  double tps = 0.0;
  double layout = 0.0;
  double perceptual = 0.0;
  double style = 0.0;
  double contextual = 0.0;
  double adversarial = 0.0;
  double reg = 0.0;

  std::array<double, 8> as_array() const { return {l1, tps, layout, perceptual, style, contextual, adversarial, reg}; }
};

struct TotalLoss {
  double total = 0.0;
  /// alpha_k * L_k in kLossNames order.
  std::array<double, 8> weighted{};
};

/// sum_j lambda_j * sqrt(mean((a_j - b_j)^2)).
double perceptual_loss(const FeaturePyramid& a, const FeaturePyramid& b);

/// G(c, c') = (1 / (h w)) sum_pixels f_c f_c'.
Tensor gram_matrix(const Tensor& f);

/// sum_j |G(a_j) - G(b_j)|_F.
double style_loss(const FeaturePyramid& a, const FeaturePyramid& b);

inline constexpr double kContextualBandwidth = 0.5;

/// Contextual loss between feature sets x (N x D) and y (M x D).
///
/// Both sets are centred by y's mean; d_ij = 1 - cos(x_i, y_j) with 1e-12
/// guarding the cosine denominator; d~_ij = d_ij / (min_k d_ik + 1e-5);
/// w_ij = exp((1 - d~_ij) / h), normalised over j; the loss is
/// -log(mean_j max_i A_ij).
double contextual_loss(const Tensor& x, const Tensor& y, double h = kContextualBandwidth);

/// mean log(max(real, eps)) + mean log(max(1 - fake, eps)), eps = 1e-7.
double adversarial_loss(const Tensor& real_scores, const Tensor& fake_scores);

/// Mean absolute difference.
double l1_loss(const Tensor& a, const Tensor& b);

/// Throws NumericalError naming the first non-finite component.
TotalLoss total_loss(const LossComponents& components, const LossWeights& weights = {});

/// Inputs: a_1..a_N, b_1..b_N.
class PerceptualLossOp final : public Operation {
 public:
  explicit PerceptualLossOp(std::vector<double> level_weights);
  std::string_view name() const override { return "perceptual_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  std::vector<double> weights_;
};

/// Inputs: a_1..a_N, b_1..b_N.
class StyleLossOp final : public Operation {
 public:
  explicit StyleLossOp(std::size_t levels);
  std::string_view name() const override { return "style_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  std::size_t levels_;
};

/// Inputs: x (N x D), y (M x D).
class ContextualLossOp final : public Operation {
 public:
  explicit ContextualLossOp(double h = kContextualBandwidth);
  std::string_view name() const override { return "contextual_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  double h_;
};

/// Inputs: real scores, fake scores.
class AdversarialLossOp final : public Operation {
 public:
  std::string_view name() const override { return "adversarial_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;
};

/// Inputs: a, b.
class L1LossOp final : public Operation {
 public:
  std::string_view name() const override { return "l1_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;
};

/// Input: the 8 components as a {8} tensor in kLossNames order.
class TotalLossOp final : public Operation {
 public:
  explicit TotalLossOp(LossWeights weights = {});
  std::string_view name() const override { return "total_loss"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  LossWeights weights_;
};

}  // namespace ctnet
