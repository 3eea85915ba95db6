#pragma once

#include <cstddef>

#include "ctnet/tensor.hpp"

namespace ctnet {

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct SsimResult {
  double mean = 0.0;
  /// (H - 10) x (W - 10); entry (r, c) belongs to image pixel (r + 5, c + 5).
  Tensor map;
};

/// 0.299 R + 0.587 G + 0.114 B for H x W x 3; H x W x 1 and H x W pass through.
Tensor to_luma(const Tensor& image);

/// Gaussian-window SSIM (11 x 11, sigma 1.5, K1 0.01, K2 0.03, range 1) over
/// the valid interior.
SsimResult ssim(const Tensor& a, const Tensor& b);

/// Mean of the SSIM map over mask pixels whose window lies inside the image.
double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask);

/// exp(mean_i KL(p_i || mean_k p_k)), single split.
double inception_score(const Tensor& probs);

}  // namespace ctnet
