#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "ctnet/ops.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

/// Pixels per feature cell produced by encode_features.
inline constexpr std::size_t kFeatureStride = 4;
inline constexpr std::size_t kFeatureChannels = 64;

struct FeatureMap {
  Tensor features;  // h x w x 64 with h = H/4, w = W/4
  std::string source;
  std::uint64_t seed = 0;
};

/// Fixed-weight two-stage encoder standing in for a trained extractor.
///
/// Stage 1: 3x3 window, stride 2, padding 1, 32 channels, activation
/// sin(omega * z + b) with omega = 0.6 * sqrt(H^2 + W^2). Stage 2: 3x3
/// window, stride 2, padding 1, 64 channels, tanh. Weights are uniform in
/// [-1, 1] * sqrt(3 / fan_in), biases uniform in [-pi, pi]. Stage s draws
/// from std::mt19937_64 seeded with seed + s * 0x9E3779B97F4A7C15, taking
/// the top 53 bits of each output as a fraction in [0, 1); stage-1 weights
/// are drawn output-major, then biases.
FeatureMap encode_features(const Tensor& inputs, std::uint64_t seed, std::string source = {});

/// Both encoder stage outputs: (H/2 x W/2 x 32, H/4 x W/4 x 64).
std::array<Tensor, 2> encoder_stages(const Tensor& inputs, std::uint64_t seed);

/// Row layout of one side of a correspondence matrix.
struct GridInfo {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t feature_h = 0;
  std::size_t feature_w = 0;
  std::size_t feature_stride = kFeatureStride;
  WindowSpec window;

  std::size_t grid_h() const { return window.output_extent(feature_h); }
  std::size_t grid_w() const { return window.output_extent(feature_w); }
  std::size_t cells() const { return grid_h() * grid_w(); }
  /// Pixel-frame (row, col) of the centre of grid cell (i, j).
  std::array<double, 2> cell_center(std::size_t i, std::size_t j) const;

  friend bool operator==(const GridInfo&, const GridInfo&) = default;
};

GridInfo grid_for(const FeatureMap& features, const WindowSpec& window);

/// Unfolds a feature map at the given window scale.
Tensor aggregate_features(const FeatureMap& features, const WindowSpec& window);

/// Rows index the target side, columns the source side.
struct CorrespondenceMatrix {
  Tensor scores;  // rows.cells() x cols.cells()
  GridInfo rows;
  GridInfo cols;

  void validate() const;
};

/// Mean-centred cosine correlation between aggregated columns:
/// (a_i - u_a) . (b_j - u_b) / (|a_i - u_a| |b_j - u_b| + 1e-8), where u_a and
/// u_b are the means over positions of each side.
Tensor correlation(const Tensor& a, const Tensor& b);

CorrespondenceMatrix correspondence_matrix(const Tensor& a, const Tensor& b, const GridInfo& rows,
                                           const GridInfo& cols);

}  // namespace ctnet
