#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "ctnet/tensor.hpp"

namespace ctnet {

inline constexpr std::size_t kJointCount = 18;

/// Joint names in channel order.
inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "nose",    "neck",   "r-shoulder", "r-elbow", "r-wrist", "l-shoulder", "l-elbow", "l-wrist", "r-hip",
    "r-knee",  "r-ankle", "l-hip",     "l-knee",  "l-ankle", "r-eye",      "l-eye",   "r-ear",   "l-ear"};

/// Index of a joint name, or nullopt.
std::optional<std::size_t> joint_index(std::string_view name);

struct Joint {
  double x = 0.0;  // column, pixels
  double y = 0.0;  // row, pixels
  double confidence = 1.0;
};

/// An 18-joint pose on a width x height image. Present joints satisfy
/// 0 <= x < width and 0 <= y < height; the constructor enforces it.
class KeypointSet {
 public:
  KeypointSet(std::size_t width, std::size_t height, std::array<std::optional<Joint>, kJointCount> joints);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  const std::optional<Joint>& joint(std::size_t j) const { return joints_.at(j); }
  const std::array<std::optional<Joint>, kJointCount>& joints() const noexcept { return joints_; }

  /// Pixel (row, col) a present joint rounds to: half-up, then clamped.
  std::array<std::size_t, 2> joint_pixel(std::size_t j) const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::array<std::optional<Joint>, kJointCount> joints_;
};

struct DistanceField {
  Tensor field;  // H x W x 18, values in [0, 1]
  std::array<bool, kJointCount> present{};
};

/// Binary joint maps: 1 at each present joint's rounded pixel.
Tensor confidence_map(const KeypointSet& keypoints);

/// Per-joint Euclidean distance to the joint pixel, divided by the image
/// diagonal. Missing joints give a constant-1 channel.
DistanceField distance_fields(const KeypointSet& keypoints);

}  // namespace ctnet
