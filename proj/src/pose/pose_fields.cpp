#include "ctnet/pose_fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"

namespace ctnet {

std::optional<std::size_t> joint_index(std::string_view name) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (kJointNames[j] == name) return j;
  }
  return std::nullopt;
}

KeypointSet::KeypointSet(std::size_t width, std::size_t height,
                         std::array<std::optional<Joint>, kJointCount> joints)
    : width_(width), height_(height), joints_(joints) {
  if (width_ == 0 || height_ == 0) throw ValidationError("keypoint image size must be positive");
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (!joints_[j]) continue;
    const Joint& p = *joints_[j];
    const std::string where = "joint " + std::string(kJointNames[j]);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.confidence)) {
      throw ValidationError(where + ": non-finite value");
    }
    if (p.x < 0.0 || p.x >= static_cast<double>(width_)) throw ValidationError(where + ": x outside [0, width)");
    if (p.y < 0.0 || p.y >= static_cast<double>(height_)) throw ValidationError(where + ": y outside [0, height)");
    if (p.confidence < 0.0 || p.confidence > 1.0) throw ValidationError(where + ": confidence outside [0, 1]");
  }
}

std::array<std::size_t, 2> KeypointSet::joint_pixel(std::size_t j) const {
  const auto& p = joints_.at(j);
  if (!p) throw ValidationError("joint " + std::string(kJointNames[j]) + " is missing");
  auto snap = [](double v, std::size_t extent) {
    const double r = std::floor(v + 0.5);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(extent - 1)));
  };
  return {snap(p->y, height_), snap(p->x, width_)};
}

Tensor confidence_map(const KeypointSet& keypoints) {
  const std::size_t h = keypoints.height(), w = keypoints.width();
  std::vector<double> out(h * w * kJointCount, 0.0);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (!keypoints.joint(j)) continue;
    const auto [r, c] = keypoints.joint_pixel(j);
    out[(r * w + c) * kJointCount + j] = 1.0;
  }
  return Tensor({h, w, kJointCount}, std::move(out));
}

DistanceField distance_fields(const KeypointSet& keypoints) {
  const std::size_t h = keypoints.height(), w = keypoints.width();
  const double diagonal = std::sqrt(static_cast<double>(w * w + h * h));
  std::vector<double> out(h * w * kJointCount, 1.0);
  DistanceField result;
  parallel_for(kJointCount, [&](std::size_t j) {
    if (!keypoints.joint(j)) return;
    const auto [jr, jc] = keypoints.joint_pixel(j);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double dr = static_cast<double>(r) - static_cast<double>(jr);
        const double dc = static_cast<double>(c) - static_cast<double>(jc);
        out[(r * w + c) * kJointCount + j] = std::sqrt(dr * dr + dc * dc) / diagonal;
      }
    }
  });
  for (std::size_t j = 0; j < kJointCount; ++j) result.present[j] = keypoints.joint(j).has_value();
  result.field = Tensor({h, w, kJointCount}, std::move(out));
  return result;
}

}  // namespace ctnet
