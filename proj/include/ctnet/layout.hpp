#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ctnet/correspondence.hpp"
#include "ctnet/tape.hpp"
#include "ctnet/tensor.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {

inline constexpr std::size_t kLabelCount = 10;

enum Label : std::uint8_t {
  kBackground = 0,
  kHead = 1,
  kUpperClothes = 2,
  kLowerClothes = 3,
  kLeftArm = 4,
  kRightArm = 5,
  kLeftLeg = 6,
  kRightLeg = 7,
  kLeftShoe = 8,
  kRightShoe = 9,
};

struct LabelPalette {
  static constexpr std::array<std::string_view, kLabelCount> names = {
      "background", "head",     "upper-clothes", "lower-clothes", "left-arm",
      "right-arm",  "left-leg", "right-leg",     "left-shoe",     "right-shoe"};

  static constexpr bool is_clothes(std::uint8_t l) { return l == kUpperClothes || l == kLowerClothes; }
  static constexpr bool is_limb(std::uint8_t l) { return l >= kLeftArm && l <= kRightLeg; }
  static constexpr bool is_preserved(std::uint8_t l) { return l == kHead || l == kLeftShoe || l == kRightShoe; }
};

/// H x W map of palette labels.
class SegmentationMap {
 public:
  SegmentationMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels);
  static SegmentationMap filled(std::size_t height, std::size_t width, std::uint8_t label);
  /// From an H x W tensor of exact integer labels.
  static SegmentationMap from_tensor(const Tensor& t);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return labels_[r * width_ + c]; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  Tensor to_tensor() const;

  friend bool operator==(const SegmentationMap&, const SegmentationMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> labels_;
};

Tensor one_hot_encode(const SegmentationMap& s);

/// Per-pixel argmax over H x W x 10 scores, ties to the lowest label.
SegmentationMap argmax_labels(const Tensor& scores);

/// Dense-warped one-hot layout with the preserved channels removed. Maps at
/// the matrix's source grid are warped directly; full-resolution maps are
/// warped by pixel blocks.
Tensor warp_layout_scores(const CorrespondenceMatrix& m, const SegmentationMap& s, double alpha = kDefaultAlpha);
SegmentationMap warp_layout(const CorrespondenceMatrix& m, const SegmentationMap& s, double alpha = kDefaultAlpha);

/// Keeps only limb and clothes labels; the stand-in when no layout
/// prediction is supplied.
SegmentationMap default_layout_prediction(const SegmentationMap& warped);

/// pred with target's preserved labels written over it.
SegmentationMap merge_layout(const SegmentationMap& pred, const SegmentationMap& target_preserved);

/// H x W binary mask of clothes labels.
Tensor clothes_mask(const SegmentationMap& s);
/// H x W binary mask of labels that are not background.
Tensor person_mask(const SegmentationMap& s);

/// Mean over pixels of -log softmax(logits)[truth].
double cross_entropy_loss(const Tensor& logits, const SegmentationMap& truth);

/// Input: logits (H x W x 10).
class CrossEntropyOp final : public Operation {
 public:
  explicit CrossEntropyOp(SegmentationMap truth);
  std::string_view name() const override { return "cross_entropy"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;

 private:
  SegmentationMap truth_;
};

}  // namespace ctnet
