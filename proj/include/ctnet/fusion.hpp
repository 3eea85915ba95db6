#pragma once

#include <cstddef>

#include "ctnet/layout.hpp"
#include "ctnet/tape.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

/// H x W soft mask, clamped into [0, 1] at construction.
class AttentionMask {
 public:
  explicit AttentionMask(const Tensor& values);
  static AttentionMask constant(std::size_t height, std::size_t width, double value);

  const Tensor& values() const noexcept { return values_; }
  std::size_t height() const { return values_.dim(0); }
  std::size_t width() const { return values_.dim(1); }

 private:
  Tensor values_;
};

/// warped (H x W x C) times a binary H x W mask, per channel.
Tensor masked_clothes(const Tensor& warped, const Tensor& clothing_mask);

/// Keeps body pixels labelled preserved or limb; zeroes clothes and background.
Tensor extract_nontarget(const Tensor& body, const SegmentationMap& layout);

/// tps * M + gen * (1 - M), with M broadcast over channels.
Tensor fuse_attention(const Tensor& tps, const Tensor& gen, const AttentionMask& mask);

/// Mean over pixels of |1 - M|.
double attention_regularizer(const AttentionMask& mask);

/// Inputs: tps (H x W x C), gen (H x W x C), mask (H x W). The mask is used
/// as given, without clamping.
class FuseAttentionOp final : public Operation {
 public:
  std::string_view name() const override { return "fuse_attention"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;
};

/// Input: mask (H x W).
class AttentionRegularizerOp final : public Operation {
 public:
  std::string_view name() const override { return "attention_regularizer"; }
  Tensor forward(std::span<const Tensor> inputs) const override;
  std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                          const Tensor& cotangent) const override;
};

}  // namespace ctnet
