#include "ctnet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

void require_mask_for(const Tensor& image, const Tensor& mask, const char* what) {
  require_rank(image, 3, what);
  require_rank(mask, 2, what);
  if (image.dim(0) != mask.dim(0) || image.dim(1) != mask.dim(1)) {
    throw ShapeError(std::string(what) + ": mask " + shape_string(mask.dims()) + " does not match image " +
                     shape_string(image.dims()));
  }
}

Tensor fuse(const Tensor& tps, const Tensor& gen, const Tensor& mask) {
  require_same_dims(tps, gen, "fuse_attention");
  require_mask_for(tps, mask, "fuse_attention");
  const std::size_t c = tps.dim(2);
  const auto a = tps.data(), b = gen.data(), m = mask.data();
  std::vector<double> out(tps.size());
  parallel_for(m.size(), [&](std::size_t p) {
    for (std::size_t k = 0; k < c; ++k) out[p * c + k] = a[p * c + k] * m[p] + b[p * c + k] * (1.0 - m[p]);
  });
  return Tensor(tps.dims(), std::move(out), common_precision({&tps, &gen, &mask}));
}

double mean_gap(const Tensor& mask) {
  const auto m = mask.data();
  return pairwise_sum(0, m.size(), [&](std::size_t i) { return std::abs(1.0 - m[i]); }) /
         static_cast<double>(m.size());
}

}  // namespace

AttentionMask::AttentionMask(const Tensor& values) {
  require_rank(values, 2, "attention mask");
  std::vector<double> v(values.data().begin(), values.data().end());
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  values_ = Tensor(values.dims(), std::move(v), values.precision());
}

AttentionMask AttentionMask::constant(std::size_t height, std::size_t width, double value) {
  return AttentionMask(Tensor::filled({height, width}, value));
}

Tensor masked_clothes(const Tensor& warped, const Tensor& clothing_mask) {
  require_mask_for(warped, clothing_mask, "masked_clothes");
  const auto m = clothing_mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] != 0.0 && m[i] != 1.0) {
      throw ValidationError("masked_clothes: mask value " + std::to_string(m[i]) + " at index " +
                            std::to_string(i) + " is not binary");
    }
  }
  const std::size_t c = warped.dim(2);
  const auto x = warped.data();
  std::vector<double> out(warped.size());
  for (std::size_t p = 0; p < m.size(); ++p) {
    for (std::size_t k = 0; k < c; ++k) out[p * c + k] = x[p * c + k] * m[p];
  }
  return Tensor(warped.dims(), std::move(out), warped.precision());
}

Tensor extract_nontarget(const Tensor& body, const SegmentationMap& layout) {
  require_rank(body, 3, "extract_nontarget");
  if (body.dim(0) != layout.height() || body.dim(1) != layout.width()) {
    throw ShapeError("extract_nontarget: body " + shape_string(body.dims()) + " does not match a " +
                     std::to_string(layout.height()) + "x" + std::to_string(layout.width()) + " layout");
  }
  const std::size_t c = body.dim(2);
  const auto x = body.data();
  std::vector<double> out(body.size(), 0.0);
  for (std::size_t p = 0; p < layout.labels().size(); ++p) {
    const std::uint8_t l = layout.labels()[p];
    if (!LabelPalette::is_preserved(l) && !LabelPalette::is_limb(l)) continue;
    for (std::size_t k = 0; k < c; ++k) out[p * c + k] = x[p * c + k];
  }
  return Tensor(body.dims(), std::move(out), body.precision());
}

Tensor fuse_attention(const Tensor& tps, const Tensor& gen, const AttentionMask& mask) {
  return fuse(tps, gen, mask.values());
}

double attention_regularizer(const AttentionMask& mask) { return mean_gap(mask.values()); }

Tensor FuseAttentionOp::forward(std::span<const Tensor> inputs) const { return fuse(inputs[0], inputs[1], inputs[2]); }

std::vector<Tensor> FuseAttentionOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                         const Tensor& cotangent) const {
  const Tensor& tps = inputs[0];
  const Tensor& gen = inputs[1];
  const Tensor& mask = inputs[2];
  const std::size_t c = tps.dim(2);
  const auto a = tps.data(), b = gen.data(), m = mask.data(), ct = cotangent.data();
  std::vector<double> g_tps(tps.size()), g_gen(gen.size()), g_mask(mask.size());
  parallel_for(m.size(), [&](std::size_t p) {
    for (std::size_t k = 0; k < c; ++k) {
      g_tps[p * c + k] = ct[p * c + k] * m[p];
      g_gen[p * c + k] = ct[p * c + k] * (1.0 - m[p]);
    }
    g_mask[p] = pairwise_sum(0, c, [&](std::size_t k) { return ct[p * c + k] * (a[p * c + k] - b[p * c + k]); });
  });
  return {Tensor(tps.dims(), std::move(g_tps), tps.precision()), Tensor(gen.dims(), std::move(g_gen), gen.precision()),
          Tensor(mask.dims(), std::move(g_mask), mask.precision())};
}

Tensor AttentionRegularizerOp::forward(std::span<const Tensor> inputs) const {
  require_rank(inputs[0], 2, "attention_regularizer");
  return Tensor::scalar(mean_gap(inputs[0]), inputs[0].precision());
}

std::vector<Tensor> AttentionRegularizerOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                                const Tensor& cotangent) const {
  const auto m = inputs[0].data();
  const double scale = cotangent.item() / static_cast<double>(m.size());
  std::vector<double> g(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double gap = 1.0 - m[i];
    g[i] = gap > 0.0 ? -scale : (gap < 0.0 ? scale : 0.0);
  }
  return {Tensor(inputs[0].dims(), std::move(g), inputs[0].precision())};
}

}  // namespace ctnet
