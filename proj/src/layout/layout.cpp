#include "ctnet/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

void require_same_extent(const SegmentationMap& a, const SegmentationMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": layouts differ in size (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

void require_logits(const Tensor& logits, const SegmentationMap& truth) {
  require_rank(logits, 3, "cross_entropy_loss");
  if (logits.dim(0) != truth.height() || logits.dim(1) != truth.width() || logits.dim(2) != kLabelCount) {
    throw ShapeError("cross_entropy_loss: logits " + shape_string(logits.dims()) + " do not match a " +
                     std::to_string(truth.height()) + "x" + std::to_string(truth.width()) + " layout");
  }
}

// Per-pixel log-sum-exp of the logits.
std::vector<double> log_partition(const Tensor& logits) {
  const std::size_t n = logits.dim(0) * logits.dim(1);
  const double* z = logits.data().data();
  std::vector<double> out(n);
  parallel_for(n, [&](std::size_t p) {
    const double* row = z + p * kLabelCount;
    const double top = *std::max_element(row, row + kLabelCount);
    double s = 0.0;
    for (std::size_t k = 0; k < kLabelCount; ++k) s += std::exp(row[k] - top);
    out[p] = top + std::log(s);
  });
  return out;
}

Tensor mask_where(const SegmentationMap& s, bool (*keep)(std::uint8_t)) {
  std::vector<double> m(s.labels().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = keep(s.labels()[i]) ? 1.0 : 0.0;
  return Tensor({s.height(), s.width()}, std::move(m));
}

}  // namespace

SegmentationMap::SegmentationMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height == 0 || width == 0 || labels_.size() != height * width) {
    throw ShapeError("segmentation map " + std::to_string(height) + "x" + std::to_string(width) + " needs " +
                     std::to_string(height * width) + " labels, got " + std::to_string(labels_.size()));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= kLabelCount) {
      throw ValidationError("label " + std::to_string(labels_[i]) + " at pixel (" + std::to_string(i / width) + ", " +
                            std::to_string(i % width) + ") is not in the palette");
    }
  }
}

SegmentationMap SegmentationMap::filled(std::size_t height, std::size_t width, std::uint8_t label) {
  return SegmentationMap(height, width, std::vector<std::uint8_t>(height * width, label));
}

SegmentationMap SegmentationMap::from_tensor(const Tensor& t) {
  require_rank(t, 2, "segmentation map");
  std::vector<std::uint8_t> labels(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (v < 0.0 || v >= static_cast<double>(kLabelCount) || v != std::floor(v)) {
      throw ValidationError("value " + std::to_string(v) + " at index " + std::to_string(i) +
                            " is not a palette label");
    }
    labels[i] = static_cast<std::uint8_t>(v);
  }
  return SegmentationMap(t.dim(0), t.dim(1), std::move(labels));
}

Tensor SegmentationMap::to_tensor() const {
  return Tensor({height_, width_}, std::vector<double>(labels_.begin(), labels_.end()));
}

Tensor one_hot_encode(const SegmentationMap& s) {
  std::vector<double> out(s.labels().size() * kLabelCount, 0.0);
  for (std::size_t i = 0; i < s.labels().size(); ++i) out[i * kLabelCount + s.labels()[i]] = 1.0;
  return Tensor({s.height(), s.width(), kLabelCount}, std::move(out));
}

SegmentationMap argmax_labels(const Tensor& scores) {
  require_rank(scores, 3, "argmax_labels");
  if (scores.dim(2) != kLabelCount) throw ShapeError("argmax_labels: expected 10 channels");
  const std::size_t n = scores.dim(0) * scores.dim(1);
  std::vector<std::uint8_t> labels(n);
  const double* z = scores.data().data();
  for (std::size_t p = 0; p < n; ++p) {
    const double* row = z + p * kLabelCount;
    labels[p] = static_cast<std::uint8_t>(std::max_element(row, row + kLabelCount) - row);
  }
  return SegmentationMap(scores.dim(0), scores.dim(1), std::move(labels));
}

Tensor warp_layout_scores(const CorrespondenceMatrix& m, const SegmentationMap& s, double alpha) {
  // preserved pixels carry their mass as background, so saturated warps
  // land on background exactly instead of on leakage from other pixels
  std::vector<std::uint8_t> kept = s.labels();
  for (auto& l : kept) {
    if (LabelPalette::is_preserved(l)) l = kBackground;
  }
  const Tensor x = one_hot_encode(SegmentationMap(s.height(), s.width(), std::move(kept)));
  if (s.height() == m.cols.grid_h() && s.width() == m.cols.grid_w()) return dense_warp(m, x, alpha);
  return dense_warp_blocks(m, x, alpha);
}

SegmentationMap warp_layout(const CorrespondenceMatrix& m, const SegmentationMap& s, double alpha) {
  return argmax_labels(warp_layout_scores(m, s, alpha));
}

SegmentationMap default_layout_prediction(const SegmentationMap& warped) {
  std::vector<std::uint8_t> labels = warped.labels();
  for (auto& l : labels) {
    if (!LabelPalette::is_limb(l) && !LabelPalette::is_clothes(l)) l = kBackground;
  }
  return SegmentationMap(warped.height(), warped.width(), std::move(labels));
}

SegmentationMap merge_layout(const SegmentationMap& pred, const SegmentationMap& target_preserved) {
  require_same_extent(pred, target_preserved, "merge_layout");
  std::vector<std::uint8_t> labels = pred.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (LabelPalette::is_preserved(target_preserved.labels()[i])) labels[i] = target_preserved.labels()[i];
  }
  return SegmentationMap(pred.height(), pred.width(), std::move(labels));
}

Tensor clothes_mask(const SegmentationMap& s) { return mask_where(s, &LabelPalette::is_clothes); }

Tensor person_mask(const SegmentationMap& s) {
  return mask_where(s, [](std::uint8_t l) { return l != kBackground; });
}

double cross_entropy_loss(const Tensor& logits, const SegmentationMap& truth) {
  require_logits(logits, truth);
  const std::vector<double> lse = log_partition(logits);
  const double* z = logits.data().data();
  return pairwise_sum(0, lse.size(), [&](std::size_t p) { return lse[p] - z[p * kLabelCount + truth.labels()[p]]; }) /
         static_cast<double>(lse.size());
}

CrossEntropyOp::CrossEntropyOp(SegmentationMap truth) : truth_(std::move(truth)) {}

Tensor CrossEntropyOp::forward(std::span<const Tensor> inputs) const {
  return Tensor::scalar(cross_entropy_loss(inputs[0], truth_), inputs[0].precision());
}

std::vector<Tensor> CrossEntropyOp::vjp(std::span<const Tensor> inputs, const Tensor&,
                                        const Tensor& cotangent) const {
  const Tensor& logits = inputs[0];
  require_logits(logits, truth_);
  const std::vector<double> lse = log_partition(logits);
  const double scale = cotangent.item() / static_cast<double>(lse.size());
  const double* z = logits.data().data();
  std::vector<double> g(logits.size());
  parallel_for(lse.size(), [&](std::size_t p) {
    for (std::size_t k = 0; k < kLabelCount; ++k) {
      const double prob = std::exp(z[p * kLabelCount + k] - lse[p]);
      g[p * kLabelCount + k] = scale * (prob - (truth_.labels()[p] == k ? 1.0 : 0.0));
    }
  });
  return {Tensor(logits.dims(), std::move(g), logits.precision())};
}

}  // namespace ctnet
