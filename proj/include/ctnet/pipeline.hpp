#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctnet/correspondence.hpp"
#include "ctnet/fusion.hpp"
#include "ctnet/io.hpp"
#include "ctnet/layout.hpp"
#include "ctnet/losses.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {

struct PipelineConfig {
  std::uint64_t seed = 0;
  double alpha = kDefaultAlpha;
  WindowSpec dense_window{3, 1, 1};
  WindowSpec tps_window{4, 4, 0};
  std::size_t grid = 5;
  double lambda_k = 1e-6;
  double lambda_r = 1.0;
  double lambda_s = 1.0;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  LossWeights loss_weights;
  Precision precision = Precision::f64;
  std::size_t workers = 1;
  /// When false the model-side encoder sees only the pose field.
  bool encoder_uses_image = true;
  /// Per-level perceptual weights; empty means 1/N.
  std::vector<double> perceptual_weights;

  void validate() const;
  /// Every key except "workers" when include_workers is false.
  Json to_json(bool include_workers = true) const;
  /// Missing keys keep their defaults; unknown keys are a ParseError.
  static PipelineConfig from_json(const Json& doc);
};

PipelineConfig load_config(const fs::path& path);

enum class Scale { dense, tps };

/// Model-side encoder input: image channels then the pose field, or the
/// pose field alone.
Tensor model_encoder_input(const Tensor& image, const Tensor& model_field, bool uses_image);

/// Rows index target-grid cells (pose field of the target), columns the
/// model grid.
CorrespondenceMatrix correspond(const PipelineConfig& config, const Tensor& model_image, const Tensor& model_field,
                                const Tensor& target_field, Scale scale);

/// Clothes pixels of an image under a layout.
Tensor clothes_of(const Tensor& image, const SegmentationMap& layout);

ControlGrid control_points(const PipelineConfig& config, const CorrespondenceMatrix& tps_matrix);

/// {image, encoder stage 1, encoder stage 2} with the configured weights.
FeaturePyramid feature_pyramid(const PipelineConfig& config, const Tensor& image);

struct LossInputs {
  Tensor fused;              // Î^fake
  Tensor reference_image;    // composite ground truth
  Tensor tps_clothes;        // T^C
  Tensor reference_clothes;  // I^T_c or its stand-in
  ControlGrid control;
  Tensor layout_scores;      // soft warped layout, H x W x 10
  SegmentationMap layout_target = SegmentationMap::filled(1, 1, kBackground);  // R^T_g
  Tensor model_clothes;      // I^M_c
  Tensor attention;          // H x W
};

struct LossReport {
  LossComponents components;
  TotalLoss total;
  Json to_json() const;
};

LossReport compute_losses(const PipelineConfig& config, const LossInputs& in);

struct MetricReport {
  std::optional<double> warp_ssim;
  std::optional<double> mask_ssim;
  std::optional<double> h_ssim;
};

MetricReport compute_metrics(const Tensor& warped_clothes, const Tensor& fused, const Tensor& truth_clothes,
                             const Tensor& truth_image, const SegmentationMap& layout_target);

struct PipelineInputs {
  fs::path model_image;
  fs::path model_keypoints;
  fs::path model_layout;
  fs::path target_keypoints;
  fs::path target_body;
  fs::path target_preserved;
  std::optional<fs::path> layout_prediction;
  std::optional<fs::path> generated;
  std::optional<fs::path> attention_mask;
  std::optional<fs::path> truth_clothes;
  /// Constant attention mask when no mask file is given (default 1).
  std::optional<double> identity_mask;
};

struct PipelineResult {
  Json report;
  Json manifest;
};

/// Runs every stage, writing intermediates, report.json and manifest.json
/// into out_dir. Stage failures are rethrown with the stage name and input
/// fingerprints prefixed, keeping the original error class.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs, const fs::path& out_dir);

}  // namespace ctnet
