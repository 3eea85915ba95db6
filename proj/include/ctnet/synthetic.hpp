#pragma once

#include <optional>

#include "ctnet/layout.hpp"
#include "ctnet/pipeline.hpp"
#include "ctnet/pose_fields.hpp"
#include "ctnet/tensor.hpp"

namespace ctnet {

/// Procedural figure parameters, pixels on a 64 x 64 canvas.
struct FigurePose {
  double shift_x = 0.0;
  double shift_y = 0.0;
  /// Wrist lift relative to a hanging arm.
  double arm_raise = 0.0;
  /// Extra horizontal spread of knees and ankles.
  double leg_spread = 0.0;
};

struct Figure {
  KeypointSet keypoints;
  SegmentationMap layout;
  Tensor image;  // H x W x 3, every value a multiple of 1/255
};

Figure render_figure(const FigurePose& pose, std::size_t size = 64);

struct Fixture {
  Figure model;
  Figure target;
  SegmentationMap target_preserved;
  Tensor truth_clothes;
  PipelineConfig config;
};

/// Two different poses of the same figure.
Fixture smoke_fixture();
/// Model and target are the same person; the model encoder sees only the pose.
Fixture identity_fixture();

/// Writes the pipeline input files plus config.json.
void write_fixture(const Fixture& fixture, const fs::path& dir);
PipelineInputs fixture_inputs(const fs::path& dir);

}  // namespace ctnet
