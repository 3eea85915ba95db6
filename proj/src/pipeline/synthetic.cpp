#include "ctnet/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"

namespace ctnet {
namespace {

struct Xy {
  double x, y;
};

// Joint positions on a 64-pixel canvas, in the fixed joint order.
std::array<Xy, kJointCount> joints_for(const FigurePose& p) {
  const double sx = p.shift_x, sy = p.shift_y, lift = p.arm_raise, spread = p.leg_spread;
  std::array<Xy, kJointCount> j = {{
      {32, 10},                           // nose
      {32, 17},                           // neck
      {25, 18},                           // r-shoulder
      {21, 27 - 0.5 * lift},              // r-elbow
      {19 - 0.3 * lift, 35 - lift},       // r-wrist
      {39, 18},                           // l-shoulder
      {43, 27 - 0.5 * lift},              // l-elbow
      {45 + 0.3 * lift, 35 - lift},       // l-wrist
      {28, 36},                           // r-hip
      {27 - 0.5 * spread, 46},            // r-knee
      {27 - spread, 55},                  // r-ankle
      {36, 36},                           // l-hip
      {37 + 0.5 * spread, 46},            // l-knee
      {37 + spread, 55},                  // l-ankle
      {30, 9},                            // r-eye
      {34, 9},                            // l-eye
      {28.5, 10},                         // r-ear
      {35.5, 10},                         // l-ear
  }};
  for (Xy& q : j) {
    q.x += sx;
    q.y += sy;
  }
  return j;
}

double segment_distance(Xy p, Xy a, Xy b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(p.x - a.x - t * vx, p.y - a.y - t * vy);
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

std::uint8_t label_at(Xy p, const std::array<Xy, kJointCount>& j) {
  enum { nose, neck, rsh, rel, rwr, lsh, lel, lwr, rhip, rkn, rank, lhip, lkn, lank };
  if (std::abs(p.x - j[rank].x) <= 3 && p.y >= j[rank].y && p.y <= j[rank].y + 3.5) return kRightShoe;
  if (std::abs(p.x - j[lank].x) <= 3 && p.y >= j[lank].y && p.y <= j[lank].y + 3.5) return kLeftShoe;
  if (std::hypot(p.x - j[nose].x, p.y - (j[nose].y - 1)) <= 6.0) return kHead;
  if (std::min(segment_distance(p, j[rsh], j[rel]), segment_distance(p, j[rel], j[rwr])) <= 2.5) return kRightArm;
  if (std::min(segment_distance(p, j[lsh], j[lel]), segment_distance(p, j[lel], j[lwr])) <= 2.5) return kLeftArm;
  if (p.y >= j[neck].y && p.y <= j[rhip].y && p.x >= j[rsh].x - 0.5 && p.x <= j[lsh].x + 0.5) return kUpperClothes;
  const double hip_y = j[rhip].y, knee_y = 0.5 * (j[rkn].y + j[lkn].y);
  if (p.y > hip_y && p.y <= knee_y) {
    const double t = (p.y - hip_y) / (knee_y - hip_y);
    const double left = j[rhip].x - 2.5 + t * (j[rkn].x - j[rhip].x);
    const double right = j[lhip].x + 2.5 + t * (j[lkn].x - j[lhip].x);
    if (p.x >= left && p.x <= right) return kLowerClothes;
  }
  if (segment_distance(p, j[rkn], j[rank]) <= 2.5) return kRightLeg;
  if (segment_distance(p, j[lkn], j[lank]) <= 2.5) return kLeftLeg;
  return kBackground;
}

std::array<double, 3> colour_at(Xy p, std::uint8_t label, const std::array<Xy, kJointCount>& j) {
  const double u = p.x - j[1].x, v = p.y - j[1].y;  // relative to the neck
  switch (label) {
    case kUpperClothes: {
      const bool stripe = std::fmod(std::floor(v / 2.0), 2.0) == 0.0;
      const double shade = 0.08 * std::sin(0.5 * u);
      return stripe ? std::array<double, 3>{0.80 + shade, 0.12, 0.15} : std::array<double, 3>{0.95, 0.80 + shade, 0.25};
    }
    case kLowerClothes: {
      const bool check = (static_cast<int>(std::floor(u / 3.0)) + static_cast<int>(std::floor(v / 3.0))) % 2 == 0;
      return check ? std::array<double, 3>{0.10, 0.20, 0.65} : std::array<double, 3>{0.25, 0.45, 0.85};
    }
    case kHead:
    case kLeftArm:
    case kRightArm:
    case kLeftLeg:
    case kRightLeg:
      return {0.90, 0.70, 0.55};
    case kLeftShoe:
    case kRightShoe:
      return {0.20, 0.15, 0.10};
    default:
      return {0.92, 0.93, 0.95};
  }
}

SegmentationMap preserved_only(const SegmentationMap& s) {
  std::vector<std::uint8_t> labels = s.labels();
  for (auto& l : labels) {
    if (!LabelPalette::is_preserved(l)) l = kBackground;
  }
  return SegmentationMap(s.height(), s.width(), std::move(labels));
}

Fixture make_fixture(const FigurePose& model, const FigurePose& target) {
  Figure m = render_figure(model);
  Figure t = render_figure(target);
  SegmentationMap preserved = preserved_only(t.layout);
  Tensor truth = clothes_of(t.image, t.layout);
  return Fixture{std::move(m), std::move(t), std::move(preserved), std::move(truth), PipelineConfig{}};
}

}  // namespace

Figure render_figure(const FigurePose& pose, std::size_t size) {
  if (size < 16) throw ValidationError("figure canvas must be at least 16 pixels");
  const double scale = static_cast<double>(size) / 64.0;
  const std::array<Xy, kJointCount> unit = joints_for(pose);
  std::array<std::optional<Joint>, kJointCount> joints;
  for (std::size_t k = 0; k < kJointCount; ++k) joints[k] = Joint{unit[k].x * scale, unit[k].y * scale, 1.0};
  std::vector<std::uint8_t> labels(size * size);
  std::vector<double> pixels(size * size * 3);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const Xy p{static_cast<double>(c) / scale, static_cast<double>(r) / scale};
      const std::uint8_t l = label_at(p, unit);
      const auto rgb = colour_at(p, l, unit);
      labels[r * size + c] = l;
      for (int k = 0; k < 3; ++k) pixels[(r * size + c) * 3 + k] = quantize(rgb[k]);
    }
  }
  return Figure{KeypointSet(size, size, joints), SegmentationMap(size, size, std::move(labels)),
                Tensor({size, size, 3}, std::move(pixels))};
}

Fixture smoke_fixture() {
  Fixture f = make_fixture(FigurePose{}, FigurePose{2.0, 1.0, 6.0, 2.0});
  f.config.seed = 7;
  return f;
}

Fixture identity_fixture() {
  Fixture f = make_fixture(FigurePose{}, FigurePose{});
  f.config.seed = 7;
  f.config.encoder_uses_image = false;
  return f;
}

void write_fixture(const Fixture& fixture, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_png(fixture.model.image, dir / "model.png");
  write_text(dir / "model_keypoints.json", dump_json(keypoints_to_json(fixture.model.keypoints)));
  save_label_png(fixture.model.layout, dir / "model_layout.png");
  write_text(dir / "target_keypoints.json", dump_json(keypoints_to_json(fixture.target.keypoints)));
  save_png(fixture.target.image, dir / "target_body.png");
  save_label_png(fixture.target_preserved, dir / "target_preserved.png");
  save_png(fixture.truth_clothes, dir / "truth_clothes.png");
  write_text(dir / "config.json", dump_json(fixture.config.to_json()));
}

PipelineInputs fixture_inputs(const fs::path& dir) {
  PipelineInputs in;
  in.model_image = dir / "model.png";
  in.model_keypoints = dir / "model_keypoints.json";
  in.model_layout = dir / "model_layout.png";
  in.target_keypoints = dir / "target_keypoints.json";
  in.target_body = dir / "target_body.png";
  in.target_preserved = dir / "target_preserved.png";
  in.truth_clothes = dir / "truth_clothes.png";
  return in;
}

}  // namespace ctnet
