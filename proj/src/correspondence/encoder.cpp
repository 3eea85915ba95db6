#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ctnet/correspondence.hpp"
#include "ctnet/errors.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

constexpr std::size_t kStage1Channels = 32;
constexpr double kFrequencyScale = 0.6;
constexpr std::uint64_t kStageSalt = 0x9E3779B97F4A7C15ULL;
const WindowSpec kStageWindow{3, 2, 1};

class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [-1, 1).
  double symmetric() { return 2.0 * static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 1.0; }

 private:
  std::mt19937_64 engine_;
};

// Weights are stored output-major: weights[o * fan_in + t].
std::vector<double> draw_weights(UniformStream& rng, std::size_t outputs, std::size_t fan_in) {
  const double scale = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<double> w(outputs * fan_in);
  for (double& v : w) v = rng.symmetric() * scale;
  return w;
}

template <class Activation>
Tensor conv_stage(const Tensor& x, const std::vector<double>& weights, std::size_t outputs, Activation act) {
  const Tensor cols = unfold(x, kStageWindow);
  const std::size_t n = cols.dim(0), fan_in = cols.dim(1);
  const std::size_t oh = kStageWindow.output_extent(x.dim(0)), ow = kStageWindow.output_extent(x.dim(1));
  std::vector<double> out(n * outputs);
  const double* src = cols.data().data();
  parallel_for(n, [&](std::size_t cell) {
    for (std::size_t o = 0; o < outputs; ++o) {
      const double z = pairwise_dot(src + cell * fan_in, weights.data() + o * fan_in, fan_in);
      out[cell * outputs + o] = act(z, o);
    }
  });
  return Tensor({oh, ow, outputs}, std::move(out), x.precision());
}

}  // namespace

std::array<Tensor, 2> encoder_stages(const Tensor& inputs, std::uint64_t seed) {
  require_rank(inputs, 3, "encode_features");
  const std::size_t h = inputs.dim(0), w = inputs.dim(1), k = inputs.dim(2);
  if (h % kFeatureStride != 0 || w % kFeatureStride != 0) {
    throw ShapeError("encode_features: input " + shape_string(inputs.dims()) + " must have H and W divisible by 4");
  }
  const double omega = kFrequencyScale * std::sqrt(static_cast<double>(h * h + w * w));

  UniformStream stage1(seed + kStageSalt);
  const std::size_t fan1 = kStageWindow.size * kStageWindow.size * k;
  const std::vector<double> w1 = draw_weights(stage1, kStage1Channels, fan1);
  std::vector<double> b1(kStage1Channels);
  for (double& b : b1) b = stage1.symmetric() * std::numbers::pi;

  UniformStream stage2(seed + 2 * kStageSalt);
  const std::size_t fan2 = kStageWindow.size * kStageWindow.size * kStage1Channels;
  const std::vector<double> w2 = draw_weights(stage2, kFeatureChannels, fan2);

  const Tensor hidden =
      conv_stage(inputs, w1, kStage1Channels, [&](double z, std::size_t o) { return std::sin(omega * z + b1[o]); });
  Tensor features = conv_stage(hidden, w2, kFeatureChannels, [](double z, std::size_t) { return std::tanh(z); });
  return {hidden, std::move(features)};
}

FeatureMap encode_features(const Tensor& inputs, std::uint64_t seed, std::string source) {
  return FeatureMap{std::move(encoder_stages(inputs, seed)[1]), std::move(source), seed};
}

}  // namespace ctnet
