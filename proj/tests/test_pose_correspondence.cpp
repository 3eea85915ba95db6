#include "doctest.h"

#include <cmath>
#include <random>

#include "ctnet/correspondence.hpp"
#include "ctnet/errors.hpp"
#include "ctnet/pose_fields.hpp"
#include "oracles.hpp"

using namespace ctnet;

namespace {

using Joints = std::array<std::optional<Joint>, kJointCount>;

KeypointSet single_joint(std::size_t w, std::size_t h, double x, double y) {
  Joints j;
  j[0] = Joint{x, y, 1.0};
  return KeypointSet(w, h, j);
}

KeypointSet random_keypoints(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  std::uniform_real_distribution<double> ux(0, static_cast<double>(w) - 1e-9), uy(0, static_cast<double>(h) - 1e-9);
  std::bernoulli_distribution present(0.8);
  Joints j;
  for (auto& p : j) {
    if (present(rng)) p = Joint{ux(rng), uy(rng), 0.9};
  }
  return KeypointSet(w, h, j);
}

oracle::JointPixels pixels_of(const KeypointSet& k) {
  oracle::JointPixels out(kJointCount);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto& p = k.joint(j);
    if (!p) continue;
    // round half up, clamp
    const auto snap = [](double v, std::size_t n) {
      return static_cast<std::size_t>(std::min(std::floor(v + 0.5), static_cast<double>(n - 1)));
    };
    out[j] = std::array<std::size_t, 2>{snap(p->y, k.height()), snap(p->x, k.width())};
  }
  return out;
}

}  // namespace

TEST_CASE("keypoint sets reject out-of-range joints") {
  CHECK_NOTHROW(single_joint(4, 4, 3.9, 0.0));
  CHECK_THROWS_AS(single_joint(4, 4, 4.0, 0.0), ValidationError);
  CHECK_THROWS_AS(single_joint(4, 4, 0.0, -0.1), ValidationError);
  CHECK(joint_index("l-ear") == 17u);
  CHECK_FALSE(joint_index("tail").has_value());
}

TEST_CASE("confidence maps") {
  const Tensor m = confidence_map(single_joint(4, 4, 1.0, 2.0));
  CHECK(m.dims() == Shape{4, 4, 18});
  double sum0 = 0.0, sum1 = 0.0;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      sum0 += m.at(r, c, 0);
      sum1 += m.at(r, c, 1);
    }
  }
  CHECK(m.at(2, 1, 0) == 1.0);
  CHECK(sum0 == 1.0);
  CHECK(sum1 == 0.0);
  CHECK(confidence_map(single_joint(4, 4, 2.5, 0.0)).at(0, 3, 0) == 1.0);
  CHECK(confidence_map(single_joint(4, 4, 3.6, 0.0)).at(0, 3, 0) == 1.0);
}

TEST_CASE("distance field examples") {
  const DistanceField f = distance_fields(single_joint(4, 4, 1, 1));
  CHECK(f.field.at(3, 3, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.field.at(1, 1, 0) == 0.0);
  CHECK(f.present[0]);
  CHECK_FALSE(f.present[5]);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(f.field.at(r, c, 5) == 1.0);
  }
}

TEST_CASE("distance fields equal the brute-force scan") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t w = oracle::random_index(rng, 1, 32), h = oracle::random_index(rng, 1, 32);
    const KeypointSet k = random_keypoints(rng, w, h);
    CHECK(distance_fields(k).field.identical(oracle::distance_fields(h, w, pixels_of(k))));
  }
}

TEST_CASE("distance field properties") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t w = 20, h = 17;
    const KeypointSet k = random_keypoints(rng, w, h);
    const Tensor f = distance_fields(k).field;
    const double step = std::sqrt(2.0) / std::sqrt(double(w * w + h * h));
    for (std::size_t r = 0; r + 1 < h; ++r) {
      for (std::size_t c = 0; c + 1 < w; ++c) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
          CHECK(f.at(r, c, j) <= 1.0);
          CHECK(std::abs(f.at(r, c, j) - f.at(r + 1, c, j)) <= step + 1e-15);
          CHECK(std::abs(f.at(r, c, j) - f.at(r, c + 1, j)) <= step + 1e-15);
          CHECK(std::abs(f.at(r, c, j) - f.at(r + 1, c + 1, j)) <= step + 1e-15);
        }
      }
    }
  }
  // integer translation moves the zero locus by the same amount
  const Tensor a = distance_fields(single_joint(10, 10, 2, 3)).field;
  const Tensor b = distance_fields(single_joint(10, 10, 5, 4)).field;
  CHECK(a.at(3, 2, 0) == 0.0);
  CHECK(b.at(4, 5, 0) == 0.0);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 7; ++c) CHECK(a.at(r, c, 0) == b.at(r + 1, c + 3, 0));
  }
}

TEST_CASE("feature encoder shapes and determinism") {
  std::mt19937_64 rng(13);
  const Tensor in = oracle::random_tensor(rng, {64, 64, 21}, 0, 1);
  const FeatureMap f = encode_features(in, 1);
  CHECK(f.features.dims() == Shape{16, 16, 64});
  CHECK(encode_features(in, 1).features.identical(f.features));
  CHECK_FALSE(encode_features(in, 2).features.identical(f.features));
  CHECK_THROWS_AS(encode_features(oracle::random_tensor(rng, {10, 12, 3}), 1), ShapeError);
  for (double v : f.features.data()) CHECK(std::abs(v) <= 1.0);

  const auto stages = encoder_stages(in, 1);
  CHECK(stages[0].dims() == Shape{32, 32, 32});
  CHECK(stages[1].identical(f.features));
}

TEST_CASE("aggregation delegates to unfold") {
  std::mt19937_64 rng(14);
  const FeatureMap f{oracle::random_tensor(rng, {16, 16, 64}), "test", 0};
  const Tensor dense = aggregate_features(f, {3, 1, 1});
  const Tensor tps = aggregate_features(f, {4, 4, 0});
  CHECK(dense.dims() == Shape{256, 576});
  CHECK(tps.dims() == Shape{16, 1024});
  CHECK(dense.identical(unfold(f.features, {3, 1, 1})));
  CHECK(tps.identical(unfold(f.features, {4, 4, 0})));
}

TEST_CASE("correlation examples") {
  std::mt19937_64 rng(15);
  const Tensor a = oracle::random_tensor(rng, {6, 5});
  const Tensor m = correlation(a, a);
  for (std::size_t i = 0; i < 6; ++i) CHECK(m.at(i, i) == doctest::Approx(1.0).epsilon(1e-6));

  // one row equal to the side's mean centres to zero
  std::vector<double> v(a.data().begin(), a.data().end());
  for (std::size_t k = 0; k < 5; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += v[i * 5 + k];
    v[5 * 5 + k] = s / 5.0;
  }
  const Tensor with_mean({6, 5}, v);
  const Tensor z = correlation(with_mean, oracle::random_tensor(rng, {4, 5}));
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(z.at(5, j)) < 1e-6);

  const Tensor p = oracle::random_tensor(rng, {3, 4}), q = oracle::random_tensor(rng, {5, 4});
  CHECK(oracle::max_rel_diff(correlation(p, q), oracle::correlation(p, q)) < 1e-12);
  CHECK_THROWS_AS(correlation(p, oracle::random_tensor(rng, {5, 3})), ShapeError);
}

TEST_CASE("correlation properties") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracle::random_tensor(rng, {7, 6}), b = oracle::random_tensor(rng, {9, 6});
    const Tensor ab = correlation(a, b), ba = correlation(b, a);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(std::abs(ab.at(i, j) - ba.at(j, i)) < 1e-6);
        CHECK(std::abs(ab.at(i, j)) <= 1.0 + 1e-6);
      }
    }
    // shift every row of b by one vector, scale all of a by gamma
    const double gamma = u(rng);
    std::vector<double> shifted(b.data().begin(), b.data().end()), scaled(a.data().begin(), a.data().end());
    const Tensor shift = oracle::random_tensor(rng, {6}, -3, 3);
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += shift[i % 6];
    for (double& x : scaled) x *= gamma;
    CHECK(oracle::max_abs_diff(correlation(Tensor({7, 6}, scaled), Tensor({9, 6}, shifted)), ab) < 1e-5);
  }
}

TEST_CASE("correspondence matrix metadata") {
  std::mt19937_64 rng(17);
  const FeatureMap fa{oracle::random_tensor(rng, {4, 4, 8}), "a", 0};
  const FeatureMap fb{oracle::random_tensor(rng, {4, 4, 8}), "b", 0};
  const GridInfo ga = grid_for(fa, {3, 1, 1}), gb = grid_for(fb, {3, 1, 1});
  const CorrespondenceMatrix m =
      correspondence_matrix(aggregate_features(fa, {3, 1, 1}), aggregate_features(fb, {3, 1, 1}), ga, gb);
  CHECK(m.scores.dims() == Shape{16, 16});
  CHECK_NOTHROW(m.validate());
  CHECK(ga.cells() == 16);
  CHECK_THROWS_AS(correspondence_matrix(aggregate_features(fa, {4, 4, 0}), aggregate_features(fb, {4, 4, 0}), ga, gb),
                  ShapeError);
}
