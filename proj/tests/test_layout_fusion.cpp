#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "ctnet/errors.hpp"
#include "ctnet/fusion.hpp"
#include "ctnet/layout.hpp"
#include "oracles.hpp"

using namespace ctnet;

namespace {

SegmentationMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> l(h * w);
  for (auto& v : l) v = static_cast<std::uint8_t>(oracle::random_index(rng, 0, kLabelCount - 1));
  return SegmentationMap(h, w, std::move(l));
}

GridInfo grid4() {
  GridInfo g;
  g.image_h = g.image_w = 16;
  g.feature_h = g.feature_w = 4;
  g.window = {1, 1, 0};
  return g;
}

CorrespondenceMatrix permutation_matrix(const std::vector<std::size_t>& perm) {
  std::vector<double> s(perm.size() * perm.size(), -1.0);
  for (std::size_t u = 0; u < perm.size(); ++u) s[u * perm.size() + perm[u]] = 1.0;
  return {Tensor({perm.size(), perm.size()}, s), grid4(), grid4()};
}

}  // namespace

TEST_CASE("segmentation maps validate labels") {
  CHECK_THROWS_AS(SegmentationMap(2, 2, {0, 1, 2}), ShapeError);
  CHECK_THROWS_AS(SegmentationMap(1, 1, {10}), ValidationError);
  CHECK_THROWS_AS(SegmentationMap::from_tensor(Tensor({1, 1}, {1.5})), ValidationError);
  const SegmentationMap s(1, 2, {3, 9});
  CHECK(SegmentationMap::from_tensor(s.to_tensor()) == s);
}

TEST_CASE("one-hot encoding") {
  const Tensor bg = one_hot_encode(SegmentationMap::filled(3, 2, kBackground));
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(bg.at(r, c, 0) == 1.0);
  }
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const SegmentationMap s = random_map(rng, 5, 7);
    const Tensor e = one_hot_encode(s);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 7; ++c) {
        double sum = 0.0;
        for (std::size_t k = 0; k < kLabelCount; ++k) sum += e.at(r, c, k);
        CHECK(sum == 1.0);
      }
    }
    CHECK(argmax_labels(e) == s);
  }
}

TEST_CASE("argmax ties go to the lowest label") {
  std::vector<double> v(kLabelCount, 0.0);
  v[7] = v[3] = 0.5;
  CHECK(argmax_labels(Tensor({1, 1, kLabelCount}, v)).at(0, 0) == 3);
}

TEST_CASE("layout warping") {
  std::mt19937_64 rng(32);
  std::vector<std::size_t> id(16);
  std::iota(id.begin(), id.end(), 0);
  const SegmentationMap s = random_map(rng, 4, 4);
  const SegmentationMap same = warp_layout(permutation_matrix(id), s);
  for (std::size_t i = 0; i < 16; ++i) {
    const std::uint8_t want = LabelPalette::is_preserved(s.labels()[i]) ? std::uint8_t(kBackground) : s.labels()[i];
    CHECK(same.labels()[i] == want);
  }

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> perm = id;
    std::shuffle(perm.begin(), perm.end(), rng);
    const SegmentationMap t = random_map(rng, 4, 4);
    const SegmentationMap w = warp_layout(permutation_matrix(perm), t);
    for (std::size_t u = 0; u < 16; ++u) {
      const std::uint8_t src = t.labels()[perm[u]];
      CHECK(w.labels()[u] == (LabelPalette::is_preserved(src) ? std::uint8_t(kBackground) : src));
    }
    // full-resolution maps move as 4 x 4 blocks
    const SegmentationMap big = random_map(rng, 16, 16);
    const SegmentationMap wb = warp_layout(permutation_matrix(perm), big);
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) {
        const std::size_t cell = perm[(r / 4) * 4 + c / 4];
        const std::uint8_t src = big.at((cell / 4) * 4 + r % 4, (cell % 4) * 4 + c % 4);
        CHECK(wb.at(r, c) == (LabelPalette::is_preserved(src) ? std::uint8_t(kBackground) : src));
      }
    }
  }
}

TEST_CASE("layout merge") {
  const SegmentationMap pred = SegmentationMap::filled(2, 2, kBackground);
  const SegmentationMap head(2, 2, {kHead, 0, 0, 0});
  CHECK(merge_layout(pred, head).at(0, 0) == kHead);

  const SegmentationMap clothes(2, 2, {kUpperClothes, kUpperClothes, 0, kLeftArm});
  const SegmentationMap merged = merge_layout(clothes, SegmentationMap(2, 2, {kHead, 0, kRightShoe, 0}));
  CHECK(merged == SegmentationMap(2, 2, {kHead, kUpperClothes, kRightShoe, kLeftArm}));

  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const SegmentationMap p = random_map(rng, 6, 6), t = random_map(rng, 6, 6);
    CHECK(merge_layout(merge_layout(p, t), t) == merge_layout(p, t));
  }
  CHECK_THROWS_AS(merge_layout(pred, SegmentationMap::filled(3, 2, 0)), ShapeError);
}

TEST_CASE("default layout prediction keeps limbs and clothes") {
  const SegmentationMap w(1, 4, {kHead, kUpperClothes, kLeftLeg, kLeftShoe});
  CHECK(default_layout_prediction(w) == SegmentationMap(1, 4, {0, kUpperClothes, kLeftLeg, 0}));
  const Tensor m = clothes_mask(SegmentationMap(1, 3, {kUpperClothes, kLowerClothes, kHead}));
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 1.0);
  CHECK(m[2] == 0.0);
  CHECK(person_mask(SegmentationMap(1, 2, {0, kHead}))[1] == 1.0);
}

TEST_CASE("cross-entropy loss") {
  CHECK(cross_entropy_loss(Tensor::zeros({3, 3, kLabelCount}), SegmentationMap::filled(3, 3, 4)) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  std::mt19937_64 rng(34);
  const SegmentationMap truth = random_map(rng, 3, 3);
  Tensor sat = one_hot_encode(truth);
  std::vector<double> v(sat.data().begin(), sat.data().end());
  for (double& x : v) x *= 30.0;
  CHECK(cross_entropy_loss(Tensor(sat.dims(), v), truth) < 1e-9);

  for (int trial = 0; trial < 20; ++trial) {
    const Tensor logits = oracle::random_tensor(rng, {2, 2, kLabelCount}, -4, 4);
    const SegmentationMap t = random_map(rng, 2, 2);
    const double got = cross_entropy_loss(logits, t);
    CHECK(got >= 0.0);
    CHECK(oracle::rel_diff(got, oracle::cross_entropy(logits, t.labels())) < 1e-12);
  }
}

TEST_CASE("masked clothes and non-target extraction") {
  std::mt19937_64 rng(35);
  const Tensor img = oracle::random_tensor(rng, {4, 4, 3}, 0, 1);
  CHECK(masked_clothes(img, Tensor::filled({4, 4}, 1.0)).identical(img));
  const Tensor none = masked_clothes(img, Tensor::zeros({4, 4}));
  for (double v : none.data()) CHECK(v == 0.0);
  std::vector<double> checker(16);
  for (std::size_t i = 0; i < 16; ++i) checker[i] = double(((i / 4) + (i % 4)) % 2);
  const Tensor mc = masked_clothes(img, Tensor({4, 4}, checker));
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(mc[i * 3 + k] == (checker[i] == 1.0 ? img[i * 3 + k] : 0.0));
  }
  CHECK_THROWS_AS(masked_clothes(img, Tensor::filled({4, 4}, 0.5)), ValidationError);

  const Tensor bare = extract_nontarget(img, SegmentationMap::filled(4, 4, kUpperClothes));
  for (double v : bare.data()) CHECK(v == 0.0);
  CHECK(extract_nontarget(img, SegmentationMap::filled(4, 4, kHead)).identical(img));
  const SegmentationMap mixed = random_map(rng, 4, 4);
  const Tensor nt = extract_nontarget(img, mixed);
  for (std::size_t i = 0; i < 16; ++i) {
    const std::uint8_t l = mixed.labels()[i];
    const bool keep = LabelPalette::is_preserved(l) || LabelPalette::is_limb(l);
    for (std::size_t k = 0; k < 3; ++k) CHECK(nt[i * 3 + k] == (keep ? img[i * 3 + k] : 0.0));
  }
}

TEST_CASE("attention fusion") {
  std::mt19937_64 rng(36);
  const Tensor tps = oracle::random_tensor(rng, {5, 4, 3}), gen = oracle::random_tensor(rng, {5, 4, 3});
  CHECK(fuse_attention(tps, gen, AttentionMask::constant(5, 4, 1.0)).identical(tps));
  CHECK(fuse_attention(tps, gen, AttentionMask::constant(5, 4, 0.0)).identical(gen));
  const Tensor avg = fuse_attention(tps, gen, AttentionMask::constant(5, 4, 0.5));
  for (std::size_t i = 0; i < avg.size(); ++i) CHECK(avg[i] == doctest::Approx(0.5 * (tps[i] + gen[i])).epsilon(1e-15));

  for (int trial = 0; trial < 10; ++trial) {
    const AttentionMask m(oracle::random_tensor(rng, {5, 4}, 0, 1));
    const Tensor out = fuse_attention(tps, gen, m);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i] >= std::min(tps[i], gen[i]));
      CHECK(out[i] <= std::max(tps[i], gen[i]));
    }
    const Tensor same = fuse_attention(tps, tps, m);
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == doctest::Approx(tps[i]).epsilon(1e-15));
  }
  // clamped on construction
  const AttentionMask clamped(Tensor({1, 2}, {-0.5, 1.5}));
  CHECK(clamped.values()[0] == 0.0);
  CHECK(clamped.values()[1] == 1.0);
  CHECK_THROWS_AS(fuse_attention(tps, gen, AttentionMask::constant(4, 4, 1.0)), ShapeError);
}

TEST_CASE("attention regularizer") {
  CHECK(attention_regularizer(AttentionMask::constant(3, 3, 1.0)) == 0.0);
  CHECK(attention_regularizer(AttentionMask::constant(3, 3, 0.0)) == 1.0);
  CHECK(attention_regularizer(AttentionMask::constant(3, 3, 0.25)) == 0.75);
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracle::random_tensor(rng, {4, 4}, 0, 1), b = oracle::random_tensor(rng, {4, 4}, 0, 1);
    double l1 = 0.0;
    for (std::size_t i = 0; i < 16; ++i) l1 += std::abs(a[i] - b[i]) / 16.0;
    CHECK(std::abs(attention_regularizer(AttentionMask(a)) - attention_regularizer(AttentionMask(b))) <= l1 + 1e-15);
  }
}
