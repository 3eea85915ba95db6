#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ctnet/errors.hpp"
#include "ctnet/losses.hpp"
#include "ctnet/metrics.hpp"
#include "oracles.hpp"

using namespace ctnet;

namespace {

Tensor shuffled_pixels(const Tensor& f, std::mt19937_64& rng) {
  const std::size_t n = f.dim(0) * f.dim(1), c = f.dim(2);
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) out[i * c + k] = f[p[i] * c + k];
  }
  return Tensor(f.dims(), out);
}

Tensor shuffled_rows(const Tensor& y, std::mt19937_64& rng) {
  return shuffled_pixels(y.reshaped({y.dim(0), 1, y.dim(1)}), rng).reshaped(y.dims());
}

Tensor plus(const Tensor& a, double v) {
  std::vector<double> d(a.data().begin(), a.data().end());
  for (double& x : d) x += v;
  return Tensor(a.dims(), d);
}

}  // namespace

TEST_CASE("perceptual loss") {
  std::mt19937_64 rng(41);
  const Tensor a = oracle::random_tensor(rng, {4, 4, 3});
  const FeaturePyramid pa = FeaturePyramid::uniform({a});
  CHECK(perceptual_loss(pa, pa) == 0.0);
  CHECK(perceptual_loss(pa, FeaturePyramid::uniform({plus(a, 0.3)})) == doctest::Approx(0.3).epsilon(1e-12));
  const FeaturePyramid three = FeaturePyramid::uniform({a, a, a});
  for (double w : three.weights) CHECK(w == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(perceptual_loss(three, pa), ValidationError);
}

TEST_CASE("gram matrix") {
  const Tensor g = gram_matrix(Tensor::filled({3, 2, 1}, 2.0));
  CHECK(g.dims() == Shape{1, 1});
  CHECK(g[0] == 4.0);
  // channel 0 lives on the left column, channel 1 on the right
  const Tensor split({2, 2, 2}, {1, 0, 0, 3, 2, 0, 0, 5});
  CHECK(gram_matrix(split).at(0, 1) == 0.0);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = oracle::random_tensor(rng, {2, 2, 2});
    CHECK(oracle::max_rel_diff(gram_matrix(f), oracle::gram(f)) < 1e-12);
  }
}

TEST_CASE("style loss") {
  std::mt19937_64 rng(43);
  const Tensor a = oracle::random_tensor(rng, {5, 4, 3}), b = oracle::random_tensor(rng, {5, 4, 3});
  const FeaturePyramid pa = FeaturePyramid::uniform({a}), pb = FeaturePyramid::uniform({b});
  CHECK(style_loss(pa, pa) == 0.0);
  const double base = style_loss(pa, pb);
  CHECK(style_loss(pa, FeaturePyramid::uniform({shuffled_pixels(b, rng)})) == doctest::Approx(base).epsilon(1e-12));
  CHECK(style_loss(FeaturePyramid::uniform({shuffled_pixels(a, rng)}), pb) == doctest::Approx(base).epsilon(1e-12));
  // 1 channel: G = mean f^2, so 1 vs 3 gives |1 - 9| = 8
  CHECK(style_loss(FeaturePyramid::uniform({Tensor::filled({2, 2, 1}, 1.0)}),
                   FeaturePyramid::uniform({Tensor::filled({2, 2, 1}, 3.0)})) == doctest::Approx(8.0));
}

TEST_CASE("contextual loss") {
  // mutually distant features: scaled one-hots
  const Tensor x({4, 4}, {3, 0, 0, 0, 0, 3, 0, 0, 0, 0, 3, 0, 0, 0, 0, 3});
  const double self = contextual_loss(x, x);
  CHECK(self < 0.05);
  CHECK(self >= 0.0);
  CHECK(self == doctest::Approx(oracle::contextual(x, x, 0.5)).epsilon(1e-12));
  CHECK(contextual_loss(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 3}, {4, 5, 6})) == 0.0);

  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracle::random_tensor(rng, {6, 5}), b = oracle::random_tensor(rng, {7, 5});
    const double v = contextual_loss(a, b);
    CHECK(v >= 0.0);
    CHECK(oracle::rel_diff(v, oracle::contextual(a, b, 0.5)) < 1e-10);
    CHECK(contextual_loss(a, shuffled_rows(b, rng)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(contextual_loss(a, a) < 1e-6);
  }
  CHECK_THROWS_AS(contextual_loss(Tensor::zeros({2, 3}), Tensor::zeros({2, 4})), ShapeError);
}

TEST_CASE("adversarial loss") {
  CHECK(adversarial_loss(Tensor::filled({3}, 0.5), Tensor::filled({3}, 0.5)) ==
        doctest::Approx(2 * std::log(0.5)).epsilon(1e-12));
  CHECK(std::abs(adversarial_loss(Tensor::filled({2}, 1.0), Tensor::filled({2}, 0.0))) < 1e-12);
  CHECK(adversarial_loss(Tensor::filled({2}, 0.0), Tensor::filled({2}, 0.0)) ==
        doctest::Approx(std::log(1e-7)).epsilon(1e-12));
  CHECK_THROWS_AS(adversarial_loss(Tensor::filled({1}, 1.5), Tensor::filled({1}, 0.5)), ValidationError);
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    CHECK(adversarial_loss(oracle::random_tensor(rng, {5}, 0, 1), oracle::random_tensor(rng, {5}, 0, 1)) <= 0.0);
  }
}

TEST_CASE("l1 loss") {
  std::mt19937_64 rng(46);
  const Tensor a = oracle::random_tensor(rng, {3, 4}), b = oracle::random_tensor(rng, {3, 4});
  CHECK(l1_loss(a, a) == 0.0);
  CHECK(l1_loss(a, plus(a, 0.2)) == doctest::Approx(0.2).epsilon(1e-12));
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) want += std::abs(a[i] - b[i]);
  CHECK(l1_loss(a, b) == doctest::Approx(want / a.size()).epsilon(1e-12));
}

TEST_CASE("total loss") {
  LossComponents ones{1, 1, 1, 1, 1, 1, 1, 1};
  CHECK(total_loss(ones).total == 53.0);
  CHECK(total_loss(LossComponents{}).total == 0.0);
  LossComponents l1only;
  l1only.l1 = 2.0;
  const TotalLoss t = total_loss(l1only);
  CHECK(t.total == 20.0);
  CHECK(t.weighted[0] == 20.0);
  LossComponents bad;
  bad.style = INFINITY;
  try {
    total_loss(bad);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("style") != std::string::npos);
  }
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(47);
  const Tensor x = oracle::random_tensor(rng, {20, 18}, 0, 1), y = oracle::random_tensor(rng, {20, 18}, 0, 1);
  const SsimResult self = ssim(x, x);
  CHECK(std::abs(self.mean - 1.0) < 1e-9);
  CHECK(self.map.dims() == Shape{10, 8});
  CHECK(std::abs(ssim(x, y).mean - ssim(y, x).mean) < 1e-9);

  const double c1 = 1e-4, c2 = 9e-4;
  const double closed = (2 * 0.5 * 0.6 + c1) * c2 / ((0.25 + 0.36 + c1) * c2);
  CHECK(std::abs(ssim(Tensor::filled({16, 16}, 0.5), Tensor::filled({16, 16}, 0.6)).mean - closed) < 1e-9);

  const SsimResult r = ssim(x, y);
  for (double v : r.map.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(r.map.at(i, j) - oracle::ssim_at(x, y, i + 5, j + 5)) < 1e-12);
  }
  CHECK_THROWS_AS(ssim(Tensor::zeros({10, 20}), Tensor::zeros({10, 20})), ValidationError);
}

TEST_CASE("ssim uses luma for colour images") {
  std::mt19937_64 rng(48);
  const Tensor a = oracle::random_tensor(rng, {12, 12, 3}, 0, 1), b = oracle::random_tensor(rng, {12, 12, 3}, 0, 1);
  const Tensor la = to_luma(a);
  CHECK(la.dims() == Shape{12, 12});
  CHECK(la.at(3, 4) == doctest::Approx(0.299 * a.at(3, 4, 0) + 0.587 * a.at(3, 4, 1) + 0.114 * a.at(3, 4, 2)));
  CHECK(ssim(a, b).mean == ssim(la, to_luma(b)).mean);
}

TEST_CASE("masked ssim") {
  std::mt19937_64 rng(49);
  const Tensor x = oracle::random_tensor(rng, {16, 16}, 0, 1), y = oracle::random_tensor(rng, {16, 16}, 0, 1);
  const SsimResult r = ssim(x, y);
  CHECK(masked_ssim(x, y, Tensor::filled({16, 16}, 1.0)) == doctest::Approx(r.mean).epsilon(1e-12));
  std::vector<double> one(256, 0.0);
  one[7 * 16 + 9] = 1.0;
  CHECK(masked_ssim(x, y, Tensor({16, 16}, one)) == r.map.at(2, 4));
  std::vector<double> half(256, 0.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t row = 0; row < 16; ++row) {
    for (std::size_t c = 0; c < 8; ++c) {
      half[row * 16 + c] = 1.0;
      if (row >= 5 && row < 11 && c >= 5) {
        sum += r.map.at(row - 5, c - 5);
        ++n;
      }
    }
  }
  CHECK(masked_ssim(x, y, Tensor({16, 16}, half)) == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK_THROWS_AS(masked_ssim(x, y, Tensor::zeros({16, 16})), ValidationError);
}

TEST_CASE("inception score") {
  CHECK(std::abs(inception_score(Tensor::filled({4, 5}, 0.2)) - 1.0) < 1e-9);
  std::vector<double> eye(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  CHECK(std::abs(inception_score(Tensor({4, 4}, eye)) - 4.0) < 1e-9);
  const double want = std::exp(0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5));
  CHECK(inception_score(Tensor({2, 2}, {0.8, 0.2, 0.2, 0.8})) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(1.21257).epsilon(1e-5));

  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = oracle::random_tensor(rng, {6, 4}, 0, 1);
    std::vector<double> v(p.data().begin(), p.data().end());
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += v[i * 4 + k];
      for (std::size_t k = 0; k < 4; ++k) v[i * 4 + k] /= s;
    }
    const double is = inception_score(Tensor({6, 4}, v));
    CHECK(is >= 1.0 - 1e-12);
    CHECK(is <= 4.0 + 1e-12);
  }
  CHECK_THROWS_AS(inception_score(Tensor({1, 2}, {0.7, 0.7})), ValidationError);
  CHECK_THROWS_AS(inception_score(Tensor({1, 2}, {-0.5, 1.5})), ValidationError);
}
