#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ctnet/fusion.hpp"
#include "ctnet/gradcheck.hpp"
#include "ctnet/layout.hpp"
#include "ctnet/losses.hpp"
#include "ctnet/ops.hpp"
#include "ctnet/warping.hpp"
#include "oracles.hpp"

namespace gradcases {

using namespace ctnet;

struct Case {
  std::string name;
  std::function<OperationPtr(std::mt19937_64&)> make_op;
  std::function<std::vector<Tensor>(std::mt19937_64&)> make_inputs;
  std::vector<std::size_t> wrt;
};

struct Outcome {
  std::string name;
  double worst = 0.0;
  std::size_t checks = 0;
  bool passed = true;
};

// b = a + s * u with |s| in [0.1, 1]: keeps |a - b| away from the kink of |.|.
inline Tensor offset_from(const Tensor& a, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(a.data().begin(), a.data().end());
  for (double& x : v) x += sign(rng) ? mag(rng) : -mag(rng);
  return Tensor(a.dims(), v);
}

inline std::vector<Point> lattice_points(std::size_t g, double lo, double hi) {
  return ControlGrid::uniform(g, {lo, lo, hi, hi}).source;
}

inline Tensor jittered_targets(std::size_t g, double lo, double hi, double amount, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> j(-amount, amount);
  std::vector<double> v;
  for (const Point& p : lattice_points(g, lo, hi)) {
    v.push_back(p.x + j(rng));
    v.push_back(p.y + j(rng));
  }
  return Tensor({g * g, 2}, v);
}

// Targets whose spline never samples within 0.01 of a pixel line, where
// bilinear sampling has a kink that central differences straddle.
inline Tensor smooth_tps_targets(std::mt19937_64& rng) {
  for (;;) {
    Tensor t = jittered_targets(3, 1.0, 6.0, 0.4, rng);
    const TpsTransform f = tps_fit(ControlGrid::uniform(3, {1.0, 1.0, 6.0, 6.0}).with_targets(t), 1e-6);
    bool clear = true;
    for (std::size_t r = 0; r < 8 && clear; ++r) {
      for (std::size_t col = 0; col < 8 && clear; ++col) {
        const Point q = f.map({static_cast<double>(col), static_cast<double>(r)});
        for (double v : {q.x, q.y}) clear = clear && std::abs(v - std::round(v)) > 0.01;
      }
    }
    if (clear) return t;
  }
}

inline SegmentationMap random_labels(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> l(h * w);
  for (auto& v : l) v = static_cast<std::uint8_t>(oracle::random_index(rng, 0, kLabelCount - 1));
  return SegmentationMap(h, w, l);
}

inline std::vector<Case> all_cases() {
  using oracle::random_tensor;
  std::vector<Case> c;
  // FD steps of 1e-3 cannot resolve alpha = 100 curvature, so the softmax
  // sharpness is lowered for the checks.
  c.push_back({"softmax_rows", [](auto&) { return std::make_shared<SoftmaxRowsOp>(2.0); },
               [](auto& rng) { return std::vector<Tensor>{random_tensor(rng, {4, 5})}; }, {0}});
  c.push_back({"dense_warp", [](auto&) { return std::make_shared<DenseWarpOp>(3, 3, 2.0); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {9, 16}), random_tensor(rng, {4, 4, 2})};
               },
               {0, 1}});
  c.push_back({"tps_apply",
               [](auto&) { return std::make_shared<TpsApplyOp>(3, lattice_points(3, 1.0, 6.0), 1e-6); },
               [](auto& rng) {
                 return std::vector<Tensor>{smooth_tps_targets(rng), random_tensor(rng, {8, 8, 2})};
               },
               {0, 1}});
  c.push_back({"second_order_constraint",
               [](auto&) { return std::make_shared<SecondOrderConstraintOp>(4, 1.0, 1.0); },
               [](auto& rng) { return std::vector<Tensor>{jittered_targets(4, 0.0, 30.0, 2.0, rng)}; }, {0}});
  c.push_back({"tps_loss", [](auto&) { return std::make_shared<TpsLossOp>(4); },
               [](auto& rng) {
                 const Tensor truth = random_tensor(rng, {4, 4, 3});
                 return std::vector<Tensor>{offset_from(truth, rng), truth, jittered_targets(4, 0.0, 30.0, 2.0, rng)};
               },
               {0, 1, 2}});
  c.push_back({"fuse_attention", [](auto&) { return std::make_shared<FuseAttentionOp>(); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {3, 4, 3}), random_tensor(rng, {3, 4, 3}),
                                            random_tensor(rng, {3, 4}, 0, 1)};
               },
               {0, 1, 2}});
  c.push_back({"attention_regularizer", [](auto&) { return std::make_shared<AttentionRegularizerOp>(); },
               [](auto& rng) { return std::vector<Tensor>{random_tensor(rng, {4, 5}, 0.0, 0.9)}; }, {0}});
  c.push_back({"perceptual_loss",
               [](auto&) { return std::make_shared<PerceptualLossOp>(std::vector<double>{0.5, 0.5}); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {4, 4, 3}), random_tensor(rng, {2, 2, 5}),
                                            random_tensor(rng, {4, 4, 3}), random_tensor(rng, {2, 2, 5})};
               },
               {0, 1, 2, 3}});
  c.push_back({"style_loss", [](auto&) { return std::make_shared<StyleLossOp>(2); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 2, 2}, -10, 10), random_tensor(rng, {2, 2, 2}, -10, 10),
                                            random_tensor(rng, {2, 2, 2}, -10, 10), random_tensor(rng, {2, 2, 2}, -10, 10)};
               },
               {0, 1, 2, 3}});
  c.push_back({"contextual_loss", [](auto&) { return std::make_shared<ContextualLossOp>(0.5); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {4, 16}, -10, 10), random_tensor(rng, {3, 16}, -10, 10)};
               },
               {0, 1}});
  c.push_back({"adversarial_loss", [](auto&) { return std::make_shared<AdversarialLossOp>(); },
               [](auto& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {6}, 0.1, 0.9), random_tensor(rng, {6}, 0.1, 0.9)};
               },
               {0, 1}});
  c.push_back({"l1_loss", [](auto&) { return std::make_shared<L1LossOp>(); },
               [](auto& rng) {
                 const Tensor a = random_tensor(rng, {3, 5});
                 return std::vector<Tensor>{a, offset_from(a, rng)};
               },
               {0, 1}});
  c.push_back({"total_loss", [](auto&) { return std::make_shared<TotalLossOp>(); },
               [](auto& rng) { return std::vector<Tensor>{random_tensor(rng, {8}, 0, 5)}; }, {0}});
  c.push_back({"cross_entropy_loss",
               [](auto& rng) { return std::make_shared<CrossEntropyOp>(random_labels(rng, 3, 3)); },
               [](auto& rng) { return std::vector<Tensor>{random_tensor(rng, {3, 3, kLabelCount}, -3, 3)}; }, {0}});
  return c;
}

/// Checks every listed input of a case at `points` random points.
inline Outcome run_case(const Case& gc, std::size_t points, std::uint64_t seed) {
  Outcome out{gc.name};
  std::mt19937_64 rng(seed);
  for (std::size_t p = 0; p < points; ++p) {
    const OperationPtr op = gc.make_op(rng);
    const std::vector<Tensor> inputs = gc.make_inputs(rng);
    const Tensor y = op->forward(inputs);
    const Tensor ct = oracle::random_tensor(rng, y.dims());
    for (std::size_t w : gc.wrt) {
      const GradCheckReport r = fd_check_gradient(op, inputs, w, ct);
      out.worst = std::max(out.worst, r.max_relative_error);
      out.passed = out.passed && r.passed;
      ++out.checks;
    }
  }
  return out;
}

}  // namespace gradcases
