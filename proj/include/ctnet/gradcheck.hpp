#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "ctnet/tape.hpp"

namespace ctnet {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Lower bound on the relative-error denominator.
  double floor = 1e-8;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool passed = false;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Builds a graph on the tape from a single leaf and returns the output.
using TapeFunction = std::function<Var(GradientTape&, Var)>;

/// Compares the tape's vector-Jacobian product with central differences.
///
/// For every coordinate i of point, the numeric directional derivative
/// <f(x + h e_i) - f(x - h e_i), cotangent> / 2h is compared with the
/// analytic cotangent; relative error is |a - n| / max(|a|, |n|, floor).
/// Requires a 64-bit point. Throws NumericalError naming the coordinate if
/// any forward evaluation is non-finite.
GradCheckReport fd_check_gradient(const TapeFunction& f, const Tensor& point, const Tensor& cotangent,
                                  const GradCheckOptions& options = {});

/// Checks one input of a multi-input operation, holding the others fixed.
GradCheckReport fd_check_gradient(const OperationPtr& op, std::span<const Tensor> inputs, std::size_t wrt,
                                  const Tensor& cotangent, const GradCheckOptions& options = {});

}  // namespace ctnet
