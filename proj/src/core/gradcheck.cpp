#include "ctnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctnet/errors.hpp"
#include "ctnet/reduce.hpp"

namespace ctnet {
namespace {

Tensor evaluate(const TapeFunction& f, const Tensor& x, std::size_t coordinate) {
  try {
    GradientTape tape;
    const Var out = f(tape, tape.leaf(x));
    return tape.value(out);
  } catch (const NumericalError& e) {
    throw NumericalError("fd_check_gradient: non-finite forward value while perturbing coordinate " +
                         std::to_string(coordinate) + ": " + e.what());
  }
}

}  // namespace

GradCheckReport fd_check_gradient(const TapeFunction& f, const Tensor& point, const Tensor& cotangent,
                                  const GradCheckOptions& options) {
  if (point.precision() != Precision::f64) {
    throw ValidationError("fd_check_gradient requires a 64-bit point");
  }
  GradientTape tape;
  const Var x = tape.leaf(point);
  const Var y = f(tape, x);
  require_same_dims(tape.value(y), cotangent, "fd_check_gradient cotangent");
  const Tensor analytic = tape.backward(y, cotangent).of(x, tape);

  GradCheckReport report;
  const double h = options.step;
  std::vector<double> probe(point.data().begin(), point.data().end());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const Tensor plus = evaluate(f, Tensor(point.dims(), probe), i);
    probe[i] = original - h;
    const Tensor minus = evaluate(f, Tensor(point.dims(), probe), i);
    probe[i] = original;

    const double numeric =
        pairwise_sum(0, cotangent.size(), [&](std::size_t k) { return (plus[k] - minus[k]) * cotangent[k]; }) /
        (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    const double rel = std::abs(a - numeric) / denom;
    if (i == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = a;
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

GradCheckReport fd_check_gradient(const OperationPtr& op, std::span<const Tensor> inputs, std::size_t wrt,
                                  const Tensor& cotangent, const GradCheckOptions& options) {
  if (wrt >= inputs.size()) throw BoundsError("fd_check_gradient: input index out of range");
  std::vector<Tensor> fixed(inputs.begin(), inputs.end());
  TapeFunction f = [&](GradientTape& tape, Var x) {
    std::vector<Var> vars;
    for (std::size_t i = 0; i < fixed.size(); ++i) vars.push_back(i == wrt ? x : tape.leaf(fixed[i]));
    return tape.apply(op, std::move(vars));
  };
  return fd_check_gradient(f, inputs[wrt], cotangent, options);
}

}  // namespace ctnet
