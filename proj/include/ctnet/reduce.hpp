#pragma once

#include <cstddef>
#include <span>

namespace ctnet {

/// Fixed-shape pairwise summation of term(i) over [begin, end).
///
/// The tree depends only on the range length, never on threading, so every
/// caller gets the same rounding for the same inputs.
template <class Fn>
double pairwise_sum(std::size_t begin, std::size_t end, const Fn& term) {
  const std::size_t n = end - begin;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = begin + n / 2;
  return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

inline double pairwise_sum(std::span<const double> values) {
  return pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; });
}

inline double pairwise_dot(const double* a, const double* b, std::size_t n) {
  return pairwise_sum(0, n, [&](std::size_t i) { return a[i] * b[i]; });
}

inline double pairwise_mean(std::span<const double> values) {
  return pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace ctnet
