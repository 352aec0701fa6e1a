#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dad/tensor.hpp"

namespace dad {

struct GradCheckOptions {
  double eps = 1e-6;
  // Coordinates checked per leaf; 0 checks every coordinate. Sampled
  // coordinates are drawn without replacement from `seed`.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error: the larger of absolute_floor
  // and scale_floor * (largest |numeric| among the checked coordinates).
  // Coordinates whose true gradient is zero (e.g. a key bias, which the
  // softmax cancels) then compare at the scale of the whole gradient instead
  // of at the difference quotient's round-off.
  double absolute_floor = 1e-8;
  double scale_floor = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
  // Location of the worst coordinate.
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double floor = 0.0;  // denominator floor actually used
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_gradient_error(double analytic, double numeric, double floor = 1e-8);

// Compares the analytic gradient of `f_analytic` with respect to `leaves`
// against central differences of `f_numeric` over `numeric_leaves`, which
// must mirror the analytic leaves one-to-one (same shapes). The numeric side
// may run in a wider precision; its leaf values are overwritten with the
// analytic leaf values before differencing. Both closures rebuild the scalar
// loss from the current leaf values and must be deterministic.
template <class A, class N>
GradCheckResult compare_gradients(const std::function<Tensor<A>()>& f_analytic,
                                  std::vector<Tensor<A>> leaves,
                                  const std::function<Tensor<N>()>& f_numeric,
                                  std::vector<Tensor<N>> numeric_leaves,
                                  const GradCheckOptions& options);

// Same-precision check of a scalar map of one tensor. `x` is copied into a
// fresh leaf that requires a gradient.
template <class T>
double finite_difference_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                               const Tensor<T>& x, double eps);

template <class T>
GradCheckResult finite_difference_check(const std::function<Tensor<T>()>& f,
                                        std::vector<Tensor<T>> leaves,
                                        const GradCheckOptions& options);

}  // namespace dad
