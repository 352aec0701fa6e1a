#pragma once

#include <span>
#include <string>

#include "dad/tensor.hpp"

namespace dad {

enum class LossVariant { Asymmetric, Bce };

const char* to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

struct LossConfig {
  double gamma_plus = 1.0;
  double gamma_minus = 3.0;
  // Log arguments y and 1 - y are clamped from below at clamp_eps.
  double clamp_eps = 1e-7;
  LossVariant variant = LossVariant::Asymmetric;

  // The focusing exponents actually used: (0, 0) for the BCE variant.
  double effective_gamma_plus() const { return variant == LossVariant::Bce ? 0.0 : gamma_plus; }
  double effective_gamma_minus() const { return variant == LossVariant::Bce ? 0.0 : gamma_minus; }
  void validate() const;
};

// Per-element asymmetric loss
//   -g (1 - y)^{gamma+} log(y) - (1 - g) y^{gamma-} log(1 - y)
// with both log arguments clamped from below at clamp_eps.
double asl_scalar(double g, double y, const LossConfig& cfg);
// d asl_scalar / dy. A clamped log contributes no derivative of its own; the
// focusing factor in front of it still does.
double asl_scalar_grad(double g, double y, const LossConfig& cfg);

// (1/T_valid) * sum_t mask_t * sum_c asl(g[t,c], y[t,c]). `labels` holds
// T x C values in {0, 1}. `mask` (length T, entries 0 or 1) excludes padded
// steps; an empty mask counts every step.
template <class T>
Tensor<T> assistant_loss(const Tensor<T>& predictions, std::span<const T> labels,
                         const LossConfig& cfg, std::span<const T> mask = {});

// alpha_fine * L(y_fine) + alpha_coarse * L(y_coarse), each term normalized
// as in assistant_loss. A head may be undefined, in which case its term is
// dropped and the remaining head gets weight 1.
template <class T>
Tensor<T> core_loss(const Tensor<T>& y_fine, const Tensor<T>& y_coarse, std::span<const T> labels,
                    const LossConfig& cfg, double alpha_fine, double alpha_coarse,
                    std::span<const T> mask = {});

}  // namespace dad
