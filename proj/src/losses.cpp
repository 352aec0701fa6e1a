#include "dad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dad/ops.hpp"

namespace dad {

const char* to_string(LossVariant v) { return v == LossVariant::Bce ? "bce" : "asymmetric"; }

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "asymmetric") return LossVariant::Asymmetric;
  if (s == "bce") return LossVariant::Bce;
  throw ConfigError("unknown loss variant '" + s + "' (expected asymmetric|bce)");
}

void LossConfig::validate() const {
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ConfigError("clamp_eps must lie in (0, 0.5)");
  if (gamma_plus < 0.0 || gamma_minus < 0.0) throw ConfigError("focusing exponents must be >= 0");
}

namespace {

// x^gamma with 0^0 = 1.
double power(double x, double gamma) { return gamma == 0.0 ? 1.0 : std::pow(x, gamma); }

// d/dx x^gamma, zero when gamma == 0.
double power_grad(double x, double gamma) {
  return gamma == 0.0 ? 0.0 : gamma * std::pow(x, gamma - 1.0);
}

}  // namespace

double asl_scalar(double g, double y, const LossConfig& cfg) {
  const double gp = cfg.effective_gamma_plus();
  const double gm = cfg.effective_gamma_minus();
  const double log_pos = std::log(std::max(y, cfg.clamp_eps));
  const double log_neg = std::log(std::max(1.0 - y, cfg.clamp_eps));
  return -g * power(1.0 - y, gp) * log_pos - (1.0 - g) * power(y, gm) * log_neg;
}

double asl_scalar_grad(double g, double y, const LossConfig& cfg) {
  const double gp = cfg.effective_gamma_plus();
  const double gm = cfg.effective_gamma_minus();
  const bool pos_clamped = y < cfg.clamp_eps;
  const bool neg_clamped = 1.0 - y < cfg.clamp_eps;
  const double log_pos = std::log(std::max(y, cfg.clamp_eps));
  const double log_neg = std::log(std::max(1.0 - y, cfg.clamp_eps));
  const double pos = power_grad(1.0 - y, gp) * log_pos - (pos_clamped ? 0.0 : power(1.0 - y, gp) / y);
  const double neg = -power_grad(y, gm) * log_neg + (neg_clamped ? 0.0 : power(y, gm) / (1.0 - y));
  return g * pos + (1.0 - g) * neg;
}

template <class T>
Tensor<T> assistant_loss(const Tensor<T>& predictions, std::span<const T> labels,
                         const LossConfig& cfg, std::span<const T> mask) {
  if (predictions.rank() != 2 || labels.size() != predictions.numel()) {
    throw ContractError("asymmetric loss: predictions " + shape_str(predictions.shape()) +
                        " do not match " + std::to_string(labels.size()) + " label values");
  }
  const std::size_t steps = predictions.dim(0), classes = predictions.dim(1);
  if (!mask.empty() && mask.size() != steps) {
    throw ContractError("asymmetric loss: mask length " + std::to_string(mask.size()) +
                        " does not match " + std::to_string(steps) + " steps");
  }
  double valid = 0.0;
  for (std::size_t t = 0; t < steps; ++t) valid += mask.empty() ? 1.0 : static_cast<double>(mask[t]);
  if (valid <= 0.0) throw ContractError("asymmetric loss: every step is masked out");

  auto weights = std::make_shared<std::vector<double>>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    (*weights)[t] = (mask.empty() ? 1.0 : static_cast<double>(mask[t])) / valid;
  }
  auto targets = std::make_shared<std::vector<T>>(labels.begin(), labels.end());
  const auto y = predictions.data();
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    if ((*weights)[t] == 0.0) continue;
    double row = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      row += asl_scalar(static_cast<double>((*targets)[t * classes + c]),
                        static_cast<double>(y[t * classes + c]), cfg);
    }
    total += (*weights)[t] * row;
  }
  return make_result<T>({1}, {static_cast<T>(total)}, "asymmetric_loss", {predictions},
                        [=](Node<T>& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    T* dy = parent.grad_data();
    const double upstream = static_cast<double>(self.grad[0]);
    for (std::size_t t = 0; t < steps; ++t) {
      const double w = (*weights)[t] * upstream;
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t i = t * classes + c;
        dy[i] += static_cast<T>(
            w * asl_scalar_grad(static_cast<double>((*targets)[i]),
                                static_cast<double>(parent.value[i]), cfg));
      }
    }
  });
}

template <class T>
Tensor<T> core_loss(const Tensor<T>& y_fine, const Tensor<T>& y_coarse, std::span<const T> labels,
                    const LossConfig& cfg, double alpha_fine, double alpha_coarse,
                    std::span<const T> mask) {
  if (!y_fine.defined() && !y_coarse.defined()) throw ContractError("core loss: no prediction heads");
  if (!y_coarse.defined()) return assistant_loss(y_fine, labels, cfg, mask);
  if (!y_fine.defined()) return assistant_loss(y_coarse, labels, cfg, mask);
  return weighted_sum(assistant_loss(y_fine, labels, cfg, mask), static_cast<T>(alpha_fine),
                      assistant_loss(y_coarse, labels, cfg, mask), static_cast<T>(alpha_coarse));
}

#define DAD_INSTANTIATE(T)                                                                     \
  template Tensor<T> assistant_loss<T>(const Tensor<T>&, std::span<const T>, const LossConfig&, \
                                       std::span<const T>);                                    \
  template Tensor<T> core_loss<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,      \
                                  const LossConfig&, double, double, std::span<const T>);

DAD_INSTANTIATE(float)
DAD_INSTANTIATE(double)

}  // namespace dad
