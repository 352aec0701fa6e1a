#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dad/losses.hpp"
#include "dad/ops.hpp"

using namespace dad;

namespace {

double bce(double g, double y) { return -g * std::log(y) - (1.0 - g) * std::log(1.0 - y); }

LossConfig asl(double gp, double gm) {
  LossConfig c;
  c.gamma_plus = gp;
  c.gamma_minus = gm;
  return c;
}

}  // namespace

TEST(AsymmetricLoss, HandValues) {
  EXPECT_NEAR(asl_scalar(1.0, 0.5, asl(1.0, 3.0)), 0.34657, 1e-5);
  EXPECT_NEAR(asl_scalar(0.0, 0.5, asl(1.0, 3.0)), 0.08664, 1e-5);
}

TEST(AsymmetricLoss, ZeroFocusingEqualsBceOnGrid) {
  const LossConfig cfg = asl(0.0, 0.0);
  for (int i = 0; i < 100; ++i) {
    const double g = i / 99.0;
    for (int j = 0; j < 100; ++j) {
      const double y = (j + 0.5) / 100.0;
      ASSERT_NEAR(asl_scalar(g, y, cfg), bce(g, y), 1e-7) << g << " " << y;
    }
  }
}

TEST(AsymmetricLoss, BceVariantIgnoresGammas) {
  LossConfig cfg = asl(2.0, 4.0);
  cfg.variant = LossVariant::Bce;
  EXPECT_EQ(cfg.effective_gamma_plus(), 0.0);
  EXPECT_NEAR(asl_scalar(1.0, 0.3, cfg), -std::log(0.3), 1e-12);
}

TEST(AsymmetricLoss, NonNegativeAndMonotone) {
  const LossConfig cfg = asl(1.0, 3.0);
  double prev_pos = 1e300, prev_neg = -1.0;
  for (int j = 1; j < 200; ++j) {
    const double y = j / 200.0;
    const double lp = asl_scalar(1.0, y, cfg);
    const double ln = asl_scalar(0.0, y, cfg);
    EXPECT_GE(lp, 0.0);
    EXPECT_GE(ln, 0.0);
    EXPECT_LT(lp, prev_pos);  // positives: falls as y rises
    EXPECT_GT(ln, prev_neg);  // negatives: rises with y
    prev_pos = lp;
    prev_neg = ln;
    EXPECT_LT(asl_scalar(1.0, y, cfg), 0.0 + asl_scalar(1.0, y, asl(0.0, 3.0)) + 1e-15);
  }
}

TEST(AsymmetricLoss, GradientSigns) {
  const LossConfig cfg = asl(1.0, 3.0);
  for (double y : {0.01, 0.2, 0.5, 0.8, 0.99}) {
    EXPECT_LT(asl_scalar_grad(1.0, y, cfg), 0.0);
    EXPECT_GT(asl_scalar_grad(0.0, y, cfg), 0.0);
    const double h = 1e-6;
    for (double g : {0.0, 1.0}) {
      const double num = (asl_scalar(g, y + h, cfg) - asl_scalar(g, y - h, cfg)) / (2 * h);
      EXPECT_NEAR(asl_scalar_grad(g, y, cfg), num, 1e-5 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST(AsymmetricLoss, ClampKeepsSaturatedPredictionsFinite) {
  const LossConfig cfg = asl(1.0, 3.0);
  EXPECT_TRUE(std::isfinite(asl_scalar(1.0, 0.0, cfg)));
  EXPECT_TRUE(std::isfinite(asl_scalar(0.0, 1.0, cfg)));
  EXPECT_NEAR(asl_scalar(1.0, 0.0, cfg), -std::log(cfg.clamp_eps), 1e-9);
  EXPECT_TRUE(std::isfinite(asl_scalar_grad(1.0, 0.0, cfg)));
}

TEST(AsymmetricLoss, TensorFormIsStepAverage) {
  const LossConfig cfg = asl(1.0, 3.0);
  const std::vector<double> y = {0.2, 0.7, 0.9, 0.4, 0.5, 0.1};
  const std::vector<double> g = {1, 0, 1, 1, 0, 0};
  auto pred = Tensor<double>({3, 2}, y, true);
  auto L = assistant_loss(pred, std::span<const double>(g), cfg);
  double ref = 0.0;
  for (std::size_t i = 0; i < 6; ++i) ref += asl_scalar(g[i], y[i], cfg);
  EXPECT_NEAR(L.item(), ref / 3.0, 1e-12);
  backward(L);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(pred.grad()[i], asl_scalar_grad(g[i], y[i], cfg) / 3.0, 1e-12);
  }
}

TEST(AsymmetricLoss, InvariantToRepeatingTheSequence) {
  const LossConfig cfg = asl(1.0, 3.0);
  const std::vector<double> y = {0.2, 0.7, 0.9, 0.4};
  const std::vector<double> g = {1, 0, 0, 1};
  std::vector<double> y2 = y, g2 = g;
  y2.insert(y2.end(), y.begin(), y.end());
  g2.insert(g2.end(), g.begin(), g.end());
  auto a = assistant_loss(Tensor<double>({2, 2}, y), std::span<const double>(g), cfg);
  auto b = assistant_loss(Tensor<double>({4, 2}, y2), std::span<const double>(g2), cfg);
  EXPECT_NEAR(a.item(), b.item(), 1e-12);
}

TEST(AsymmetricLoss, MaskExcludesPaddedSteps) {
  const LossConfig cfg = asl(1.0, 3.0);
  const std::vector<double> y = {0.2, 0.7, 0.9, 0.4};
  const std::vector<double> g = {1, 0, 0, 1};
  const std::vector<double> mask = {1, 0};
  auto full = assistant_loss(Tensor<double>({1, 2}, {0.2, 0.7}), std::span<const double>(g.data(), 2), cfg);
  auto masked = assistant_loss(Tensor<double>({2, 2}, y), std::span<const double>(g), cfg,
                               std::span<const double>(mask));
  EXPECT_NEAR(full.item(), masked.item(), 1e-12);
}

TEST(CoreLoss, WeightsTheTwoHeads) {
  const LossConfig cfg = asl(1.0, 3.0);
  const std::vector<double> g = {1, 0, 0, 1};
  auto f = Tensor<double>({2, 2}, {0.6, 0.3, 0.2, 0.8});
  auto c = Tensor<double>({2, 2}, {0.4, 0.1, 0.5, 0.7});
  const auto gs = std::span<const double>(g);
  const double lf = assistant_loss(f, gs, cfg).item();
  const double lc = assistant_loss(c, gs, cfg).item();
  EXPECT_NEAR(core_loss(f, c, gs, cfg, 0.1, 0.9).item(), 0.1 * lf + 0.9 * lc, 1e-12);
  EXPECT_NEAR(core_loss(f, Tensor<double>(), gs, cfg, 0.1, 0.9).item(), lf, 1e-12);
  EXPECT_NEAR(core_loss(Tensor<double>(), c, gs, cfg, 0.1, 0.9).item(), lc, 1e-12);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  c.gamma_minus = -1.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(parse_loss_variant("bce"), LossVariant::Bce);
  EXPECT_THROW(parse_loss_variant("focal"), Error);
}
