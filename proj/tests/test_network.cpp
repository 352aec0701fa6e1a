#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "dad/network.hpp"
#include "dad/ops.hpp"

using namespace dad;

namespace {

NetworkConfig small_config() {
  NetworkConfig c;
  c.tokens = 32;
  c.input_dim = 12;
  c.num_classes = 5;
  c.label_dim = 8;
  c.feature_dim = 8;
  c.blocks = 1;
  c.heads = 2;
  c.branches = 3;
  c.r_clip = 6;
  c.dropout = 0.0;
  return c;
}

Tensor<float> random_tokens(std::size_t T, std::size_t D, RandomSource& rng) {
  std::vector<float> v(T * D);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor<float>({T, D}, std::move(v));
}

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

void zero_params(const ParameterList<float>& params) {
  for (auto* p : params) {
    auto d = p->value.mutable_data();
    std::fill(d.begin(), d.end(), 0.0f);
  }
}

// True when zeroing branch i leaves every other branch's pre-sum output
// bitwise unchanged, for all i.
bool branches_independent(const NetworkConfig& cfg) {
  RandomSource init(3);
  Network<float> reference(cfg, init);
  RandomSource rng(4);
  auto tokens = random_tokens(cfg.tokens, cfg.input_dim, rng);
  RandomSource r0(0);
  const auto source = reference.fine_det_forward(tokens, false, r0);
  const auto base = reference.coarse_branch_outputs(source, false, r0);
  bool independent = true;
  for (std::size_t i = 1; i <= cfg.branches; ++i) {
    RandomSource again(3);
    Network<float> net(cfg, again);
    zero_params(net.coarse_branch_parameters(i));
    const auto outs = net.coarse_branch_outputs(source, false, r0);
    for (std::size_t j = 1; j <= cfg.branches; ++j) {
      if (j == i) continue;
      if (!same_bits(outs[j - 1], base[j - 1])) independent = false;
    }
  }
  return independent;
}

}  // namespace

TEST(Network, OutputShapesAndRange) {
  RandomSource rng(1);
  const auto cfg = small_config();
  Network<float> net(cfg, rng);
  auto tokens = random_tokens(cfg.tokens, cfg.input_dim, rng);
  auto out = net.core_forward(tokens, true, rng);
  ASSERT_TRUE(out.fine.defined());
  ASSERT_TRUE(out.coarse.defined());
  EXPECT_EQ(out.fine.shape(), (Shape{32, 5}));
  EXPECT_EQ(out.coarse.shape(), (Shape{32, 5}));
  auto y = net.predict(out);
  for (float v : y.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  std::vector<float> labels(32 * 5, 0.0f);
  for (std::size_t i = 0; i < labels.size(); i += 3) labels[i] = 1.0f;
  auto g_hat = net.ml_rel_forward(Tensor<float>({32, 5}, labels), true, rng);
  EXPECT_EQ(g_hat.shape(), (Shape{32, 8}));
  EXPECT_EQ(net.ml_clas_forward(g_hat).shape(), (Shape{32, 5}));
  EXPECT_EQ(net.fine_det_forward(tokens, false, rng).shape(), (Shape{32, 8}));
}

TEST(Network, ZeroClassifierGivesOneHalf) {
  RandomSource rng(2);
  const auto cfg = small_config();
  Network<float> net(cfg, rng);
  zero_params({&net.vid_clas_weight, &net.vid_clas_bias});
  auto y = net.predict(net.core_forward(random_tokens(32, 12, rng), false, rng));
  for (float v : y.data()) EXPECT_EQ(v, 0.5f);
}

TEST(Network, ClassifierIsPointwiseInTime) {
  RandomSource rng(5);
  Network<float> net(small_config(), rng);
  auto f = random_tokens(16, 8, rng);
  auto a = net.vid_clas_forward(f);
  std::vector<float> changed(f.data().begin(), f.data().end());
  for (std::size_t d = 0; d < 8; ++d) changed[7 * 8 + d] += 3.0f;
  auto b = net.vid_clas_forward(Tensor<float>({16, 8}, changed));
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t c = 0; c < 5; ++c) {
      if (t == 7) continue;
      EXPECT_EQ(a.at(t * 5 + c), b.at(t * 5 + c));
    }
}

TEST(Network, CopyIsBitwiseAndFreezes) {
  RandomSource rng(6);
  Network<float> net(small_config(), rng);
  EXPECT_TRUE(net.vid_clas_weight.frozen);
  for (float& v : net.ml_clas_weight.value.mutable_data()) v += 0.125f;
  net.copy_classifier_params();
  EXPECT_TRUE(same_bits(net.vid_clas_weight.value, net.ml_clas_weight.value));
  EXPECT_TRUE(same_bits(net.vid_clas_bias.value, net.ml_clas_bias.value));
  EXPECT_NE(net.vid_clas_weight.value.node(), net.ml_clas_weight.value.node());
}

TEST(Network, AssistantDisabledLeavesClassifierTrainable) {
  auto cfg = small_config();
  cfg.assistant_enabled = false;
  RandomSource rng(7);
  Network<float> net(cfg, rng);
  EXPECT_FALSE(net.vid_clas_weight.frozen);
}

TEST(Network, CopyRequiresMatchingWidths) {
  auto cfg = small_config();
  cfg.label_dim = 6;
  cfg.heads = 2;
  RandomSource rng(8);
  EXPECT_THROW(Network<float>(cfg, rng), ConfigError);
}

TEST(Network, ParameterNamesAreUniqueAndPartitioned) {
  RandomSource rng(9);
  Network<float> net(small_config(), rng);
  std::set<std::string> names;
  for (auto* p : net.parameters()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  for (auto* p : net.assistant_parameters()) EXPECT_EQ(p->name.rfind("assistant.", 0), 0u);
  for (auto* p : net.core_parameters()) EXPECT_EQ(p->name.rfind("core.", 0), 0u);
  EXPECT_NE(net.find("core.vid_clas.weight"), nullptr);
  EXPECT_EQ(net.find("nope"), nullptr);
}

TEST(Network, CoarseDetOnZeroInputIsFinite) {
  RandomSource rng(10);
  auto cfg = small_config();
  Network<float> net(cfg, rng);
  auto zero = Tensor<float>::zeros({32, cfg.feature_dim});
  auto y = net.coarse_det_forward(zero, false, rng);
  EXPECT_EQ(y.shape(), (Shape{32, cfg.feature_dim}));
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Network, CoarseDetRejectsUnalignedLengths) {
  RandomSource rng(11);
  auto cfg = small_config();
  Network<float> net(cfg, rng);
  EXPECT_THROW(net.coarse_det_forward(Tensor<float>::zeros({30, 8}), false, rng), ContractError);
  EXPECT_THROW(net.coarse_det_forward(Tensor<float>::zeros({4, 8}), false, rng),
               SequenceTooShortError);
  EXPECT_THROW(net.fine_det_forward(Tensor<float>::zeros({2, 12}), false, rng),
               SequenceTooShortError);
}

TEST(Network, NonHierarchicalBranchesAreIndependent) {
  auto cfg = small_config();
  EXPECT_TRUE(branches_independent(cfg));
  cfg.coarse_wiring = CoarseWiring::Hierarchical;
  EXPECT_FALSE(branches_independent(cfg));
}

TEST(Network, ModuleSwitches) {
  RandomSource rng(12);
  auto cfg = small_config();
  auto tokens = random_tokens(32, 12, rng);
  cfg.fine_enabled = false;
  {
    Network<float> net(cfg, rng);
    auto out = net.core_forward(tokens, false, rng);
    EXPECT_FALSE(out.fine.defined());
    EXPECT_TRUE(out.coarse.defined());
  }
  cfg.fine_enabled = true;
  cfg.coarse_enabled = false;
  {
    Network<float> net(cfg, rng);
    auto out = net.core_forward(tokens, false, rng);
    EXPECT_TRUE(out.fine.defined());
    EXPECT_FALSE(out.coarse.defined());
    EXPECT_EQ(cfg.length_multiple(), 1u);
  }
  cfg.fine_enabled = false;
  {
    Network<float> net(cfg, rng);
    auto out = net.core_forward(tokens, false, rng);
    ASSERT_TRUE(out.direct.defined());
    EXPECT_EQ(net.predict(out).shape(), (Shape{32, 5}));
  }
}

TEST(Fusion, ConvexCombination) {
  NetworkConfig cfg;
  cfg.alpha_fine = 0.1;
  cfg.alpha_coarse = 0.9;
  auto y = fuse_predictions(Tensor<double>({2}, {0.2, 1.0}), Tensor<double>({2}, {0.6, 0.0}), cfg);
  EXPECT_NEAR(y.at(0), 0.56, 1e-15);
  EXPECT_NEAR(y.at(1), 0.1, 1e-15);
  cfg.alpha_coarse = 0.5;
  EXPECT_THROW(fuse_predictions(Tensor<double>({1}, {0.5}), Tensor<double>({1}, {0.5}), cfg),
               ConfigError);
}

TEST(Network, TokensMustAlignWithStrideChain) {
  auto cfg = small_config();
  cfg.tokens = 36;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(small_config().length_multiple(), 8u);
}
