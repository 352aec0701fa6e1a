#include "dad/network.hpp"

#include <algorithm>
#include <cmath>

#include "dad/ops.hpp"
#include "init.hpp"

namespace dad {

const char* to_string(CoarseWiring w) {
  return w == CoarseWiring::Hierarchical ? "hierarchical" : "non_hierarchical";
}

const char* to_string(CoarseInput c) { return c == CoarseInput::Tokens ? "tokens" : "fine"; }

CoarseWiring parse_coarse_wiring(const std::string& s) {
  if (s == "non_hierarchical") return CoarseWiring::NonHierarchical;
  if (s == "hierarchical") return CoarseWiring::Hierarchical;
  throw ConfigError("unknown coarse wiring '" + s + "' (expected non_hierarchical|hierarchical)");
}

CoarseInput parse_coarse_input(const std::string& s) {
  if (s == "fine") return CoarseInput::Fine;
  if (s == "tokens") return CoarseInput::Tokens;
  throw ConfigError("unknown coarse input '" + s + "' (expected fine|tokens)");
}

void NetworkConfig::validate() const {
  if (label_dim != feature_dim) {
    throw ConfigError("label_dim (C*=" + std::to_string(label_dim) + ") must equal feature_dim (D*=" +
                      std::to_string(feature_dim) + ") so Vid-CLAS can copy ML-CLAS");
  }
  if (tokens < 3) throw ConfigError("tokens per clip must be >= 3");
  if (input_dim == 0 || num_classes == 0 || feature_dim == 0) {
    throw ConfigError("input_dim, num_classes and feature_dim must be positive");
  }
  if (std::abs(alpha_fine + alpha_coarse - 1.0) > 1e-9) {
    throw ConfigError("alpha_fine + alpha_coarse must equal 1");
  }
  if (alpha_fine < 0.0 || alpha_coarse < 0.0) throw ConfigError("fusion weights must be >= 0");
  if (coarse_enabled) {
    if (branches == 0 || branches > 16) throw ConfigError("branches (F) must lie in [1, 16]");
    if (tokens % length_multiple() != 0) {
      throw ConfigError("tokens (" + std::to_string(tokens) + ") must be a multiple of 2^F = " +
                        std::to_string(length_multiple()));
    }
  }
  rpt(feature_dim).validate();
}

RptConfig NetworkConfig::rpt(std::size_t model_dim) const {
  RptConfig r;
  r.model_dim = model_dim;
  r.heads = heads;
  r.r_clip = r_clip;
  r.dropout_rate = dropout;
  r.positional = positional;
  r.lr_activation = lr_activation;
  return r;
}

std::size_t NetworkConfig::length_multiple() const {
  return coarse_enabled ? (std::size_t{1} << branches) : 1;
}

NetworkConfig desk_network_config() { return NetworkConfig{}; }

NetworkConfig paper_network_config() {
  NetworkConfig c;
  c.tokens = 256;
  c.input_dim = 1024;
  c.num_classes = 157;
  c.label_dim = 512;
  c.feature_dim = 512;
  c.blocks = 3;
  c.heads = 8;
  c.branches = 3;
  c.alpha_fine = 0.1;
  c.alpha_coarse = 0.9;
  c.r_clip = 128;
  return c;
}

template <class T>
Tensor<T> fuse_predictions(const Tensor<T>& y_fine, const Tensor<T>& y_coarse,
                           const NetworkConfig& cfg) {
  if (std::abs(cfg.alpha_fine + cfg.alpha_coarse - 1.0) > 1e-9) {
    throw ConfigError("fusion weights must sum to 1");
  }
  return weighted_sum(y_fine, static_cast<T>(cfg.alpha_fine), y_coarse,
                      static_cast<T>(cfg.alpha_coarse));
}

template <class T>
void Network<T>::Stage::collect(ParameterList<T>& out) {
  out.push_back(&conv_w);
  out.push_back(&conv_b);
  norm.collect(out);
  rpts.collect(out);
}

template <class T>
typename Network<T>::Stage Network<T>::make_stage(const std::string& prefix, std::size_t in_dim,
                                                  std::size_t stride, std::size_t rpt_blocks,
                                                  RandomSource& rng) const {
  const std::size_t d = cfg_.feature_dim;
  Stage s;
  s.conv_w = init::fan_in_uniform<T>(prefix + ".conv.weight", {3, in_dim, d}, 3 * in_dim, rng);
  s.conv_b = init::fan_in_uniform<T>(prefix + ".conv.bias", {d}, 3 * in_dim, rng);
  s.norm = LayerNormParams<T>(prefix + ".norm", d);
  s.rpts = RptStack<T>(prefix, cfg_.rpt(d), rpt_blocks, cfg_.share_offset_tables, rng);
  s.stride = stride;
  return s;
}

template <class T>
Network<T>::Network(const NetworkConfig& cfg, RandomSource& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.feature_dim;
  const std::size_t c = cfg_.num_classes;

  ml_rel_ = make_stage("assistant.ml_rel", c, 1, cfg_.blocks, rng);
  ml_clas_weight = init::fan_in_uniform<T>("assistant.ml_clas.weight", {1, cfg_.label_dim, c},
                                           cfg_.label_dim, rng);
  ml_clas_bias = init::fan_in_uniform<T>("assistant.ml_clas.bias", {c}, cfg_.label_dim, rng);

  const bool any_core = cfg_.fine_enabled || cfg_.coarse_enabled;
  if (any_core) {
    fine_ = make_stage("core.fine", cfg_.input_dim, 1, cfg_.fine_enabled ? cfg_.blocks : 0, rng);
  }
  if (cfg_.coarse_enabled) {
    for (std::size_t i = 1; i <= cfg_.branches; ++i) {
      const bool hierarchical = cfg_.coarse_wiring == CoarseWiring::Hierarchical;
      const bool from_tokens = cfg_.coarse_input == CoarseInput::Tokens && (!hierarchical || i == 1);
      const std::size_t stride = hierarchical ? 2 : (std::size_t{1} << i);
      coarse_.push_back(make_stage("core.coarse.branch" + std::to_string(i),
                                   from_tokens ? cfg_.input_dim : d, stride, cfg_.blocks, rng));
    }
  }
  vid_clas_weight = init::fan_in_uniform<T>("core.vid_clas.weight", {1, d, c}, d, rng);
  vid_clas_bias = init::fan_in_uniform<T>("core.vid_clas.bias", {c}, d, rng);
  if (!any_core) {
    direct_w_ = init::fan_in_uniform<T>("core.direct.weight", {1, cfg_.input_dim, c},
                                        cfg_.input_dim, rng);
    direct_b_ = init::fan_in_uniform<T>("core.direct.bias", {c}, cfg_.input_dim, rng);
  }
  if (cfg_.assistant_enabled && any_core) copy_classifier_params();
}

template <class T>
Tensor<T> Network<T>::with_absolute_encoding(const Tensor<T>& x) const {
  if (cfg_.positional != PositionalEncoding::Absolute) return x;
  return add(x, sinusoidal_encoding<T>(x.dim(0), x.dim(1)));
}

template <class T>
Tensor<T> Network<T>::run_stage(const Stage& stage, Tensor<T> x, bool training, RandomSource& rng,
                                bool run_rpts) const {
  auto h = conv1d(x, stage.conv_w.value, stage.conv_b.value, stage.stride, 1);
  h = stage.norm(h);
  if (run_rpts) h = stage.rpts.forward(h, training, rng);
  return h;
}

template <class T>
Tensor<T> Network<T>::ml_rel_forward(const Tensor<T>& labels, bool training,
                                     RandomSource& rng) const {
  if (labels.rank() != 2 || labels.dim(1) != cfg_.num_classes) {
    throw ContractError("ML-Rel: labels " + shape_str(labels.shape()) + " do not have " +
                        std::to_string(cfg_.num_classes) + " classes");
  }
  if (labels.dim(0) < 3) throw SequenceTooShortError("ML-Rel: sequence shorter than 3 steps");
  auto h = ml_rel_.norm(conv1d(labels, ml_rel_.conv_w.value, ml_rel_.conv_b.value, 1, 1));
  return ml_rel_.rpts.forward(with_absolute_encoding(h), training, rng);
}

template <class T>
Tensor<T> Network<T>::ml_clas_forward(const Tensor<T>& g_hat) const {
  return sigmoid(conv1d(g_hat, ml_clas_weight.value, ml_clas_bias.value, 1, 0));
}

template <class T>
Tensor<T> Network<T>::fine_det_forward(const Tensor<T>& tokens, bool training,
                                       RandomSource& rng) const {
  if (!cfg_.fine_enabled && !cfg_.coarse_enabled) {
    throw ContractError("Fine-Det is not part of this network configuration");
  }
  if (tokens.rank() != 2 || tokens.dim(1) != cfg_.input_dim) {
    throw ContractError("Fine-Det: tokens " + shape_str(tokens.shape()) + " do not have dimension " +
                        std::to_string(cfg_.input_dim));
  }
  if (tokens.dim(0) < 3) throw SequenceTooShortError("Fine-Det: sequence shorter than 3 steps");
  auto h = fine_.norm(conv1d(tokens, fine_.conv_w.value, fine_.conv_b.value, 1, 1));
  return fine_.rpts.forward(with_absolute_encoding(h), training, rng);
}

template <class T>
std::vector<Tensor<T>> Network<T>::coarse_branch_outputs(const Tensor<T>& source, bool training,
                                                         RandomSource& rng) const {
  if (!cfg_.coarse_enabled) throw ContractError("Coarse-Det is disabled in this configuration");
  const std::size_t length = source.dim(0);
  const std::size_t multiple = cfg_.length_multiple();
  if (length < multiple) {
    throw SequenceTooShortError("Coarse-Det: length " + std::to_string(length) +
                                " is shorter than 2^F = " + std::to_string(multiple));
  }
  if (length % multiple != 0) {
    throw ContractError("Coarse-Det: length " + std::to_string(length) +
                        " is not a multiple of 2^F = " + std::to_string(multiple));
  }
  std::vector<Tensor<T>> outs;
  Tensor<T> chain = source;
  for (const auto& stage : coarse_) {
    const bool hierarchical = cfg_.coarse_wiring == CoarseWiring::Hierarchical;
    auto h = run_stage(stage, hierarchical ? chain : source, training, rng);
    chain = h;
    outs.push_back(upsample_linear(h, length));
  }
  return outs;
}

template <class T>
Tensor<T> Network<T>::coarse_det_forward(const Tensor<T>& source, bool training,
                                         RandomSource& rng) const {
  auto outs = coarse_branch_outputs(source, training, rng);
  Tensor<T> total = outs.front();
  for (std::size_t i = 1; i < outs.size(); ++i) total = add(total, outs[i]);
  return total;
}

template <class T>
Tensor<T> Network<T>::vid_clas_forward(const Tensor<T>& features) const {
  return sigmoid(conv1d(features, vid_clas_weight.value, vid_clas_bias.value, 1, 0));
}

template <class T>
CoreOutput<T> Network<T>::core_forward(const Tensor<T>& tokens, bool training,
                                       RandomSource& rng) const {
  CoreOutput<T> out;
  if (!cfg_.fine_enabled && !cfg_.coarse_enabled) {
    out.direct = sigmoid(conv1d(tokens, direct_w_.value, direct_b_.value, 1, 0));
    return out;
  }
  const auto fine = fine_det_forward(tokens, training, rng);
  if (cfg_.fine_enabled) out.fine = vid_clas_forward(fine);
  if (cfg_.coarse_enabled) {
    const auto& source = cfg_.coarse_input == CoarseInput::Tokens ? tokens : fine;
    out.coarse = vid_clas_forward(coarse_det_forward(source, training, rng));
  }
  return out;
}

template <class T>
Tensor<T> Network<T>::predict(const CoreOutput<T>& out) const {
  if (out.direct.defined()) return out.direct;
  if (out.fine.defined() && out.coarse.defined()) return fuse_predictions(out.fine, out.coarse, cfg_);
  return out.fine.defined() ? out.fine : out.coarse;
}

template <class T>
void Network<T>::copy_classifier_params() {
  if (ml_clas_weight.value.shape() != vid_clas_weight.value.shape() ||
      ml_clas_bias.value.shape() != vid_clas_bias.value.shape()) {
    throw ConfigError("cannot copy ML-CLAS " + shape_str(ml_clas_weight.value.shape()) +
                      " into Vid-CLAS " + shape_str(vid_clas_weight.value.shape()) +
                      " (C* != D*)");
  }
  auto copy = [](const Parameter<T>& src, Parameter<T>& dst) {
    std::copy(src.value.data().begin(), src.value.data().end(), dst.value.mutable_data().begin());
    dst.frozen = true;
  };
  copy(ml_clas_weight, vid_clas_weight);
  copy(ml_clas_bias, vid_clas_bias);
}

template <class T>
ParameterList<T> Network<T>::assistant_parameters() {
  ParameterList<T> out;
  ml_rel_.collect(out);
  out.push_back(&ml_clas_weight);
  out.push_back(&ml_clas_bias);
  return out;
}

template <class T>
ParameterList<T> Network<T>::core_parameters() {
  ParameterList<T> out;
  if (cfg_.fine_enabled || cfg_.coarse_enabled) {
    fine_.collect(out);
    for (auto& stage : coarse_) stage.collect(out);
    out.push_back(&vid_clas_weight);
    out.push_back(&vid_clas_bias);
  } else {
    out.push_back(&direct_w_);
    out.push_back(&direct_b_);
  }
  return out;
}

template <class T>
ParameterList<T> Network<T>::parameters() {
  auto out = assistant_parameters();
  auto core = core_parameters();
  out.insert(out.end(), core.begin(), core.end());
  return out;
}

template <class T>
Parameter<T>* Network<T>::find(const std::string& name) {
  for (auto* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

template <class T>
ParameterList<T> Network<T>::coarse_branch_parameters(std::size_t branch) {
  if (branch == 0 || branch > coarse_.size()) {
    throw ContractError("no Coarse-Det branch " + std::to_string(branch));
  }
  ParameterList<T> out;
  coarse_[branch - 1].collect(out);
  return out;
}

template Tensor<float> fuse_predictions<float>(const Tensor<float>&, const Tensor<float>&,
                                               const NetworkConfig&);
template Tensor<double> fuse_predictions<double>(const Tensor<double>&, const Tensor<double>&,
                                                 const NetworkConfig&);
template class Network<float>;
template class Network<double>;

}  // namespace dad
