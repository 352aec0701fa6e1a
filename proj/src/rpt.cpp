#include "dad/rpt.hpp"

#include <cmath>

#include "init.hpp"

namespace dad {

const char* to_string(PositionalEncoding p) {
  switch (p) {
    case PositionalEncoding::None: return "none";
    case PositionalEncoding::Absolute: return "absolute";
    case PositionalEncoding::Relative: return "relative";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

PositionalEncoding parse_positional(const std::string& s) {
  if (s == "none") return PositionalEncoding::None;
  if (s == "absolute") return PositionalEncoding::Absolute;
  if (s == "relative") return PositionalEncoding::Relative;
  throw ConfigError("unknown positional encoding '" + s + "' (expected none|absolute|relative)");
}

Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "' (expected gelu|relu|identity)");
}

void RptConfig::validate() const {
  if (heads == 0 || model_dim == 0) throw ConfigError("RPT model_dim and heads must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError("RPT model_dim " + std::to_string(model_dim) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
}

template <class T>
Tensor<T> sinusoidal_encoding(std::size_t length, std::size_t dim) {
  std::vector<T> values(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * freq;
      values[t * dim + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>({length, dim}, std::move(values));
}

template <class T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation a) {
  switch (a) {
    case Activation::Gelu: return gelu(x);
    case Activation::Relu: return relu(x);
    case Activation::Identity: return x;
  }
  return x;
}

template <class T>
LayerNormParams<T>::LayerNormParams(const std::string& prefix, std::size_t dim)
    : gain(init::constant<T>(prefix + ".gain", {dim}, T(1))),
      bias(init::constant<T>(prefix + ".bias", {dim}, T(0))) {}

template <class T>
RelativeEmbeddingTable<T>::RelativeEmbeddingTable(const std::string& prefix, const RptConfig& cfg,
                                                  RandomSource& rng)
    : r_clip(cfg.r_clip) {
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    omega.push_back(init::normal<T>(prefix + ".h" + std::to_string(h),
                                    {2 * cfg.r_clip + 1, cfg.head_dim()}, 0.02, rng));
  }
}

template <class T>
void RelativeEmbeddingTable<T>::collect(ParameterList<T>& out) {
  for (auto& p : omega) out.push_back(&p);
}

template <class T>
MultiHeadRelativeAttention<T>::MultiHeadRelativeAttention(const std::string& prefix,
                                                          const RptConfig& cfg, RandomSource& rng)
    : q_norm(prefix + ".q_norm", cfg.model_dim),
      k_norm(prefix + ".k_norm", cfg.model_dim),
      v_norm(prefix + ".v_norm", cfg.model_dim),
      w_q(init::fan_in_uniform<T>(prefix + ".w_q", {cfg.model_dim, cfg.model_dim}, cfg.model_dim, rng)),
      w_k(init::fan_in_uniform<T>(prefix + ".w_k", {cfg.model_dim, cfg.model_dim}, cfg.model_dim, rng)),
      w_v(init::fan_in_uniform<T>(prefix + ".w_v", {cfg.model_dim, cfg.model_dim}, cfg.model_dim, rng)),
      w_o(init::fan_in_uniform<T>(prefix + ".w_o", {cfg.model_dim, cfg.model_dim}, cfg.model_dim, rng)),
      cfg_(cfg) {
  cfg_.validate();
}

template <class T>
Tensor<T> MultiHeadRelativeAttention<T>::forward(const Tensor<T>& x,
                                                 const RelativeEmbeddingTable<T>* table,
                                                 std::vector<Tensor<T>>* attention_out) const {
  if (x.rank() != 2 || x.dim(1) != cfg_.model_dim) {
    throw ContractError("attention: input " + shape_str(x.shape()) + " does not match model_dim " +
                        std::to_string(cfg_.model_dim));
  }
  const bool relative = cfg_.positional == PositionalEncoding::Relative;
  if (relative && (!table || table->omega.size() != cfg_.heads)) {
    throw ContractError("attention: relative encoding requires one offset table per head");
  }
  const auto q = matmul(q_norm(x), w_q.value);
  const auto k = matmul(k_norm(x), w_k.value);
  const auto v = matmul(v_norm(x), w_v.value);
  const std::size_t dh = cfg_.head_dim();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

  std::vector<Tensor<T>> heads;
  heads.reserve(cfg_.heads);
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const auto qh = cfg_.heads == 1 ? q : slice_cols(q, h * dh, dh);
    const auto kh = cfg_.heads == 1 ? k : slice_cols(k, h * dh, dh);
    const auto vh = cfg_.heads == 1 ? v : slice_cols(v, h * dh, dh);
    auto scores = matmul_bt(qh, kh);
    if (relative) {
      scores = add(scores, relative_bias_skewed(qh, table->omega[h].value, table->r_clip));
    }
    const auto attn = softmax_rows(scale(scores, inv_sqrt));
    if (attention_out) attention_out->push_back(attn);
    heads.push_back(matmul(attn, vh));
  }
  const auto merged = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return add(matmul(merged, w_o.value), x);
}

template <class T>
void MultiHeadRelativeAttention<T>::collect(ParameterList<T>& out) {
  q_norm.collect(out);
  k_norm.collect(out);
  v_norm.collect(out);
  for (auto* p : {&w_q, &w_k, &w_v, &w_o}) out.push_back(p);
}

template <class T>
LocalRelational<T>::LocalRelational(const std::string& prefix, const RptConfig& cfg,
                                    RandomSource& rng)
    : norm(prefix + ".norm", cfg.model_dim), cfg_(cfg) {
  const std::size_t d = cfg.model_dim;
  lin1_w = init::fan_in_uniform<T>(prefix + ".lin1.weight", {d, d}, d, rng);
  lin1_b = init::fan_in_uniform<T>(prefix + ".lin1.bias", {d}, d, rng);
  conv_w = init::fan_in_uniform<T>(prefix + ".conv.weight", {3, d, d}, 3 * d, rng);
  conv_b = init::fan_in_uniform<T>(prefix + ".conv.bias", {d}, 3 * d, rng);
  lin2_w = init::fan_in_uniform<T>(prefix + ".lin2.weight", {d, d}, d, rng);
  lin2_b = init::fan_in_uniform<T>(prefix + ".lin2.bias", {d}, d, rng);
}

template <class T>
Tensor<T> LocalRelational<T>::forward(const Tensor<T>& x, bool training, RandomSource& rng) const {
  auto h = linear(norm(x), lin1_w.value, lin1_b.value);
  h = apply_activation(conv1d(h, conv_w.value, conv_b.value, 1, 1), cfg_.lr_activation);
  h = dropout(h, cfg_.dropout_rate, training, rng);
  h = dropout(linear(h, lin2_w.value, lin2_b.value), cfg_.dropout_rate, training, rng);
  return add(x, h);
}

template <class T>
void LocalRelational<T>::collect(ParameterList<T>& out) {
  norm.collect(out);
  for (auto* p : {&lin1_w, &lin1_b, &conv_w, &conv_b, &lin2_w, &lin2_b}) out.push_back(p);
}

template <class T>
RptBlock<T>::RptBlock(const std::string& prefix, const RptConfig& cfg, RandomSource& rng)
    : attention(prefix + ".attn", cfg, rng), local(prefix + ".lr", cfg, rng) {}

template <class T>
Tensor<T> RptBlock<T>::forward(const Tensor<T>& x, const RelativeEmbeddingTable<T>* table,
                               bool training, RandomSource& rng) const {
  return local.forward(attention.forward(x, table), training, rng);
}

template <class T>
void RptBlock<T>::collect(ParameterList<T>& out) {
  attention.collect(out);
  local.collect(out);
}

template <class T>
RptStack<T>::RptStack(const std::string& prefix, const RptConfig& cfg, std::size_t count,
                      bool share_tables, RandomSource& rng)
    : cfg_(cfg), share_tables_(share_tables) {
  cfg_.validate();
  for (std::size_t b = 0; b < count; ++b) {
    const std::string name = prefix + ".rpt" + std::to_string(b);
    blocks.emplace_back(name, cfg, rng);
    if (cfg.positional == PositionalEncoding::Relative && (!share_tables || b == 0)) {
      tables.emplace_back(share_tables ? prefix + ".omega" : name + ".omega", cfg, rng);
    }
  }
}

template <class T>
Tensor<T> RptStack<T>::forward(const Tensor<T>& x, bool training, RandomSource& rng) const {
  Tensor<T> h = x;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const RelativeEmbeddingTable<T>* table = nullptr;
    if (!tables.empty()) table = &tables[share_tables_ ? 0 : b];
    h = blocks[b].forward(h, table, training, rng);
  }
  return h;
}

template <class T>
void RptStack<T>::collect(ParameterList<T>& out) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].collect(out);
    if (!share_tables_ && b < tables.size()) tables[b].collect(out);
    if (share_tables_ && b == 0 && !tables.empty()) tables[0].collect(out);
  }
}

#define DAD_INSTANTIATE(T)                                                          \
  template Tensor<T> sinusoidal_encoding<T>(std::size_t, std::size_t);              \
  template Tensor<T> apply_activation<T>(const Tensor<T>&, Activation);             \
  template struct LayerNormParams<T>;                                               \
  template struct RelativeEmbeddingTable<T>;                                        \
  template class MultiHeadRelativeAttention<T>;                                     \
  template class LocalRelational<T>;                                                \
  template class RptBlock<T>;                                                       \
  template class RptStack<T>;

DAD_INSTANTIATE(float)
DAD_INSTANTIATE(double)

}  // namespace dad
