#pragma once

// Relative positional transformer (RPT) block: pre-norm multi-head
// self-attention with a query-dependent relative positional bias, followed by
// the local relational (LR) stack.

#include <cstddef>
#include <string>
#include <vector>

#include "dad/ops.hpp"
#include "dad/random.hpp"
#include "dad/tensor.hpp"

namespace dad {

enum class PositionalEncoding { None, Absolute, Relative };
enum class Activation { Gelu, Relu, Identity };

const char* to_string(PositionalEncoding p);
const char* to_string(Activation a);
PositionalEncoding parse_positional(const std::string& s);
Activation parse_activation(const std::string& s);

struct RptConfig {
  std::size_t model_dim = 16;
  std::size_t heads = 4;
  std::size_t r_clip = 32;
  double dropout_rate = 0.1;
  // Only Relative adds the bias term inside attention. Absolute encodings are
  // added to the stage inputs by the caller (see sinusoidal_encoding).
  PositionalEncoding positional = PositionalEncoding::Relative;
  Activation lr_activation = Activation::Gelu;

  std::size_t head_dim() const { return model_dim / heads; }
  void validate() const;
};

// Sinusoidal table [length x dim] for the absolute-encoding ablation.
template <class T>
Tensor<T> sinusoidal_encoding(std::size_t length, std::size_t dim);

template <class T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation a);

template <class T>
struct LayerNormParams {
  Parameter<T> gain;
  Parameter<T> bias;

  LayerNormParams() = default;
  LayerNormParams(const std::string& prefix, std::size_t dim);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gain.value, bias.value); }
  void collect(ParameterList<T>& out) { out.push_back(&gain); out.push_back(&bias); }
};

// Per-head offset embeddings, each [(2 r_clip + 1) x D_h]. Row
// clamp(delta, -r_clip, r_clip) + r_clip holds the embedding for offset delta.
template <class T>
struct RelativeEmbeddingTable {
  std::vector<Parameter<T>> omega;
  std::size_t r_clip = 0;

  RelativeEmbeddingTable() = default;
  RelativeEmbeddingTable(const std::string& prefix, const RptConfig& cfg, RandomSource& rng);
  void collect(ParameterList<T>& out);
};

template <class T>
class MultiHeadRelativeAttention {
 public:
  MultiHeadRelativeAttention() = default;
  MultiHeadRelativeAttention(const std::string& prefix, const RptConfig& cfg, RandomSource& rng);

  // O = concat_h(softmax((Q_h K_h^T + P_h) / sqrt(D_h)) V_h) W^o + X.
  // `table` may be null unless cfg.positional == Relative. When
  // `attention_out` is given it receives each head's attention matrix.
  Tensor<T> forward(const Tensor<T>& x, const RelativeEmbeddingTable<T>* table,
                    std::vector<Tensor<T>>* attention_out = nullptr) const;

  void collect(ParameterList<T>& out);

  LayerNormParams<T> q_norm, k_norm, v_norm;
  Parameter<T> w_q, w_k, w_v, w_o;

 private:
  RptConfig cfg_;
};

// Nrm, Linear, Conv(k=3, s=1), activation, Drp, Linear, Drp with a residual
// around the whole stack.
template <class T>
class LocalRelational {
 public:
  LocalRelational() = default;
  LocalRelational(const std::string& prefix, const RptConfig& cfg, RandomSource& rng);

  Tensor<T> forward(const Tensor<T>& x, bool training, RandomSource& rng) const;
  void collect(ParameterList<T>& out);

  LayerNormParams<T> norm;
  Parameter<T> lin1_w, lin1_b, conv_w, conv_b, lin2_w, lin2_b;

 private:
  RptConfig cfg_;
};

template <class T>
class RptBlock {
 public:
  RptBlock() = default;
  RptBlock(const std::string& prefix, const RptConfig& cfg, RandomSource& rng);

  Tensor<T> forward(const Tensor<T>& x, const RelativeEmbeddingTable<T>* table, bool training,
                    RandomSource& rng) const;
  void collect(ParameterList<T>& out);

  MultiHeadRelativeAttention<T> attention;
  LocalRelational<T> local;
};

// B stacked blocks. Offset tables are per block unless `share_tables`, in
// which case every block reads table 0.
template <class T>
class RptStack {
 public:
  RptStack() = default;
  RptStack(const std::string& prefix, const RptConfig& cfg, std::size_t blocks,
           bool share_tables, RandomSource& rng);

  Tensor<T> forward(const Tensor<T>& x, bool training, RandomSource& rng) const;
  void collect(ParameterList<T>& out);

  std::vector<RptBlock<T>> blocks;
  std::vector<RelativeEmbeddingTable<T>> tables;

 private:
  RptConfig cfg_;
  bool share_tables_ = false;
};

}  // namespace dad
