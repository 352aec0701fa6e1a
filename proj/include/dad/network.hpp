#pragma once

// The two-branch detector. The Assistant branch (ML-Rel + ML-CLAS) encodes
// ground-truth label sequences; the Core branch (Fine-Det, Coarse-Det,
// Vid-CLAS) detects actions from token features and is the only part used at
// inference. Vid-CLAS receives a frozen copy of the ML-CLAS parameters.

#include <cstddef>
#include <string>
#include <vector>

#include "dad/rpt.hpp"
#include "dad/tensor.hpp"

namespace dad {

enum class CoarseWiring { NonHierarchical, Hierarchical };
// Input of the Coarse-Det branches: the fine features or the projected tokens.
enum class CoarseInput { Fine, Tokens };

const char* to_string(CoarseWiring w);
const char* to_string(CoarseInput c);
CoarseWiring parse_coarse_wiring(const std::string& s);
CoarseInput parse_coarse_input(const std::string& s);

struct NetworkConfig {
  std::size_t tokens = 64;        // T, tokens per training clip
  std::size_t input_dim = 32;     // D
  std::size_t num_classes = 8;    // C
  std::size_t label_dim = 16;     // C*
  std::size_t feature_dim = 16;   // D*
  std::size_t blocks = 2;         // B
  std::size_t heads = 4;          // H
  std::size_t branches = 3;       // F
  double alpha_fine = 0.5;
  double alpha_coarse = 0.5;
  std::size_t r_clip = 32;
  double dropout = 0.1;
  bool share_offset_tables = false;
  Activation lr_activation = Activation::Gelu;

  PositionalEncoding positional = PositionalEncoding::Relative;
  CoarseWiring coarse_wiring = CoarseWiring::NonHierarchical;
  CoarseInput coarse_input = CoarseInput::Fine;
  bool fine_enabled = true;
  bool coarse_enabled = true;
  bool assistant_enabled = true;

  void validate() const;
  RptConfig rpt(std::size_t model_dim) const;
  // Temporal multiple the Coarse-Det stride chain needs (2^F, or 1 when off).
  std::size_t length_multiple() const;
};

// Desk-scale preset: T=64, D=32, C=8, D*=C*=16, B=2, H=4, F=3.
NetworkConfig desk_network_config();
// Paper-scale preset: T=256, D=1024, C=157, D*=C*=512, B=3, H=8, F=3, alpha=(0.1, 0.9).
NetworkConfig paper_network_config();

// Convex fusion alpha_fine * y_fine + alpha_coarse * y_coarse.
template <class T>
Tensor<T> fuse_predictions(const Tensor<T>& y_fine, const Tensor<T>& y_coarse,
                           const NetworkConfig& cfg);

template <class T>
struct CoreOutput {
  Tensor<T> fine;    // Y for the fine head; undefined when Fine-Det is off
  Tensor<T> coarse;  // Y for the coarse head; undefined when Coarse-Det is off
  Tensor<T> direct;  // both modules off: k=1 projection of the raw tokens
};

template <class T>
class Network {
 public:
  Network(const NetworkConfig& cfg, RandomSource& rng);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkConfig& config() const { return cfg_; }

  // Assistant branch.
  Tensor<T> ml_rel_forward(const Tensor<T>& labels, bool training, RandomSource& rng) const;
  Tensor<T> ml_clas_forward(const Tensor<T>& g_hat) const;

  // Core branch.
  Tensor<T> fine_det_forward(const Tensor<T>& tokens, bool training, RandomSource& rng) const;
  // Granularity-branch outputs upsampled to the input length, before they
  // are summed. `source` is the Fine-Det output (or the raw tokens when
  // coarse_input == Tokens).
  std::vector<Tensor<T>> coarse_branch_outputs(const Tensor<T>& source, bool training,
                                               RandomSource& rng) const;
  Tensor<T> coarse_det_forward(const Tensor<T>& source, bool training, RandomSource& rng) const;
  Tensor<T> vid_clas_forward(const Tensor<T>& features) const;
  CoreOutput<T> core_forward(const Tensor<T>& tokens, bool training, RandomSource& rng) const;

  // Fused per-step class probabilities for a Core output.
  Tensor<T> predict(const CoreOutput<T>& out) const;

  // Copies ML-CLAS weights into Vid-CLAS bitwise and marks Vid-CLAS frozen.
  void copy_classifier_params();

  ParameterList<T> parameters();
  ParameterList<T> assistant_parameters();
  ParameterList<T> core_parameters();
  Parameter<T>* find(const std::string& name);
  // Parameters of one Coarse-Det granularity branch (1-based).
  ParameterList<T> coarse_branch_parameters(std::size_t branch);

  Parameter<T> vid_clas_weight, vid_clas_bias;
  Parameter<T> ml_clas_weight, ml_clas_bias;

 private:
  struct Stage {
    Parameter<T> conv_w, conv_b;
    LayerNormParams<T> norm;
    RptStack<T> rpts;
    std::size_t stride = 1;
    void collect(ParameterList<T>& out);
  };

  Stage make_stage(const std::string& prefix, std::size_t in_dim, std::size_t stride,
                   std::size_t rpt_blocks, RandomSource& rng) const;
  Tensor<T> run_stage(const Stage& stage, Tensor<T> x, bool training, RandomSource& rng,
                      bool run_rpts = true) const;
  Tensor<T> with_absolute_encoding(const Tensor<T>& x) const;

  NetworkConfig cfg_;
  Stage ml_rel_;
  Stage fine_;
  std::vector<Stage> coarse_;
  Parameter<T> direct_w_, direct_b_;
};

}  // namespace dad
