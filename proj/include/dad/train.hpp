#pragma once

// Copy-and-freeze training: per step, the Assistant branch learns from the
// label clip, ML-CLAS is copied into the frozen Vid-CLAS, then the Core branch
// learns from the feature clip. Each branch has its own Adam state.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dad/data.hpp"
#include "dad/losses.hpp"
#include "dad/network.hpp"

namespace dad {

struct TrainConfig {
  std::size_t epochs = 125;
  std::size_t batch_size = 1;
  double lr = 1e-3;
  double lr_decay_factor = 10.0;
  std::size_t lr_decay_every = 100;  // epochs
  std::uint64_t seed = 0;
  std::string profile = "desk";

  void validate() const;
};

TrainConfig desk_train_config();
// lr 1e-4, batch 3, decay by 10 every 7 epochs.
TrainConfig paper_train_config();

// lr / factor^floor((k - 1) / every), k >= 1.
double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg);

class Adam {
 public:
  struct Moments {
    std::vector<float> m, v;
  };

  // Frozen parameters get no state and are never touched.
  explicit Adam(ParameterList<float> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return steps_; }
  bool has_state(const std::string& name) const { return state_.count(name) != 0; }
  const ParameterList<float>& params() const { return params_; }

  // Moment buffers by parameter name, for checkpointing.
  std::map<std::string, Moments>& state() { return state_; }
  void set_steps(std::size_t s) { steps_ = s; }

 private:
  ParameterList<float> params_;
  std::map<std::string, Moments> state_;
  double beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
};

// One training clip, possibly right-padded with zero tokens and labels.
struct Clip {
  std::size_t length = 0;   // T
  std::size_t offset = 0;   // start in the source video
  std::vector<float> tokens;  // T x D
  std::vector<float> labels;  // T x C
  std::vector<float> mask;    // T, 1 for real steps
};

// Uniform start offset in [0, L - T]; videos shorter than T are padded.
Clip sample_clip(const Video& video, std::size_t tokens, RandomSource& rng);

struct StepLosses {
  double assistant = 0.0;  // 0 when the Assistant branch is disabled
  double core = 0.0;
};

struct LogRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double assistant_loss = 0.0;
  double core_loss = 0.0;
  double wall_ms = 0.0;
  std::string to_json() const;
};

class Trainer {
 public:
  Trainer(Network<float>& net, const TrainConfig& train, const LossConfig& loss);

  // Assistant forward/backward/step, copy, Core forward/backward/step, then a
  // bitwise check that Vid-CLAS still equals the copy. A non-finite loss
  // throws NumericalError naming the first op that produced one.
  StepLosses train_step(const std::vector<Clip>& batch, double lr, RandomSource& rng);

  // One pass over `videos` in a seeded shuffled order. `epoch` is 1-based.
  std::vector<LogRecord> run_epoch(std::size_t epoch, const std::vector<const Video*>& videos,
                                   const std::function<void(const LogRecord&)>& on_step = {});

  Network<float>& network() { return net_; }
  Adam& assistant_optimizer() { return assistant_opt_; }
  Adam& core_optimizer() { return core_opt_; }
  std::size_t global_step() const { return global_step_; }
  void set_global_step(std::size_t s) { global_step_ = s; }

  // Runs after every Core step with the network (test hook).
  std::function<void(Network<float>&)> after_core_step;

 private:
  Network<float>& net_;
  TrainConfig train_;
  LossConfig loss_;
  Adam assistant_opt_;
  Adam core_opt_;
  std::size_t global_step_ = 0;
};

// Random stream for a given epoch; resuming at an epoch reproduces the same
// draws as an uninterrupted run.
RandomSource epoch_rng(std::uint64_t seed, std::size_t epoch);

// Eval-mode forward over a whole video: right-pads with zeros to a multiple of
// 2^F, predicts, and trims back. Returns L x C fused probabilities.
Tensor<float> infer_full_sequence(const Network<float>& net, const FeatureSequence& video);

}  // namespace dad
