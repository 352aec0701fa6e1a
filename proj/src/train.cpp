#include "dad/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "dad/ops.hpp"

namespace dad {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(lr_decay_factor > 1.0)) throw ConfigError("train.lr_decay_factor must be > 1");
  if (lr_decay_every == 0) throw ConfigError("train.lr_decay_every must be >= 1");
}

TrainConfig desk_train_config() { return TrainConfig{}; }

TrainConfig paper_train_config() {
  TrainConfig c;
  c.epochs = 21;
  c.batch_size = 3;
  c.lr = 1e-4;
  c.lr_decay_factor = 10.0;
  c.lr_decay_every = 7;
  c.profile = "paper";
  return c;
}

double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch == 0) throw ContractError("epochs are 1-based");
  const auto decays = static_cast<double>((epoch - 1) / cfg.lr_decay_every);
  return cfg.lr / std::pow(cfg.lr_decay_factor, decays);
}

// ---------------------------------------------------------------------------

Adam::Adam(ParameterList<float> params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params) {
    if (p->frozen) continue;
    params_.push_back(p);
    state_[p->name] = {std::vector<float>(p->value.numel(), 0.0f),
                       std::vector<float>(p->value.numel(), 0.0f)};
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->value.zero_grad();
}

void Adam::step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto* p : params_) {
    if (p->frozen || !p->value.has_grad()) continue;
    auto& s = state_.at(p->name);
    auto w = p->value.mutable_data();
    const auto g = p->value.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double m = beta1_ * s.m[i] + (1.0 - beta1_) * gi;
      const double v = beta2_ * s.v[i] + (1.0 - beta2_) * gi * gi;
      s.m[i] = static_cast<float>(m);
      s.v[i] = static_cast<float>(v);
      w[i] = static_cast<float>(w[i] - lr * (m / c1) / (std::sqrt(v / c2) + eps_));
    }
  }
}

// ---------------------------------------------------------------------------

Clip sample_clip(const Video& video, std::size_t tokens, RandomSource& rng) {
  const std::size_t L = video.features.length, D = video.features.dim, C = video.labels.classes;
  Clip clip;
  clip.length = tokens;
  clip.tokens.assign(tokens * D, 0.0f);
  clip.labels.assign(tokens * C, 0.0f);
  clip.mask.assign(tokens, 0.0f);
  clip.offset = L > tokens ? static_cast<std::size_t>(rng.uniform_index(L - tokens + 1)) : 0;
  const std::size_t n = std::min(L, tokens);
  std::copy_n(video.features.tokens.begin() + static_cast<std::ptrdiff_t>(clip.offset * D), n * D,
              clip.tokens.begin());
  for (std::size_t i = 0; i < n * C; ++i) clip.labels[i] = video.labels.labels[clip.offset * C + i];
  std::fill_n(clip.mask.begin(), n, 1.0f);
  return clip;
}

std::string LogRecord::to_json() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"epoch\":%zu,\"step\":%zu,\"lr\":%.9g,\"assistant_loss\":%.9g,"
                "\"core_loss\":%.9g,\"wall_ms\":%.3f}",
                epoch, step, lr, assistant_loss, core_loss, wall_ms);
  return buf;
}

RandomSource epoch_rng(std::uint64_t seed, std::size_t epoch) {
  // splitmix64 of (seed, epoch) so nearby seeds give unrelated streams.
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + epoch + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return RandomSource(z ^ (z >> 31));
}

Trainer::Trainer(Network<float>& net, const TrainConfig& train, const LossConfig& loss)
    : net_(net),
      train_(train),
      loss_(loss),
      assistant_opt_(net.config().assistant_enabled ? net.assistant_parameters()
                                                    : ParameterList<float>{}),
      core_opt_(net.core_parameters()) {
  train_.validate();
  loss_.validate();
}

namespace {

void check_finite(const Tensor<float>& loss, const char* phase) {
  if (std::isfinite(loss.item())) return;
  const char* op = first_nonfinite_op(loss);
  throw NumericalError(std::string(phase) + " loss is not finite; first non-finite op: " +
                       (op ? op : "unknown"));
}

Tensor<float> batch_mean(const std::vector<Tensor<float>>& losses) {
  Tensor<float> total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  return losses.size() == 1 ? total : scale(total, 1.0f / static_cast<float>(losses.size()));
}

std::span<const float> mask_span(const Clip& c) { return c.mask; }

}  // namespace

StepLosses Trainer::train_step(const std::vector<Clip>& batch, double lr, RandomSource& rng) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const auto& cfg = net_.config();
  StepLosses out;

  if (cfg.assistant_enabled) {
    assistant_opt_.zero_grad();
    std::vector<Tensor<float>> losses;
    for (const auto& clip : batch) {
      Tensor<float> g({clip.length, cfg.num_classes}, clip.labels);
      auto y = net_.ml_clas_forward(net_.ml_rel_forward(g, true, rng));
      losses.push_back(assistant_loss(y, std::span<const float>(clip.labels), loss_, mask_span(clip)));
    }
    auto loss = batch_mean(losses);
    check_finite(loss, "assistant");
    backward(loss);
    assistant_opt_.step(lr);
    out.assistant = loss.item();
    if (cfg.fine_enabled || cfg.coarse_enabled) net_.copy_classifier_params();
  }

  const std::vector<float> snapshot_w(net_.vid_clas_weight.value.data().begin(),
                                      net_.vid_clas_weight.value.data().end());
  const std::vector<float> snapshot_b(net_.vid_clas_bias.value.data().begin(),
                                      net_.vid_clas_bias.value.data().end());

  core_opt_.zero_grad();
  net_.vid_clas_weight.value.zero_grad();
  net_.vid_clas_bias.value.zero_grad();
  std::vector<Tensor<float>> losses;
  for (const auto& clip : batch) {
    Tensor<float> x({clip.length, cfg.input_dim}, clip.tokens);
    auto o = net_.core_forward(x, true, rng);
    const auto labels = std::span<const float>(clip.labels);
    if (o.direct.defined()) {
      losses.push_back(core_loss(o.direct, Tensor<float>(), labels, loss_, 1.0, 0.0, mask_span(clip)));
    } else {
      losses.push_back(core_loss(o.fine, o.coarse, labels, loss_, cfg.alpha_fine, cfg.alpha_coarse,
                                 mask_span(clip)));
    }
  }
  auto loss = batch_mean(losses);
  check_finite(loss, "core");
  backward(loss);
  core_opt_.step(lr);
  out.core = loss.item();

  if (net_.vid_clas_weight.frozen) {
    const auto w = net_.vid_clas_weight.value.data();
    const auto b = net_.vid_clas_bias.value.data();
    if (!std::equal(w.begin(), w.end(), snapshot_w.begin()) ||
        !std::equal(b.begin(), b.end(), snapshot_b.begin())) {
      throw ContractError("frozen Vid-CLAS changed during the Core step");
    }
  }
  if (after_core_step) after_core_step(net_);
  return out;
}

std::vector<LogRecord> Trainer::run_epoch(std::size_t epoch, const std::vector<const Video*>& videos,
                                          const std::function<void(const LogRecord&)>& on_step) {
  if (videos.empty()) throw ContractError("training set is empty");
  RandomSource rng = epoch_rng(train_.seed, epoch);
  std::vector<std::size_t> order(videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  const double lr = lr_at_epoch(epoch, train_);
  const std::size_t T = net_.config().tokens;
  std::vector<LogRecord> records;
  for (std::size_t start = 0; start < order.size(); start += train_.batch_size) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Clip> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + train_.batch_size); ++i) {
      batch.push_back(sample_clip(*videos[order[i]], T, rng));
    }
    const auto losses = train_step(batch, lr, rng);
    ++global_step_;
    LogRecord rec;
    rec.epoch = epoch;
    rec.step = global_step_;
    rec.lr = lr;
    rec.assistant_loss = losses.assistant;
    rec.core_loss = losses.core;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (on_step) on_step(rec);
    records.push_back(rec);
  }
  return records;
}

Tensor<float> infer_full_sequence(const Network<float>& net, const FeatureSequence& video) {
  const auto& cfg = net.config();
  const std::size_t L = video.length;
  if (L < 3) throw SequenceTooShortError("inference needs at least 3 tokens");
  if (video.dim != cfg.input_dim) {
    throw DimensionError("video '" + video.video_id + "' has D = " + std::to_string(video.dim) +
                         ", network expects " + std::to_string(cfg.input_dim));
  }
  const std::size_t multiple = cfg.length_multiple();
  const std::size_t padded = (L + multiple - 1) / multiple * multiple;
  NoGradGuard no_grad;
  RandomSource unused(0);
  std::vector<float> tokens(padded * cfg.input_dim, 0.0f);
  std::copy(video.tokens.begin(), video.tokens.end(), tokens.begin());
  auto y = net.predict(net.core_forward(Tensor<float>({padded, cfg.input_dim}, std::move(tokens)),
                                        false, unused));
  return padded == L ? y : slice_rows(y, 0, L);
}

}  // namespace dad
