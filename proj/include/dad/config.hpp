#pragma once

// Run configuration file (JSON). Every section is optional; unknown keys are
// rejected. Values are applied on top of the selected profile preset.
//
//   {
//     "network":   {"tokens", "input_dim", "num_classes", "label_dim", "feature_dim",
//                   "blocks", "heads", "alpha_fine", "alpha_coarse", "r_clip",
//                   "dropout", "share_offset_tables", "lr_activation"},
//     "ablation":  {"assistant", "positional", "coarse_wiring", "coarse_input",
//                   "loss", "branches", "fine_det", "coarse_det"},
//     "loss":      {"gamma_plus", "gamma_minus", "clamp_eps"},
//     "train":     {"epochs", "batch_size", "lr", "lr_decay_factor", "lr_decay_every"},
//     "data":      {"manifest"},
//     "eval":      {"taus", "threshold"},
//     "synthetic": {"num_videos", "num_test", "min_length", "max_length", "num_classes",
//                   "feature_dim", "max_concurrency", "durations", "min_instances",
//                   "max_instances", "co_occurrences", "noise_sigma"}
//   }

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dad/data.hpp"
#include "dad/losses.hpp"
#include "dad/network.hpp"
#include "dad/train.hpp"

namespace dad {

struct EvalConfig {
  std::vector<std::size_t> taus = {0, 4, 8};
  double threshold = 0.5;
};

struct RunConfig {
  std::string profile = "desk";
  NetworkConfig network;
  TrainConfig train;
  LossConfig loss;
  EvalConfig eval;
  SyntheticSpec synthetic;
  std::filesystem::path manifest;  // resolved against the config file's directory

  void validate() const;
  nlohmann::json to_json() const;
};

RunConfig profile_defaults(const std::string& profile);

// Parses `doc` on top of the profile preset. `base_dir` resolves relative
// data paths. Throws ConfigError on unknown keys or bad values.
RunConfig parse_run_config(const nlohmann::json& doc, const std::string& profile,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::string& profile);

// Applies one "ablation" object to an existing config (same keys as the file).
void apply_ablation(RunConfig& cfg, const nlohmann::json& ablation);

nlohmann::json network_to_json(const NetworkConfig& c);
NetworkConfig network_from_json(const nlohmann::json& j);

}  // namespace dad
