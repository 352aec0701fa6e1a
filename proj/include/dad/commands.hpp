#pragma once

// Library form of the command-line subcommands. Each writes its outputs plus
// a config echo under `out_dir`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dad/config.hpp"
#include "dad/metrics.hpp"

namespace dad {

struct RunContext {
  RunConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::ostream* log = nullptr;  // progress messages; null for silence
};

// Writes config.json (the resolved config plus profile and seed) to out_dir.
void write_config_echo(const RunContext& ctx);

struct GenDataResult {
  std::filesystem::path manifest;
  // Observed fraction of `first` placements that pulled `second` along, per
  // configured pair.
  std::vector<double> co_occurrence_rates;
};
GenDataResult cmd_gen_data(const RunContext& ctx);

struct TrainResult {
  std::filesystem::path checkpoint;
  std::size_t steps = 0;
  std::vector<LogRecord> log;
};
// Trains on the "train" split of config.manifest. With `resume_dir`, loads the
// model and optimizer state written there and continues after its last epoch;
// refuses when the stored config differs from the current one in anything
// other than train.epochs.
TrainResult cmd_train(const RunContext& ctx,
                      const std::optional<std::filesystem::path>& resume_dir = std::nullopt);

// Trains without touching the filesystem (used by ablations and tests).
struct InMemoryTrainOutcome {
  std::vector<LogRecord> log;
};
InMemoryTrainOutcome train_in_memory(Network<float>& net, const RunConfig& cfg, std::uint64_t seed,
                                     const std::vector<const Video*>& train_videos);

// Full-sequence inference over `videos`, pooled into one report.
MetricsReport evaluate_videos(const Network<float>& net, const std::vector<const Video*>& videos,
                              const EvalConfig& eval);

// Evaluates `checkpoint` on the given split of `manifest` (defaults to the
// config's manifest and the "test" split).
MetricsReport cmd_eval(const RunContext& ctx, const std::filesystem::path& checkpoint,
                       const std::optional<std::filesystem::path>& manifest = std::nullopt,
                       const std::string& split = "test");

// Prints one line per case; returns true when every case passes.
bool cmd_gradcheck(const RunContext& ctx, std::size_t seeds, bool include_corrupted,
                   std::ostream& out);

struct AblationRow {
  std::string variant;
  std::vector<double> test_map;   // one per seed
  std::vector<double> train_map;
  double mean_test_map = 0.0;
  double mean_train_map = 0.0;
};

// Variants per axis: branches (F = 1..4), structure (non_hierarchical,
// hierarchical), positional (none, absolute, relative), assistant (off, on),
// loss (bce, asymmetric), modules (fine only, coarse only, both, neither),
// coarse_input (fine, tokens).
std::vector<std::string> ablation_axes();
std::vector<std::pair<std::string, nlohmann::json>> ablation_variants(const std::string& axis);

// Trains and evaluates every variant of `axis` on seeds ctx.seed ..
// ctx.seed + seeds - 1. Without a manifest, each seed generates its own
// synthetic corpus from config.synthetic.
std::vector<AblationRow> cmd_ablate(const RunContext& ctx, const std::string& axis,
                                    std::size_t seeds);

}  // namespace dad
