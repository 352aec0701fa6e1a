#include "dad/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "dad/checkpoint.hpp"
#include "dad/gradsuite.hpp"

namespace dad {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void say(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << std::endl;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

json run_identity(const RunContext& ctx) {
  json j = ctx.config.to_json();
  j["profile"] = ctx.config.profile;
  j["seed"] = ctx.seed;
  return j;
}

// The identity a resumed run must match: everything but the epoch budget.
json resume_identity(json j) {
  j["train"].erase("epochs");
  return j;
}

Dataset load_checked(const RunConfig& cfg, const fs::path& manifest) {
  if (manifest.empty()) throw ConfigError("no data.manifest configured");
  Dataset ds = load_manifest(manifest);
  if (!ds.empty() && (ds.feature_dim != cfg.network.input_dim || ds.num_classes != cfg.network.num_classes)) {
    throw ConfigError("dataset has D = " + std::to_string(ds.feature_dim) + ", C = " +
                      std::to_string(ds.num_classes) + " but the network expects D = " +
                      std::to_string(cfg.network.input_dim) + ", C = " +
                      std::to_string(cfg.network.num_classes));
  }
  return ds;
}

std::string fmt(double v, int precision = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

void write_config_echo(const RunContext& ctx) {
  write_text(ctx.out_dir / "config.json", run_identity(ctx).dump(2) + "\n");
}

GenDataResult cmd_gen_data(const RunContext& ctx) {
  RandomSource rng(ctx.seed);
  const auto corpus = generate_synthetic(ctx.config.synthetic, rng);
  GenDataResult result;
  result.manifest = write_corpus(ctx.out_dir, corpus.videos);
  json stats = json::array();
  for (std::size_t p = 0; p < corpus.pair_trials.size(); ++p) {
    const auto& pair = ctx.config.synthetic.co_occurrences[p];
    const auto [trials, pulled] = corpus.pair_trials[p];
    const double rate = trials == 0 ? 0.0 : static_cast<double>(pulled) / static_cast<double>(trials);
    result.co_occurrence_rates.push_back(rate);
    stats.push_back({{"first", pair.first}, {"second", pair.second},
                     {"probability", pair.probability}, {"placements", trials},
                     {"pulled", pulled}, {"rate", rate}});
  }
  write_text(ctx.out_dir / "corpus_stats.json", json{{"co_occurrences", stats}}.dump(2) + "\n");
  write_config_echo(ctx);
  say(ctx, "wrote " + std::to_string(corpus.videos.size()) + " videos to " + result.manifest.string());
  return result;
}

InMemoryTrainOutcome train_in_memory(Network<float>& net, const RunConfig& cfg, std::uint64_t seed,
                                     const std::vector<const Video*>& train_videos) {
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  Trainer trainer(net, tc, cfg.loss);
  InMemoryTrainOutcome out;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    auto recs = trainer.run_epoch(epoch, train_videos);
    out.log.insert(out.log.end(), recs.begin(), recs.end());
  }
  return out;
}

TrainResult cmd_train(const RunContext& ctx, const std::optional<fs::path>& resume_dir) {
  const RunConfig& cfg = ctx.config;
  const Dataset ds = load_checked(cfg, cfg.manifest);
  const auto train_videos = ds.split("train");
  if (train_videos.empty()) throw ConfigError("manifest has no training videos");

  RandomSource init_rng(ctx.seed);
  Network<float> net(cfg.network, init_rng);
  TrainConfig tc = cfg.train;
  tc.seed = ctx.seed;
  Trainer trainer(net, tc, cfg.loss);
  const json identity = run_identity(ctx);

  std::size_t first_epoch = 1;
  if (resume_dir) {
    const Checkpoint model = load_checkpoint(*resume_dir / "model.dadc");
    if (!model.metadata.contains("run") ||
        resume_identity(model.metadata.at("run")) != resume_identity(identity)) {
      throw ConfigError("refusing to resume from " + resume_dir->string() +
                        ": its run configuration differs from the current one");
    }
    restore_network(net, model);
    restore_optimizers(trainer, load_checkpoint(*resume_dir / "optimizer.dads"));
    first_epoch = model.metadata.at("epoch").get<std::size_t>() + 1;
    say(ctx, "resuming after epoch " + std::to_string(first_epoch - 1));
  }

  fs::create_directories(ctx.out_dir);
  write_config_echo(ctx);
  const bool append = resume_dir && fs::equivalent(*resume_dir, ctx.out_dir);
  std::ofstream log(ctx.out_dir / "train_log.jsonl", append ? std::ios::app : std::ios::trunc);
  if (!log) throw ConfigError("cannot write training log in " + ctx.out_dir.string());

  TrainResult result;
  for (std::size_t epoch = first_epoch; epoch <= tc.epochs; ++epoch) {
    auto recs = trainer.run_epoch(epoch, train_videos,
                                  [&](const LogRecord& r) { log << r.to_json() << "\n"; });
    result.log.insert(result.log.end(), recs.begin(), recs.end());
    if (ctx.log && (epoch == first_epoch || epoch % 10 == 0 || epoch == tc.epochs)) {
      say(ctx, "epoch " + std::to_string(epoch) + "  lr " + fmt(recs.back().lr, 6) +
                   "  assistant " + fmt(recs.back().assistant_loss) + "  core " +
                   fmt(recs.back().core_loss));
    }
  }
  log.flush();

  Checkpoint model = capture_network(net);
  model.metadata["epoch"] = tc.epochs;
  model.metadata["run"] = identity;
  result.checkpoint = ctx.out_dir / "model.dadc";
  save_checkpoint(result.checkpoint, model);
  save_checkpoint(ctx.out_dir / "optimizer.dads", capture_optimizers(trainer));
  result.steps = result.log.size();
  return result;
}

MetricsReport evaluate_videos(const Network<float>& net, const std::vector<const Video*>& videos,
                              const EvalConfig& eval) {
  if (videos.empty()) throw ContractError("nothing to evaluate");
  FramePool pool;
  pool.classes = net.config().num_classes;
  for (const auto* v : videos) {
    const auto y = infer_full_sequence(net, v->features);
    std::vector<double> scores(y.data().begin(), y.data().end());
    pool.append(scores, v->labels.labels, v->features.length);
  }
  return evaluate(pool, eval.taus, eval.threshold);
}

MetricsReport cmd_eval(const RunContext& ctx, const fs::path& checkpoint,
                       const std::optional<fs::path>& manifest, const std::string& split) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.metadata.value("kind", "") != "model") throw ConfigError(checkpoint.string() + " is not a model checkpoint");
  const NetworkConfig ncfg = network_from_json(ckpt.metadata.at("network"));
  RandomSource rng(0);
  Network<float> net(ncfg, rng);
  restore_network(net, ckpt);

  RunConfig cfg = ctx.config;
  cfg.network = ncfg;
  const Dataset ds = load_checked(cfg, manifest ? *manifest : cfg.manifest);
  const auto videos = ds.split(split);
  if (videos.empty()) throw ConfigError("manifest has no '" + split + "' videos");
  const MetricsReport report = evaluate_videos(net, videos, cfg.eval);

  write_text(ctx.out_dir / "metrics.txt", report.to_text());
  write_text(ctx.out_dir / "metrics.kv", report.to_key_values());
  write_config_echo(ctx);
  say(ctx, "per-frame mAP " + fmt(report.per_frame_map) + " over " + std::to_string(videos.size()) +
               " '" + split + "' videos");
  return report;
}

bool cmd_gradcheck(const RunContext& ctx, std::size_t seeds, bool include_corrupted,
                   std::ostream& out) {
  GradSuiteOptions opts;
  opts.include_corrupted = include_corrupted;
  const auto outcomes = run_gradient_suite(gradient_suite(opts), ctx.seed, seeds);
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %-10s %-12s %-10s %s\n", "case", "tolerance",
                "max_rel_err", "coords", "result");
  out << line;
  bool all = true;
  std::string table = line;
  for (const auto& o : outcomes) {
    std::snprintf(line, sizeof line, "%-28s %-10.0e %-12.3e %-10zu %s\n", o.name.c_str(),
                  o.tolerance, o.worst_error, o.coords, o.passed ? "PASS" : "FAIL");
    out << line;
    table += line;
    all = all && o.passed;
  }
  if (!ctx.out_dir.empty()) {
    write_text(ctx.out_dir / "gradcheck.txt", table);
    write_config_echo(ctx);
  }
  return all;
}

std::vector<std::string> ablation_axes() {
  return {"branches", "structure", "positional", "assistant", "loss", "modules", "coarse_input"};
}

std::vector<std::pair<std::string, json>> ablation_variants(const std::string& axis) {
  if (axis == "branches") {
    return {{"F=1", {{"branches", 1}}}, {"F=2", {{"branches", 2}}},
            {"F=3", {{"branches", 3}}}, {"F=4", {{"branches", 4}}}};
  }
  if (axis == "structure") {
    return {{"non_hierarchical", {{"coarse_wiring", "non_hierarchical"}}},
            {"hierarchical", {{"coarse_wiring", "hierarchical"}}}};
  }
  if (axis == "positional") {
    return {{"none", {{"positional", "none"}}},
            {"absolute", {{"positional", "absolute"}}},
            {"relative", {{"positional", "relative"}}}};
  }
  if (axis == "assistant") {
    return {{"without_assistant", {{"assistant", false}}}, {"with_assistant", {{"assistant", true}}}};
  }
  if (axis == "loss") return {{"bce", {{"loss", "bce"}}}, {"asymmetric", {{"loss", "asymmetric"}}}};
  if (axis == "modules") {
    return {{"neither", {{"fine_det", false}, {"coarse_det", false}}},
            {"fine_only", {{"fine_det", true}, {"coarse_det", false}}},
            {"coarse_only", {{"fine_det", false}, {"coarse_det", true}}},
            {"both", {{"fine_det", true}, {"coarse_det", true}}}};
  }
  if (axis == "coarse_input") {
    return {{"fine", {{"coarse_input", "fine"}}}, {"tokens", {{"coarse_input", "tokens"}}}};
  }
  throw ConfigError("unknown ablation axis '" + axis + "'");
}

std::vector<AblationRow> cmd_ablate(const RunContext& ctx, const std::string& axis,
                                    std::size_t seeds) {
  if (seeds == 0) throw ConfigError("ablation needs at least one seed");
  const auto variants = ablation_variants(axis);

  std::vector<Dataset> corpora;
  for (std::size_t k = 0; k < seeds; ++k) {
    if (!ctx.config.manifest.empty()) {
      corpora.push_back(load_checked(ctx.config, ctx.config.manifest));
    } else {
      RandomSource rng(ctx.seed + k);
      auto corpus = generate_synthetic(ctx.config.synthetic, rng);
      Dataset ds;
      ds.feature_dim = ctx.config.synthetic.feature_dim;
      ds.num_classes = ctx.config.synthetic.num_classes;
      ds.videos = std::move(corpus.videos);
      corpora.push_back(std::move(ds));
    }
  }

  std::vector<AblationRow> rows;
  for (const auto& [name, delta] : variants) {
    RunConfig cfg = ctx.config;
    apply_ablation(cfg, delta);
    AblationRow row;
    row.variant = name;
    for (std::size_t k = 0; k < seeds; ++k) {
      const std::uint64_t seed = ctx.seed + k;
      RandomSource init(seed);
      Network<float> net(cfg.network, init);
      train_in_memory(net, cfg, seed, corpora[k].split("train"));
      row.test_map.push_back(evaluate_videos(net, corpora[k].split("test"), cfg.eval).per_frame_map);
      row.train_map.push_back(evaluate_videos(net, corpora[k].split("train"), cfg.eval).per_frame_map);
      say(ctx, axis + " " + name + " seed " + std::to_string(seed) + ": test mAP " +
                   fmt(row.test_map.back()) + ", train mAP " + fmt(row.train_map.back()));
    }
    for (std::size_t k = 0; k < seeds; ++k) {
      row.mean_test_map += row.test_map[k] / static_cast<double>(seeds);
      row.mean_train_map += row.train_map[k] / static_cast<double>(seeds);
    }
    rows.push_back(std::move(row));
  }

  if (!ctx.out_dir.empty()) {
    std::string text = "ablation axis: " + axis + " (" + std::to_string(seeds) + " seeds from " +
                       std::to_string(ctx.seed) + ")\n\nvariant               test mAP   train mAP\n";
    std::string kv;
    for (const auto& r : rows) {
      char line[128];
      std::snprintf(line, sizeof line, "%-20s  %8.4f   %8.4f\n", r.variant.c_str(), r.mean_test_map,
                    r.mean_train_map);
      text += line;
      kv += axis + "." + r.variant + ".test_map=" + fmt(r.mean_test_map, 6) + "\n";
      kv += axis + "." + r.variant + ".train_map=" + fmt(r.mean_train_map, 6) + "\n";
    }
    write_text(ctx.out_dir / ("ablation_" + axis + ".txt"), text);
    write_text(ctx.out_dir / ("ablation_" + axis + ".kv"), kv);
    write_config_echo(ctx);
  }
  return rows;
}

}  // namespace dad
