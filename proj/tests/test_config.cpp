#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bytes.hpp"
#include "dad/checkpoint.hpp"
#include "dad/commands.hpp"
#include "dad/config.hpp"

using namespace dad;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dad_test_config_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunContext small_run(const fs::path& dir, std::size_t epochs) {
  RunContext ctx;
  ctx.config = profile_defaults("desk");
  ctx.config.synthetic.num_videos = 5;
  ctx.config.synthetic.num_test = 1;
  ctx.config.network.blocks = 1;
  ctx.config.train.epochs = epochs;
  ctx.config.manifest = dir / "data" / "manifest.json";
  ctx.seed = 3;
  return ctx;
}

void make_data(const fs::path& dir) {
  auto ctx = small_run(dir, 1);
  ctx.out_dir = dir / "data";
  cmd_gen_data(ctx);
}

}  // namespace

TEST(RunConfig, ProfilesAndOverrides) {
  const auto desk = profile_defaults("desk");
  EXPECT_EQ(desk.network.tokens, 64u);
  EXPECT_EQ(desk.synthetic.co_occurrences.size(), 2u);
  const auto paper = profile_defaults("paper");
  EXPECT_EQ(paper.network.num_classes, 157u);
  EXPECT_DOUBLE_EQ(paper.train.lr, 1e-4);
  EXPECT_THROW(profile_defaults("huge"), ConfigError);

  const auto cfg = parse_run_config(
      json::parse(R"({"network": {"blocks": 1}, "loss": {"gamma_minus": 2},
                      "ablation": {"positional": "absolute", "branches": 2},
                      "eval": {"taus": [0, 2]}})"),
      "desk");
  EXPECT_EQ(cfg.network.blocks, 1u);
  EXPECT_EQ(cfg.loss.gamma_minus, 2.0);
  EXPECT_EQ(cfg.network.positional, PositionalEncoding::Absolute);
  EXPECT_EQ(cfg.network.branches, 2u);
  EXPECT_EQ(cfg.eval.taus, (std::vector<std::size_t>{0, 2}));
}

TEST(RunConfig, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(parse_run_config(json::parse(R"({"netwrk": {}})"), "desk"), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"network": {"blockz": 2}})"), "desk"), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"network": {"blocks": "two"}})"), "desk"), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"train": {"lr": -1}})"), "desk"), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"ablation": {"positional": "rotary"}})"), "desk"),
               ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"network": {"heads": 3}})"), "desk"), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse("[1, 2]"), "desk"), ConfigError);
}

TEST(RunConfig, LoadResolvesManifestAgainstConfigDir) {
  const auto dir = scratch("load");
  std::ofstream(dir / "c.json") << R"({"data": {"manifest": "sub/m.json"}})";
  const auto cfg = load_run_config(dir / "c.json", "desk");
  EXPECT_EQ(cfg.manifest, dir / "sub" / "m.json");
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(load_run_config(dir / "bad.json", "desk"), ConfigError);
  EXPECT_THROW(load_run_config(dir / "missing.json", "desk"), ConfigError);
}

TEST(RunConfig, NetworkJsonRoundTrip) {
  auto n = paper_network_config();
  n.coarse_wiring = CoarseWiring::Hierarchical;
  n.assistant_enabled = false;
  n.positional = PositionalEncoding::None;
  const auto back = network_from_json(network_to_json(n));
  EXPECT_EQ(network_to_json(back), network_to_json(n));
  EXPECT_EQ(back.coarse_wiring, CoarseWiring::Hierarchical);
  EXPECT_FALSE(back.assistant_enabled);
}

TEST(Checkpoint, RoundTripRestoresPredictions) {
  RandomSource a(1), b(2);
  auto cfg = desk_network_config();
  Network<float> src(cfg, a);
  Network<float> dst(cfg, b);
  const auto ckpt = capture_network(src);
  const auto bytes = encode_checkpoint(ckpt);
  const auto decoded = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(decoded), bytes);
  restore_network(dst, decoded);
  EXPECT_TRUE(dst.vid_clas_weight.frozen);
  FeatureSequence seq;
  seq.length = 64;
  seq.dim = 32;
  seq.tokens.assign(64 * 32, 0.1f);
  const auto y1 = infer_full_sequence(src, seq), y2 = infer_full_sequence(dst, seq);
  for (std::size_t i = 0; i < y1.numel(); ++i) ASSERT_EQ(y1.at(i), y2.at(i));
}

TEST(Checkpoint, MalformedInputsRejected) {
  RandomSource a(1);
  Network<float> net(desk_network_config(), a);
  auto bytes = encode_checkpoint(capture_network(net));
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  auto other_cfg = desk_network_config();
  other_cfg.feature_dim = 8;
  other_cfg.label_dim = 8;
  RandomSource b(2);
  Network<float> other(other_cfg, b);
  EXPECT_THROW(restore_network(other, decode_checkpoint(bytes)), Error);
}

TEST(Commands, TrainResumeMatchesUninterruptedRun) {
  const auto dir = scratch("resume");
  make_data(dir);
  auto full = small_run(dir, 3);
  full.out_dir = dir / "full";
  const auto r = cmd_train(full);
  EXPECT_EQ(r.steps, 12u);
  std::ifstream log(dir / "full" / "train_log.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, r.steps);

  auto part = small_run(dir, 2);
  part.out_dir = dir / "part";
  cmd_train(part);
  auto rest = small_run(dir, 3);
  rest.out_dir = dir / "part";
  cmd_train(rest, dir / "part");
  EXPECT_EQ(bytes::read_file(dir / "full" / "model.dadc"), bytes::read_file(dir / "part" / "model.dadc"));
  EXPECT_EQ(bytes::read_file(dir / "full" / "optimizer.dads"),
            bytes::read_file(dir / "part" / "optimizer.dads"));

  auto changed = small_run(dir, 4);
  changed.config.train.lr = 5e-4;
  changed.out_dir = dir / "changed";
  EXPECT_THROW(cmd_train(changed, dir / "full"), ConfigError);
}

TEST(Commands, EvalWritesReports) {
  const auto dir = scratch("eval");
  make_data(dir);
  auto ctx = small_run(dir, 1);
  ctx.out_dir = dir / "run";
  const auto r = cmd_train(ctx);
  ctx.out_dir = dir / "eval";
  const auto report = cmd_eval(ctx, r.checkpoint);
  EXPECT_GT(report.frames, 0u);
  EXPECT_TRUE(fs::exists(dir / "eval" / "metrics.txt"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "metrics.kv"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "config.json"));
}
