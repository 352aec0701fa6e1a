// Command-line driver: gen-data, train, eval, gradcheck, ablate, convert.
// Exit codes: 0 success, 1 validation error, 2 runtime or numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dad/commands.hpp"

namespace {

using namespace dad;
namespace fs = std::filesystem;

struct Common {
  fs::path config;
  std::uint64_t seed = 0;
  fs::path out = "out";
  std::string profile = "desk";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--profile", c.profile, "dimension preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
}

RunContext context(const Common& c) {
  RunContext ctx;
  ctx.config = load_run_config(c.config, c.profile);
  ctx.seed = c.seed;
  ctx.out_dir = c.out;
  ctx.log = &std::cerr;
  return ctx;
}

std::vector<Annotation> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open annotations " + path.string());
  std::vector<Annotation> out;
  Annotation a;
  while (in >> a.cls >> a.start_sec >> a.end_sec) out.push_back(a);
  if (!in.eof()) throw ConfigError("annotations must be lines of: class start_sec end_sec");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense multi-label action detection: data, training, evaluation"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, grad_c, abl_c;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus and manifest");
  add_common(gen, gen_c);

  auto* train = app.add_subcommand("train", "train both branches with copy-and-freeze");
  add_common(train, train_c);
  fs::path resume;
  train->add_option("--resume", resume, "directory of a previous run to continue")->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on full sequences");
  add_common(eval, eval_c);
  fs::path checkpoint, manifest;
  std::string split = "test";
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest, "dataset manifest (default: config data.manifest)");
  eval->add_option("--split", split, "split to evaluate")->capture_default_str();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op and block");
  add_common(grad, grad_c);
  std::size_t grad_seeds = 20;
  bool corrupt = false;
  grad->add_option("--seeds", grad_seeds, "number of seeds")->capture_default_str();
  grad->add_flag("--corrupt-gradient", corrupt, "add a deliberately wrong op (negative control)");

  auto* abl = app.add_subcommand("ablate", "compare variants along one ablation axis");
  add_common(abl, abl_c);
  std::string axis;
  std::size_t abl_seeds = 3;
  abl->add_option("--axis", axis, "ablation axis")->required()->check(CLI::IsMember(ablation_axes()));
  abl->add_option("--seeds", abl_seeds, "number of seeds")->capture_default_str();

  auto* convert = app.add_subcommand("convert", "pack external features or rasterize annotations");
  convert->require_subcommand(1);
  auto* pack = convert->add_subcommand("pack", "raw little-endian f32 T x D matrix -> DADF");
  fs::path raw_in, pack_out;
  std::size_t raw_dim = 1024;
  std::string video_id;
  pack->add_option("--input", raw_in)->required()->check(CLI::ExistingFile);
  pack->add_option("--dim", raw_dim, "feature dimension D")->capture_default_str();
  pack->add_option("--id", video_id, "video id");
  pack->add_option("--output", pack_out)->required();
  auto* raster = convert->add_subcommand("rasterize", "annotation lines (class start end) -> DADL");
  fs::path ann_in, raster_out;
  std::size_t length = 0, classes = 0;
  double segment = 8.0 / 24.0;
  std::string policy = "any-overlap";
  raster->add_option("--input", ann_in)->required()->check(CLI::ExistingFile);
  raster->add_option("--length", length, "tokens in the video")->required();
  raster->add_option("--classes", classes, "number of classes")->required();
  raster->add_option("--segment-sec", segment, "seconds per token")->capture_default_str();
  raster->add_option("--policy", policy, "token labelling rule")
      ->check(CLI::IsMember({"any-overlap", "majority"}))
      ->capture_default_str();
  raster->add_option("--output", raster_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      cmd_gen_data(context(gen_c));
    } else if (*train) {
      const auto r = cmd_train(context(train_c), resume.empty() ? std::nullopt : std::optional(resume));
      std::cout << "checkpoint " << r.checkpoint.string() << " after " << r.steps << " steps\n";
    } else if (*eval) {
      const auto report = cmd_eval(context(eval_c), checkpoint,
                                   manifest.empty() ? std::nullopt : std::optional(manifest), split);
      std::cout << report.to_text();
    } else if (*grad) {
      if (!cmd_gradcheck(context(grad_c), grad_seeds, corrupt, std::cout)) return 2;
    } else if (*abl) {
      const auto rows = cmd_ablate(context(abl_c), axis, abl_seeds);
      for (const auto& r : rows) {
        std::cout << r.variant << " test_map=" << r.mean_test_map << " train_map=" << r.mean_train_map << "\n";
      }
    } else if (*pack) {
      auto seq = pack_raw_features(raw_in, raw_dim, video_id.empty() ? raw_in.stem().string() : video_id);
      write_features(pack_out, seq);
    } else if (*raster) {
      const auto grid = rasterize_annotations(
          read_annotations(ann_in), length, classes, segment,
          policy == "majority" ? RasterPolicy::Majority : RasterPolicy::AnyOverlap);
      write_labels(raster_out, grid);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
