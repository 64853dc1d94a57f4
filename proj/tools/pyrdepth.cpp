// pyrdepth: pyramidal monocular depth inference, evaluation and benchmarking.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pyrdepth/commands.hpp"

namespace {

using namespace pyrdepth;

ExitLevel exit_from(const std::string& s) {
  if (auto e = parse_exit_level(s)) return *e;
  throw ArgumentError(concat("unknown exit level '", s, "' (expected h, q, e, s16, s32 or s64)"));
}

std::pair<int, int> parse_dims(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw ArgumentError(concat("dims '", s, "' must look like HxW"));
  try {
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ArgumentError(concat("dims '", s, "' must look like HxW"));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pyramidal monocular depth: inference, evaluation, loss verification and benchmarking"};
  app.require_subcommand(1);

  InferOptions infer_opt;
  std::string infer_exit = "h";
  std::string preview;
  auto* infer_cmd = app.add_subcommand("infer", "Predict a full-resolution disparity map (16-bit PNG, pixels x 256)");
  infer_cmd->add_option("--weights", infer_opt.weights, "PYDW weight file")->required();
  infer_cmd->add_option("--input", infer_opt.input, "Input PNG image")->required();
  infer_cmd->add_option("--exit", infer_exit, "Exit level: h, q, e, s16, s32, s64")->capture_default_str();
  infer_cmd->add_option("--out", infer_opt.out, "Output disparity PNG")->required();
  infer_cmd->add_flag("--resize", infer_opt.resize, "Resize the input to 512x256 before inference");
  infer_cmd->add_option("--preview", preview, "Optional colormapped 8-bit preview PNG");

  EvalOptions eval_opt;
  double cap = 80.0;
  std::string crop = "eigen";
  std::string pred_kind = "disparity";
  auto* eval_cmd = app.add_subcommand("eval", "Depth metrics over matching prediction/ground-truth PNGs");
  eval_cmd->add_option("--pred", eval_opt.pred_dir, "Directory of predicted 16-bit PNGs")->required();
  eval_cmd->add_option("--gt", eval_opt.gt_dir, "Directory of ground-truth depth PNGs (meters x 256)")->required();
  eval_cmd->add_option("--focal", eval_opt.camera.focal_px, "Focal length in pixels");
  eval_cmd->add_option("--baseline", eval_opt.camera.baseline_m, "Stereo baseline in meters");
  eval_cmd->add_option("--cap", cap, "Depth cap in meters")->check(CLI::IsMember({80.0, 50.0}))->capture_default_str();
  eval_cmd->add_option("--crop", crop, "Evaluation crop")->check(CLI::IsMember({"eigen", "none"}))->capture_default_str();
  eval_cmd->add_option("--pred-type", pred_kind, "Prediction content")
      ->check(CLI::IsMember({"disparity", "depth"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_opt.out, "Aggregate metrics CSV")->required();

  BenchOptions bench_opt;
  std::string weights_path;
  std::string dims = "256x512";
  std::string levels = "h,q,e";
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Time inference per exit level and report CSV");
  bench_cmd->add_option("--weights", weights_path, "PYDW weight file (random weights when omitted)");
  bench_cmd->add_option("--dims", dims, "Input size HxW")->capture_default_str();
  bench_cmd->add_option("--levels", levels, "Comma-separated exit levels")->capture_default_str();
  bench_cmd->add_option("--reps", bench_opt.reps, "Timed repetitions per level")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--seed", bench_opt.seed, "Seed for the input image and random weights")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "CSV output path");

  BatteryOptions battery;
  bool corrupt_ssim = false;
  auto* verify_cmd = app.add_subcommand("verify-loss", "Run the synthetic loss verification battery");
  verify_cmd->add_option("--seed", battery.seed, "Seed for the synthetic inputs")->capture_default_str();
  verify_cmd->add_flag("--corrupt-ssim", corrupt_ssim, "Feed a wrong SSIM constant (battery self-test)")->group("");

  std::uint64_t init_seed = 0;
  std::string init_out;
  auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights for the default network");
  init_cmd->add_option("--seed", init_seed, "Generator seed")->required();
  init_cmd->add_option("--out", init_out, "Output PYDW file")->required();

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "List tensors, shapes and parameter count of a weight file");
  inspect_cmd->add_option("--weights", inspect_path, "PYDW weight file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*infer_cmd) {
      infer_opt.exit = exit_from(infer_exit);
      if (!preview.empty()) infer_opt.preview = preview;
      return cmd_infer(infer_opt, std::cout);
    }
    if (*eval_cmd) {
      eval_opt.camera.max_depth_m = cap;
      eval_opt.eigen_crop = crop == "eigen";
      eval_opt.pred_kind = pred_kind == "depth" ? PredictionKind::Depth : PredictionKind::Disparity;
      if (eval_opt.pred_kind == PredictionKind::Depth) {
        // Camera constants are unused for depth predictions.
        if (eval_opt.camera.focal_px <= 0) eval_opt.camera.focal_px = 1.0;
        if (eval_opt.camera.baseline_m <= 0) eval_opt.camera.baseline_m = 1.0;
      }
      return cmd_eval(eval_opt, std::cout, std::cerr);
    }
    if (*bench_cmd) {
      if (!weights_path.empty()) bench_opt.weights = weights_path;
      if (!bench_out.empty()) bench_opt.out = bench_out;
      std::tie(bench_opt.height, bench_opt.width) = parse_dims(dims);
      bench_opt.levels.clear();
      std::stringstream ss(levels);
      for (std::string tok; std::getline(ss, tok, ',');) bench_opt.levels.push_back(exit_from(tok));
      cmd_bench(bench_opt, std::cout);
      return 0;
    }
    if (*verify_cmd) {
      if (corrupt_ssim) battery.ssim.c1 = 0.1;
      return cmd_verify_loss(battery, std::cout);
    }
    if (*init_cmd) return cmd_init_weights(init_seed, init_out, std::cout);
    if (*inspect_cmd) return cmd_inspect(inspect_path, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
