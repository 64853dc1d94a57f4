#pragma once

// Command implementations behind the pyrdepth CLI. Each returns a process
// exit status and reports through the given streams; errors propagate as
// exceptions for the caller to print.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "architecture.hpp"
#include "bench.hpp"
#include "colormap.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "kernels.hpp"
#include "loss_battery.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "synthetic.hpp"
#include "weights.hpp"

namespace pyrdepth {

namespace fs = std::filesystem;

inline constexpr std::size_t kParamBandLow = 1'800'000;
inline constexpr std::size_t kParamBandHigh = 2'050'000;
inline constexpr int kDefaultHeight = 256;
inline constexpr int kDefaultWidth = 512;

struct InferOptions {
  fs::path weights;
  fs::path input;
  fs::path out;
  ExitLevel exit = ExitLevel::H;
  bool resize = false;
  std::optional<fs::path> preview;
};

/// Full-resolution disparity (pixels * 256, 16-bit PNG) for one image.
/// With resize, the image is brought to 256x512 and the result mapped back to
/// the original size; without it, sizes not divisible by 64 are rejected.
inline int cmd_infer(const InferOptions& opt, std::ostream& log) {
  const Network net = build(NetworkConfig{}, load(opt.weights));
  const Tensor original = read_rgb_image(opt.input);
  const int div = 1 << net.levels();
  const bool divisible = original.height() % div == 0 && original.width() % div == 0;
  if (!divisible && !opt.resize) {
    throw ArgumentError(concat("input ", original.width(), "x", original.height(), " is not divisible by ", div,
                               "; pass --resize to run at ", kDefaultWidth, "x", kDefaultHeight));
  }
  const Tensor image = opt.resize ? bilinear_resize(original, kDefaultHeight, kDefaultWidth) : original;
  Tensor disparity = infer_fullres(net, image, opt.exit);
  if (image.width() != original.width() || image.height() != original.height()) {
    disparity = bilinear_resize(disparity, original.height(), original.width());
    const float ratio = static_cast<float>(original.width()) / static_cast<float>(image.width());
    for (float& v : disparity.data()) v *= ratio;
  }
  write_scaled16(opt.out, disparity);
  if (opt.preview) {
    write_png(*opt.preview, colorize_disparity(disparity, net.config().disparity_scale * original.width()));
  }
  log << "wrote " << opt.out.string() << " (" << original.width() << "x" << original.height() << ", exit "
      << to_string(opt.exit) << ")\n";
  return 0;
}

enum class PredictionKind { Disparity, Depth };

struct EvalOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path out;
  CameraModel camera{};  // max_depth_m doubles as the cap
  bool eigen_crop = true;
  PredictionKind pred_kind = PredictionKind::Disparity;
};

struct EvalRow {
  std::string stem;
  DepthMetrics metrics;
};

inline std::map<std::string, fs::path> png_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(concat("'", dir.string(), "' is not a directory"));
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

inline DepthMetrics evaluate_pair(const fs::path& pred_path, const fs::path& gt_path, const EvalOptions& opt) {
  const Tensor gt = read_scaled16(gt_path);
  Tensor pred = read_scaled16(pred_path);
  const CameraModel& cam = opt.camera;
  if (pred.shape() != gt.shape()) {
    const float ratio = static_cast<float>(gt.width()) / static_cast<float>(pred.width());
    pred = bilinear_resize(pred, gt.height(), gt.width());
    if (opt.pred_kind == PredictionKind::Disparity) {
      for (float& v : pred.data()) v *= ratio;
    }
  }
  Tensor depth = opt.pred_kind == PredictionKind::Disparity ? disparity_to_depth(pred, cam) : pred;
  for (float& v : depth.data()) {
    v = static_cast<float>(std::clamp(static_cast<double>(v), cam.min_depth_m, cam.max_depth_m));
  }
  Tensor mask = opt.eigen_crop ? eval_crop_mask(gt.height(), gt.width()) : Tensor(gt.shape(), 1.0f);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double g = gt.data()[i];
    if (!(g > cam.min_depth_m && g < cam.max_depth_m)) mask.data()[i] = 0.0f;
  }
  return compute_metrics(depth, gt, mask, cam.max_depth_m);
}

inline void write_metrics(std::ostream& os, const DepthMetrics& m) {
  os << std::setprecision(9) << m.abs_rel << ',' << m.sq_rel << ',' << m.rmse << ',' << m.rmse_log << ',' << m.d1 << ','
     << m.d2 << ',' << m.d3;
}

inline fs::path per_image_csv_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".per_image.csv");
  return p;
}

/// Evaluates every stem present in both directories. The aggregate (plain
/// mean of per-image metrics) goes to `out`; per-image rows go next to it.
inline int cmd_eval(const EvalOptions& opt, std::ostream& log, std::ostream& err) {
  opt.camera.validate();
  const auto preds = png_stems(opt.pred_dir);
  const auto gts = png_stems(opt.gt_dir);
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> jobs;
  for (const auto& [stem, path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) {
      err << "skipped " << stem << ": no ground truth\n";
      continue;
    }
    jobs.push_back({stem, {path, it->second}});
  }
  for (const auto& [stem, _] : gts) {
    if (!preds.count(stem)) err << "skipped " << stem << ": no prediction\n";
  }
  if (jobs.empty()) {
    throw ArgumentError(concat("no matching prediction/ground-truth pairs between '", opt.pred_dir.string(), "' and '",
                               opt.gt_dir.string(), "'"));
  }

  std::vector<EvalRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    rows[i] = {jobs[i].first, evaluate_pair(jobs[i].second.first, jobs[i].second.second, opt)};
  });

  DepthMetrics mean;
  for (const auto& r : rows) {
    mean.abs_rel += r.metrics.abs_rel;
    mean.sq_rel += r.metrics.sq_rel;
    mean.rmse += r.metrics.rmse;
    mean.rmse_log += r.metrics.rmse_log;
    mean.d1 += r.metrics.d1;
    mean.d2 += r.metrics.d2;
    mean.d3 += r.metrics.d3;
  }
  const double n = static_cast<double>(rows.size());
  for (double* f : {&mean.abs_rel, &mean.sq_rel, &mean.rmse, &mean.rmse_log, &mean.d1, &mean.d2, &mean.d3}) *f /= n;

  std::ofstream agg(opt.out);
  if (!agg) throw IoError(concat("cannot open '", opt.out.string(), "' for writing"));
  agg << kMetricsCsvHeader << '\n';
  write_metrics(agg, mean);
  agg << '\n';

  const fs::path detail_path = per_image_csv_path(opt.out);
  std::ofstream detail(detail_path);
  if (!detail) throw IoError(concat("cannot open '", detail_path.string(), "' for writing"));
  detail << "image," << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    detail << r.stem << ',';
    write_metrics(detail, r.metrics);
    detail << '\n';
  }
  log << "evaluated " << rows.size() << " image(s); abs_rel " << mean.abs_rel << ", d1 " << mean.d1 << '\n';
  return 0;
}

struct BenchOptions {
  std::optional<fs::path> weights;  // random weights from `seed` when absent
  int height = kDefaultHeight;
  int width = kDefaultWidth;
  std::vector<ExitLevel> levels{ExitLevel::H, ExitLevel::Q, ExitLevel::E};
  int reps = 20;
  std::uint64_t seed = 0;
  std::optional<fs::path> out;
};

inline std::vector<BenchRecord> cmd_bench(const BenchOptions& opt, std::ostream& csv) {
  const NetworkConfig cfg;
  const Network net = build(cfg, opt.weights ? load(*opt.weights) : random_init(cfg, opt.seed));
  const Tensor image = random_tensor({1, 3, opt.height, opt.width}, opt.seed);
  std::vector<BenchRecord> records;
  for (ExitLevel e : opt.levels) records.push_back(bench_level(net, image, e, opt.reps));

  auto emit = [&](std::ostream& os) {
    os << kBenchCsvHeader << '\n';
    for (const auto& r : records) write_csv_row(os, r);
  };
  emit(csv);
  if (opt.out) {
    std::ofstream f(*opt.out);
    if (!f) throw IoError(concat("cannot open '", opt.out->string(), "' for writing"));
    emit(f);
  }
  return records;
}

inline int cmd_verify_loss(const BatteryOptions& opt, std::ostream& out) {
  const auto results = run_loss_battery(opt);
  for (const auto& r : results) out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
  const bool ok = all_passed(results);
  out << (ok ? "all loss checks passed\n" : "loss checks FAILED\n");
  return ok ? 0 : 1;
}

inline int cmd_init_weights(std::uint64_t seed, const fs::path& out_path, std::ostream& out) {
  const NetworkConfig cfg;
  const WeightContainer weights = random_init(cfg, seed);
  save(weights, out_path);
  const std::size_t params = count_parameters(build(cfg, weights));
  out << "parameters " << params << '\n';
  if (params < kParamBandLow || params > kParamBandHigh) {
    out << "parameter count outside [" << kParamBandLow << ", " << kParamBandHigh << "]\n";
    return 1;
  }
  return 0;
}

inline int cmd_inspect(const fs::path& weights_path, std::ostream& out) {
  const WeightContainer weights = load(weights_path);
  out << "name,dims,elements\n";
  for (const auto& [name, entry] : weights) {
    out << name << ',';
    for (std::size_t i = 0; i < entry.dims.size(); ++i) out << (i ? "x" : "") << entry.dims[i];
    out << ',' << entry.data.size() << '\n';
  }
  out << "tensors " << weights.size() << ", elements " << weights.total_elements() << '\n';
  try {
    out << "network parameters " << count_parameters(build(NetworkConfig{}, weights)) << '\n';
  } catch (const std::exception& e) {
    out << "not a complete default network: " << e.what() << '\n';
  }
  return 0;
}

}  // namespace pyrdepth
