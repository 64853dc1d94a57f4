#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"
#include "tensor.hpp"

namespace pyrdepth {

struct CameraModel {
  double focal_px = 0.0;
  double baseline_m = 0.0;
  double min_depth_m = 1e-3;
  double max_depth_m = 80.0;

  void validate() const {
    if (!(focal_px > 0.0)) throw ArgumentError(concat("focal length must be positive, got ", focal_px));
    if (!(baseline_m > 0.0)) throw ArgumentError(concat("baseline must be positive, got ", baseline_m));
    if (!(min_depth_m > 0.0 && min_depth_m < max_depth_m)) {
      throw ArgumentError(concat("depth range [", min_depth_m, ", ", max_depth_m, "] is invalid"));
    }
  }
};

/// Error and accuracy statistics over the valid pixels of one image.
struct DepthMetrics {
  double abs_rel = 0;
  double sq_rel = 0;
  double rmse = 0;
  double rmse_log = 0;
  double d1 = 0;  // fraction with max(p/g, g/p) < 1.25
  double d2 = 0;  // < 1.25^2
  double d3 = 0;  // < 1.25^3
};

inline constexpr const char* kMetricsCsvHeader = "abs_rel,sq_rel,rmse,rmse_log,d1,d2,d3";

/// depth = f * B / disparity, clamped to [min_depth, max_depth]. Non-positive
/// disparities map to max_depth.
inline Tensor disparity_to_depth(const Tensor& disparity, const CameraModel& cam) {
  cam.validate();
  Tensor depth(disparity.shape());
  const double fb = cam.focal_px * cam.baseline_m;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = disparity.data()[i];
    const double z = d > 0.0 ? fb / d : cam.max_depth_m;
    depth.data()[i] = static_cast<float>(std::clamp(z, cam.min_depth_m, cam.max_depth_m));
  }
  return depth;
}

/// Metrics over pixels where mask is non-zero. Both depth maps are expected
/// to be clamped to [min_depth, cap_m] already; cap_m is only checked.
inline DepthMetrics compute_metrics(const Tensor& pred, const Tensor& gt, const Tensor& mask, double cap_m) {
  require_same_shape(pred, gt, "compute_metrics: prediction vs ground truth");
  require_same_shape(pred, mask, "compute_metrics: prediction vs mask");
  if (!(cap_m > 0.0)) throw ArgumentError(concat("compute_metrics: cap must be positive, got ", cap_m));

  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t n = 0, a1 = 0, a2 = 0, a3 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask.data()[i] == 0.0f) continue;
    const double p = pred.data()[i], g = gt.data()[i];
    if (!(p > 0.0) || !(g > 0.0)) {
      throw ArgumentError(concat("compute_metrics: non-positive depth at masked pixel ", i, " (pred ", p, ", gt ", g, ")"));
    }
    const double diff = p - g;
    abs_rel += std::abs(diff) / g;
    sq_rel += diff * diff / g;
    sq += diff * diff;
    const double lg = std::log(p) - std::log(g);
    sq_log += lg * lg;
    const double ratio = std::max(p / g, g / p);
    a1 += ratio < 1.25;
    a2 += ratio < 1.25 * 1.25;
    a3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) throw ArgumentError("compute_metrics: mask selects no pixels");
  const double count = static_cast<double>(n);
  return {abs_rel / count,
          sq_rel / count,
          std::sqrt(sq / count),
          std::sqrt(sq_log / count),
          static_cast<double>(a1) / count,
          static_cast<double>(a2) / count,
          static_cast<double>(a3) / count};
}

struct CropWindow {
  int top, bottom;  // rows [top, bottom)
  int left, right;  // cols [left, right)
};

inline CropWindow eval_crop_window(int h, int w) {
  if (h < 10 || w < 10) throw ArgumentError(concat("eval crop needs at least 10x10, got ", h, "x", w));
  return {static_cast<int>(std::floor(0.40810811 * h)), static_cast<int>(std::floor(0.99189189 * h)),
          static_cast<int>(std::floor(0.03594771 * w)), static_cast<int>(std::floor(0.96405229 * w))};
}

/// Binary (1, 1, h, w) mask of the standard evaluation crop.
inline Tensor eval_crop_mask(int h, int w) {
  const auto win = eval_crop_window(h, w);
  Tensor mask({1, 1, h, w});
  for (int y = win.top; y < win.bottom; ++y)
    for (int x = win.left; x < win.right; ++x) mask(0, 0, y, x) = 1.0f;
  return mask;
}

}  // namespace pyrdepth
