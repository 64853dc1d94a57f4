#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "error.hpp"
#include "kernels.hpp"
#include "network.hpp"
#include "tensor.hpp"

namespace pyrdepth {

/// Rectified stereo pair, both views (1, 3, H, W) in [0, 1].
struct StereoPair {
  Tensor left;
  Tensor right;
};

struct LossWeights {
  double alpha_ap = 1.0;
  double alpha_lr = 1.0;
  double alpha_ds_base = 0.1;  // smoothness weight at scale s is alpha_ds_base / 2^s
  double ssim_alpha = 0.85;

  double smoothness_weight(int level) const { return alpha_ds_base / static_cast<double>(1 << level); }
};

/// SSIM stabilizers. Exposed so the verification battery can be fed a
/// deliberately wrong constant.
struct SsimConstants {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Samples each row of `image` at x + sign * d(x) with linear interpolation
/// along the width, clamping coordinates to the image. With sign = -1 this
/// rebuilds the left view from the right image and the left disparity.
inline Tensor warp_horizontal(const Tensor& image, const Tensor& disparity, int sign) {
  if (sign != 1 && sign != -1) throw ArgumentError(concat("warp sign must be +1 or -1, got ", sign));
  if (disparity.channels() != 1 || disparity.batch() != image.batch() || disparity.height() != image.height() ||
      disparity.width() != image.width()) {
    throw ShapeError(concat("warp_horizontal: disparity ", disparity.shape(), " does not match image ", image.shape()));
  }
  const int W = image.width();
  Tensor out(image.shape());
  for (int n = 0; n < image.batch(); ++n) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < W; ++x) {
        double src = x + sign * static_cast<double>(disparity(n, 0, y, x));
        src = std::clamp(src, 0.0, static_cast<double>(W - 1));
        const int x0 = static_cast<int>(std::floor(src));
        const int x1 = std::min(x0 + 1, W - 1);
        const double f = src - x0;
        for (int c = 0; c < image.channels(); ++c) {
          out(n, c, y, x) = static_cast<float>((1.0 - f) * image(n, c, y, x0) + f * image(n, c, y, x1));
        }
      }
    }
  }
  return out;
}

/// Per-pixel SSIM from 3x3 valid-region block statistics; (h-2) x (w-2).
inline Tensor ssim_map(const Tensor& a, const Tensor& b, const SsimConstants& k = {}) {
  require_same_shape(a, b, "ssim_map");
  Tensor aa(a.shape()), bb(a.shape()), ab(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa.data()[i] = a.data()[i] * a.data()[i];
    bb.data()[i] = b.data()[i] * b.data()[i];
    ab.data()[i] = a.data()[i] * b.data()[i];
  }
  const Tensor mu_a = avg_pool3x3(a), mu_b = avg_pool3x3(b);
  const Tensor e_aa = avg_pool3x3(aa), e_bb = avg_pool3x3(bb), e_ab = avg_pool3x3(ab);
  Tensor out(mu_a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ma = mu_a.data()[i], mb = mu_b.data()[i];
    const double va = e_aa.data()[i] - ma * ma;
    const double vb = e_bb.data()[i] - mb * mb;
    const double cov = e_ab.data()[i] - ma * mb;
    const double num = (2 * ma * mb + k.c1) * (2 * cov + k.c2);
    const double den = (ma * ma + mb * mb + k.c1) * (va + vb + k.c2);
    out.data()[i] = static_cast<float>(num / den);
  }
  return out;
}

/// Mean over all elements of ssim_alpha * (1 - SSIM) / 2 + (1 - ssim_alpha) * |a - b|.
/// The SSIM map is edge-replicated back to full size so both terms share
/// the same N.
inline double appearance_loss(const Tensor& orig, const Tensor& warped, double ssim_alpha = 0.85,
                              const SsimConstants& k = {}) {
  require_same_shape(orig, warped, "appearance_loss");
  const bool with_ssim = ssim_alpha != 0.0;
  if (with_ssim && (orig.height() < 3 || orig.width() < 3)) {
    throw ArgumentError(concat("appearance_loss: SSIM needs at least 3x3 images, got ", orig.shape()));
  }
  Tensor ssim;
  if (with_ssim) ssim = ssim_map(orig, warped, k);
  const int H = orig.height(), W = orig.width();
  double sum = 0.0;
  for (int n = 0; n < orig.batch(); ++n) {
    for (int c = 0; c < orig.channels(); ++c) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const double l1 = std::abs(static_cast<double>(orig(n, c, y, x)) - warped(n, c, y, x));
          double term = (1.0 - ssim_alpha) * l1;
          if (with_ssim) {
            const int sy = std::clamp(y - 1, 0, H - 3), sx = std::clamp(x - 1, 0, W - 3);
            term += ssim_alpha * (1.0 - ssim(n, c, sy, sx)) / 2.0;
          }
          sum += term;
        }
      }
    }
  }
  return sum / static_cast<double>(orig.size());
}

/// Edge-aware smoothness: mean over the (h, w-1) region of
/// |dx d| * exp(-|dx I|) plus mean over the (h-1, w) region of
/// |dy d| * exp(-|dy I|). Forward differences; image gradients averaged over
/// channels.
inline double smoothness_loss(const Tensor& disparity, const Tensor& image) {
  if (disparity.channels() != 1 || disparity.batch() != image.batch() || disparity.height() != image.height() ||
      disparity.width() != image.width()) {
    throw ShapeError(concat("smoothness_loss: disparity ", disparity.shape(), " does not match image ", image.shape()));
  }
  const int H = disparity.height(), W = disparity.width(), C = image.channels();
  auto image_grad = [&](int n, int y0, int x0, int y1, int x1) {
    double g = 0.0;
    for (int c = 0; c < C; ++c) g += std::abs(static_cast<double>(image(n, c, y1, x1)) - image(n, c, y0, x0));
    return g / C;
  };
  double sx = 0.0, sy = 0.0;
  for (int n = 0; n < disparity.batch(); ++n) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x + 1 < W; ++x) {
        const double dd = std::abs(static_cast<double>(disparity(n, 0, y, x + 1)) - disparity(n, 0, y, x));
        sx += dd * std::exp(-image_grad(n, y, x, y, x + 1));
      }
    }
    for (int y = 0; y + 1 < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double dd = std::abs(static_cast<double>(disparity(n, 0, y + 1, x)) - disparity(n, 0, y, x));
        sy += dd * std::exp(-image_grad(n, y, x, y + 1, x));
      }
    }
  }
  const double nx = static_cast<double>(disparity.batch()) * H * (W - 1);
  const double ny = static_cast<double>(disparity.batch()) * (H - 1) * W;
  return (nx > 0 ? sx / nx : 0.0) + (ny > 0 ? sy / ny : 0.0);
}

/// Mean of |d_src(x) - d_other(x + sign * d_src(x))|, the inner sample
/// linearly interpolated and edge-clamped.
inline double lr_consistency_loss(const Tensor& d_src, const Tensor& d_other, int sign = 1) {
  require_same_shape(d_src, d_other, "lr_consistency_loss");
  if (d_src.channels() != 1) throw ShapeError(concat("lr_consistency_loss: expected 1 channel, got ", d_src.shape()));
  const Tensor projected = warp_horizontal(d_other, d_src, sign);
  double sum = 0.0;
  for (std::size_t i = 0; i < d_src.size(); ++i) {
    sum += std::abs(static_cast<double>(d_src.data()[i]) - projected.data()[i]);
  }
  return sum / static_cast<double>(d_src.size());
}

struct ScaleLoss {
  int level = 0;
  double ap_left = 0, ap_right = 0;
  double ds_left = 0, ds_right = 0;
  double lr_left = 0, lr_right = 0;
  double smoothness_weight = 0;
  double total = 0;
};

struct LossBreakdown {
  std::vector<ScaleLoss> scales;
  double total = 0;

  // Weighted sum rebuilt from the stored parts.
  double recompose(const LossWeights& w) const {
    double sum = 0.0;
    for (const auto& s : scales) {
      sum += w.alpha_ap * (s.ap_left + s.ap_right) + w.smoothness_weight(s.level) * (s.ds_left + s.ds_right) +
             w.alpha_lr * (s.lr_left + s.lr_right);
    }
    return sum;
  }
};

/// Multi-scale objective summed over every level present in both pyramids.
/// Disparities are the per-level pixel-unit maps; the pair is downsampled
/// bilinearly to each level.
inline LossBreakdown total_loss(const DisparityPyramid& left, const DisparityPyramid& right, const StereoPair& pair,
                                const LossWeights& w = {}, const SsimConstants& k = {}) {
  require_same_shape(pair.left, pair.right, "total_loss: stereo pair");
  if (left.finest_level != right.finest_level || left.scaled.size() != right.scaled.size()) {
    throw ShapeError(concat("total_loss: left pyramid covers levels ", left.finest_level, "..", left.coarsest_level(),
                            " but right covers ", right.finest_level, "..", right.coarsest_level()));
  }
  LossBreakdown out;
  for (int level = left.finest_level; level <= left.coarsest_level(); ++level) {
    const Tensor& dl = left.scaled_map(level);
    const Tensor& dr = right.scaled_map(level);
    require_same_shape(dl, dr, "total_loss: disparity level");
    const Tensor il = bilinear_resize(pair.left, dl.height(), dl.width());
    const Tensor ir = bilinear_resize(pair.right, dl.height(), dl.width());

    ScaleLoss s;
    s.level = level;
    s.ap_left = appearance_loss(il, warp_horizontal(ir, dl, -1), w.ssim_alpha, k);
    s.ap_right = appearance_loss(ir, warp_horizontal(il, dr, +1), w.ssim_alpha, k);
    s.ds_left = smoothness_loss(dl, il);
    s.ds_right = smoothness_loss(dr, ir);
    s.lr_left = lr_consistency_loss(dl, dr, -1);
    s.lr_right = lr_consistency_loss(dr, dl, +1);
    s.smoothness_weight = w.smoothness_weight(level);
    s.total = w.alpha_ap * (s.ap_left + s.ap_right) + s.smoothness_weight * (s.ds_left + s.ds_right) +
              w.alpha_lr * (s.lr_left + s.lr_right);
    out.total += s.total;
    out.scales.push_back(s);
  }
  return out;
}

using ScalarLoss = std::function<double(const Tensor&)>;

/// Central differences (L(d + eps e_i) - L(d - eps e_i)) / 2 eps per element.
inline Tensor fd_gradient(const ScalarLoss& loss, const Tensor& disparity, double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError(concat("fd_gradient: epsilon must be positive, got ", epsilon));
  Tensor grad(disparity.shape());
  Tensor probe = disparity;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const float base = probe.data()[i];
    // The realized step, which differs from epsilon by float rounding.
    const float up = static_cast<float>(base + epsilon);
    const float down = static_cast<float>(base - epsilon);
    probe.data()[i] = up;
    const double lp = loss(probe);
    probe.data()[i] = down;
    const double lm = loss(probe);
    probe.data()[i] = base;
    grad.data()[i] = static_cast<float>((lp - lm) / (static_cast<double>(up) - down));
  }
  return grad;
}

struct DisparityFitOptions {
  double smoothness = 0.05;
  double ssim_alpha = 0.85;
  double epsilon = 1e-2;
  float initial = 0.0f;
  std::vector<double>* trace = nullptr;  // objective before each step and after the last
};

/// Photometric + smoothness objective of a full-resolution left disparity.
inline double disparity_objective(const StereoPair& pair, const Tensor& disparity, const DisparityFitOptions& opt) {
  const Tensor rebuilt = warp_horizontal(pair.right, disparity, -1);
  return appearance_loss(pair.left, rebuilt, opt.ssim_alpha) + opt.smoothness * smoothness_loss(disparity, pair.left);
}

/// Gradient descent on the left disparity field itself, gradients by central
/// differences. step_size is per pixel: the mean-loss gradient is multiplied
/// by the pixel count.
inline Tensor optimize_disparity(const StereoPair& pair, int steps, double step_size, DisparityFitOptions opt = {}) {
  require_same_shape(pair.left, pair.right, "optimize_disparity");
  if (steps < 0) throw ArgumentError(concat("optimize_disparity: steps must be non-negative, got ", steps));
  if (!(step_size > 0.0)) throw ArgumentError(concat("optimize_disparity: step_size must be positive, got ", step_size));
  if (pair.left.height() * pair.left.width() > 32 * 64) {
    throw ArgumentError(concat("optimize_disparity: pair ", pair.left.shape(), " exceeds the 32x64 budget"));
  }
  Tensor d({pair.left.batch(), 1, pair.left.height(), pair.left.width()}, opt.initial);
  auto objective = [&](const Tensor& field) { return disparity_objective(pair, field, opt); };
  const double pixels = static_cast<double>(d.size());
  for (int step = 0; step < steps; ++step) {
    if (opt.trace) opt.trace->push_back(objective(d));
    const Tensor g = fd_gradient(objective, d, opt.epsilon);
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.data()[i] -= static_cast<float>(step_size * pixels * g.data()[i]);
    }
  }
  if (opt.trace && steps > 0) opt.trace->push_back(objective(d));
  return d;
}

struct AugmentRanges {
  double flip_probability = 0.5;
  double gamma_lo = 0.8, gamma_hi = 1.2;
  double brightness_lo = 0.5, brightness_hi = 2.0;
  double color_lo = 0.8, color_hi = 1.2;
};

namespace detail {

inline Tensor mirror_width(const Tensor& t) {
  Tensor out(t.shape());
  for (int n = 0; n < t.batch(); ++n)
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) out(n, c, y, x) = t(n, c, y, t.width() - 1 - x);
  return out;
}

}  // namespace detail

/// Seeded photometric augmentation shared by both views: optional horizontal
/// flip (views swapped and mirrored), gamma, brightness factor, per-channel
/// color factor, then clamping to [0, 1].
inline StereoPair augment(const StereoPair& pair, std::uint64_t seed, const AugmentRanges& r = {}) {
  require_same_shape(pair.left, pair.right, "augment");
  std::mt19937_64 gen(seed);
  auto uniform = [&gen](double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53); };

  const bool flip = uniform(0.0, 1.0) < r.flip_probability;
  const double gamma = uniform(r.gamma_lo, r.gamma_hi);
  const double brightness = uniform(r.brightness_lo, r.brightness_hi);
  std::vector<double> color(static_cast<std::size_t>(pair.left.channels()));
  for (auto& c : color) c = uniform(r.color_lo, r.color_hi);

  StereoPair out = flip ? StereoPair{detail::mirror_width(pair.right), detail::mirror_width(pair.left)} : pair;
  for (Tensor* view : {&out.left, &out.right}) {
    for (int n = 0; n < view->batch(); ++n)
      for (int c = 0; c < view->channels(); ++c)
        for (float& v : view->plane(n, c)) {
          const double x = std::pow(static_cast<double>(v), gamma) * brightness * color[c];
          v = static_cast<float>(std::clamp(x, 0.0, 1.0));
        }
  }
  return out;
}

}  // namespace pyrdepth
