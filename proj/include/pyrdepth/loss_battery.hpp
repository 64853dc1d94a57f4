#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "error.hpp"
#include "loss.hpp"
#include "synthetic.hpp"

namespace pyrdepth {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct BatteryOptions {
  std::uint64_t seed = 0;
  // Constants handed to the loss code under test. The closed-form oracles
  // always use the reference values, so a wrong constant shows up as a
  // failed check.
  SsimConstants ssim{};
  int fit_steps = 200;
  double fit_step_size = 1.0;
};

/// Synthetic battery over the loss terms: closed-form spot checks, finite
/// difference checks, multi-scale recomposition and the toy disparity fit.
inline std::vector<CheckResult> run_loss_battery(const BatteryOptions& opt = {}) {
  std::vector<CheckResult> results;
  auto record = [&](std::string name, bool pass, std::string detail) {
    results.push_back({std::move(name), pass, std::move(detail)});
  };
  const SsimConstants ref{};
  const SsimConstants& k = opt.ssim;
  constexpr double tol = 1e-5;

  // SSIM of two flat images reduces to the luminance term.
  {
    const double k1 = 0.2, k2 = 0.4;
    const double expected = (2 * k1 * k2 + ref.c1) / (k1 * k1 + k2 * k2 + ref.c1);
    const Tensor s = ssim_map(Tensor({1, 3, 6, 7}, static_cast<float>(k1)), Tensor({1, 3, 6, 7}, static_cast<float>(k2)), k);
    double worst = 0;
    for (float v : s.data()) worst = std::max(worst, std::abs(v - expected));
    record("ssim_zero_variance_closed_form", worst <= tol, concat("max |err| = ", worst));

    const double ap = appearance_loss(Tensor({1, 3, 6, 7}, 0.2f), Tensor({1, 3, 6, 7}, 0.4f), 1.0, k);
    const double ap_expected = (1.0 - expected) / 2.0;
    record("appearance_ssim_only_closed_form", std::abs(ap - ap_expected) <= tol,
           concat("got ", ap, ", expected ", ap_expected));
  }
  {
    const Tensor x = random_tensor({1, 3, 9, 11}, opt.seed);
    const Tensor y = random_tensor({1, 3, 9, 11}, opt.seed + 1);
    const Tensor self = ssim_map(x, x, k);
    double worst = 0;
    for (float v : self.data()) worst = std::max(worst, std::abs(v - 1.0));
    record("ssim_identity", worst <= 1e-6, concat("max |1 - ssim(x, x)| = ", worst));

    const Tensor ab = ssim_map(x, y, k), ba = ssim_map(y, x, k);
    double asym = 0;
    bool in_range = true;
    for (std::size_t i = 0; i < ab.size(); ++i) {
      asym = std::max(asym, static_cast<double>(std::abs(ab.data()[i] - ba.data()[i])));
      in_range = in_range && ab.data()[i] >= -1.0f && ab.data()[i] <= 1.0f;
    }
    record("ssim_symmetry_and_range", asym <= 1e-6 && in_range, concat("max asymmetry ", asym));
  }
  {
    const double l1 = appearance_loss(Tensor({1, 3, 5, 5}, 0.0f), Tensor({1, 3, 5, 5}, 0.5f), 0.0, k);
    record("appearance_l1_only", std::abs(l1 - 0.5) <= tol, concat("got ", l1));
  }

  // Warps of an image whose columns are all distinct.
  {
    Tensor img({1, 1, 4, 10});
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 10; ++x) img(0, 0, y, x) = static_cast<float>(x * x + y);
    const Tensor one = warp_horizontal(img, Tensor({1, 1, 4, 10}, 1.0f), +1);
    const Tensor half = warp_horizontal(img, Tensor({1, 1, 4, 10}, 0.5f), +1);
    double e1 = 0, e2 = 0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x + 1 < 10; ++x) {
        e1 = std::max(e1, static_cast<double>(std::abs(one(0, 0, y, x) - img(0, 0, y, x + 1))));
        e2 = std::max(e2, std::abs(half(0, 0, y, x) - 0.5 * (img(0, 0, y, x) + img(0, 0, y, x + 1))));
      }
    record("warp_integer_shift", e1 <= tol, concat("max |err| = ", e1));
    record("warp_half_pixel_shift", e2 <= tol, concat("max |err| = ", e2));
  }

  {
    Tensor ramp({1, 1, 8, 12});
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 12; ++x) ramp(0, 0, y, x) = static_cast<float>(x);
    const double s = smoothness_loss(ramp, Tensor({1, 3, 8, 12}, 0.3f));
    record("smoothness_ramp", std::abs(s - 1.0) <= tol, concat("got ", s));
    const double flat = smoothness_loss(Tensor({1, 1, 8, 12}, 2.5f), random_tensor({1, 3, 8, 12}, opt.seed + 2));
    record("smoothness_constant_is_zero", flat == 0.0, concat("got ", flat));
  }
  {
    const double diff = lr_consistency_loss(Tensor({1, 1, 6, 9}, 1.0f), Tensor({1, 1, 6, 9}, 3.0f));
    const double same = lr_consistency_loss(Tensor({1, 1, 6, 9}, 2.0f), Tensor({1, 1, 6, 9}, 2.0f));
    record("lr_constant_fields", std::abs(diff - 2.0) <= tol && std::abs(same) <= tol,
           concat("|1-3| field gives ", diff, ", equal fields give ", same));
  }

  // Central differences at the identity-warp minimum.
  const StereoPair still = [&] {
    const Tensor view = WaveTexture(3, opt.seed + 3).render(16, 32);
    return StereoPair{view, view};
  }();
  {
    auto loss = [&](const Tensor& d) { return appearance_loss(still.left, warp_horizontal(still.right, d, -1), 0.85, k); };
    const Tensor g = fd_gradient(loss, Tensor({1, 1, 16, 32}, 0.0f), 1e-3);
    double worst = 0;
    for (float v : g.data()) worst = std::max(worst, static_cast<double>(std::abs(v)));
    record("fd_appearance_at_minimum", worst < 1e-3, concat("max |grad| = ", worst));

    const double scale = 2.5;
    auto scaled = [&](const Tensor& d) { return scale * loss(d); };
    const Tensor d0 = random_tensor({1, 1, 16, 32}, opt.seed + 4, 0.2f, 1.8f);
    const Tensor ga = fd_gradient(scaled, d0, 1e-3), gb = fd_gradient(loss, d0, 1e-3);
    double lin = 0;
    for (std::size_t i = 0; i < ga.size(); ++i) lin = std::max(lin, std::abs(ga.data()[i] - scale * gb.data()[i]));
    record("fd_linearity", lin <= 1e-5, concat("max |grad(aL) - a grad(L)| = ", lin));
  }

  // Multi-scale total on a two-pixel shift.
  {
    const StereoPair shifted = make_shifted_pair(32, 64, 2.0, opt.seed + 5);
    DisparityPyramid left, right;
    left.finest_level = right.finest_level = 1;
    for (int level = 1; level <= 3; ++level) {
      const Shape s{1, 1, 32 >> level, 64 >> level};
      const float d = 2.0f / static_cast<float>(1 << level);
      left.maps.emplace_back(s, 0.5f);
      right.maps.emplace_back(s, 0.5f);
      left.scaled.emplace_back(s, d);
      right.scaled.emplace_back(s, d);
    }
    const LossWeights w;
    const auto breakdown = total_loss(left, right, shifted, w, k);
    const double drift = std::abs(breakdown.recompose(w) - breakdown.total);
    record("total_loss_recomposes", drift <= 1e-6, concat("|recomposed - total| = ", drift));
  }

  // Recover a known 3 px disparity by descending the photometric objective.
  {
    const StereoPair pair = make_shifted_pair(16, 48, 3.0, opt.seed + 6);
    std::vector<double> trace;
    DisparityFitOptions fit;
    fit.trace = &trace;
    const Tensor d = optimize_disparity(pair, opt.fit_steps, opt.fit_step_size, fit);
    int hits = 0, total = 0;
    for (int y = 4; y < 12; ++y)
      for (int x = 4; x < 44; ++x) {
        ++total;
        hits += std::abs(d(0, 0, y, x) - 3.0f) < 0.5f;
      }
    const double rate = static_cast<double>(hits) / total;
    record("disparity_recovery_hit_rate", rate >= 0.70, concat("hit rate ", rate, " (threshold 0.70)"));

    std::vector<double> slow;
    DisparityFitOptions careful;
    careful.trace = &slow;
    (void)optimize_disparity(pair, 10, 0.1, careful);
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < slow.size(); ++i) monotone = monotone && slow[i + 1] < slow[i];
    record("descent_first_10_steps", monotone, concat("objective ", slow.front(), " -> ", slow.back()));
  }
  return results;
}

inline bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return !results.empty();
}

}  // namespace pyrdepth
