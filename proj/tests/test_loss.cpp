#include <gtest/gtest.h>

#include <cmath>

#include "pyrdepth/loss.hpp"
#include "pyrdepth/loss_battery.hpp"
#include "pyrdepth/synthetic.hpp"

namespace pyrdepth {
namespace {

Tensor column_ramp(int h, int w, float scale = 1.0f) {
  Tensor t({1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t(0, 0, y, x) = scale * static_cast<float>(x);
  return t;
}

// Straightforward SSIM with explicit 3x3 sums, for one channel at (y, x)
// being the top-left of the window.
double ssim_window(const Tensor& a, const Tensor& b, int c, int y, int x) {
  double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
  for (int dy = 0; dy < 3; ++dy)
    for (int dx = 0; dx < 3; ++dx) {
      const double p = a(0, c, y + dy, x + dx), q = b(0, c, y + dy, x + dx);
      ma += p;
      mb += q;
      aa += p * p;
      bb += q * q;
      ab += p * q;
    }
  ma /= 9, mb /= 9, aa /= 9, bb /= 9, ab /= 9;
  const double c1 = 1e-4, c2 = 9e-4;
  return (2 * ma * mb + c1) * (2 * (ab - ma * mb) + c2) / ((ma * ma + mb * mb + c1) * (aa - ma * ma + bb - mb * mb + c2));
}

TEST(Ssim, MatchesWindowOracle) {
  const Tensor a = random_tensor({1, 2, 7, 9}, 1), b = random_tensor({1, 2, 7, 9}, 2);
  const Tensor s = ssim_map(a, b);
  ASSERT_EQ(s.shape(), (Shape{1, 2, 5, 7}));
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x) EXPECT_NEAR(s(0, c, y, x), ssim_window(a, b, c, y, x), 1e-5);
}

TEST(Ssim, ZeroVarianceClosedForm) {
  const double expected = (2 * 0.2 * 0.4 + 1e-4) / (0.04 + 0.16 + 1e-4);
  const Tensor flat = ssim_map(Tensor({1, 3, 5, 5}, 0.2f), Tensor({1, 3, 5, 5}, 0.4f));
  for (float v : flat.data()) EXPECT_NEAR(v, expected, 1e-5);
  EXPECT_NEAR(appearance_loss(Tensor({1, 3, 5, 5}, 0.2f), Tensor({1, 3, 5, 5}, 0.4f), 1.0), (1 - expected) / 2, 1e-5);
}

TEST(Ssim, SymmetricAndBounded) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor a = random_tensor({1, 3, 8, 8}, seed), b = random_tensor({1, 3, 8, 8}, seed + 50);
    const Tensor ab = ssim_map(a, b), ba = ssim_map(b, a);
    for (std::size_t i = 0; i < ab.size(); ++i) {
      EXPECT_NEAR(ab.data()[i], ba.data()[i], 1e-6);
      EXPECT_GE(ab.data()[i], -1.0f);
      EXPECT_LE(ab.data()[i], 1.0f);
    }
  }
}

TEST(Appearance, IdenticalImagesAndPureL1) {
  const Tensor a = random_tensor({1, 3, 6, 6}, 3);
  EXPECT_NEAR(appearance_loss(a, a), 0.0, 1e-7);
  EXPECT_NEAR(appearance_loss(Tensor({1, 3, 4, 4}, 0.0f), Tensor({1, 3, 4, 4}, 0.5f), 0.0), 0.5, 1e-7);
  EXPECT_GT(appearance_loss(a, random_tensor({1, 3, 6, 6}, 4)), 0.0);
  EXPECT_THROW(appearance_loss(Tensor({1, 3, 2, 5}), Tensor({1, 3, 2, 5})), ArgumentError);
  EXPECT_THROW(appearance_loss(Tensor({1, 3, 4, 5}), Tensor({1, 3, 4, 6})), ShapeError);
}

TEST(Warp, ZeroDisparityIsExactIdentity) {
  const Tensor img = random_tensor({1, 3, 5, 9}, 5);
  EXPECT_EQ(warp_horizontal(img, Tensor({1, 1, 5, 9}, 0.0f), 1), img);
  EXPECT_EQ(warp_horizontal(img, Tensor({1, 1, 5, 9}, 0.0f), -1), img);
}

TEST(Warp, ShiftsAndClamps) {
  const Tensor img = column_ramp(2, 6);
  const Tensor right = warp_horizontal(img, Tensor({1, 1, 2, 6}, 1.0f), +1);
  const Tensor left = warp_horizontal(img, Tensor({1, 1, 2, 6}, 1.5f), -1);
  for (int x = 0; x < 6; ++x) {
    EXPECT_FLOAT_EQ(right(0, 0, 1, x), std::min(x + 1, 5));
    EXPECT_FLOAT_EQ(left(0, 0, 0, x), std::max(x - 1.5, 0.0));
  }
}

TEST(Warp, LinearInImage) {
  const Tensor a = random_tensor({1, 2, 4, 8}, 6), b = random_tensor({1, 2, 4, 8}, 7);
  const Tensor d = random_tensor({1, 1, 4, 8}, 8, 0.0f, 3.0f);
  Tensor sum(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) sum.data()[i] = 2.0f * a.data()[i] + b.data()[i];
  const Tensor wa = warp_horizontal(a, d, -1), wb = warp_horizontal(b, d, -1), ws = warp_horizontal(sum, d, -1);
  for (std::size_t i = 0; i < ws.size(); ++i) EXPECT_NEAR(ws.data()[i], 2.0f * wa.data()[i] + wb.data()[i], 1e-6);
}

TEST(Warp, Errors) {
  EXPECT_THROW(warp_horizontal(Tensor({1, 3, 4, 4}), Tensor({1, 1, 4, 5}), 1), ShapeError);
  EXPECT_THROW(warp_horizontal(Tensor({1, 3, 4, 4}), Tensor({1, 1, 4, 4}), 0), ArgumentError);
}

TEST(Smoothness, RampConstantAndEdgeDamping) {
  const Tensor ramp = column_ramp(6, 10);
  EXPECT_NEAR(smoothness_loss(ramp, Tensor({1, 3, 6, 10}, 0.4f)), 1.0, 1e-9);
  EXPECT_EQ(smoothness_loss(Tensor({1, 1, 6, 10}, 3.0f), random_tensor({1, 3, 6, 10}, 9)), 0.0);

  // Alternating columns give |dx I| = 1 at every horizontal step.
  Tensor stripes({1, 3, 6, 10});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 10; ++x) stripes(0, c, y, x) = static_cast<float>(x % 2);
  const double damped = smoothness_loss(ramp, stripes);
  EXPECT_NEAR(damped, std::exp(-1.0), 1e-7);
  EXPECT_LT(damped, 1.0);
  EXPECT_THROW(smoothness_loss(Tensor({1, 1, 6, 9}), stripes), ShapeError);
}

TEST(Smoothness, FiniteDifferencesMatchAnalyticGradient) {
  // Away from kinks, d/dd of |d(x+1) - d(x)| w is sign * w at each end.
  const Tensor image = random_tensor({1, 3, 5, 7}, 10);
  Tensor d({1, 1, 5, 7});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) d(0, 0, y, x) = static_cast<float>(0.37 * x * x + 1.3 * y + 0.11 * x * y);
  const int H = 5, W = 7;
  Tensor analytic(d.shape());
  auto wgt = [&](int y0, int x0, int y1, int x1) {
    double g = 0;
    for (int c = 0; c < 3; ++c) g += std::abs(image(0, c, y1, x1) - image(0, c, y0, x0));
    return std::exp(-g / 3);
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x + 1 < W; ++x) {
      const double s = (d(0, 0, y, x + 1) > d(0, 0, y, x) ? 1.0 : -1.0) * wgt(y, x, y, x + 1) / (H * (W - 1));
      analytic(0, 0, y, x + 1) += static_cast<float>(s);
      analytic(0, 0, y, x) -= static_cast<float>(s);
    }
  for (int y = 0; y + 1 < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double s = (d(0, 0, y + 1, x) > d(0, 0, y, x) ? 1.0 : -1.0) * wgt(y, x, y + 1, x) / ((H - 1) * W);
      analytic(0, 0, y + 1, x) += static_cast<float>(s);
      analytic(0, 0, y, x) -= static_cast<float>(s);
    }
  const Tensor fd = fd_gradient([&](const Tensor& t) { return smoothness_loss(t, image); }, d, 1e-3);
  for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_NEAR(fd.data()[i], analytic.data()[i], 1e-5);
}

TEST(LrConsistency, ConstantFields) {
  EXPECT_EQ(lr_consistency_loss(Tensor({1, 1, 4, 6}, 0.0f), Tensor({1, 1, 4, 6}, 0.0f)), 0.0);
  EXPECT_NEAR(lr_consistency_loss(Tensor({1, 1, 4, 6}, 2.0f), Tensor({1, 1, 4, 6}, 2.0f)), 0.0, 1e-9);
  EXPECT_NEAR(lr_consistency_loss(Tensor({1, 1, 4, 6}, 1.0f), Tensor({1, 1, 4, 6}, 3.0f)), 2.0, 1e-9);
  EXPECT_NEAR(lr_consistency_loss(Tensor({1, 1, 4, 6}, 1.0f), Tensor({1, 1, 4, 6}, 3.0f), -1), 2.0, 1e-9);
  EXPECT_THROW(lr_consistency_loss(Tensor({1, 1, 4, 6}), Tensor({1, 1, 4, 5})), ShapeError);
}

TEST(LrConsistency, SamplesTheOtherMapAtTheDisplacedPosition) {
  const Tensor other = column_ramp(3, 8);
  // d_src = 1 samples other(x + 1) = x + 1, clamped at the right edge.
  double expected = 0;
  for (int x = 0; x < 8; ++x) expected += std::abs(1.0 - std::min(x + 1, 7));
  expected /= 8;
  EXPECT_NEAR(lr_consistency_loss(Tensor({1, 1, 3, 8}, 1.0f), other), expected, 1e-9);
}

DisparityPyramid constant_pyramid(int h, int w, int levels, float pixels_at_full) {
  DisparityPyramid p;
  p.finest_level = 1;
  for (int k = 1; k <= levels; ++k) {
    const Shape s{1, 1, h >> k, w >> k};
    p.maps.emplace_back(s, 0.5f);
    p.scaled.emplace_back(s, pixels_at_full / static_cast<float>(1 << k));
  }
  return p;
}

TEST(TotalLoss, ZeroOnIdenticalViewsAndZeroDisparity) {
  const Tensor view = WaveTexture(3, 11).render(32, 64);
  const auto zero = constant_pyramid(32, 64, 3, 0.0f);
  const auto b = total_loss(zero, zero, {view, view});
  EXPECT_EQ(b.scales.size(), 3u);
  EXPECT_NEAR(b.total, 0.0, 1e-7);
  for (const auto& s : b.scales) {
    EXPECT_NEAR(s.ap_left, 0.0, 1e-7);
    EXPECT_EQ(s.ds_left, 0.0);
    EXPECT_EQ(s.lr_right, 0.0);
  }
}

TEST(TotalLoss, TrueShiftBeatsWrongShift) {
  const StereoPair pair = make_shifted_pair(32, 64, 4.0, 12);
  const auto right_shift = constant_pyramid(32, 64, 2, 4.0f);
  const auto wrong_shift = constant_pyramid(32, 64, 2, 0.0f);
  const auto good = total_loss(right_shift, right_shift, pair);
  const auto bad = total_loss(wrong_shift, wrong_shift, pair);
  EXPECT_LT(good.total, 0.5 * bad.total);
  EXPECT_NEAR(good.recompose(LossWeights{}), good.total, 1e-6);
  EXPECT_DOUBLE_EQ(good.scales[0].smoothness_weight, 0.05);
  EXPECT_DOUBLE_EQ(good.scales[1].smoothness_weight, 0.025);
}

TEST(TotalLoss, LevelMismatch) {
  const StereoPair pair = make_shifted_pair(32, 64, 1.0, 13);
  EXPECT_THROW(total_loss(constant_pyramid(32, 64, 2, 1), constant_pyramid(32, 64, 3, 1), pair), ShapeError);
}

TEST(LossWeights, SmoothnessHalvesPerLevel) {
  const LossWeights w;
  for (int s = 0; s < 6; ++s) EXPECT_EQ(w.smoothness_weight(s + 1) / w.smoothness_weight(s), 0.5);
}

TEST(FdGradient, QuadraticAndEpsilonCheck) {
  const Tensor d = random_tensor({1, 1, 3, 4}, 14, -1.0f, 1.0f);
  auto q = [](const Tensor& t) {
    double s = 0;
    for (float v : t.data()) s += 1.5 * v * v;
    return s;
  };
  const Tensor g = fd_gradient(q, d, 1e-2);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g.data()[i], 3.0 * d.data()[i], 1e-5);
  EXPECT_THROW(fd_gradient(q, d, 0.0), ArgumentError);
}

TEST(OptimizeDisparity, ZeroStepsReturnsInitialization) {
  const StereoPair pair = make_shifted_pair(8, 16, 2.0, 15);
  DisparityFitOptions opt;
  opt.initial = 1.25f;
  const Tensor d = optimize_disparity(pair, 0, 1.0, opt);
  for (float v : d.data()) EXPECT_EQ(v, 1.25f);
}

TEST(OptimizeDisparity, IdenticalViewsStayNearZero) {
  const Tensor view = WaveTexture(3, 16).render(16, 32);
  DisparityFitOptions opt;
  opt.initial = 1.0f;
  const Tensor d = optimize_disparity({view, view}, 100, 1.0, opt);
  double mean_abs = 0;
  for (int y = 3; y < 13; ++y)
    for (int x = 3; x < 29; ++x) mean_abs += std::abs(d(0, 0, y, x));
  EXPECT_LT(mean_abs / (10 * 26), 0.25);
}

TEST(OptimizeDisparity, MonotoneEarlyDescent) {
  std::vector<double> trace;
  DisparityFitOptions opt;
  opt.trace = &trace;
  (void)optimize_disparity(make_shifted_pair(16, 32, 3.0, 17), 10, 0.1, opt);
  ASSERT_EQ(trace.size(), 11u);
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) EXPECT_LT(trace[i + 1], trace[i]);
}

TEST(OptimizeDisparity, RejectsLargePairs) {
  const StereoPair big = make_shifted_pair(64, 64, 1.0, 18);
  EXPECT_THROW(optimize_disparity(big, 1, 1.0), ArgumentError);
}

TEST(Augment, DeterministicAndBounded) {
  const StereoPair pair = make_shifted_pair(8, 12, 1.0, 19);
  const auto a = augment(pair, 5), b = augment(pair, 5);
  EXPECT_EQ(a.left, b.left);
  EXPECT_EQ(a.right, b.right);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = augment(pair, seed);
    EXPECT_GE(out.left.min(), 0.0f);
    EXPECT_LE(out.right.max(), 1.0f);
  }
}

TEST(Augment, DegenerateRangesAreIdentity) {
  const StereoPair pair = make_shifted_pair(8, 12, 1.0, 20);
  AugmentRanges none{0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const auto out = augment(pair, 21, none);
  EXPECT_EQ(out.left, pair.left);
  EXPECT_EQ(out.right, pair.right);
}

TEST(Augment, GammaOnConstantImage) {
  AugmentRanges gamma_only{0.0, 1.2, 1.2, 1.0, 1.0, 1.0, 1.0};
  const Tensor half({1, 3, 4, 4}, 0.5f);
  const auto out = augment({half, half}, 22, gamma_only);
  for (float v : out.left.data()) EXPECT_FLOAT_EQ(v, static_cast<float>(std::pow(0.5, 1.2)));
}

TEST(Augment, FlipSwapsAndMirrors) {
  const StereoPair pair = make_shifted_pair(4, 6, 1.0, 23);
  AugmentRanges flip_only{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const auto out = augment(pair, 24, flip_only);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        EXPECT_EQ(out.left(0, c, y, x), pair.right(0, c, y, 5 - x));
        EXPECT_EQ(out.right(0, c, y, x), pair.left(0, c, y, 5 - x));
      }
}

TEST(Battery, AllChecksPassWithReferenceConstants) {
  const auto results = run_loss_battery();
  for (const auto& r : results) EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
  EXPECT_TRUE(all_passed(results));
}

TEST(Battery, WrongSsimConstantIsDetected) {
  BatteryOptions opt;
  opt.ssim.c1 = 0.1;
  opt.fit_steps = 1;
  EXPECT_FALSE(all_passed(run_loss_battery(opt)));
}

}  // namespace
}  // namespace pyrdepth
