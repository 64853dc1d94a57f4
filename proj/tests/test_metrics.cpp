#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pyrdepth/metrics.hpp"
#include "pyrdepth/synthetic.hpp"

namespace pyrdepth {
namespace {

// Textbook formulas, one accumulator per metric.
DepthMetrics scalar_oracle(const std::vector<double>& p, const std::vector<double>& g, const std::vector<int>& m) {
  DepthMetrics r;
  double n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!m[i]) continue;
    n += 1;
    r.abs_rel += std::fabs(p[i] - g[i]) / g[i];
    r.sq_rel += (p[i] - g[i]) * (p[i] - g[i]) / g[i];
    r.rmse += (p[i] - g[i]) * (p[i] - g[i]);
    r.rmse_log += std::pow(std::log(p[i]) - std::log(g[i]), 2);
    const double t = std::fmax(p[i] / g[i], g[i] / p[i]);
    r.d1 += t < 1.25 ? 1 : 0;
    r.d2 += t < 1.5625 ? 1 : 0;
    r.d3 += t < 1.953125 ? 1 : 0;
  }
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(r.rmse / n);
  r.rmse_log = std::sqrt(r.rmse_log / n);
  r.d1 /= n;
  r.d2 /= n;
  r.d3 /= n;
  return r;
}

void expect_metrics_near(const DepthMetrics& a, const DepthMetrics& b, double tol) {
  EXPECT_NEAR(a.abs_rel, b.abs_rel, tol);
  EXPECT_NEAR(a.sq_rel, b.sq_rel, tol);
  EXPECT_NEAR(a.rmse, b.rmse, tol);
  EXPECT_NEAR(a.rmse_log, b.rmse_log, tol);
  EXPECT_NEAR(a.d1, b.d1, tol);
  EXPECT_NEAR(a.d2, b.d2, tol);
  EXPECT_NEAR(a.d3, b.d3, tol);
}

TEST(Metrics, PerfectPrediction) {
  const Tensor gt = random_tensor({1, 1, 8, 8}, 1, 1.0f, 80.0f);
  const auto m = compute_metrics(gt, gt, Tensor(gt.shape(), 1.0f), 80);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.d1, 1.0);
}

TEST(Metrics, ThirtyPercentOverestimate) {
  const Tensor gt = random_tensor({1, 1, 10, 10}, 2, 1.0f, 50.0f);
  Tensor pred(gt.shape());
  for (std::size_t i = 0; i < gt.size(); ++i) pred.data()[i] = 1.3f * gt.data()[i];
  const auto m = compute_metrics(pred, gt, Tensor(gt.shape(), 1.0f), 80);
  EXPECT_NEAR(m.abs_rel, 0.3, 1e-6);  // float storage of 1.3 * g
  EXPECT_EQ(m.d1, 0.0);
  EXPECT_EQ(m.d2, 1.0);
  EXPECT_EQ(m.d3, 1.0);

  // Exactly representable depths pin abs_rel to 0.3 at double precision.
  Tensor g4({1, 1, 1, 4}, std::vector<float>{10, 20, 40, 50});
  Tensor p4({1, 1, 1, 4}, std::vector<float>{13, 26, 52, 65});
  EXPECT_NEAR(compute_metrics(p4, g4, Tensor(g4.shape(), 1.0f), 80).abs_rel, 0.3, 1e-9);
}

TEST(Metrics, LogErrorOfConstantRatio) {
  const Tensor gt = random_tensor({1, 1, 6, 6}, 3, 1.0f, 20.0f);
  Tensor pred(gt.shape());
  for (std::size_t i = 0; i < gt.size(); ++i) pred.data()[i] = static_cast<float>(std::exp(1.0) * gt.data()[i]);
  EXPECT_NEAR(compute_metrics(pred, gt, Tensor(gt.shape(), 1.0f), 80).rmse_log, 1.0, 1e-6);
}

TEST(Metrics, MatchesScalarOracle) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> depth(0.5, 80.0), noise(0.6, 1.6), coin(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor p({1, 1, 16, 16}), g({1, 1, 16, 16}), m({1, 1, 16, 16});
    std::vector<double> pv, gv;
    std::vector<int> mv;
    for (std::size_t i = 0; i < p.size(); ++i) {
      g.data()[i] = static_cast<float>(depth(gen));
      p.data()[i] = static_cast<float>(g.data()[i] * noise(gen));
      const bool on = coin(gen) < 0.7 || i == 0;
      m.data()[i] = on ? 1.0f : 0.0f;
      pv.push_back(p.data()[i]);
      gv.push_back(g.data()[i]);
      mv.push_back(on);
    }
    expect_metrics_near(compute_metrics(p, g, m, 80), scalar_oracle(pv, gv, mv), 1e-6);
  }
}

TEST(Metrics, ScaleInvariantRatios) {
  const Tensor gt = random_tensor({1, 1, 8, 8}, 5, 1.0f, 30.0f);
  const Tensor pred = random_tensor({1, 1, 8, 8}, 6, 1.0f, 30.0f);
  Tensor g2(gt.shape()), p2(gt.shape());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    g2.data()[i] = 2.0f * gt.data()[i];
    p2.data()[i] = 2.0f * pred.data()[i];
  }
  const Tensor mask(gt.shape(), 1.0f);
  const auto a = compute_metrics(pred, gt, mask, 80), b = compute_metrics(p2, g2, mask, 80);
  EXPECT_NEAR(a.abs_rel, b.abs_rel, 1e-12);
  EXPECT_NEAR(a.rmse_log, b.rmse_log, 1e-9);
  EXPECT_EQ(a.d1, b.d1);
  EXPECT_NEAR(2 * a.rmse, b.rmse, 1e-9);
}

TEST(Metrics, PermutationInvariant) {
  const Tensor gt = random_tensor({1, 1, 1, 50}, 7, 1.0f, 30.0f);
  const Tensor pred = random_tensor({1, 1, 1, 50}, 8, 1.0f, 30.0f);
  Tensor gr(gt.shape()), pr(gt.shape());
  for (int i = 0; i < 50; ++i) {
    gr.data()[i] = gt.data()[49 - i];
    pr.data()[i] = pred.data()[49 - i];
  }
  const Tensor mask(gt.shape(), 1.0f);
  expect_metrics_near(compute_metrics(pred, gt, mask, 80), compute_metrics(pr, gr, mask, 80), 1e-12);
}

TEST(Metrics, Errors) {
  const Tensor ones({1, 1, 4, 4}, 1.0f);
  EXPECT_THROW(compute_metrics(ones, ones, Tensor({1, 1, 4, 4}, 0.0f), 80), ArgumentError);
  EXPECT_THROW(compute_metrics(ones, Tensor({1, 1, 4, 5}, 1.0f), ones, 80), ShapeError);
  EXPECT_THROW(compute_metrics(Tensor({1, 1, 4, 4}, 0.0f), ones, ones, 80), ArgumentError);
}

TEST(DisparityToDepth, ConversionAndClamping) {
  const CameraModel cam{720.0, 0.54};
  const Tensor d({1, 1, 1, 4}, std::vector<float>{38.88f, 1.0f, 0.0f, 1e9f});
  const Tensor z = disparity_to_depth(d, cam);
  EXPECT_NEAR(z.data()[0], 10.0, 1e-4);
  EXPECT_FLOAT_EQ(z.data()[1], 80.0f);
  EXPECT_FLOAT_EQ(z.data()[2], 80.0f);
  EXPECT_FLOAT_EQ(z.data()[3], 1e-3f);
  EXPECT_THROW(disparity_to_depth(d, CameraModel{0.0, 0.54}), ArgumentError);
  EXPECT_THROW(disparity_to_depth(d, CameraModel{720, 0.54, 5.0, 1.0}), ArgumentError);
}

TEST(EvalCrop, StandardWindow) {
  const auto win = eval_crop_window(375, 1242);
  EXPECT_EQ(win.top, 153);
  EXPECT_EQ(win.bottom, 371);
  EXPECT_EQ(win.left, 44);
  EXPECT_EQ(win.right, 1197);
  const Tensor mask = eval_crop_mask(375, 1242);
  double area = 0;
  for (float v : mask.data()) area += v;
  EXPECT_NEAR(area / mask.size(), (0.99189189 - 0.40810811) * (0.96405229 - 0.03594771), 0.01);
  EXPECT_EQ(mask(0, 0, 152, 100), 0.0f);
  EXPECT_EQ(mask(0, 0, 153, 44), 1.0f);
  EXPECT_EQ(mask(0, 0, 370, 1196), 1.0f);
  EXPECT_EQ(mask(0, 0, 371, 500), 0.0f);
  EXPECT_THROW(eval_crop_window(5, 100), ArgumentError);
}

}  // namespace
}  // namespace pyrdepth
