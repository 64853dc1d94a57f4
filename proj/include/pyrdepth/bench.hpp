#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <vector>

#include "architecture.hpp"
#include "error.hpp"
#include "network.hpp"

namespace pyrdepth {

struct TimingSummary {
  double median_ms = 0;
  double mean_ms = 0;
  double p95_ms = 0;
};

// Median averages the two middle samples for even counts; p95 is the
// nearest-rank percentile.
inline TimingSummary summarize(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw ArgumentError("summarize: no samples");
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  TimingSummary s;
  s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(n);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

struct BenchRecord {
  ExitLevel exit_level = ExitLevel::H;
  int height = 0;
  int width = 0;
  int reps = 0;
  double median_ms = 0;
  double mean_ms = 0;
  double p95_ms = 0;
  std::size_t activation_bytes = 0;
};

inline constexpr int kBenchWarmup = 3;
inline constexpr const char* kBenchCsvHeader = "exit_level,height,width,reps,median_ms,mean_ms,p95_ms,activation_bytes";

/// Times `reps` infer() calls after kBenchWarmup untimed ones.
inline std::vector<double> time_infer(const Network& net, const Tensor& image, ExitLevel exit, int reps,
                                      int warmup = kBenchWarmup) {
  if (reps < 1) throw ArgumentError(concat("reps must be at least 1, got ", reps));
  for (int i = 0; i < warmup; ++i) (void)infer(net, image, exit);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = infer(net, image, exit);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return samples;
}

inline BenchRecord bench_level(const Network& net, const Tensor& image, ExitLevel exit, int reps) {
  const auto stats = summarize(time_infer(net, image, exit, reps));
  return {exit,          image.height(), image.width(), reps, stats.median_ms, stats.mean_ms, stats.p95_ms,
          activation_footprint(net, image.height(), image.width(), exit)};
}

inline std::ostream& write_csv_row(std::ostream& os, const BenchRecord& r) {
  const auto flags = os.flags();
  os.setf(std::ios::fixed);
  const auto prec = os.precision(4);
  os << to_string(r.exit_level) << ',' << r.height << ',' << r.width << ',' << r.reps << ',' << r.median_ms << ','
     << r.mean_ms << ',' << r.p95_ms << ',' << r.activation_bytes << '\n';
  os.flags(flags);
  os.precision(prec);
  return os;
}

}  // namespace pyrdepth
