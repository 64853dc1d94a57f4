#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "loss.hpp"
#include "tensor.hpp"

namespace pyrdepth {

namespace detail {

inline double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Smooth random texture: per channel, a sum of six oriented sinusoids with
/// wavelengths in [10, 24] px, mapped into [0.1, 0.9]. Defined on the real
/// line so shifted copies need no resampling.
class WaveTexture {
 public:
  WaveTexture(int channels, std::uint64_t seed) : waves_(static_cast<std::size_t>(channels)) {
    std::mt19937_64 gen(seed);
    for (auto& channel : waves_) {
      for (int m = 0; m < 6; ++m) {
        const double wavelength = 10.0 + 14.0 * detail::unit_uniform(gen);
        const double angle = (detail::unit_uniform(gen) - 0.5) * 2.0;
        const double k = 2.0 * std::numbers::pi / wavelength;
        channel.push_back({k * std::cos(angle), k * std::sin(angle), 2.0 * std::numbers::pi * detail::unit_uniform(gen),
                           0.5 + 0.5 * detail::unit_uniform(gen)});
      }
    }
  }

  double operator()(int c, double y, double x) const {
    double s = 0.0, total = 0.0;
    for (const auto& w : waves_[static_cast<std::size_t>(c)]) {
      s += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
      total += w.amp;
    }
    return 0.5 + 0.4 * s / total;
  }

  Tensor render(int h, int w, double x_offset = 0.0) const {
    Tensor t({1, static_cast<int>(waves_.size()), h, w});
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t(0, c, y, x) = static_cast<float>((*this)(c, y, x + x_offset));
    return t;
  }

 private:
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<std::vector<Wave>> waves_;
};

/// Rectified pair with constant disparity `shift`: right(x) = left(x + shift),
/// so left(x) = right(x - shift).
inline StereoPair make_shifted_pair(int h, int w, double shift, std::uint64_t seed) {
  const WaveTexture tex(3, seed);
  return {tex.render(h, w), tex.render(h, w, shift)};
}

/// Uniform random tensor in [lo, hi).
inline Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 gen(seed);
  Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(lo + (hi - lo) * detail::unit_uniform(gen));
  return t;
}

}  // namespace pyrdepth
