#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "image_io.hpp"
#include "tensor.hpp"

namespace pyrdepth {

// Viridis sampled at 9 evenly spaced stops.
inline constexpr std::array<std::array<std::uint8_t, 3>, 9> kViridisStops{{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

inline std::array<std::uint8_t, 3> viridis(double t) {
  t = std::clamp(t, 0.0, 1.0) * (kViridisStops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), kViridisStops.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<std::uint8_t>(std::lround((1 - f) * kViridisStops[i][c] + f * kViridisStops[i + 1][c]));
  }
  return rgb;
}

/// 8-bit RGB preview of a disparity map over [0, max_disparity].
inline Raster colorize_disparity(const Tensor& disparity, double max_disparity) {
  Raster r{disparity.width(), disparity.height(), 3, 8, {}};
  r.samples.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  for (std::size_t i = 0; i < disparity.size(); ++i) {
    const auto rgb = viridis(disparity.data()[i] / max_disparity);
    for (int c = 0; c < 3; ++c) r.samples[3 * i + c] = rgb[c];
  }
  return r;
}

}  // namespace pyrdepth
