#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "tensor.hpp"

namespace pyrdepth {

/// Convolution parameters: kernel laid out (out_channels, in_channels, kh, kw)
/// and one bias per output channel.
struct ConvWeights {
  Tensor kernel;
  std::vector<float> bias;

  ConvWeights() = default;
  ConvWeights(Tensor k, std::vector<float> b) : kernel(std::move(k)), bias(std::move(b)) {
    if (bias.size() != static_cast<std::size_t>(kernel.batch())) {
      throw ShapeError(concat("bias length ", bias.size(), " does not match ", kernel.batch(), " output channels"));
    }
  }
  ConvWeights(int out_ch, int in_ch, int kh, int kw)
      : kernel(Shape{out_ch, in_ch, kh, kw}), bias(static_cast<std::size_t>(out_ch), 0.0f) {}

  int out_channels() const noexcept { return kernel.batch(); }
  int in_channels() const noexcept { return kernel.channels(); }
  int kernel_h() const noexcept { return kernel.height(); }
  int kernel_w() const noexcept { return kernel.width(); }
  std::size_t parameter_count() const noexcept { return kernel.size() + bias.size(); }
};

struct Activation {
  enum class Kind { None, LeakyRelu, Sigmoid };
  Kind kind = Kind::None;
  float slope = 0.0f;

  static constexpr Activation none() { return {}; }
  static constexpr Activation leaky_relu(float s) { return {Kind::LeakyRelu, s}; }
  static constexpr Activation sigmoid() { return {Kind::Sigmoid, 0.0f}; }

  float operator()(float v) const noexcept {
    switch (kind) {
      case Kind::LeakyRelu:
        return v >= 0.0f ? v : slope * v;
      case Kind::Sigmoid: {
        // Clamped so saturated inputs still land strictly inside (0, 1).
        const float s = 1.0f / (1.0f + std::exp(-v));
        return std::clamp(s, std::numeric_limits<float>::min(), 1.0f - std::numeric_limits<float>::epsilon() / 2);
      }
      case Kind::None:
        break;
    }
    return v;
  }
};

inline Tensor apply(const Tensor& t, Activation act) {
  Tensor out = t;
  if (act.kind == Activation::Kind::None) return out;
  for (float& v : out.data()) v = act(v);
  return out;
}

namespace detail {

inline int conv_out_extent(int in, int k, int stride) {
  const int pad = (k - 1) / 2;
  return (in + 2 * pad - k) / stride + 1;
}

// Output-channel and output-column tile of the direct convolution. The
// accumulators stay in registers across the whole reduction.
constexpr int kOcTile = 4;
constexpr int kXTile = 8;

#if defined(__GNUC__) || defined(__clang__)
typedef double double4 __attribute__((vector_size(32)));
typedef float float4v __attribute__((vector_size(16)));
#endif

// acc[i][t] = bias[i] + sum_j w[j][i] * patch[j * stride + t] for a
// kOcTile x kXTile block, j ascending.
template <typename Store>
inline void conv_tile(const double* w, const float* bias, const float* patch, int stride, int reduce, Store&& store) {
#if defined(__GNUC__) || defined(__clang__)
  double4 acc[kOcTile][2];
  for (int i = 0; i < kOcTile; ++i) {
    const double b = bias[i];
    acc[i][0] = double4{b, b, b, b};
    acc[i][1] = acc[i][0];
  }
  for (int j = 0; j < reduce; ++j) {
    const float* p = patch + static_cast<std::size_t>(j) * stride;
    float4v lo, hi;
    __builtin_memcpy(&lo, p, sizeof lo);
    __builtin_memcpy(&hi, p + 4, sizeof hi);
    const double4 plo = __builtin_convertvector(lo, double4);
    const double4 phi = __builtin_convertvector(hi, double4);
    const double* wj = w + static_cast<std::size_t>(j) * kOcTile;
    for (int i = 0; i < kOcTile; ++i) {
      const double4 wv = double4{wj[i], wj[i], wj[i], wj[i]};
      acc[i][0] += wv * plo;
      acc[i][1] += wv * phi;
    }
  }
  for (int i = 0; i < kOcTile; ++i) {
    for (int t = 0; t < 4; ++t) {
      store(i, t, acc[i][0][t]);
      store(i, t + 4, acc[i][1][t]);
    }
  }
#else
  double acc[kOcTile][kXTile];
  for (int i = 0; i < kOcTile; ++i) {
    for (int t = 0; t < kXTile; ++t) acc[i][t] = bias[i];
  }
  for (int j = 0; j < reduce; ++j) {
    const float* p = patch + static_cast<std::size_t>(j) * stride;
    const double* wj = w + static_cast<std::size_t>(j) * kOcTile;
    for (int i = 0; i < kOcTile; ++i) {
      for (int t = 0; t < kXTile; ++t) acc[i][t] += wj[i] * static_cast<double>(p[t]);
    }
  }
  for (int i = 0; i < kOcTile; ++i) {
    for (int t = 0; t < kXTile; ++t) store(i, t, acc[i][t]);
  }
#endif
}

}  // namespace detail

/// 2-D convolution with zero "same" padding of (k-1)/2 on each side.
///
/// Each output element is accumulated in double precision as bias followed by
/// the reduction over (in_channel, ky, kx) in that order, so the result does
/// not depend on how rows are split across workers. For 3x3 kernels the
/// output extent is ceil(in / stride).
inline Tensor conv2d(const Tensor& input, const ConvWeights& w, int stride, Activation act = Activation::none()) {
  if (input.channels() != w.in_channels()) {
    throw ShapeError(concat("conv2d: input ", input.shape(), " has ", input.channels(), " channels but kernel ",
                            w.kernel.shape(), " expects ", w.in_channels()));
  }
  if (stride != 1 && stride != 2) {
    throw ArgumentError(concat("conv2d: unsupported stride ", stride, " (expected 1 or 2)"));
  }
  const int kh = w.kernel_h(), kw = w.kernel_w();
  const int pad_y = (kh - 1) / 2, pad_x = (kw - 1) / 2;
  const int in_c = input.channels(), in_h = input.height(), in_w = input.width();
  const int out_c = w.out_channels();
  const int out_h = detail::conv_out_extent(in_h, kh, stride);
  const int out_w = detail::conv_out_extent(in_w, kw, stride);
  if (out_h < 1 || out_w < 1) {
    throw ShapeError(concat("conv2d: input ", input.shape(), " smaller than kernel ", w.kernel.shape()));
  }
  const int reduce = in_c * kh * kw;

  Tensor out({input.batch(), out_c, out_h, out_w});
  const float* kern = w.kernel.data().data();
  const float* bias = w.bias.data();

  // Kernel repacked per output-channel tile as [j][oc % kOcTile] so one
  // reduction step reads contiguous weights.
  std::vector<double> packed(static_cast<std::size_t>(out_c / detail::kOcTile) * detail::kOcTile * reduce);
  for (int oc0 = 0; oc0 + detail::kOcTile <= out_c; oc0 += detail::kOcTile) {
    for (int j = 0; j < reduce; ++j) {
      for (int i = 0; i < detail::kOcTile; ++i) {
        packed[static_cast<std::size_t>(oc0) * reduce + static_cast<std::size_t>(j) * detail::kOcTile + i] =
            kern[static_cast<std::size_t>(oc0 + i) * reduce + j];
      }
    }
  }

  parallel_for(static_cast<std::size_t>(input.batch()) * out_h, [&](std::size_t item) {
    const int n = static_cast<int>(item / out_h);
    const int oy = static_cast<int>(item % out_h);

    // Row patch matrix: patch[j * out_w + ox] for j = (ic, ky, kx).
    std::vector<float> patch(static_cast<std::size_t>(reduce) * out_w, 0.0f);
    for (int ic = 0; ic < in_c; ++ic) {
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad_y;
        if (iy < 0 || iy >= in_h) continue;
        const float* row = &input.data()[input.index(n, ic, iy, 0)];
        for (int kx = 0; kx < kw; ++kx) {
          float* dst = &patch[static_cast<std::size_t>((ic * kh + ky) * kw + kx) * out_w];
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - pad_x;
            if (ix >= 0 && ix < in_w) dst[ox] = row[ix];
          }
        }
      }
    }

    auto store = [&](int oc, int ox, double v) { out(n, oc, oy, ox) = act(static_cast<float>(v)); };

    int ox0 = 0;
    for (; ox0 + detail::kXTile <= out_w; ox0 += detail::kXTile) {
      int oc0 = 0;
      for (; oc0 + detail::kOcTile <= out_c; oc0 += detail::kOcTile) {
        detail::conv_tile(packed.data() + static_cast<std::size_t>(oc0) * reduce, bias + oc0, patch.data() + ox0,
                          out_w, reduce, [&](int i, int t, double v) { store(oc0 + i, ox0 + t, v); });
      }
      for (int oc = oc0; oc < out_c; ++oc) {
        const float* k0 = kern + static_cast<std::size_t>(oc) * reduce;
        for (int t = 0; t < detail::kXTile; ++t) {
          double acc = bias[oc];
          for (int j = 0; j < reduce; ++j) acc += static_cast<double>(k0[j]) * patch[static_cast<std::size_t>(j) * out_w + ox0 + t];
          store(oc, ox0 + t, acc);
        }
      }
    }
    for (int ox = ox0; ox < out_w; ++ox) {
      for (int oc = 0; oc < out_c; ++oc) {
        const float* k0 = kern + static_cast<std::size_t>(oc) * reduce;
        double acc = bias[oc];
        for (int j = 0; j < reduce; ++j) acc += static_cast<double>(k0[j]) * patch[static_cast<std::size_t>(j) * out_w + ox];
        store(oc, ox, acc);
      }
    }
  });
  return out;
}

/// Transposed 2x2 convolution with stride 2. Every input element scatters a
/// non-overlapping 2x2 patch, so the output is exactly twice the input size.
/// Kernel layout is (out_channels, in_channels, 2, 2). No activation.
inline Tensor deconv2x2(const Tensor& input, const ConvWeights& w) {
  if (w.kernel_h() != 2 || w.kernel_w() != 2) {
    throw ShapeError(concat("deconv2x2: kernel ", w.kernel.shape(), " is not 2x2"));
  }
  if (input.channels() != w.in_channels()) {
    throw ShapeError(concat("deconv2x2: input ", input.shape(), " has ", input.channels(), " channels but kernel ",
                            w.kernel.shape(), " expects ", w.in_channels()));
  }
  const int in_c = input.channels(), in_h = input.height(), in_w = input.width();
  const int out_c = w.out_channels();
  Tensor out({input.batch(), out_c, 2 * in_h, 2 * in_w});

  parallel_for(static_cast<std::size_t>(input.batch()) * out_c, [&](std::size_t item) {
    const int n = static_cast<int>(item / out_c);
    const int oc = static_cast<int>(item % out_c);
    std::vector<double> acc(static_cast<std::size_t>(2 * in_w));
    for (int y = 0; y < in_h; ++y) {
      for (int dy = 0; dy < 2; ++dy) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(w.bias[oc]));
        for (int ic = 0; ic < in_c; ++ic) {
          const double w0 = w.kernel(oc, ic, dy, 0);
          const double w1 = w.kernel(oc, ic, dy, 1);
          const float* row = &input.data()[input.index(n, ic, y, 0)];
          for (int x = 0; x < in_w; ++x) {
            acc[2 * x] += w0 * row[x];
            acc[2 * x + 1] += w1 * row[x];
          }
        }
        float* dst = &out.data()[out.index(n, oc, 2 * y + dy, 0)];
        for (int x = 0; x < 2 * in_w; ++x) dst[x] = static_cast<float>(acc[x]);
      }
    }
  });
  return out;
}

namespace detail {

struct LinearTap {
  int i0;
  int i1;
  float frac;
};

// Half-pixel-center source coordinate, clamped to the valid range.
inline LinearTap half_pixel_tap(int dst, int in_extent, int out_extent) {
  const double scale = static_cast<double>(in_extent) / out_extent;
  double src = (dst + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_extent - 1));
  const int i0 = static_cast<int>(std::floor(src));
  const int i1 = std::min(i0 + 1, in_extent - 1);
  return {i0, i1, static_cast<float>(src - i0)};
}

}  // namespace detail

/// Bilinear resize with half-pixel centers and edge clamping. Constant images
/// are fixed points and the identity resize is exact.
inline Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ArgumentError(concat("bilinear_resize: target ", out_h, "x", out_w, " must be at least 1x1"));
  }
  if (out_h == input.height() && out_w == input.width()) return input;

  std::vector<detail::LinearTap> ty(static_cast<std::size_t>(out_h)), tx(static_cast<std::size_t>(out_w));
  for (int y = 0; y < out_h; ++y) ty[y] = detail::half_pixel_tap(y, input.height(), out_h);
  for (int x = 0; x < out_w; ++x) tx[x] = detail::half_pixel_tap(x, input.width(), out_w);

  Tensor out({input.batch(), input.channels(), out_h, out_w});
  for (int n = 0; n < input.batch(); ++n) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int y = 0; y < out_h; ++y) {
        const auto [y0, y1, fy] = ty[y];
        for (int x = 0; x < out_w; ++x) {
          const auto [x0, x1, fx] = tx[x];
          const float top = input(n, c, y0, x0) + fx * (input(n, c, y0, x1) - input(n, c, y0, x0));
          const float bot = input(n, c, y1, x0) + fx * (input(n, c, y1, x1) - input(n, c, y1, x0));
          float v = top + fy * (bot - top);
          // Guard the convex combination against rounding past the endpoints.
          const float lo = std::min({input(n, c, y0, x0), input(n, c, y0, x1), input(n, c, y1, x0), input(n, c, y1, x1)});
          const float hi = std::max({input(n, c, y0, x0), input(n, c, y0, x1), input(n, c, y1, x0), input(n, c, y1, x1)});
          out(n, c, y, x) = std::clamp(v, lo, hi);
        }
      }
    }
  }
  return out;
}

/// Channel concatenation; a's channels come first.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(concat("concat_channels: spatial mismatch ", a.shape(), " vs ", b.shape()));
  }
  Tensor out({a.batch(), a.channels() + b.channels(), a.height(), a.width()});
  for (int n = 0; n < a.batch(); ++n) {
    for (int c = 0; c < a.channels(); ++c) std::ranges::copy(a.plane(n, c), out.plane(n, c).begin());
    for (int c = 0; c < b.channels(); ++c) std::ranges::copy(b.plane(n, c), out.plane(n, a.channels() + c).begin());
  }
  return out;
}

/// Valid-region 3x3 mean, stride 1: output is (h - 2) x (w - 2).
inline Tensor avg_pool3x3(const Tensor& input) {
  if (input.height() < 3 || input.width() < 3) {
    throw ArgumentError(concat("avg_pool3x3: input ", input.shape(), " is smaller than the 3x3 window"));
  }
  const int oh = input.height() - 2, ow = input.width() - 2;
  Tensor out({input.batch(), input.channels(), oh, ow});
  for (int n = 0; n < input.batch(); ++n) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) acc += input(n, c, y + dy, x + dx);
          }
          out(n, c, y, x) = static_cast<float>(acc / 9.0);
        }
      }
    }
  }
  return out;
}

}  // namespace pyrdepth
