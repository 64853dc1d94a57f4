#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "architecture.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "tensor.hpp"
#include "weights.hpp"

namespace pyrdepth {

struct EncoderLevel {
  ConvWeights downsample;  // stride 2
  ConvWeights refine;      // stride 1
};

struct DecoderLevel {
  std::vector<ConvWeights> convs;  // leaky ReLU on all but the last
};

/// Immutable assembled network. Safe to share across threads.
class Network {
 public:
  const NetworkConfig& config() const noexcept { return config_; }
  int levels() const noexcept { return config_.levels; }
  const EncoderLevel& encoder(int level) const { return encoder_.at(static_cast<std::size_t>(level - 1)); }
  const DecoderLevel& decoder(int level) const { return decoders_.at(static_cast<std::size_t>(level - 1)); }
  // Hand-off from `level` up to level - 1; defined for level >= 2.
  const ConvWeights& deconv(int level) const { return deconvs_.at(static_cast<std::size_t>(level - 2)); }

  std::size_t encoder_conv_count() const { return 2 * encoder_.size(); }
  std::size_t decoder_count() const { return decoders_.size(); }
  std::size_t deconv_count() const { return deconvs_.size(); }

  friend Network build(const NetworkConfig& config, const WeightContainer& weights);

 private:
  NetworkConfig config_;
  std::vector<EncoderLevel> encoder_;
  std::vector<DecoderLevel> decoders_;
  std::vector<ConvWeights> deconvs_;
};

namespace detail {

inline ConvWeights bind_layer(const LayerSpec& layer, const WeightContainer& weights) {
  const auto& k = weights.at(layer.kernel_name());
  const auto& b = weights.at(layer.bias_name());
  const std::vector<std::uint32_t> want_k{static_cast<std::uint32_t>(layer.out_channels),
                                          static_cast<std::uint32_t>(layer.in_channels),
                                          static_cast<std::uint32_t>(layer.kernel_size),
                                          static_cast<std::uint32_t>(layer.kernel_size)};
  auto dims_str = [](const std::vector<std::uint32_t>& d) {
    std::string s = "(";
    for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ", " : "") + std::to_string(d[i]);
    return s + ")";
  };
  if (k.dims != want_k) {
    throw ShapeError(concat("tensor '", layer.kernel_name(), "': expected dims ", dims_str(want_k), ", got ",
                            dims_str(k.dims)));
  }
  const std::vector<std::uint32_t> want_b{static_cast<std::uint32_t>(layer.out_channels)};
  if (b.dims != want_b) {
    throw ShapeError(concat("tensor '", layer.bias_name(), "': expected dims ", dims_str(want_b), ", got ",
                            dims_str(b.dims)));
  }
  return ConvWeights(Tensor({layer.out_channels, layer.in_channels, layer.kernel_size, layer.kernel_size}, k.data),
                     b.data);
}

}  // namespace detail

/// Binds every tensor the config demands, by name. Extra entries in the
/// container are ignored.
inline Network build(const NetworkConfig& config, const WeightContainer& weights) {
  config.validate();
  Network net;
  net.config_ = config;
  const int L = config.levels;
  net.encoder_.resize(static_cast<std::size_t>(L));
  net.decoders_.resize(static_cast<std::size_t>(L));
  net.deconvs_.resize(static_cast<std::size_t>(L - 1));

  // layer_table order: encoder pairs 1..L, decoders L..1, deconvs L..2.
  const auto table = layer_table(config);
  std::size_t i = 0;
  for (int k = 1; k <= L; ++k) {
    net.encoder_[k - 1].downsample = detail::bind_layer(table[i++], weights);
    net.encoder_[k - 1].refine = detail::bind_layer(table[i++], weights);
  }
  for (int k = L; k >= 1; --k) {
    for (std::size_t c = 0; c < config.decoder_channels.size(); ++c) {
      net.decoders_[k - 1].convs.push_back(detail::bind_layer(table[i++], weights));
    }
  }
  for (int k = L; k >= 2; --k) net.deconvs_[k - 2] = detail::bind_layer(table[i++], weights);
  return net;
}

inline std::size_t count_parameters(const Network& net) {
  std::size_t total = 0;
  for (int k = 1; k <= net.levels(); ++k) {
    total += net.encoder(k).downsample.parameter_count() + net.encoder(k).refine.parameter_count();
    for (const auto& c : net.decoder(k).convs) total += c.parameter_count();
    if (k >= 2) total += net.deconv(k).parameter_count();
  }
  return total;
}

/// Per-level sigmoid disparities from the finest computed level upward.
struct DisparityPyramid {
  int finest_level = 1;
  std::vector<Tensor> maps;    // in (0, 1)
  std::vector<Tensor> scaled;  // maps * disparity_scale * level width, in level pixels

  int coarsest_level() const noexcept { return finest_level + static_cast<int>(maps.size()) - 1; }
  bool has_level(int level) const noexcept { return level >= finest_level && level <= coarsest_level(); }
  const Tensor& map(int level) const { return maps.at(static_cast<std::size_t>(level - finest_level)); }
  const Tensor& scaled_map(int level) const { return scaled.at(static_cast<std::size_t>(level - finest_level)); }
};

/// Live-buffer accounting. Bytes are counted for the input image and every
/// intermediate or output tensor while it is held.
struct MemoryLedger {
  std::size_t live = 0;
  std::size_t peak = 0;

  void acquire(std::size_t bytes) {
    live += bytes;
    peak = std::max(peak, live);
  }
  void release(std::size_t bytes) { live -= bytes; }
};

namespace detail {

inline std::size_t buffer_bytes(const Tensor& t) { return t.bytes(); }
inline std::size_t buffer_bytes(const Shape& s) { return s.numel() * sizeof(float); }

// Executes layers for real.
struct ComputeBackend {
  using Value = Tensor;
  Value conv(const Value& x, const ConvWeights& w, int stride, Activation act) { return conv2d(x, w, stride, act); }
  Value concat(const Value& a, const Value& b) { return concat_channels(a, b); }
  Value upsample(const Value& x, const ConvWeights& w, Activation act) { return apply(deconv2x2(x, w), act); }
  // Sigmoid of channel 0, then the per-level pixel scaling.
  std::pair<Value, Value> head(const Value& features, float disparity_scale) {
    Tensor unscaled = apply(slice_channels(features, 0, 1), Activation::sigmoid());
    Tensor px = unscaled;
    const float factor = disparity_scale * static_cast<float>(features.width());
    for (float& v : px.data()) v *= factor;
    return {std::move(unscaled), std::move(px)};
  }
};

// Propagates shapes only; drives the footprint estimate through the exact
// same schedule as inference.
struct ShapeBackend {
  using Value = Shape;
  Value conv(const Value& x, const ConvWeights& w, int stride, Activation) {
    return {x.n, w.out_channels(), conv_out_extent(x.h, w.kernel_h(), stride), conv_out_extent(x.w, w.kernel_w(), stride)};
  }
  Value concat(const Value& a, const Value& b) { return {a.n, a.c + b.c, a.h, a.w}; }
  Value upsample(const Value& x, const ConvWeights& w, Activation) { return {x.n, w.out_channels(), 2 * x.h, 2 * x.w}; }
  std::pair<Value, Value> head(const Value& f, float) {
    Shape s{f.n, 1, f.h, f.w};
    return {s, s};
  }
};

inline void check_input(const Network& net, const Shape& image, ExitLevel exit) {
  if (image.c != 3) throw ShapeError(concat("expected a 3-channel image, got ", image));
  if (image.n != 1) throw ShapeError(concat("expected batch size 1, got ", image));
  const int div = 1 << net.levels();
  if (image.h % div != 0 || image.w % div != 0) {
    throw ArgumentError(concat("input ", image.h, "x", image.w, " is not divisible by ", div,
                               "; resize the image (e.g. to 256x512) before inference"));
  }
  if (level_of(exit) > net.levels()) {
    throw ArgumentError(concat("exit level ", to_string(exit), " is deeper than the ", net.levels(), "-level pyramid"));
  }
}

/// Encoder to the deepest level, then decoders upward to `exit`.
///
/// Retention schedule: the input stays live throughout. An encoder output is
/// held until its last consumer runs; outputs of levels finer than `exit` are
/// freed as soon as the next encoder level has read them. Decoder scratch is
/// released layer by layer, and only the per-level disparity maps survive.
template <typename Backend>
std::pair<std::vector<typename Backend::Value>, std::vector<typename Backend::Value>> run_schedule(
    const Network& net, const typename Backend::Value& image, ExitLevel exit, Backend& be, MemoryLedger& ledger) {
  using Value = typename Backend::Value;
  const auto& cfg = net.config();
  const int L = net.levels();
  const int stop = level_of(exit);
  const Activation leaky = Activation::leaky_relu(cfg.leaky_slope);

  ledger.acquire(buffer_bytes(image));
  std::vector<std::optional<Value>> features(static_cast<std::size_t>(L + 1));
  for (int k = 1; k <= L; ++k) {
    const Value& src = k == 1 ? image : *features[k - 1];
    Value down = be.conv(src, net.encoder(k).downsample, 2, leaky);
    ledger.acquire(buffer_bytes(down));
    if (k >= 2 && k - 1 < stop) {
      ledger.release(buffer_bytes(*features[k - 1]));
      features[k - 1].reset();
    }
    Value refined = be.conv(down, net.encoder(k).refine, 1, leaky);
    ledger.acquire(buffer_bytes(refined));
    ledger.release(buffer_bytes(down));
    features[k] = std::move(refined);
  }

  std::vector<Value> unscaled(static_cast<std::size_t>(L - stop + 1));
  std::vector<Value> scaled(unscaled.size());
  Value handoff{};
  for (int k = L; k >= stop; --k) {
    Value x;
    if (k == L) {
      x = std::move(*features[k]);
    } else {
      x = be.concat(*features[k], handoff);
      ledger.acquire(buffer_bytes(x));
      ledger.release(buffer_bytes(*features[k]));
      ledger.release(buffer_bytes(handoff));
      handoff = Value{};
    }
    features[k].reset();

    const auto& convs = net.decoder(k).convs;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const bool last = i + 1 == convs.size();
      Value next = be.conv(x, convs[i], 1, last ? Activation::none() : leaky);
      ledger.acquire(buffer_bytes(next));
      ledger.release(buffer_bytes(x));
      x = std::move(next);
    }

    auto [u, s] = be.head(x, cfg.disparity_scale);
    ledger.acquire(buffer_bytes(u));
    ledger.acquire(buffer_bytes(s));
    unscaled[static_cast<std::size_t>(k - stop)] = std::move(u);
    scaled[static_cast<std::size_t>(k - stop)] = std::move(s);

    if (k > stop) {
      Value up = be.upsample(x, net.deconv(k), leaky);
      ledger.acquire(buffer_bytes(up));
      handoff = std::move(up);
    }
    ledger.release(buffer_bytes(x));
  }
  return {std::move(unscaled), std::move(scaled)};
}

}  // namespace detail

/// Coarse-to-fine inference. Decoders finer than `exit` never run.
inline DisparityPyramid infer(const Network& net, const Tensor& image, ExitLevel exit, MemoryLedger* ledger = nullptr) {
  detail::check_input(net, image.shape(), exit);
  MemoryLedger local;
  detail::ComputeBackend be;
  auto [maps, scaled] = detail::run_schedule(net, image, exit, be, ledger ? *ledger : local);
  DisparityPyramid out;
  out.finest_level = level_of(exit);
  out.maps = std::move(maps);
  out.scaled = std::move(scaled);
  return out;
}

/// Finest computed disparity, bilinearly upsampled to the input size and
/// rescaled to full-resolution pixel units.
inline Tensor infer_fullres(const Network& net, const Tensor& image, ExitLevel exit) {
  auto pyramid = infer(net, image, exit);
  const Tensor& fine = pyramid.scaled_map(level_of(exit));
  Tensor full = bilinear_resize(fine, image.height(), image.width());
  const float ratio = static_cast<float>(image.width()) / static_cast<float>(fine.width());
  for (float& v : full.data()) v *= ratio;
  return full;
}

/// Peak bytes of simultaneously live tensors during infer() on an h x w image.
inline std::size_t activation_footprint(const Network& net, int h, int w, ExitLevel exit) {
  const Shape image{1, 3, h, w};
  detail::check_input(net, image, exit);
  MemoryLedger ledger;
  detail::ShapeBackend be;
  detail::run_schedule(net, image, exit, be, ledger);
  return ledger.peak;
}

}  // namespace pyrdepth
