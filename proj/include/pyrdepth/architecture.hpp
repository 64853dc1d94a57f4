#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace pyrdepth {

/// Pyramid geometry. Level k (1-based) runs at 1/2^k of the input resolution.
struct NetworkConfig {
  int levels = 6;
  std::vector<int> encoder_channels{16, 32, 64, 96, 128, 192};
  std::vector<int> decoder_channels{96, 64, 32, 8};
  float leaky_slope = 0.2f;
  float disparity_scale = 0.3f;

  // Default config cut to its first `n` pyramid levels.
  static NetworkConfig truncated(int n) {
    NetworkConfig c;
    if (n < 0 || n > static_cast<int>(c.encoder_channels.size())) {
      throw ArgumentError(concat("cannot truncate the default pyramid to ", n, " levels"));
    }
    c.levels = n;
    c.encoder_channels.resize(static_cast<std::size_t>(n));
    return c;
  }

  int handoff_channels() const { return decoder_channels.back(); }

  void validate() const {
    if (levels < 1) throw ArgumentError(concat("network needs at least one pyramid level, got ", levels));
    if (static_cast<int>(encoder_channels.size()) != levels) {
      throw ArgumentError(concat("config declares ", levels, " levels but lists ", encoder_channels.size(),
                                 " encoder widths"));
    }
    if (decoder_channels.empty() || decoder_channels.back() != 8) {
      throw ArgumentError("decoder channel list must end with the 8-feature head");
    }
    for (int c : encoder_channels) {
      if (c < 1) throw ArgumentError("encoder widths must be positive");
    }
    for (int c : decoder_channels) {
      if (c < 1) throw ArgumentError("decoder widths must be positive");
    }
  }
};

// One convolution slot of the graph, named by the weight-file convention.
struct LayerSpec {
  std::string name;  // e.g. "decoder3/conv2"; tensors are name + "/kernel", name + "/bias"
  int out_channels;
  int in_channels;
  int kernel_size;
  int stride;

  std::size_t kernel_elements() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_size * kernel_size;
  }
  std::size_t parameter_count() const { return kernel_elements() + static_cast<std::size_t>(out_channels); }
  std::string kernel_name() const { return name + "/kernel"; }
  std::string bias_name() const { return name + "/bias"; }
};

inline std::string encoder_layer_name(int level, int conv) { return concat("encoder", level, "/conv", conv); }
inline std::string decoder_layer_name(int level, int conv) { return concat("decoder", level, "/conv", conv); }
inline std::string deconv_layer_name(int level) { return concat("deconv", level); }

/// Every convolution the config demands: encoders 1..L, then decoders L..1,
/// then the hand-off deconvolutions L..2 (deconv k feeds level k-1).
inline std::vector<LayerSpec> layer_table(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> table;
  const int L = cfg.levels;
  const int handoff = cfg.handoff_channels();
  for (int k = 1; k <= L; ++k) {
    const int in = k == 1 ? 3 : cfg.encoder_channels[k - 2];
    const int out = cfg.encoder_channels[k - 1];
    table.push_back({encoder_layer_name(k, 1), out, in, 3, 2});
    table.push_back({encoder_layer_name(k, 2), out, out, 3, 1});
  }
  for (int k = L; k >= 1; --k) {
    int in = cfg.encoder_channels[k - 1] + (k == L ? 0 : handoff);
    for (std::size_t i = 0; i < cfg.decoder_channels.size(); ++i) {
      table.push_back({decoder_layer_name(k, static_cast<int>(i) + 1), cfg.decoder_channels[i], in, 3, 1});
      in = cfg.decoder_channels[i];
    }
  }
  for (int k = L; k >= 2; --k) table.push_back({deconv_layer_name(k), handoff, handoff, 2, 2});
  return table;
}

/// Early-exit point of the upward decoder pass.
enum class ExitLevel : int { H = 1, Q = 2, E = 3, S16 = 4, S32 = 5, S64 = 6 };

constexpr int level_of(ExitLevel e) noexcept { return static_cast<int>(e); }

inline std::string_view to_string(ExitLevel e) {
  switch (e) {
    case ExitLevel::H: return "h";
    case ExitLevel::Q: return "q";
    case ExitLevel::E: return "e";
    case ExitLevel::S16: return "s16";
    case ExitLevel::S32: return "s32";
    case ExitLevel::S64: return "s64";
  }
  return "?";
}

// Accepts "h", "q", "e", "s16", "s32", "s64" in either case.
inline std::optional<ExitLevel> parse_exit_level(std::string_view s) {
  std::string lower(s);
  for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (int k = 1; k <= 6; ++k) {
    auto e = static_cast<ExitLevel>(k);
    if (lower == to_string(e)) return e;
  }
  return std::nullopt;
}

}  // namespace pyrdepth
