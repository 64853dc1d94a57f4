#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "architecture.hpp"
#include "error.hpp"

namespace pyrdepth {

struct WeightEntry {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  friend bool operator==(const WeightEntry& a, const WeightEntry& b) {
    // Bitwise on the payload so NaN patterns round-trip too.
    return a.dims == b.dims && a.data.size() == b.data.size() &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
  }
};

/// Named-tensor archive. Entries are kept sorted by name so that serialization
/// is a pure function of the contents.
class WeightContainer {
 public:
  using Map = std::map<std::string, WeightEntry, std::less<>>;

  void insert(std::string name, WeightEntry entry) {
    if (entry.dims.empty()) throw ShapeError(concat("tensor '", name, "' has rank 0"));
    for (auto d : entry.dims) {
      if (d == 0) throw ShapeError(concat("tensor '", name, "' has a zero dimension"));
    }
    if (entry.data.size() != entry.numel()) {
      throw ShapeError(concat("tensor '", name, "' declares ", entry.numel(), " elements but holds ", entry.data.size()));
    }
    auto [it, inserted] = entries_.try_emplace(std::move(name), std::move(entry));
    if (!inserted) throw ArgumentError(concat("duplicate tensor name '", it->first, "'"));
  }

  // Replaces an existing tensor; shape changes are allowed.
  void assign(const std::string& name, WeightEntry entry) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw LookupError(concat("weight container has no tensor named '", name, "'"));
    WeightContainer probe;
    probe.insert(name, entry);
    it->second = std::move(entry);
  }

  void erase(std::string_view name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw LookupError(concat("weight container has no tensor named '", name, "'"));
    entries_.erase(it);
  }

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

  const WeightEntry& at(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw LookupError(concat("weight container has no tensor named '", name, "'"));
    return it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Map& entries() const noexcept { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.data.size();
    return n;
  }

  friend bool operator==(const WeightContainer&, const WeightContainer&) = default;

 private:
  Map entries_;
};

// PYDW: "PYDW" | u32 version | u32 count | per entry:
//   u32 name_len | name | u32 rank | u32 dims[rank] | u8 dtype (0 = f32) | f32 data[]
// All integers and reals little-endian, no padding.
inline constexpr std::array<char, 4> kPydwMagic{'P', 'Y', 'D', 'W'};
inline constexpr std::uint32_t kPydwVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() { return bytes_[pos_++]; }
  float f32() {
    std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const WeightContainer& container) {
  std::vector<std::uint8_t> out(kPydwMagic.begin(), kPydwMagic.end());
  detail::put_u32(out, kPydwVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(container.size()));
  for (const auto& [name, entry] : container) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(entry.dims.size()));
    for (auto d : entry.dims) detail::put_u32(out, d);
    out.push_back(kDtypeF32);
    for (float f : entry.data) detail::put_f32(out, f);
  }
  return out;
}

inline WeightContainer deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>") {
  detail::ByteReader in(bytes);
  auto fail = [&](const std::string& msg) { return FormatError(concat(origin, ": ", msg)); };

  if (!in.has(12)) throw fail("file too short for a PYDW header");
  if (in.str(4) != std::string(kPydwMagic.begin(), kPydwMagic.end())) throw fail("bad magic (expected \"PYDW\")");
  const std::uint32_t version = in.u32();
  if (version != kPydwVersion) throw fail(concat("unsupported format version ", version));
  const std::uint32_t count = in.u32();

  WeightContainer container;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.has(4)) throw fail(concat("truncated before entry ", i));
    const std::uint32_t name_len = in.u32();
    if (!in.has(name_len)) throw fail(concat("truncated name of entry ", i));
    std::string name = in.str(name_len);
    auto incomplete = [&](const char* what) { return fail(concat("truncated ", what, " of entry '", name, "'")); };

    if (!in.has(4)) throw incomplete("rank");
    const std::uint32_t rank = in.u32();
    if (rank == 0) throw fail(concat("entry '", name, "' has rank 0"));
    if (!in.has(static_cast<std::size_t>(rank) * 4)) throw incomplete("dims");
    WeightEntry entry;
    entry.dims.resize(rank);
    for (auto& d : entry.dims) {
      d = in.u32();
      if (d == 0) throw fail(concat("entry '", name, "' has a zero dimension"));
    }
    if (!in.has(1)) throw incomplete("dtype");
    const std::uint8_t dtype = in.u8();
    if (dtype != kDtypeF32) throw fail(concat("entry '", name, "' has unsupported dtype tag ", int(dtype)));
    const std::size_t numel = entry.numel();
    if (in.remaining() / 4 < numel) throw incomplete("data");
    entry.data.resize(numel);
    for (auto& f : entry.data) f = in.f32();

    if (container.contains(name)) throw fail(concat("duplicate entry name '", name, "'"));
    container.insert(std::move(name), std::move(entry));
  }
  if (in.remaining() != 0) throw fail(concat(in.remaining(), " trailing bytes after the last entry"));
  return container;
}

inline void save(const WeightContainer& container, const std::filesystem::path& path) {
  const auto bytes = serialize(container);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(concat("cannot open '", path.string(), "' for writing"));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(concat("write failed for '", path.string(), "'"));
}

inline WeightContainer load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(concat("cannot open '", path.string(), "' for reading"));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw IoError(concat("read failed for '", path.string(), "'"));
  return deserialize(bytes, path.string());
}

/// Seeded fan-in-scaled uniform initialization: kernels in
/// [-sqrt(6 / fan_in), +sqrt(6 / fan_in)], biases zero.
inline WeightContainer random_init(const NetworkConfig& config, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  // Portable uniform [0, 1) from the top 53 bits; the standard distributions
  // are implementation-defined.
  auto unit = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };

  WeightContainer container;
  for (const auto& layer : layer_table(config)) {
    const int fan_in = layer.in_channels * layer.kernel_size * layer.kernel_size;
    const double bound = std::sqrt(6.0 / fan_in);
    WeightEntry kernel;
    kernel.dims = {static_cast<std::uint32_t>(layer.out_channels), static_cast<std::uint32_t>(layer.in_channels),
                   static_cast<std::uint32_t>(layer.kernel_size), static_cast<std::uint32_t>(layer.kernel_size)};
    kernel.data.resize(layer.kernel_elements());
    for (auto& v : kernel.data) v = static_cast<float>((2.0 * unit() - 1.0) * bound);
    container.insert(layer.kernel_name(), std::move(kernel));

    WeightEntry bias;
    bias.dims = {static_cast<std::uint32_t>(layer.out_channels)};
    bias.data.assign(static_cast<std::size_t>(layer.out_channels), 0.0f);
    container.insert(layer.bias_name(), std::move(bias));
  }
  return container;
}

}  // namespace pyrdepth
