#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace pyrdepth {

// NCHW dimensions.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  constexpr std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
}

inline std::string to_string(const Shape& s) { return concat(s); }

/// Dense rank-4 float tensor in row-major NCHW order.
///
/// Element (n, c, y, x) lives at ((n * C + c) * H + y) * W + x. The buffer
/// length always equals the product of the dimensions.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(validated(shape)), data_(shape_.numel(), fill) {}

  Tensor(Shape shape, std::vector<float> data) : shape_(validated(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError(concat("tensor of shape ", shape_, " needs ", shape_.numel(), " values, got ",
                              data_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int batch() const noexcept { return shape_.n; }
  int channels() const noexcept { return shape_.c; }
  int height() const noexcept { return shape_.h; }
  int width() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(float); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  float operator()(int n, int c, int y, int x) const noexcept { return data_[index(n, c, y, x)]; }
  float& operator()(int n, int c, int y, int x) noexcept { return data_[index(n, c, y, x)]; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  // One H x W plane.
  std::span<const float> plane(int n, int c) const noexcept {
    return std::span<const float>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<float> plane(int n, int c) noexcept {
    return std::span<float>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  float min() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }
  float max() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static Shape validated(Shape s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ShapeError(concat("tensor dimensions must be positive, got ", s));
    }
    return s;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

// Channels [first, first + count) of every batch entry.
inline Tensor slice_channels(const Tensor& t, int first, int count) {
  if (first < 0 || count < 1 || first + count > t.channels()) {
    throw ArgumentError(concat("channel slice [", first, ", ", first + count, ") out of range for ", t.shape()));
  }
  Tensor out({t.batch(), count, t.height(), t.width()});
  for (int n = 0; n < t.batch(); ++n) {
    for (int c = 0; c < count; ++c) {
      auto src = t.plane(n, first + c);
      std::copy(src.begin(), src.end(), out.plane(n, c).begin());
    }
  }
  return out;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(concat(what, ": shape mismatch ", a.shape(), " vs ", b.shape()));
  }
}

}  // namespace pyrdepth
