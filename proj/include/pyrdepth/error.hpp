#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pyrdepth {

// Tensor dimensions or layer shapes disagree.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scalar argument is outside its allowed range.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A named tensor is missing from a weight container.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A weight file is malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures, always carrying the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void stringify(std::ostringstream&) {}

template <typename T, typename... Rest>
void stringify(std::ostringstream& oss, T&& token, Rest&&... rest) {
  oss << std::forward<T>(token);
  stringify(oss, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  detail::stringify(oss, std::forward<Args>(args)...);
  return oss.str();
}

}  // namespace pyrdepth
