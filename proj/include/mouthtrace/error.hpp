#pragma once

#include <stdexcept>
#include <string>

namespace mouthtrace {

// Incompatible tensor shapes, channel counts or parameter layouts.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed files: checkpoints, manifests, landmark JSON, images.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or unknown keys.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset-level problems: missing class, empty split, absent method tag.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure detected at runtime (NaN loss, gradient without graph).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mouthtrace
