#pragma once

#include <stdexcept>
#include <string>

namespace tdm {

/// Dimension or shape mismatch between two objects that must agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN/Inf showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad experiment configuration, reported before any compute starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_message(const std::string& what, long expected, long actual) {
  return what + ": expected dimension " + std::to_string(expected) + ", got " + std::to_string(actual);
}

}  // namespace tdm
