#pragma once

#include <stdexcept>
#include <string>

namespace lvic {

// Malformed or inconsistent on-disk data (bad magic, size mismatch, ...).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-formed file whose payload violates a data contract (non-finite
// positions, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid calibration content (non-orthonormal rotation, bad intrinsics,
// duplicate camera ids).
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent run configuration detected before any data is processed.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Synthetic scene generation could not satisfy its constraints.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lvic
