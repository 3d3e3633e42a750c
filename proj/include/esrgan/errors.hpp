#pragma once

#include <stdexcept>
#include <string>

namespace esrgan {

/// Tensor shapes or channel counts that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid model, training or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, missing or malformed input data (images, dataset layout).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted file failed its checksum or structural validation.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file is intact but was produced for a different model/config.
class IncompatibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values detected in a loss or tensor.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace esrgan
