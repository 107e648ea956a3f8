#pragma once

#include <stdexcept>
#include <string>

namespace liteatt {

/// Invalid configuration or setup (missing keys, bad config values).
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed external input (CSV rows, model containers, scripts).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AES-CBC decryption ended with invalid PKCS#7 padding.
class PaddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace liteatt
