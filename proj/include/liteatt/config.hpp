#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "liteatt/autoenc.hpp"
#include "liteatt/trace.hpp"

namespace liteatt {

/// Everything a run depends on. Text form is one `key = value` per line,
/// `#` starts a comment:
///
///   seed = 1
///   generator.firmware_count = 8
///   generator.severities = 0.25, 0.5, 1.0
///   train.epochs = 100
///
/// See `config_keys()` for the full key list. Precedence, lowest first:
/// built-in defaults, config file, `--set key=value`, dedicated flags.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "liteatt-out";
  std::size_t threads = 1;

  // generator
  std::size_t firmware_count = 8;
  LayoutSpec layout;
  std::size_t safe_traces = 2000;
  std::size_t mutated_traces = 100;
  std::vector<double> severities{0.25, 0.5, 1.0};
  std::vector<MutationKind> mutations{kAllMutationKinds.begin(), kAllMutationKinds.end()};
  std::uint64_t device_seed = 1;
  std::uint64_t twin_device_seed = 2;

  // features
  std::size_t block_width = kDefaultBlockWidth;
  std::size_t used_bytes = 0;  // 0: the whole data section
  double noise_factor = kDefaultNoiseFactor;
  SplitRatios split;

  // model / training
  Arch arch = Arch::M1;
  TrainConfig train;

  // attestation / protocol
  std::int64_t epsilon_ms = 5000;
  std::size_t sessions = 1;
  std::int64_t latency_ms = 10;
  std::string adversary;  // script path, empty for none

  std::size_t effective_used_bytes() const { return used_bytes == 0 ? layout.data_section_len : used_bytes; }
  std::size_t feature_count() const { return effective_used_bytes() / block_width; }

  /// Throws ConfigError naming the offending key.
  void validate() const;

  /// Canonical rendering of every key that influences results (output
  /// location and thread count excluded).
  std::string canonical() const;
  /// Lowercase hex SHA-256 of canonical().
  std::string digest() const;
  FileStamp stamp() const { return FileStamp{digest(), seed}; }
};

/// Keys accepted by `set_config_value`, in canonical order.
const std::vector<std::string>& config_keys();

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
void apply_config_text(ExperimentConfig& cfg, std::string_view text);

/// "default" yields the built-in defaults.
ExperimentConfig load_config(const std::string& path_or_default);

/// Seed of an independent stream derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace liteatt
