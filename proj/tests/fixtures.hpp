#pragma once

#include "liteatt/config.hpp"
#include "liteatt/evalkit.hpp"

namespace liteatt::testing_support {

/// A reduced suite that trains in about a second: 64 features, two firmware.
inline ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.firmware_count = 2;
  cfg.layout.variable_count = 8;
  cfg.layout.data_section_len = 256;
  cfg.layout.stack_len = 64;
  cfg.layout.max_width = 24;
  cfg.safe_traces = 600;
  cfg.mutated_traces = 20;
  cfg.train.epochs = 60;
  cfg.train.batch_size = 32;
  return cfg;
}

/// Detector for firmware 0 of `cfg`, trained once per process.
inline const Detector& small_detector() {
  static const Detector det = [] {
    const auto cfg = small_config();
    const auto c = firmware_corpus(cfg, 0, cfg.device_seed);
    return build_detector(cfg, c.safe, c.unsafe, 0);
  }();
  return det;
}

}  // namespace liteatt::testing_support
