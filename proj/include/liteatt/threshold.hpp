#pragma once

#include <span>
#include <string>

namespace liteatt {

/// Spread of the validation errors: gamma = (P99 - P95) / P95.
struct GapRatio {
  double gamma = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

struct ThresholdSearch {
  double t_opt = 0.0;
  double achieved_tnr = 0.0;
  bool exact = false;
};

struct CalibrationResult {
  double gamma = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double tnr_target = 0.0;
  double t_opt = 0.0;
  double achieved_tnr_val = 0.0;
  bool exact = false;
};

inline constexpr double kTnrTolerance = 0.005;
inline constexpr int kMaxSearchIterations = 64;
inline constexpr std::size_t kMinCalibrationErrors = 20;

/// Percentile by linear interpolation between order statistics at rank
/// (p / 100) * (n - 1). `sorted` must be ascending.
double percentile_sorted(std::span<const double> sorted, double p);

GapRatio gap_ratio(std::span<const double> val_errors);

double select_tnr_target(double gamma);

/// Fraction of errors strictly below the threshold.
double tnr_at(std::span<const double> errors, double threshold);

ThresholdSearch binary_search_threshold(std::span<const double> val_errors, double tnr_target);

CalibrationResult calibrate(std::span<const double> val_errors);

/// Human-readable single-record rendering used by the CLI.
std::string format_calibration(const CalibrationResult& r);

}  // namespace liteatt
