#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "liteatt/autoenc.hpp"
#include "liteatt/config.hpp"
#include "liteatt/quantize.hpp"
#include "liteatt/threshold.hpp"
#include "liteatt/trace.hpp"

namespace liteatt {

// Positive class is `unsafe`.
struct Counts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct MetricsReport {
  Counts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double f1 = 0.0;       // unsafe class
  double f1_safe = 0.0;  // safe class
  double roc_auc = 0.0;  // NaN when a class is missing
};

/// Predicts unsafe iff error >= t_opt.
MetricsReport score(std::span<const double> errors, std::span<const Label> labels, double t_opt);

/// Probability that a random unsafe error exceeds a random safe one, ties
/// counted as one half.
double roc_auc(std::span<const double> errors, std::span<const Label> labels);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

FirmwareProfile firmware_profile(const ExperimentConfig& cfg, std::size_t index);
std::vector<FirmwareProfile> firmware_variants(const ExperimentConfig& cfg, const FirmwareProfile& base);

/// Traces at time steps first_step, first_step + 1, ...
std::vector<SramTrace> collect_traces(const FirmwareProfile& profile, std::uint64_t device_seed, std::size_t count,
                                      std::uint64_t first_step = 0);

Eigen::MatrixXd features_of(const ExperimentConfig& cfg, std::span<const SramTrace> traces);

struct FirmwareCorpus {
  FirmwareProfile profile;
  Eigen::MatrixXd safe;    // time steps 0 .. safe_traces - 1
  Eigen::MatrixXd unsafe;  // every variant, mutated_traces each
};

FirmwareCorpus firmware_corpus(const ExperimentConfig& cfg, std::size_t index, std::uint64_t device_seed);

struct Detector {
  AutoencoderModel model;
  QuantizedModel qmodel;
  CalibrationResult calibration;
  Dataset dataset;
};

Dataset make_dataset(const ExperimentConfig& cfg, const Eigen::MatrixXd& safe, const Eigen::MatrixXd& unsafe,
                     std::uint64_t stream);
AutoencoderModel train_model(const ExperimentConfig& cfg, const Dataset& ds, std::uint64_t stream);
/// Calibrates on the quantized model's validation errors.
CalibrationResult calibrate_detector(const QuantizedModel& qmodel, const Dataset& ds);
Detector build_detector(const ExperimentConfig& cfg, const Eigen::MatrixXd& safe, const Eigen::MatrixXd& unsafe,
                        std::uint64_t stream);

/// Fraction of rows where both models give the same verdict at t_opt.
double decision_agreement(const AutoencoderModel& model, const QuantizedModel& qmodel, const Eigen::MatrixXd& rows,
                          double t_opt);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct FirmwareResult {
  std::string firmware_id;
  CalibrationResult calibration;
  MetricsReport metrics;        // deployed (quantized) detector
  MetricsReport float_metrics;  // float model, same threshold
  double agreement_val = 0.0;
  SizeReport size;
  std::size_t negatives = 0;
  std::size_t positives = 0;
  std::size_t own_mutation_positives = 0;
  std::vector<double> safe_errors;
  std::vector<double> unsafe_errors;
  AutoencoderModel model;
  QuantizedModel qmodel;
};

struct Averages {
  double accuracy = 0, precision = 0, tpr = 0, tnr = 0, fpr = 0, fnr = 0, f1 = 0, f1_safe = 0, roc_auc = 0;
};

struct ExperimentReport {
  std::vector<FirmwareResult> firmware;
  Averages average;
  Averages float_average;
  std::string config_digest;
  std::uint64_t seed = 0;

  std::string text() const;
  std::string table_csv() const;
  std::string histogram_csv(std::size_t bins = 40) const;
};

Averages average_of(std::span<const FirmwareResult> results, bool quantized = true);

/// Cross-firmware evaluation: each firmware's detector is tested on its own
/// safe test split (negatives) against its own mutations plus every trace of
/// every other firmware (positives).
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Writes report.txt, table.csv, histogram.csv, per-firmware models and
/// calibration records under `dir`.
void write_experiment(const ExperimentConfig& cfg, const ExperimentReport& report, const std::filesystem::path& dir,
                      bool with_models = true);

struct TwinResult {
  std::string firmware_id;
  CalibrationResult calibration;
  MetricsReport metrics;
  std::size_t negatives = 0;
  std::size_t positives = 0;
};

/// Trains on device `cfg.device_seed`, tests on device `cfg.twin_device_seed`
/// running the same firmware.
TwinResult run_twin(const ExperimentConfig& cfg, std::size_t firmware_index = 0);

}  // namespace liteatt
