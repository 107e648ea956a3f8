#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liteatt/bytes.hpp"

namespace liteatt {

// ---------------------------------------------------------------------------
// Firmware profiles
// ---------------------------------------------------------------------------

enum class Label : std::uint8_t { safe = 0, unsafe = 1 };

enum class VariableKind : std::uint8_t { constant, counter, random_walk, flag };

enum class MutationKind : std::uint8_t {
  tamper_data,
  tamper_function,
  tamper_control_flow,
  data_injection,
};

/// A global/static variable living in the SRAM data section.
///
/// Dynamics per kind, evaluated at simulated time step t:
///  - constant:    init bytes, never change
///  - counter:     the low min(width, 4) bytes hold a little-endian uint32
///                 equal to init + t; remaining bytes stay at init
///  - random_walk: byte 0 starts at init[0] and moves +-1 per step, clipped
///                 to [0, 255]; remaining bytes stay at init
///  - flag:        byte 0 alternates between init[0] and init[0] ^ 1 with a
///                 period drawn from the variable's seed
struct Variable {
  std::size_t offset = 0;
  std::size_t width = 0;
  VariableKind kind = VariableKind::constant;
  std::uint64_t init_seed = 0;

  bool operator==(const Variable&) const = default;
};

struct StackPattern {
  std::size_t frame_count = 0;
  std::vector<std::size_t> frame_sizes;
  double fill_fraction = 0.4;

  bool operator==(const StackPattern&) const = default;
};

struct Mutation {
  MutationKind kind = MutationKind::tamper_data;
  double severity = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const Mutation&) const = default;
};

/// Generative description of one firmware's SRAM footprint. The SRAM image
/// of a device is the data section followed by the stack region.
struct FirmwareProfile {
  std::uint64_t firmware_seed = 0;
  std::vector<Variable> data_layout;
  std::size_t data_section_len = 0;
  std::size_t stack_len = 0;
  StackPattern stack_pattern;
  std::optional<Mutation> mutation;

  std::size_t sram_len() const { return data_section_len + stack_len; }
  std::string firmware_id() const;

  bool operator==(const FirmwareProfile&) const = default;
};

/// Parameters for drawing a random but reproducible data-section layout.
struct LayoutSpec {
  std::size_t variable_count = 16;
  std::size_t data_section_len = 2048;
  std::size_t stack_len = 1024;
  std::size_t min_width = 4;
  std::size_t max_width = 64;
  // Relative weights for constant, counter, random_walk and flag.
  std::array<double, 4> kind_weights{0.55, 0.15, 0.15, 0.15};
  std::size_t frame_count = 4;
  double fill_fraction = 0.4;
  // Optional fixed widths; when non-empty they override the random draw and
  // variable_count.
  std::vector<std::size_t> widths;
};

FirmwareProfile generate_profile(std::uint64_t firmware_seed, const LayoutSpec& spec);

FirmwareProfile mutate_profile(const FirmwareProfile& base, MutationKind kind, double severity,
                               std::uint64_t seed);

/// Initial bytes of a variable (before any runtime dynamics).
Bytes variable_init_bytes(const Variable& v);

/// Throws std::invalid_argument when variables overlap or leave the section.
void validate_profile(const FirmwareProfile& profile);

std::string_view to_string(VariableKind kind);
std::string_view to_string(MutationKind kind);
std::string_view to_string(Label label);
VariableKind parse_variable_kind(std::string_view s);
MutationKind parse_mutation_kind(std::string_view s);
Label parse_label(std::string_view s);

inline constexpr std::array<MutationKind, 4> kAllMutationKinds{
    MutationKind::tamper_data, MutationKind::tamper_function, MutationKind::tamper_control_flow,
    MutationKind::data_injection};

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct SramTrace {
  std::string device_id;
  std::string firmware_id;
  std::uint64_t time_step = 0;
  Bytes bytes;
  Label label = Label::safe;

  bool operator==(const SramTrace&) const = default;
};

SramTrace sample_trace(const FirmwareProfile& profile, std::uint64_t device_seed,
                       std::uint64_t time_step);

std::string device_name(std::uint64_t device_seed);

/// Normalized s-byte block means over the first `used` bytes:
/// out[i] = sum(bytes[i*s .. (i+1)*s)) / (255 * s).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> aggregate_bytes(ByteView bytes, std::size_t s,
                                                         std::size_t used);

struct TraceSource {
  std::string device_id;
  std::string firmware_id;
  std::uint64_t time_step = 0;
};

struct AggregatedTrace {
  Eigen::VectorXd features;
  TraceSource source;
  Label label = Label::safe;
};

inline constexpr std::size_t kDefaultBlockWidth = 4;
inline constexpr double kDefaultNoiseFactor = 0.05;

AggregatedTrace aggregate(const SramTrace& trace, std::size_t s, std::size_t used);

/// Stacks aggregated traces as rows of an n x l matrix.
Eigen::MatrixXd stack_rows(std::span<const AggregatedTrace> traces);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Returns input + n_f * eps with eps ~ U[0, 1) drawn row by row from a
/// generator seeded with `seed`.
Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& input, double n_f, std::uint64_t seed);

struct SplitRatios {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;
};

struct DatasetMeta {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  double n_f = kDefaultNoiseFactor;
  // Indices into the safe input list, in split order.
  std::vector<std::size_t> train_rows, val_rows, test_rows;
};

struct Dataset {
  Eigen::MatrixXd train;
  Eigen::MatrixXd train_noisy;
  Eigen::MatrixXd val;
  Eigen::MatrixXd test_safe;
  Eigen::MatrixXd test_unsafe;
  DatasetMeta meta;

  Eigen::Index feature_count() const { return train.cols(); }
};

Dataset build_dataset(std::span<const AggregatedTrace> safe, std::span<const AggregatedTrace> unsafe,
                      const SplitRatios& ratios, double n_f, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Optional provenance line written as a leading `# ...` comment.
struct FileStamp {
  std::string config_digest;
  std::uint64_t seed = 0;
};

void export_traces(const std::filesystem::path& path, std::span<const SramTrace> traces,
                   const std::optional<FileStamp>& stamp = std::nullopt);
std::vector<SramTrace> import_traces(const std::filesystem::path& path);
std::vector<SramTrace> parse_traces(std::istream& in);

void export_aggregated(const std::filesystem::path& path, std::span<const AggregatedTrace> rows,
                       const std::optional<FileStamp>& stamp = std::nullopt);

std::string profile_to_text(const FirmwareProfile& profile,
                            const std::optional<FileStamp>& stamp = std::nullopt);
FirmwareProfile profile_from_text(std::string_view text);

}  // namespace liteatt
