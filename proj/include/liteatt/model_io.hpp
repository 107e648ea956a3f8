#pragma once

#include <filesystem>
#include <optional>
#include <variant>

#include "liteatt/autoenc.hpp"
#include "liteatt/quantize.hpp"
#include "liteatt/threshold.hpp"

namespace liteatt {

// `LAM1` container layout (all integers little-endian):
//
//   "LAM1" | u32 version | u8 section ('F' float, 'Q' quantized) | u8 arch
//   | u32 input_dim | u32 layer_count | layers... | section trailer
//   | u32 text_len | text (JSON: calibration record, provenance)
//
// Float layers carry float32 weight/bias blobs, quantized layers carry int8
// weights, int32 biases and float32 scales. The float trailer is the
// training metadata block.
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 4 + 1 + 1 + 4 + 4;

struct ContainerMeta {
  std::optional<CalibrationResult> calibration;
  std::optional<FileStamp> stamp;
};

Bytes serialize_model(const AutoencoderModel& model, const ContainerMeta& meta = {});
Bytes serialize_qmodel(const QuantizedModel& model, const ContainerMeta& meta = {});

using AnyModel = std::variant<AutoencoderModel, QuantizedModel>;

struct LoadedModel {
  AnyModel model;
  ContainerMeta meta;
};

LoadedModel deserialize_container(ByteView bytes);

void save_model(const std::filesystem::path& path, const AutoencoderModel& model, const ContainerMeta& meta = {});
void save_qmodel(const std::filesystem::path& path, const QuantizedModel& model, const ContainerMeta& meta = {});
LoadedModel load_container(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView bytes);

}  // namespace liteatt
