#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <variant>
#include <vector>

#include "liteatt/autoenc.hpp"
#include "liteatt/secure_channel.hpp"

namespace liteatt {

using Int8Matrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Int32Vector = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>;

/// Affine int8 quantization of one activation tensor:
/// real = (q - zero_point) * scale.
struct ActivationQuant {
  float scale = 1.0f;
  std::int8_t zero_point = 0;

  bool operator==(const ActivationQuant&) const = default;
};

/// Dense or conv layer with symmetric per-tensor int8 weights and int32
/// biases at scale input_scale * weight_scale.
struct QuantizedAffine {
  bool conv = false;
  // Conv geometry (conv only).
  Eigen::Index length = 0;
  Eigen::Index in_channels = 0;
  Int8Matrix weights_q;
  float weight_scale = 1.0f;
  Int32Vector bias_q;
  float bias_scale = 1.0f;
  Activation activation = Activation::linear;
  ActivationQuant input;
  ActivationQuant output;
};

bool operator==(const QuantizedAffine& a, const QuantizedAffine& b);

using QuantizedLayer = std::variant<QuantizedAffine, MaxPool1d, Dropout>;

struct QuantizedModel {
  Arch arch = Arch::M1;
  Eigen::Index input_dim = 0;
  ActivationQuant input;
  std::vector<QuantizedLayer> layers;
  Digest256 provenance{};  // SHA-256 of the source float container

  std::size_t weight_count() const;
  std::size_t bias_count() const;
  std::size_t scale_bytes() const;
};

bool operator==(const MaxPool1d& a, const MaxPool1d& b);
bool operator==(const Dropout& a, const Dropout& b);
bool operator==(const QuantizedModel& a, const QuantizedModel& b);

/// Round half away from zero.
double round_half_away(double v);

/// Symmetric per-tensor scale: max|w| / 127, or 1 for an all-zero tensor.
float symmetric_scale(const Eigen::Ref<const Eigen::MatrixXf>& w);
std::int8_t quantize_weight(float w, float scale);

/// Asymmetric int8 parameters covering [lo, hi] widened to include 0.
ActivationQuant activation_quant(double lo, double hi);

QuantizedModel quantize_model(const AutoencoderModel& model, const Eigen::MatrixXd& calibration);

/// Integer-only inference; input and output are real-valued.
Eigen::VectorXd q_reconstruct(const QuantizedModel& qmodel, const Eigen::Ref<const Eigen::VectorXd>& s);
Eigen::MatrixXd q_forward(const QuantizedModel& qmodel, const Eigen::MatrixXd& rows);
Eigen::VectorXd q_reconstruction_errors(const QuantizedModel& qmodel, const Eigen::MatrixXd& rows);

/// Dequantized weight tensor of every affine layer.
std::vector<Eigen::MatrixXf> dequantized_weights(const QuantizedModel& qmodel);

struct SizeReport {
  std::size_t float_bytes = 0;
  std::size_t quant_bytes = 0;
  double reduction_factor = 0.0;
  std::size_t float_payload = 0;  // parameter bytes only
  std::size_t quant_payload = 0;  // int8 weights + int32 biases
  double payload_factor = 0.0;
  std::size_t header_bytes = 0;
  // Largest pair of adjacent int8 activation buffers held during inference.
  std::size_t peak_activation_bytes = 0;
};

SizeReport size_report(const AutoencoderModel& model, const QuantizedModel& qmodel);

}  // namespace liteatt
