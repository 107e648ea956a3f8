#include "liteatt/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "liteatt/model_io.hpp"

namespace liteatt {

namespace {

using IntBatch = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::int8_t clamp_i8(double v) { return static_cast<std::int8_t>(std::clamp(v, -128.0, 127.0)); }

// Running min/max of every activation boundary during calibration.
struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void observe(const Batch<float>& a) {
    if (a.size() == 0) return;
    lo = std::min(lo, static_cast<double>(a.minCoeff()));
    hi = std::max(hi, static_cast<double>(a.maxCoeff()));
  }
};

IntBatch quantize_input(const Eigen::MatrixXd& rows, const ActivationQuant& q) {
  IntBatch out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    for (Eigen::Index c = 0; c < rows.cols(); ++c)
      out(r, c) = clamp_i8(round_half_away(rows(r, c) / static_cast<double>(q.scale)) + q.zero_point);
  return out;
}

// Integer patches for a same-padded width-3 convolution; padding holds the
// zero point so that it subtracts to a real zero.
IntBatch int_im2col(const QuantizedAffine& c, const IntBatch& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index len = c.length;
  const Eigen::Index cin = c.in_channels;
  IntBatch p = IntBatch::Constant(n * len, 3 * cin, c.input.zero_point);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index pos = 0; pos < len; ++pos)
      for (Eigen::Index k = 0; k < 3; ++k) {
        const Eigen::Index src = pos + k - 1;
        if (src < 0 || src >= len) continue;
        p.block(i * len + pos, k * cin, 1, cin) = x.block(i, src * cin, 1, cin);
      }
  return p;
}

IntBatch run_affine(const QuantizedAffine& layer, const IntBatch& x) {
  const Eigen::Index n = x.rows();
  IntBatch lhs = layer.conv ? int_im2col(layer, x) : x;
  lhs.array() -= static_cast<std::int32_t>(layer.input.zero_point);
  IntBatch acc = lhs * layer.weights_q.cast<std::int32_t>();
  acc.rowwise() += layer.bias_q.transpose();

  const double multiplier = static_cast<double>(layer.input.scale) * static_cast<double>(layer.weight_scale) /
                            static_cast<double>(layer.output.scale);
  const std::int32_t zp = layer.output.zero_point;
  IntBatch out(acc.rows(), acc.cols());
  for (Eigen::Index r = 0; r < acc.rows(); ++r)
    for (Eigen::Index c = 0; c < acc.cols(); ++c) {
      std::int32_t q = clamp_i8(round_half_away(static_cast<double>(acc(r, c)) * multiplier) + zp);
      if (layer.activation == Activation::relu) q = std::max(q, zp);
      out(r, c) = q;
    }
  if (layer.conv) return Eigen::Map<const IntBatch>(out.data(), n, out.size() / n);
  return out;
}

IntBatch run_pool(const MaxPool1d& p, const IntBatch& x) {
  const Eigen::Index half = p.length / 2;
  IntBatch y(x.rows(), half * p.channels);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index q = 0; q < half; ++q)
      for (Eigen::Index ch = 0; ch < p.channels; ++ch)
        y(r, q * p.channels + ch) =
            std::max(x(r, (2 * q) * p.channels + ch), x(r, (2 * q + 1) * p.channels + ch));
  return y;
}

}  // namespace

bool operator==(const MaxPool1d& a, const MaxPool1d& b) { return a.length == b.length && a.channels == b.channels; }
// Rates are stored as float32 in containers.
bool operator==(const Dropout& a, const Dropout& b) { return float(a.rate) == float(b.rate); }

bool operator==(const QuantizedAffine& a, const QuantizedAffine& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.size() == 0 || x == y);
  };
  return a.conv == b.conv && a.length == b.length && a.in_channels == b.in_channels &&
         same(a.weights_q, b.weights_q) && a.weight_scale == b.weight_scale && same(a.bias_q, b.bias_q) &&
         a.bias_scale == b.bias_scale && a.activation == b.activation && a.input == b.input && a.output == b.output;
}

bool operator==(const QuantizedModel& a, const QuantizedModel& b) {
  return a.arch == b.arch && a.input_dim == b.input_dim && a.input == b.input && a.layers == b.layers &&
         a.provenance == b.provenance;
}

std::size_t QuantizedModel::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    if (const auto* a = std::get_if<QuantizedAffine>(&l)) n += static_cast<std::size_t>(a->weights_q.size());
  return n;
}

std::size_t QuantizedModel::bias_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    if (const auto* a = std::get_if<QuantizedAffine>(&l)) n += static_cast<std::size_t>(a->bias_q.size());
  return n;
}

std::size_t QuantizedModel::scale_bytes() const {
  // Input boundary, then per affine layer: weight and bias scales plus the
  // output boundary (float32 scale + int8 zero point).
  std::size_t n = 5;
  for (const auto& l : layers)
    if (std::holds_alternative<QuantizedAffine>(l)) n += 4 + 4 + 5;
  return n;
}

double round_half_away(double v) { return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

float symmetric_scale(const Eigen::Ref<const Eigen::MatrixXf>& w) {
  const float max_abs = w.size() == 0 ? 0.0f : w.cwiseAbs().maxCoeff();
  if (max_abs == 0.0f) return 1.0f;
  return max_abs / 127.0f;
}

std::int8_t quantize_weight(float w, float scale) {
  const double q = round_half_away(static_cast<double>(w) / static_cast<double>(scale));
  return static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0));
}

ActivationQuant activation_quant(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  ActivationQuant q;
  const double range = hi - lo;
  q.scale = range > 0.0 ? static_cast<float>(range / 255.0) : 1.0f;
  q.zero_point = clamp_i8(round_half_away(-128.0 - lo / static_cast<double>(q.scale)));
  return q;
}

QuantizedModel quantize_model(const AutoencoderModel& model, const Eigen::MatrixXd& calibration) {
  if (calibration.rows() == 0) throw std::invalid_argument("quantize_model: empty calibration set");
  if (calibration.cols() != model.input_dim())
    throw std::invalid_argument("quantize_model: calibration has " + std::to_string(calibration.cols()) +
                                " columns, model expects " + std::to_string(model.input_dim()));

  // Float forward pass recording each boundary's range.
  const auto& layers = model.layers();
  Range input_range;
  std::vector<Range> out_range(layers.size());
  {
    Batch<float> a = calibration.cast<float>();
    input_range.observe(a);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Batch<float> next = model.forward_layer(i, a);
      out_range[i].observe(next);
      a = std::move(next);
    }
  }

  QuantizedModel q;
  q.arch = model.arch();
  q.input_dim = model.input_dim();
  q.input = activation_quant(input_range.lo, input_range.hi);
  q.provenance = sha256(serialize_model(model));

  ActivationQuant current = q.input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto make_affine = [&](const Matrix<float>& w, const Vector<float>& b, Activation act) {
      QuantizedAffine a;
      a.activation = act;
      a.input = current;
      a.weight_scale = symmetric_scale(w);
      a.weights_q.resize(w.rows(), w.cols());
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) a.weights_q(r, c) = quantize_weight(w(r, c), a.weight_scale);
      a.bias_scale = current.scale * a.weight_scale;
      a.bias_q.resize(b.size());
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double v = round_half_away(static_cast<double>(b[k]) / static_cast<double>(a.bias_scale));
        a.bias_q[k] = static_cast<std::int32_t>(std::clamp(v, -2147483648.0, 2147483647.0));
      }
      a.output = activation_quant(out_range[i].lo, out_range[i].hi);
      current = a.output;
      return a;
    };
    if (const auto* d = std::get_if<DenseLayer<float>>(&layers[i])) {
      q.layers.emplace_back(make_affine(d->weights, d->biases, d->activation));
    } else if (const auto* c = std::get_if<Conv1dLayer<float>>(&layers[i])) {
      auto a = make_affine(c->weights, c->biases, c->activation);
      a.conv = true;
      a.length = c->length;
      a.in_channels = c->in_channels;
      q.layers.emplace_back(std::move(a));
    } else if (const auto* p = std::get_if<MaxPool1d>(&layers[i])) {
      q.layers.emplace_back(*p);  // max commutes with the monotone quantizer
    } else {
      q.layers.emplace_back(std::get<Dropout>(layers[i]));
    }
  }
  return q;
}

Eigen::MatrixXd q_forward(const QuantizedModel& qmodel, const Eigen::MatrixXd& rows) {
  if (rows.cols() != qmodel.input_dim)
    throw std::invalid_argument("q_reconstruct: expected " + std::to_string(qmodel.input_dim) + " features, got " +
                                std::to_string(rows.cols()));
  IntBatch a = quantize_input(rows, qmodel.input);
  ActivationQuant current = qmodel.input;
  for (const auto& layer : qmodel.layers) {
    if (const auto* aff = std::get_if<QuantizedAffine>(&layer)) {
      a = run_affine(*aff, a);
      current = aff->output;
    } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
      a = run_pool(*p, a);
    }
  }
  return ((a.cast<double>().array() - static_cast<double>(current.zero_point)) * static_cast<double>(current.scale))
      .matrix();
}

Eigen::VectorXd q_reconstruct(const QuantizedModel& qmodel, const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (s.size() != qmodel.input_dim)
    throw std::invalid_argument("q_reconstruct: expected " + std::to_string(qmodel.input_dim) + " features, got " +
                                std::to_string(s.size()));
  Eigen::MatrixXd row = s.transpose();
  return q_forward(qmodel, row).row(0).transpose();
}

Eigen::VectorXd q_reconstruction_errors(const QuantizedModel& qmodel, const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) return Eigen::VectorXd(0);
  const Eigen::MatrixXd out = q_forward(qmodel, rows);
  return ((out - rows).array().square().rowwise().sum() / static_cast<double>(rows.cols())).matrix();
}

std::vector<Eigen::MatrixXf> dequantized_weights(const QuantizedModel& qmodel) {
  std::vector<Eigen::MatrixXf> out;
  for (const auto& l : qmodel.layers)
    if (const auto* a = std::get_if<QuantizedAffine>(&l)) out.push_back(a->weights_q.cast<float>() * a->weight_scale);
  return out;
}

SizeReport size_report(const AutoencoderModel& model, const QuantizedModel& qmodel) {
  if (model.arch() != qmodel.arch || model.input_dim() != qmodel.input_dim)
    throw std::invalid_argument("size_report: architectures differ");
  SizeReport r;
  r.header_bytes = kContainerHeaderBytes;
  const std::size_t w = model.weight_count();
  const std::size_t b = model.bias_count();
  r.float_payload = 4 * (w + b);
  r.quant_payload = qmodel.weight_count() + 4 * qmodel.bias_count();
  r.float_bytes = r.float_payload + r.header_bytes;
  r.quant_bytes = r.quant_payload + qmodel.scale_bytes() + r.header_bytes;
  r.reduction_factor = static_cast<double>(r.float_bytes) / static_cast<double>(r.quant_bytes);
  r.payload_factor = static_cast<double>(r.float_payload) / static_cast<double>(r.quant_payload);

  std::size_t width = static_cast<std::size_t>(qmodel.input_dim);
  for (const auto& l : qmodel.layers) {
    std::size_t out = width;
    if (const auto* a = std::get_if<QuantizedAffine>(&l))
      out = a->conv ? static_cast<std::size_t>(a->length * a->weights_q.cols())
                    : static_cast<std::size_t>(a->weights_q.cols());
    else if (const auto* p = std::get_if<MaxPool1d>(&l))
      out = static_cast<std::size_t>(p->out_dim());
    r.peak_activation_bytes = std::max(r.peak_activation_bytes, width + out);
    width = out;
  }
  return r;
}

}  // namespace liteatt
