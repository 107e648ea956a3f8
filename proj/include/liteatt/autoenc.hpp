#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "liteatt/error.hpp"
#include "liteatt/trace.hpp"

namespace liteatt {

enum class Arch : std::uint8_t { M1 = 1, M2 = 2, M3 = 3 };
enum class Activation : std::uint8_t { linear = 0, relu = 1 };

std::string_view to_string(Arch arch);
Arch parse_arch(std::string_view s);

/// Batches are row-major: one sample per row. Convolutional activations are
/// flattened position-major, i.e. element (pos, channel) sits at
/// pos * channels + channel.
template <typename Scalar>
using Batch = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// y = act(x W + b), W is (in x out).
template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weights;
  Vector<Scalar> biases;
  Activation activation = Activation::linear;

  Eigen::Index in_dim() const { return weights.rows(); }
  Eigen::Index out_dim() const { return weights.cols(); }
};

/// 1-D convolution, kernel width 3, same padding, stride 1. Weights are
/// (3 * in_channels x out_channels) with row k * in_channels + c holding tap
/// k (offset k - 1) of input channel c.
template <typename Scalar>
struct Conv1dLayer {
  Eigen::Index length = 0;
  Eigen::Index in_channels = 0;
  Matrix<Scalar> weights;
  Vector<Scalar> biases;
  Activation activation = Activation::relu;

  static constexpr Eigen::Index kWidth = 3;
  Eigen::Index out_channels() const { return weights.cols(); }
  Eigen::Index in_dim() const { return length * in_channels; }
  Eigen::Index out_dim() const { return length * out_channels(); }
};

/// Max pooling with window and stride 2 along positions.
struct MaxPool1d {
  Eigen::Index length = 0;
  Eigen::Index channels = 0;

  Eigen::Index in_dim() const { return length * channels; }
  Eigen::Index out_dim() const { return (length / 2) * channels; }
};

/// Inverted dropout; identity outside training.
struct Dropout {
  double rate = 0.0;
};

template <typename Scalar>
using Layer = std::variant<DenseLayer<Scalar>, Conv1dLayer<Scalar>, MaxPool1d, Dropout>;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainMeta {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  double final_train_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> epoch_losses;
};

inline constexpr double kDefaultDropout = 0.2;
inline constexpr Eigen::Index kHiddenUnits = 8;

/// Mean over all elements of the squared difference.
template <typename DerivedA, typename DerivedB>
double reconstruction_error(const Eigen::MatrixBase<DerivedA>& reconstructed,
                            const Eigen::MatrixBase<DerivedB>& original) {
  if (reconstructed.size() != original.size())
    throw std::invalid_argument("reconstruction_error: length mismatch");
  if (original.size() == 0) return 0.0;
  const auto diff = (reconstructed.template cast<double>() - original.template cast<double>()).eval();
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

template <typename Scalar>
class Autoencoder {
 public:
  using BatchT = Batch<Scalar>;
  using VectorT = Vector<Scalar>;

  /// Per-layer values recorded by a training-mode forward pass.
  struct Tape {
    std::vector<BatchT> inputs;       // input of each layer
    std::vector<BatchT> pre;          // pre-activation (dense/conv)
    std::vector<BatchT> im2col;       // conv patches
    std::vector<std::vector<Eigen::Index>> argmax;  // pooling routes
    std::vector<BatchT> masks;        // dropout scale masks
    BatchT output;
  };

  Autoencoder() = default;

  Autoencoder(Arch arch, Eigen::Index input_dim, std::vector<Layer<Scalar>> layers)
      : arch_(arch), input_dim_(input_dim), layers_(std::move(layers)) {
    check_shapes();
  }

  static Autoencoder init(Arch arch, Eigen::Index l, std::uint64_t seed) {
    if (l < 2) throw std::invalid_argument("init_model: input dimension must be at least 2");
    std::mt19937_64 rng(seed);
    std::vector<Layer<Scalar>> layers;
    auto dense = [&](Eigen::Index in, Eigen::Index out, Activation act) {
      DenseLayer<Scalar> d;
      d.weights = glorot(in, out, in, out, rng);
      d.biases = VectorT::Zero(out);
      d.activation = act;
      layers.emplace_back(std::move(d));
    };
    auto conv = [&](Eigen::Index length, Eigen::Index cin, Eigen::Index cout) {
      Conv1dLayer<Scalar> c;
      c.length = length;
      c.in_channels = cin;
      c.weights = glorot(3 * cin, cout, 3 * cin, 3 * cout, rng);
      c.biases = VectorT::Zero(cout);
      c.activation = Activation::relu;
      layers.emplace_back(std::move(c));
    };
    switch (arch) {
      case Arch::M1:
        dense(l, kHiddenUnits, Activation::relu);
        layers.emplace_back(Dropout{kDefaultDropout});
        dense(kHiddenUnits, l, Activation::linear);
        break;
      case Arch::M2:
        dense(l, kHiddenUnits, Activation::relu);
        dense(kHiddenUnits, kHiddenUnits, Activation::relu);
        layers.emplace_back(Dropout{kDefaultDropout});
        dense(kHiddenUnits, l, Activation::linear);
        break;
      case Arch::M3:
        if (l % 4 != 0) throw std::invalid_argument("init_model: M3 needs an input dimension divisible by 4");
        conv(l, 1, 16);
        layers.emplace_back(MaxPool1d{l, 16});
        conv(l / 2, 16, 8);
        layers.emplace_back(MaxPool1d{l / 2, 8});
        dense((l / 4) * 8, kHiddenUnits, Activation::relu);
        layers.emplace_back(Dropout{kDefaultDropout});
        dense(kHiddenUnits, l, Activation::linear);
        break;
      default:
        throw std::invalid_argument("init_model: unsupported architecture");
    }
    return Autoencoder(arch, l, std::move(layers));
  }

  Arch arch() const { return arch_; }
  Eigen::Index input_dim() const { return input_dim_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  std::vector<Layer<Scalar>>& mutable_layers() { return layers_; }
  const TrainMeta& train_meta() const { return meta_; }
  void set_train_meta(TrainMeta meta) { meta_ = std::move(meta); }

  double dropout_rate() const {
    for (const auto& layer : layers_)
      if (const auto* d = std::get_if<Dropout>(&layer)) return d->rate;
    return 0.0;
  }

  /// (rows, cols) of every weight tensor, in layer order.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> weight_shapes() const {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer<Scalar>>(&layer)) out.emplace_back(d->weights.rows(), d->weights.cols());
      if (const auto* c = std::get_if<Conv1dLayer<Scalar>>(&layer)) out.emplace_back(c->weights.rows(), c->weights.cols());
    }
    return out;
  }

  std::size_t weight_count() const {
    std::size_t n = 0;
    for (auto [r, c] : weight_shapes()) n += static_cast<std::size_t>(r * c);
    return n;
  }

  std::size_t bias_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer<Scalar>>(&layer)) n += static_cast<std::size_t>(d->biases.size());
      if (const auto* c = std::get_if<Conv1dLayer<Scalar>>(&layer)) n += static_cast<std::size_t>(c->biases.size());
    }
    return n;
  }

  bool all_finite() const {
    for (auto span : const_cast<Autoencoder*>(this)->parameters())
      for (auto v : span)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// Flat views of every trainable tensor: W then b for each layer.
  std::vector<std::span<Scalar>> parameters() {
    std::vector<std::span<Scalar>> out;
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer<Scalar>> || std::is_same_v<L, Conv1dLayer<Scalar>>) {
              out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
              out.emplace_back(l.biases.data(), static_cast<std::size_t>(l.biases.size()));
            }
          },
          layer);
    }
    return out;
  }

  /// Inference (dropout disabled) on a batch of row samples.
  BatchT forward(const BatchT& x) const {
    if (x.cols() != input_dim_)
      throw std::invalid_argument("reconstruct: expected " + std::to_string(input_dim_) + " features, got " +
                                  std::to_string(x.cols()));
    BatchT a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) a = forward_layer(i, a);
    return a;
  }

  /// Inference through a single layer.
  BatchT forward_layer(std::size_t index, const BatchT& a) const {
    const auto& layer = layers_.at(index);
    if (const auto* d = std::get_if<DenseLayer<Scalar>>(&layer)) return activate(dense_pre(*d, a), d->activation);
    if (const auto* c = std::get_if<Conv1dLayer<Scalar>>(&layer))
      return flatten_conv(activate(conv_pre(*c, im2col(*c, a), a.rows()), c->activation), a.rows());
    if (const auto* p = std::get_if<MaxPool1d>(&layer)) return pool(*p, a, nullptr);
    return a;  // dropout
  }

  template <typename Derived>
  VectorT reconstruct(const Eigen::MatrixBase<Derived>& s) const {
    if (s.size() != input_dim_)
      throw std::invalid_argument("reconstruct: expected " + std::to_string(input_dim_) + " features, got " +
                                  std::to_string(s.size()));
    BatchT x = s.template cast<Scalar>().transpose();
    return forward(x).transpose();
  }

  /// Training-mode forward pass. With `rng` null dropout is disabled, which
  /// makes the pass deterministic (used by gradient checks).
  BatchT forward_train(const BatchT& x, std::mt19937_64* rng, Tape& tape) const {
    tape = Tape{};
    const auto n = layers_.size();
    tape.inputs.resize(n);
    tape.pre.resize(n);
    tape.im2col.resize(n);
    tape.argmax.resize(n);
    tape.masks.resize(n);
    BatchT a = x;
    for (std::size_t i = 0; i < n; ++i) {
      tape.inputs[i] = a;
      const auto& layer = layers_[i];
      if (const auto* d = std::get_if<DenseLayer<Scalar>>(&layer)) {
        tape.pre[i] = dense_pre(*d, a);
        a = activate(tape.pre[i], d->activation);
      } else if (const auto* c = std::get_if<Conv1dLayer<Scalar>>(&layer)) {
        tape.im2col[i] = im2col(*c, a);
        const Eigen::Index rows = a.rows();
        tape.pre[i] = conv_pre(*c, tape.im2col[i], rows);
        a = flatten_conv(activate(tape.pre[i], c->activation), rows);
      } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
        a = pool(*p, a, &tape.argmax[i]);
      } else if (const auto* dr = std::get_if<Dropout>(&layer)) {
        if (rng != nullptr && dr->rate > 0.0) {
          const Scalar keep_scale = Scalar(1) / Scalar(1.0 - dr->rate);
          std::bernoulli_distribution keep(1.0 - dr->rate);
          BatchT mask(a.rows(), a.cols());
          for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index c2 = 0; c2 < mask.cols(); ++c2) mask(r, c2) = keep(*rng) ? keep_scale : Scalar(0);
          a = a.cwiseProduct(mask);
          tape.masks[i] = std::move(mask);
        }
      }
    }
    tape.output = a;
    return a;
  }

  /// Back-propagates d(loss)/d(output); returns gradients aligned with
  /// parameters().
  std::vector<VectorT> backward(const Tape& tape, const BatchT& grad_output) const {
    std::vector<VectorT> grads;
    BatchT g = grad_output;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
      const auto& layer = layers_[idx];
      if (const auto* d = std::get_if<DenseLayer<Scalar>>(&layer)) {
        BatchT dz = activation_grad(tape.pre[idx], g, d->activation);
        Matrix<Scalar> dw = tape.inputs[idx].transpose() * dz;
        VectorT db = dz.colwise().sum().transpose();
        g = dz * d->weights.transpose();
        grads.push_back(db);
        grads.push_back(Eigen::Map<const VectorT>(dw.data(), dw.size()));
      } else if (const auto* c = std::get_if<Conv1dLayer<Scalar>>(&layer)) {
        const Eigen::Index n = g.rows();
        BatchT ga = Eigen::Map<const BatchT>(g.data(), n * c->length, c->out_channels());
        BatchT dz = activation_grad(tape.pre[idx], ga, c->activation);
        Matrix<Scalar> dw = tape.im2col[idx].transpose() * dz;
        VectorT db = dz.colwise().sum().transpose();
        BatchT dp = dz * c->weights.transpose();
        g = col2im(*c, dp, n);
        grads.push_back(db);
        grads.push_back(Eigen::Map<const VectorT>(dw.data(), dw.size()));
      } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
        BatchT gin = BatchT::Zero(g.rows(), p->in_dim());
        const auto& route = tape.argmax[idx];
        for (Eigen::Index r = 0; r < g.rows(); ++r)
          for (Eigen::Index c2 = 0; c2 < g.cols(); ++c2)
            gin(r, route[static_cast<std::size_t>(r * g.cols() + c2)]) += g(r, c2);
        g = std::move(gin);
      } else if (std::holds_alternative<Dropout>(layer)) {
        if (tape.masks[idx].size() > 0) g = g.cwiseProduct(tape.masks[idx]);
      }
    }
    std::reverse(grads.begin(), grads.end());
    return grads;
  }

 private:
  static Matrix<Scalar> glorot(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Eigen::Index fan_out,
                               std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix<Scalar> w(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = static_cast<Scalar>(u(rng));
    return w;
  }

  void check_shapes() const {
    Eigen::Index width = input_dim_;
    for (const auto& layer : layers_) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Dropout>) {
              if (!(l.rate >= 0.0 && l.rate < 1.0)) throw std::invalid_argument("model: dropout rate outside [0,1)");
            } else {
              if (l.in_dim() != width)
                throw std::invalid_argument("model: layer expects " + std::to_string(l.in_dim()) +
                                            " inputs but receives " + std::to_string(width));
              if constexpr (std::is_same_v<L, MaxPool1d>) {
                if (l.length % 2 != 0) throw std::invalid_argument("model: pooling over odd length");
              } else {
                if (l.biases.size() != l.weights.cols()) throw std::invalid_argument("model: bias size mismatch");
              }
              if constexpr (std::is_same_v<L, Conv1dLayer<Scalar>>) {
                if (l.weights.rows() != 3 * l.in_channels) throw std::invalid_argument("model: conv weight shape");
              }
              width = l.out_dim();
            }
          },
          layer);
    }
    if (width != input_dim_)
      throw std::invalid_argument("model: output width " + std::to_string(width) + " differs from input width " +
                                  std::to_string(input_dim_));
  }

  static BatchT activate(const BatchT& z, Activation act) {
    if (act == Activation::relu) return z.cwiseMax(Scalar(0));
    return z;
  }

  static BatchT activation_grad(const BatchT& z, const BatchT& g, Activation act) {
    if (act == Activation::relu) return (z.array() > Scalar(0)).select(g, BatchT::Zero(g.rows(), g.cols()));
    return g;
  }

  static BatchT dense_pre(const DenseLayer<Scalar>& d, const BatchT& x) {
    BatchT z = x * d.weights;
    z.rowwise() += d.biases.transpose();
    return z;
  }

  static BatchT im2col(const Conv1dLayer<Scalar>& c, const BatchT& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index len = c.length;
    const Eigen::Index cin = c.in_channels;
    BatchT p = BatchT::Zero(n * len, 3 * cin);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index pos = 0; pos < len; ++pos)
        for (Eigen::Index k = 0; k < 3; ++k) {
          const Eigen::Index src = pos + k - 1;
          if (src < 0 || src >= len) continue;
          p.block(i * len + pos, k * cin, 1, cin) = x.block(i, src * cin, 1, cin);
        }
    return p;
  }

  static BatchT col2im(const Conv1dLayer<Scalar>& c, const BatchT& dp, Eigen::Index n) {
    const Eigen::Index len = c.length;
    const Eigen::Index cin = c.in_channels;
    BatchT dx = BatchT::Zero(n, len * cin);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index pos = 0; pos < len; ++pos)
        for (Eigen::Index k = 0; k < 3; ++k) {
          const Eigen::Index src = pos + k - 1;
          if (src < 0 || src >= len) continue;
          dx.block(i, src * cin, 1, cin) += dp.block(i * len + pos, k * cin, 1, cin);
        }
    return dx;
  }

  // Returns (n * len) x out_channels pre-activations.
  static BatchT conv_pre(const Conv1dLayer<Scalar>& c, const BatchT& patches, Eigen::Index /*n*/) {
    BatchT z = patches * c.weights;
    z.rowwise() += c.biases.transpose();
    return z;
  }

  static BatchT flatten_conv(const BatchT& a, Eigen::Index n) {
    return Eigen::Map<const BatchT>(a.data(), n, a.size() / n);
  }

  static BatchT pool(const MaxPool1d& p, const BatchT& x, std::vector<Eigen::Index>* route) {
    const Eigen::Index half = p.length / 2;
    BatchT y(x.rows(), half * p.channels);
    if (route) route->assign(static_cast<std::size_t>(y.size()), 0);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index q = 0; q < half; ++q)
        for (Eigen::Index ch = 0; ch < p.channels; ++ch) {
          const Eigen::Index a = (2 * q) * p.channels + ch;
          const Eigen::Index b = (2 * q + 1) * p.channels + ch;
          const Eigen::Index win = x(r, b) > x(r, a) ? b : a;
          const Eigen::Index out = q * p.channels + ch;
          y(r, out) = x(r, win);
          if (route) (*route)[static_cast<std::size_t>(r * y.cols() + out)] = win;
        }
    return y;
  }

  Arch arch_ = Arch::M1;
  Eigen::Index input_dim_ = 0;
  std::vector<Layer<Scalar>> layers_;
  TrainMeta meta_;
};

using AutoencoderModel = Autoencoder<float>;

template <typename Scalar>
Autoencoder<Scalar> init_model(Arch arch, Eigen::Index l, std::uint64_t seed) {
  return Autoencoder<Scalar>::init(arch, l, seed);
}

/// Row-wise reconstruction errors of a batch.
template <typename Scalar>
Eigen::VectorXd reconstruction_errors(const Autoencoder<Scalar>& model, const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) return Eigen::VectorXd(0);
  const Batch<Scalar> x = rows.cast<Scalar>();
  const Batch<Scalar> y = model.forward(x);
  return ((y.template cast<double>() - rows).array().square().rowwise().sum() / static_cast<double>(rows.cols()))
      .matrix();
}

/// Mean-squared-error loss over batch and features, and its gradient.
template <typename Scalar>
std::pair<double, Batch<Scalar>> mse_loss(const Batch<Scalar>& output, const Batch<Scalar>& target) {
  const Batch<Scalar> diff = output - target;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.template cast<double>().squaredNorm() / count;
  return {loss, diff * static_cast<Scalar>(2.0 / count)};
}

/// Denoising training: minimizes MSE(model(train_noisy), train) with Adam on
/// seeded mini-batches. Returns the trained copy.
template <typename Scalar>
Autoencoder<Scalar> train(const Autoencoder<Scalar>& initial, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.train.rows() == 0) throw std::invalid_argument("train: empty training split");
  if (dataset.train.cols() != initial.input_dim())
    throw std::invalid_argument("train: dataset has " + std::to_string(dataset.train.cols()) +
                                " features but the model expects " + std::to_string(initial.input_dim()));
  if (dataset.train_noisy.rows() != dataset.train.rows() || dataset.train_noisy.cols() != dataset.train.cols())
    throw std::invalid_argument("train: noisy split shape differs from clean split");

  using BatchT = Batch<Scalar>;
  Autoencoder<Scalar> model = initial;
  const BatchT clean = dataset.train.cast<Scalar>();
  const BatchT noisy = dataset.train_noisy.cast<Scalar>();
  const Eigen::Index n = clean.rows();
  const Eigen::Index l = clean.cols();

  auto params = model.parameters();
  std::vector<Vector<Scalar>> m1, m2;
  for (auto p : params) {
    m1.push_back(Vector<Scalar>::Zero(static_cast<Eigen::Index>(p.size())));
    m2.push_back(Vector<Scalar>::Zero(static_cast<Eigen::Index>(p.size())));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  typename Autoencoder<Scalar>::Tape tape;
  TrainMeta meta;
  meta.epochs = cfg.epochs;
  meta.batch_size = cfg.batch_size;
  meta.learning_rate = cfg.learning_rate;
  meta.seed = cfg.seed;
  std::uint64_t step = 0;
  const auto bs = static_cast<Eigen::Index>(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index rows = std::min(bs, n - start);
      BatchT xb(rows, l), tb(rows, l);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = noisy.row(src);
        tb.row(r) = clean.row(src);
      }
      const BatchT out = model.forward_train(xb, &rng, tape);
      auto [loss, grad_out] = mse_loss<Scalar>(out, tb);
      if (!std::isfinite(loss))
        throw TrainingDiverged("train: loss became non-finite at epoch " + std::to_string(epoch + 1) +
                               "; lower the learning rate (currently " + std::to_string(cfg.learning_rate) + ")");
      epoch_loss += loss * static_cast<double>(rows);
      const auto grads = model.backward(tape, grad_out);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      params = model.parameters();
      for (std::size_t t = 0; t < params.size(); ++t) {
        Eigen::Map<Vector<Scalar>> w(params[t].data(), static_cast<Eigen::Index>(params[t].size()));
        const auto& g = grads[t];
        m1[t] = Scalar(cfg.beta1) * m1[t] + Scalar(1.0 - cfg.beta1) * g;
        m2[t] = Scalar(cfg.beta2) * m2[t] + Scalar(1.0 - cfg.beta2) * g.cwiseProduct(g);
        w.array() -= Scalar(cfg.learning_rate) * (m1[t].array() / Scalar(c1)) /
                     ((m2[t].array() / Scalar(c2)).sqrt() + Scalar(cfg.epsilon));
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged("train: non-finite epoch loss; lower the learning rate");
    meta.epoch_losses.push_back(epoch_loss);
  }
  meta.final_train_mse = meta.epoch_losses.empty() ? std::numeric_limits<double>::quiet_NaN() : meta.epoch_losses.back();
  if (!model.all_finite()) throw TrainingDiverged("train: non-finite weights; lower the learning rate");
  model.set_train_meta(std::move(meta));
  return model;
}

}  // namespace liteatt
