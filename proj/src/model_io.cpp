#include "liteatt/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "liteatt/error.hpp"

namespace liteatt {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

enum class LayerTag : std::uint8_t { dense = 0, conv = 1, pool = 2, dropout = 3 };

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void i8(std::int8_t v) { out_.push_back(static_cast<std::uint8_t>(v)); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void dim(Eigen::Index v) { u32(static_cast<std::uint32_t>(v)); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > in_.size()) throw FormatError("model container truncated at byte " + std::to_string(pos_));
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::int8_t i8() { std::int8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  float f32() { float v; raw(&v, 4); return v; }
  Eigen::Index dim() {
    const auto v = u32();
    if (v > (1u << 24)) throw FormatError("model container: implausible dimension " + std::to_string(v));
    return static_cast<Eigen::Index>(v);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, char section, Arch arch, Eigen::Index input_dim, std::size_t layers) {
  w.raw("LAM1", 4);
  w.u32(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(section));
  w.u8(static_cast<std::uint8_t>(arch));
  w.dim(input_dim);
  w.u32(static_cast<std::uint32_t>(layers));
}

void write_text(Writer& w, const ContainerMeta& meta) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (meta.calibration) {
    const auto& c = *meta.calibration;
    auto& jc = j["calibration"];
    jc["gamma"] = c.gamma;
    jc["p95"] = c.p95;
    jc["p99"] = c.p99;
    jc["tnr_target"] = c.tnr_target;
    jc["t_opt"] = c.t_opt;
    jc["achieved_tnr_val"] = c.achieved_tnr_val;
    jc["exact"] = c.exact;
  }
  if (meta.stamp) {
    j["provenance"]["config_digest"] = meta.stamp->config_digest;
    j["provenance"]["seed"] = meta.stamp->seed;
  }
  const std::string text = j.empty() ? std::string() : j.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text.data(), text.size());
}

ContainerMeta read_text(Reader& r) {
  ContainerMeta meta;
  const auto len = r.u32();
  std::string text(len, '\0');
  r.raw(text.data(), len);
  if (text.empty()) return meta;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("calibration")) {
      const auto& jc = j["calibration"];
      CalibrationResult c;
      c.gamma = jc.at("gamma");
      c.p95 = jc.at("p95");
      c.p99 = jc.at("p99");
      c.tnr_target = jc.at("tnr_target");
      c.t_opt = jc.at("t_opt");
      c.achieved_tnr_val = jc.at("achieved_tnr_val");
      c.exact = jc.at("exact");
      meta.calibration = c;
    }
    if (j.contains("provenance"))
      meta.stamp = FileStamp{j["provenance"].at("config_digest"), j["provenance"].at("seed")};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model container text block: ") + e.what());
  }
  return meta;
}

template <typename M>
void write_floats(Writer& w, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(static_cast<float>(m.data()[i]));
}

template <typename M>
void read_floats(Reader& r, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
}

void write_quant(Writer& w, const ActivationQuant& q) {
  w.f32(q.scale);
  w.i8(q.zero_point);
}

ActivationQuant read_quant(Reader& r) {
  ActivationQuant q;
  q.scale = r.f32();
  q.zero_point = r.i8();
  return q;
}

}  // namespace

Bytes serialize_model(const AutoencoderModel& model, const ContainerMeta& meta) {
  Writer w;
  write_header(w, 'F', model.arch(), model.input_dim(), model.layers().size());
  for (const auto& layer : model.layers()) {
    if (const auto* d = std::get_if<DenseLayer<float>>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::dense));
      w.u8(static_cast<std::uint8_t>(d->activation));
      w.dim(d->weights.rows());
      w.dim(d->weights.cols());
      write_floats(w, d->weights);
      write_floats(w, d->biases);
    } else if (const auto* c = std::get_if<Conv1dLayer<float>>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::conv));
      w.u8(static_cast<std::uint8_t>(c->activation));
      w.dim(c->length);
      w.dim(c->in_channels);
      w.dim(c->out_channels());
      write_floats(w, c->weights);
      write_floats(w, c->biases);
    } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::pool));
      w.dim(p->length);
      w.dim(p->channels);
    } else {
      w.u8(static_cast<std::uint8_t>(LayerTag::dropout));
      w.f32(static_cast<float>(std::get<Dropout>(layer).rate));
    }
  }
  const auto& tm = model.train_meta();
  w.u32(static_cast<std::uint32_t>(tm.epochs));
  w.u32(static_cast<std::uint32_t>(tm.batch_size));
  w.f32(static_cast<float>(tm.learning_rate));
  w.u64(tm.seed);
  w.f32(static_cast<float>(tm.final_train_mse));
  write_text(w, meta);
  return w.take();
}

Bytes serialize_qmodel(const QuantizedModel& model, const ContainerMeta& meta) {
  Writer w;
  write_header(w, 'Q', model.arch, model.input_dim, model.layers.size());
  write_quant(w, model.input);
  for (const auto& layer : model.layers) {
    if (const auto* a = std::get_if<QuantizedAffine>(&layer)) {
      w.u8(static_cast<std::uint8_t>(a->conv ? LayerTag::conv : LayerTag::dense));
      w.u8(static_cast<std::uint8_t>(a->activation));
      if (a->conv) {
        w.dim(a->length);
        w.dim(a->in_channels);
      }
      w.dim(a->weights_q.rows());
      w.dim(a->weights_q.cols());
      for (Eigen::Index i = 0; i < a->weights_q.size(); ++i) w.i8(a->weights_q.data()[i]);
      w.f32(a->weight_scale);
      for (Eigen::Index i = 0; i < a->bias_q.size(); ++i) w.i32(a->bias_q[i]);
      w.f32(a->bias_scale);
      write_quant(w, a->input);
      write_quant(w, a->output);
    } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::pool));
      w.dim(p->length);
      w.dim(p->channels);
    } else {
      w.u8(static_cast<std::uint8_t>(LayerTag::dropout));
      w.f32(static_cast<float>(std::get<Dropout>(layer).rate));
    }
  }
  w.raw(model.provenance.data(), model.provenance.size());
  write_text(w, meta);
  return w.take();
}

LoadedModel deserialize_container(ByteView bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "LAM1", 4) != 0) throw FormatError("not a LAM1 model container");
  if (const auto v = r.u32(); v != kContainerVersion)
    throw FormatError("unsupported LAM1 version " + std::to_string(v));
  const char section = static_cast<char>(r.u8());
  const auto arch_tag = r.u8();
  if (arch_tag < 1 || arch_tag > 3) throw FormatError("model container: unknown architecture tag");
  const Arch arch = static_cast<Arch>(arch_tag);
  const Eigen::Index input_dim = r.dim();
  const auto layer_count = r.u32();
  if (layer_count > 64) throw FormatError("model container: implausible layer count");

  LoadedModel out;
  if (section == 'F') {
    std::vector<Layer<float>> layers;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      switch (static_cast<LayerTag>(r.u8())) {
        case LayerTag::dense: {
          DenseLayer<float> d;
          d.activation = static_cast<Activation>(r.u8());
          const auto rows = r.dim();
          const auto cols = r.dim();
          d.weights.resize(rows, cols);
          d.biases.resize(cols);
          read_floats(r, d.weights);
          read_floats(r, d.biases);
          layers.emplace_back(std::move(d));
          break;
        }
        case LayerTag::conv: {
          Conv1dLayer<float> c;
          c.activation = static_cast<Activation>(r.u8());
          c.length = r.dim();
          c.in_channels = r.dim();
          const auto cout = r.dim();
          c.weights.resize(3 * c.in_channels, cout);
          c.biases.resize(cout);
          read_floats(r, c.weights);
          read_floats(r, c.biases);
          layers.emplace_back(std::move(c));
          break;
        }
        case LayerTag::pool: {
          MaxPool1d p;
          p.length = r.dim();
          p.channels = r.dim();
          layers.emplace_back(p);
          break;
        }
        case LayerTag::dropout:
          layers.emplace_back(Dropout{static_cast<double>(r.f32())});
          break;
        default:
          throw FormatError("model container: unknown layer tag");
      }
    }
    TrainMeta tm;
    tm.epochs = r.u32();
    tm.batch_size = r.u32();
    tm.learning_rate = r.f32();
    tm.seed = r.u64();
    tm.final_train_mse = r.f32();
    try {
      AutoencoderModel model(arch, input_dim, std::move(layers));
      model.set_train_meta(std::move(tm));
      out.model = std::move(model);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("model container: ") + e.what());
    }
  } else if (section == 'Q') {
    QuantizedModel q;
    q.arch = arch;
    q.input_dim = input_dim;
    q.input = read_quant(r);
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      const auto tag = static_cast<LayerTag>(r.u8());
      if (tag == LayerTag::dense || tag == LayerTag::conv) {
        QuantizedAffine a;
        a.conv = tag == LayerTag::conv;
        a.activation = static_cast<Activation>(r.u8());
        if (a.conv) {
          a.length = r.dim();
          a.in_channels = r.dim();
        }
        const auto rows = r.dim();
        const auto cols = r.dim();
        a.weights_q.resize(rows, cols);
        for (Eigen::Index k = 0; k < a.weights_q.size(); ++k) a.weights_q.data()[k] = r.i8();
        a.weight_scale = r.f32();
        a.bias_q.resize(cols);
        for (Eigen::Index k = 0; k < cols; ++k) a.bias_q[k] = r.i32();
        a.bias_scale = r.f32();
        a.input = read_quant(r);
        a.output = read_quant(r);
        q.layers.emplace_back(std::move(a));
      } else if (tag == LayerTag::pool) {
        MaxPool1d p;
        p.length = r.dim();
        p.channels = r.dim();
        q.layers.emplace_back(p);
      } else if (tag == LayerTag::dropout) {
        q.layers.emplace_back(Dropout{static_cast<double>(r.f32())});
      } else {
        throw FormatError("model container: unknown layer tag");
      }
    }
    r.raw(q.provenance.data(), q.provenance.size());
    out.model = std::move(q);
  } else {
    throw FormatError("model container: unknown section tag");
  }
  out.meta = read_text(r);
  if (!r.done()) throw FormatError("model container: trailing bytes");
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_model(const std::filesystem::path& path, const AutoencoderModel& model, const ContainerMeta& meta) {
  write_file(path, serialize_model(model, meta));
}

void save_qmodel(const std::filesystem::path& path, const QuantizedModel& model, const ContainerMeta& meta) {
  write_file(path, serialize_qmodel(model, meta));
}

LoadedModel load_container(const std::filesystem::path& path) { return deserialize_container(read_file(path)); }

}  // namespace liteatt
