#include "liteatt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "liteatt/error.hpp"
#include "liteatt/secure_channel.hpp"

namespace liteatt {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

std::vector<std::string_view> parse_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string real(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  bool in_digest = true;
};

template <typename T>
Field int_field(std::string key, T ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
          [key, member](ExperimentConfig& c, std::string_view v) { c.*member = parse_int<T>(key, v); }};
}

template <typename T>
Field layout_int(std::string key, T LayoutSpec::*member) {
  return {key, [member](const ExperimentConfig& c) { return std::to_string(c.layout.*member); },
          [key, member](ExperimentConfig& c, std::string_view v) { c.layout.*member = parse_int<T>(key, v); }};
}

template <typename T>
Field train_int(std::string key, T TrainConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return std::to_string(c.train.*member); },
          [key, member](ExperimentConfig& c, std::string_view v) { c.train.*member = parse_int<T>(key, v); }};
}

Field train_real(std::string key, double TrainConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return real(c.train.*member); },
          [key, member](ExperimentConfig& c, std::string_view v) { c.train.*member = parse_real(key, v); }};
}

Field split_real(std::string key, double SplitRatios::*member) {
  return {key, [member](const ExperimentConfig& c) { return real(c.split.*member); },
          [key, member](ExperimentConfig& c, std::string_view v) { c.split.*member = parse_real(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("seed", &ExperimentConfig::seed));
    f.push_back({"out", [](const ExperimentConfig& c) { return c.out.string(); },
                 [](ExperimentConfig& c, std::string_view v) { c.out = std::string(v); }, false});
    Field threads = int_field("threads", &ExperimentConfig::threads);
    threads.in_digest = false;
    f.push_back(threads);

    f.push_back(int_field("generator.firmware_count", &ExperimentConfig::firmware_count));
    f.push_back(layout_int("generator.variable_count", &LayoutSpec::variable_count));
    f.push_back(layout_int("generator.data_section_len", &LayoutSpec::data_section_len));
    f.push_back(layout_int("generator.stack_len", &LayoutSpec::stack_len));
    f.push_back(layout_int("generator.min_width", &LayoutSpec::min_width));
    f.push_back(layout_int("generator.max_width", &LayoutSpec::max_width));
    f.push_back(layout_int("generator.frame_count", &LayoutSpec::frame_count));
    f.push_back({"generator.fill_fraction", [](const ExperimentConfig& c) { return real(c.layout.fill_fraction); },
                 [](ExperimentConfig& c, std::string_view v) {
                   c.layout.fill_fraction = parse_real("generator.fill_fraction", v);
                 }});
    f.push_back(int_field("generator.safe_traces", &ExperimentConfig::safe_traces));
    f.push_back(int_field("generator.mutated_traces", &ExperimentConfig::mutated_traces));
    f.push_back({"generator.severities",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.severities.size(); ++i) s += (i ? "," : "") + real(c.severities[i]);
                   return s;
                 },
                 [](ExperimentConfig& c, std::string_view v) {
                   c.severities.clear();
                   for (auto item : parse_list(v)) c.severities.push_back(parse_real("generator.severities", item));
                 }});
    f.push_back({"generator.mutations",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.mutations.size(); ++i)
                     s += (i ? "," : "") + std::string(to_string(c.mutations[i]));
                   return s;
                 },
                 [](ExperimentConfig& c, std::string_view v) {
                   c.mutations.clear();
                   for (auto item : parse_list(v)) {
                     try {
                       c.mutations.push_back(parse_mutation_kind(item));
                     } catch (const std::invalid_argument&) {
                       throw ConfigError("generator.mutations: unknown mutation kind '" + std::string(item) + "'");
                     }
                   }
                 }});
    f.push_back(int_field("generator.device_seed", &ExperimentConfig::device_seed));
    f.push_back(int_field("generator.twin_device_seed", &ExperimentConfig::twin_device_seed));

    f.push_back(int_field("features.block_width", &ExperimentConfig::block_width));
    f.push_back(int_field("features.used_bytes", &ExperimentConfig::used_bytes));
    f.push_back({"features.noise_factor", [](const ExperimentConfig& c) { return real(c.noise_factor); },
                 [](ExperimentConfig& c, std::string_view v) {
                   c.noise_factor = parse_real("features.noise_factor", v);
                 }});
    f.push_back(split_real("split.train", &SplitRatios::train));
    f.push_back(split_real("split.val", &SplitRatios::val));
    f.push_back(split_real("split.test", &SplitRatios::test));

    f.push_back({"model.arch", [](const ExperimentConfig& c) { return std::string(to_string(c.arch)); },
                 [](ExperimentConfig& c, std::string_view v) {
                   try {
                     c.arch = parse_arch(v);
                   } catch (const std::invalid_argument&) {
                     throw ConfigError("model.arch: expected M1, M2 or M3, got '" + std::string(v) + "'");
                   }
                 }});
    f.push_back(train_int("train.epochs", &TrainConfig::epochs));
    f.push_back(train_int("train.batch_size", &TrainConfig::batch_size));
    f.push_back(train_real("train.learning_rate", &TrainConfig::learning_rate));
    f.push_back(train_real("train.beta1", &TrainConfig::beta1));
    f.push_back(train_real("train.beta2", &TrainConfig::beta2));
    f.push_back(train_real("train.epsilon", &TrainConfig::epsilon));

    f.push_back(int_field("attest.epsilon_ms", &ExperimentConfig::epsilon_ms));
    f.push_back(int_field("handshake.sessions", &ExperimentConfig::sessions));
    f.push_back(int_field("handshake.latency_ms", &ExperimentConfig::latency_ms));
    f.push_back({"handshake.adversary", [](const ExperimentConfig& c) { return c.adversary; },
                 [](ExperimentConfig& c, std::string_view v) { c.adversary = std::string(v); }});
    return f;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError(std::string(key) + ": unknown configuration key");
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

ExperimentConfig load_config(const std::string& path_or_default) {
  ExperimentConfig cfg;
  if (path_or_default.empty() || path_or_default == "default") return cfg;
  std::ifstream in(path_or_default);
  if (!in) throw ConfigError("config: cannot open '" + path_or_default + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
  return cfg;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
  };
  require(threads >= 1, "threads", "must be at least 1");
  require(firmware_count >= 1, "generator.firmware_count", "must be at least 1");
  require(layout.variable_count >= 1 || !layout.widths.empty(), "generator.variable_count", "must be at least 1");
  require(layout.min_width >= 1 && layout.min_width <= layout.max_width, "generator.min_width",
          "must be positive and not exceed generator.max_width");
  require(layout.variable_count * layout.min_width <= layout.data_section_len, "generator.data_section_len",
          "too small for the requested variables");
  require(layout.fill_fraction > 0.0 && layout.fill_fraction <= 1.0, "generator.fill_fraction",
          "must lie in (0, 1]");
  require(safe_traces >= 8, "generator.safe_traces", "must be at least 8");
  require(!severities.empty(), "generator.severities", "needs at least one value");
  for (double s : severities) require(s > 0.0 && s <= 1.0, "generator.severities", "values must lie in (0, 1]");
  require(device_seed != twin_device_seed, "generator.twin_device_seed", "must differ from generator.device_seed");
  require(block_width >= 1, "features.block_width", "must be positive");
  require(effective_used_bytes() <= layout.data_section_len, "features.used_bytes",
          "exceeds generator.data_section_len");
  require(effective_used_bytes() % block_width == 0, "features.used_bytes",
          "must be a multiple of features.block_width");
  require(feature_count() >= 2, "features.used_bytes", "yields fewer than 2 features");
  require(arch != Arch::M3 || feature_count() % 4 == 0, "model.arch", "M3 needs a feature count divisible by 4");
  require(noise_factor >= 0.0, "features.noise_factor", "must be non-negative");
  require(split.train > 0.0 && split.val > 0.0 && split.test > 0.0 &&
              std::abs(split.train + split.val + split.test - 1.0) < 1e-9,
          "split", "ratios must be positive and sum to 1");
  require(train.epochs >= 1, "train.epochs", "must be positive");
  require(train.batch_size >= 1, "train.batch_size", "must be positive");
  require(train.learning_rate > 0.0, "train.learning_rate", "must be positive");
  require(train.beta1 > 0.0 && train.beta1 < 1.0, "train.beta1", "must lie in (0, 1)");
  require(train.beta2 > 0.0 && train.beta2 < 1.0, "train.beta2", "must lie in (0, 1)");
  require(train.epsilon > 0.0, "train.epsilon", "must be positive");
  require(epsilon_ms > 0, "attest.epsilon_ms", "must be positive");
  require(sessions >= 1, "handshake.sessions", "must be at least 1");
  require(latency_ms >= 0, "handshake.latency_ms", "must be non-negative");
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& f : fields()) {
    if (!f.in_digest) continue;
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

std::string ExperimentConfig::digest() const {
  const std::string text = canonical();
  return to_hex(sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace liteatt
