#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "liteatt/error.hpp"
#include "liteatt/trace.hpp"

namespace liteatt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kProfileFormatVersion = 1;

std::string stamp_line(const FileStamp& stamp) {
  return "# config_digest=" + stamp.config_digest + " seed=" + std::to_string(stamp.seed) + "\n";
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_real: to_chars failed");
  return std::string(buf, ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void export_traces(const std::filesystem::path& path, std::span<const SramTrace> traces,
                   const std::optional<FileStamp>& stamp) {
  auto out = open_out(path);
  if (stamp) out << stamp_line(*stamp);
  const std::size_t L = traces.empty() ? 0 : traces.front().bytes.size();
  out << "device_id,firmware_id,time_step,label";
  for (std::size_t k = 0; k < L; ++k) out << ",b" << k;
  out << '\n';
  std::string row;
  for (const auto& t : traces) {
    if (t.bytes.size() != L) throw std::invalid_argument("export_traces: traces differ in length");
    row = t.device_id + ',' + t.firmware_id + ',' + std::to_string(t.time_step) + ',' +
          std::string(to_string(t.label));
    for (auto b : t.bytes) {
      row += ',';
      row += std::to_string(b);
    }
    row += '\n';
    out << row;
  }
}

std::vector<SramTrace> parse_traces(std::istream& in) {
  std::vector<SramTrace> traces;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_bytes = 0;
  bool have_header = false;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_commas(line);
    if (!have_header) {
      if (fields.size() < 4 || fields[0] != "device_id" || fields[1] != "firmware_id" ||
          fields[2] != "time_step" || fields[3] != "label")
        throw FormatError("trace CSV line " + std::to_string(line_no) + ": bad header");
      for (std::size_t k = 4; k < fields.size(); ++k)
        if (fields[k] != "b" + std::to_string(k - 4))
          throw FormatError("trace CSV line " + std::to_string(line_no) + ": bad byte column name");
      expected_bytes = fields.size() - 4;
      have_header = true;
      continue;
    }
    ++row_no;
    const std::string where = "trace CSV row " + std::to_string(row_no) + " (line " + std::to_string(line_no) + ")";
    if (fields.size() != expected_bytes + 4)
      throw FormatError(where + ": expected " + std::to_string(expected_bytes) + " bytes, found " +
                        std::to_string(fields.size() >= 4 ? fields.size() - 4 : 0));
    SramTrace t;
    t.device_id = std::string(fields[0]);
    t.firmware_id = std::string(fields[1]);
    {
      auto f = fields[2];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), t.time_step);
      if (ec != std::errc{} || p != f.data() + f.size()) throw FormatError(where + ": bad time_step");
    }
    try {
      t.label = parse_label(fields[3]);
    } catch (const std::invalid_argument&) {
      throw FormatError(where + ": label must be safe or unsafe");
    }
    t.bytes.resize(expected_bytes);
    for (std::size_t k = 0; k < expected_bytes; ++k) {
      auto f = fields[k + 4];
      unsigned value = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc{} || p != f.data() + f.size() || f.empty() || value > 255)
        throw FormatError(where + ": byte b" + std::to_string(k) + " = '" + std::string(f) +
                          "' is not a value in 0-255");
      t.bytes[k] = static_cast<std::uint8_t>(value);
    }
    traces.push_back(std::move(t));
  }
  if (!have_header) throw FormatError("trace CSV: missing header");
  return traces;
}

std::vector<SramTrace> import_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trace file " + path.string());
  return parse_traces(in);
}

void export_aggregated(const std::filesystem::path& path, std::span<const AggregatedTrace> rows,
                       const std::optional<FileStamp>& stamp) {
  auto out = open_out(path);
  if (stamp) out << stamp_line(*stamp);
  const auto l = rows.empty() ? 0 : rows.front().features.size();
  out << "label";
  for (Eigen::Index i = 0; i < l; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << to_string(r.label);
    for (Eigen::Index i = 0; i < r.features.size(); ++i) out << ',' << format_real(r.features[i]);
    out << '\n';
  }
}

std::string profile_to_text(const FirmwareProfile& p, const std::optional<FileStamp>& stamp) {
  ordered_json j;
  j["format"] = "liteatt-profile";
  j["version"] = kProfileFormatVersion;
  j["firmware_id"] = p.firmware_id();
  j["firmware_seed"] = p.firmware_seed;
  j["data_section_len"] = p.data_section_len;
  j["stack_len"] = p.stack_len;
  auto& layout = j["data_layout"] = ordered_json::array();
  for (const auto& v : p.data_layout) {
    ordered_json jv;
    jv["offset"] = v.offset;
    jv["width"] = v.width;
    jv["kind"] = to_string(v.kind);
    jv["init_seed"] = v.init_seed;
    layout.push_back(jv);
  }
  auto& sp = j["stack_pattern"];
  sp["frame_count"] = p.stack_pattern.frame_count;
  sp["frame_sizes"] = p.stack_pattern.frame_sizes;
  sp["fill_fraction"] = p.stack_pattern.fill_fraction;
  if (p.mutation) {
    auto& m = j["mutation"];
    m["kind"] = to_string(p.mutation->kind);
    m["severity"] = p.mutation->severity;
    m["seed"] = p.mutation->seed;
  } else {
    j["mutation"] = nullptr;
  }
  if (stamp) {
    j["provenance"]["config_digest"] = stamp->config_digest;
    j["provenance"]["seed"] = stamp->seed;
  }
  return j.dump(2) + "\n";
}

FirmwareProfile profile_from_text(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format") != "liteatt-profile") throw FormatError("profile: unexpected format tag");
    if (j.at("version").get<int>() != kProfileFormatVersion) throw FormatError("profile: unsupported version");
    FirmwareProfile p;
    p.firmware_seed = j.at("firmware_seed").get<std::uint64_t>();
    p.data_section_len = j.at("data_section_len").get<std::size_t>();
    p.stack_len = j.at("stack_len").get<std::size_t>();
    for (const auto& jv : j.at("data_layout")) {
      Variable v;
      v.offset = jv.at("offset").get<std::size_t>();
      v.width = jv.at("width").get<std::size_t>();
      v.kind = parse_variable_kind(jv.at("kind").get<std::string>());
      v.init_seed = jv.at("init_seed").get<std::uint64_t>();
      p.data_layout.push_back(v);
    }
    const auto& sp = j.at("stack_pattern");
    p.stack_pattern.frame_count = sp.at("frame_count").get<std::size_t>();
    p.stack_pattern.frame_sizes = sp.at("frame_sizes").get<std::vector<std::size_t>>();
    p.stack_pattern.fill_fraction = sp.at("fill_fraction").get<double>();
    if (!j.at("mutation").is_null()) {
      const auto& m = j.at("mutation");
      p.mutation = Mutation{parse_mutation_kind(m.at("kind").get<std::string>()), m.at("severity").get<double>(),
                            m.at("seed").get<std::uint64_t>()};
    }
    validate_profile(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("profile: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("profile: ") + e.what());
  }
}

}  // namespace liteatt
