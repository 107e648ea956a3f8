#include "liteatt/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace liteatt {

namespace {

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t count_for(double severity, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(severity * static_cast<double>(n) - 1e-9));
}

std::vector<std::size_t> random_partition(std::size_t total, std::size_t parts, std::mt19937_64& rng) {
  // `parts` positive sizes summing to `total` (requires total >= parts).
  std::vector<std::size_t> cuts;
  std::uniform_int_distribution<std::size_t> pick(1, total - 1);
  while (cuts.size() + 1 < parts) {
    const auto c = pick(rng);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (auto c : cuts) {
    sizes.push_back(c - prev);
    prev = c;
  }
  sizes.push_back(total - prev);
  return sizes;
}

StackPattern draw_stack_pattern(std::size_t stack_len, std::size_t frame_count, double fill_fraction,
                                std::mt19937_64& rng) {
  StackPattern sp;
  sp.fill_fraction = fill_fraction;
  const auto filled = static_cast<std::size_t>(std::floor(fill_fraction * static_cast<double>(stack_len)));
  if (filled == 0 || frame_count == 0) return sp;
  frame_count = std::min(frame_count, filled);
  sp.frame_count = frame_count;
  sp.frame_sizes = frame_count == 1 ? std::vector<std::size_t>{filled}
                                    : random_partition(filled, frame_count, rng);
  return sp;
}

VariableKind draw_kind(const std::array<double, 4>& weights, std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return static_cast<VariableKind>(dist(rng));
}

// Lays variables out in order, separated by the given gaps.
void place(std::vector<Variable>& vars, const std::vector<std::size_t>& gaps) {
  std::size_t at = 0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    at += gaps[i];
    vars[i].offset = at;
    at += vars[i].width;
  }
}

std::vector<std::size_t> gaps_of(const FirmwareProfile& p) {
  std::vector<std::size_t> gaps;
  std::size_t prev_end = 0;
  for (const auto& v : p.data_layout) {
    gaps.push_back(v.offset - prev_end);
    prev_end = v.offset + v.width;
  }
  return gaps;
}

std::size_t unused_bytes(const FirmwareProfile& p) {
  std::size_t used = 0;
  for (const auto& v : p.data_layout) used += v.width;
  return p.data_section_len - used;
}

std::uint8_t random_walk_byte(std::uint64_t firmware_seed, const Variable& v, std::uint8_t start,
                              std::uint64_t time_step) {
  std::mt19937_64 rng(mix(firmware_seed, v.init_seed));
  int value = start;
  for (std::uint64_t k = 0; k < time_step; ++k) {
    value += (rng() & 1) ? 1 : -1;
    value = std::clamp(value, 0, 255);
  }
  return static_cast<std::uint8_t>(value);
}

void write_variable(std::span<std::uint8_t> data, std::uint64_t firmware_seed, const Variable& v,
                    std::uint64_t t) {
  Bytes bytes = variable_init_bytes(v);
  switch (v.kind) {
    case VariableKind::constant:
      break;
    case VariableKind::counter: {
      const std::size_t n = std::min<std::size_t>(v.width, 4);
      std::uint32_t value = 0;
      for (std::size_t i = 0; i < n; ++i) value |= std::uint32_t{bytes[i]} << (8 * i);
      value += static_cast<std::uint32_t>(t);
      for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
      break;
    }
    case VariableKind::random_walk:
      bytes[0] = random_walk_byte(firmware_seed, v, bytes[0], t);
      break;
    case VariableKind::flag: {
      const std::uint64_t h = mix(v.init_seed, 0xf1a9);
      const std::uint64_t period = 2 + h % 15;
      const std::uint64_t phase = (h >> 8) % period;
      if (((t + phase) / period) % 2 == 1) bytes[0] ^= 0x01;
      break;
    }
  }
  std::copy(bytes.begin(), bytes.end(), data.begin() + static_cast<std::ptrdiff_t>(v.offset));
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(std::uint64_t v) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = hex_digit(static_cast<unsigned>(v));
  return s;
}

}  // namespace

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::constant: return "constant";
    case VariableKind::counter: return "counter";
    case VariableKind::random_walk: return "random_walk";
    case VariableKind::flag: return "flag";
  }
  return "?";
}

std::string_view to_string(MutationKind kind) {
  switch (kind) {
    case MutationKind::tamper_data: return "tamper_data";
    case MutationKind::tamper_function: return "tamper_function";
    case MutationKind::tamper_control_flow: return "tamper_control_flow";
    case MutationKind::data_injection: return "data_injection";
  }
  return "?";
}

std::string_view to_string(Label label) { return label == Label::safe ? "safe" : "unsafe"; }

VariableKind parse_variable_kind(std::string_view s) {
  for (auto k : {VariableKind::constant, VariableKind::counter, VariableKind::random_walk, VariableKind::flag})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown variable kind '" + std::string(s) + "'");
}

MutationKind parse_mutation_kind(std::string_view s) {
  for (auto k : kAllMutationKinds)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown mutation kind '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
  if (s == "safe") return Label::safe;
  if (s == "unsafe") return Label::unsafe;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

std::string FirmwareProfile::firmware_id() const {
  std::string id = "fw-" + hex64(firmware_seed);
  if (mutation) {
    char sev[16];
    std::snprintf(sev, sizeof sev, "%.4g", mutation->severity);
    id += "~" + std::string(to_string(mutation->kind)) + "~" + sev + "~" + hex64(mutation->seed);
  }
  return id;
}

std::string device_name(std::uint64_t device_seed) { return "dev-" + hex64(device_seed); }

Bytes variable_init_bytes(const Variable& v) {
  std::mt19937_64 rng(mix(v.init_seed, 0x1417));
  Bytes out(v.width);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() >> 56);
  return out;
}

void validate_profile(const FirmwareProfile& p) {
  if (p.data_section_len == 0) throw std::invalid_argument("profile: empty data section");
  std::vector<Variable> vars = p.data_layout;
  std::sort(vars.begin(), vars.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
  std::size_t prev_end = 0;
  for (const auto& v : vars) {
    if (v.width == 0) throw std::invalid_argument("profile: zero-width variable");
    if (v.offset < prev_end) throw std::invalid_argument("profile: overlapping variables");
    if (v.offset + v.width > p.data_section_len)
      throw std::invalid_argument("profile: variable at offset " + std::to_string(v.offset) +
                                  " exceeds data section");
    prev_end = v.offset + v.width;
  }
  const auto& sp = p.stack_pattern;
  if (!(sp.fill_fraction > 0.0 && sp.fill_fraction <= 1.0))
    throw std::invalid_argument("profile: stack fill_fraction outside (0, 1]");
  if (sp.frame_sizes.size() != sp.frame_count)
    throw std::invalid_argument("profile: frame_sizes does not match frame_count");
  const auto filled = std::accumulate(sp.frame_sizes.begin(), sp.frame_sizes.end(), std::size_t{0});
  if (filled > p.stack_len) throw std::invalid_argument("profile: stack frames exceed stack region");
}

FirmwareProfile generate_profile(std::uint64_t firmware_seed, const LayoutSpec& spec) {
  if (spec.min_width == 0 || spec.min_width > spec.max_width)
    throw std::invalid_argument("layout: invalid width range");
  if (spec.data_section_len < kDefaultBlockWidth)
    throw std::invalid_argument("layout: data section shorter than one aggregation block");
  if (!(spec.fill_fraction > 0.0 && spec.fill_fraction <= 1.0))
    throw std::invalid_argument("layout: fill_fraction outside (0, 1]");

  std::mt19937_64 rng(mix(firmware_seed, 0x1a70));
  FirmwareProfile p;
  p.firmware_seed = firmware_seed;
  p.data_section_len = spec.data_section_len;
  p.stack_len = spec.stack_len;

  std::vector<std::size_t> widths = spec.widths;
  if (widths.empty()) {
    std::uniform_int_distribution<std::size_t> width(spec.min_width, spec.max_width);
    for (std::size_t i = 0; i < spec.variable_count; ++i) widths.push_back(width(rng));
  }
  const auto used = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  if (used > spec.data_section_len)
    throw std::invalid_argument("layout overflow: " + std::to_string(used) + " variable bytes exceed a " +
                                std::to_string(spec.data_section_len) + "-byte data section");

  for (auto w : widths) {
    Variable v;
    v.width = w;
    v.kind = draw_kind(spec.kind_weights, rng);
    v.init_seed = rng();
    p.data_layout.push_back(v);
  }

  // Spread the free bytes over the n + 1 gaps around the variables.
  std::vector<std::size_t> gaps(widths.size() + 1, 0);
  const std::size_t free_bytes = spec.data_section_len - used;
  std::uniform_int_distribution<std::size_t> slot(0, gaps.size() - 1);
  // Chunks of 4 keep the layout block-aligned most of the time.
  for (std::size_t left = free_bytes; left > 0;) {
    const std::size_t chunk = std::min<std::size_t>(4, left);
    gaps[slot(rng)] += chunk;
    left -= chunk;
  }
  place(p.data_layout, gaps);

  p.stack_pattern = draw_stack_pattern(spec.stack_len, spec.frame_count, spec.fill_fraction, rng);
  validate_profile(p);
  return p;
}

FirmwareProfile mutate_profile(const FirmwareProfile& base, MutationKind kind, double severity,
                               std::uint64_t seed) {
  if (base.mutation) throw std::invalid_argument("mutate_profile: base profile is already mutated");
  if (!(severity > 0.0 && severity <= 1.0))
    throw std::invalid_argument("mutate_profile: severity must lie in (0, 1]");

  FirmwareProfile p = base;
  p.mutation = Mutation{kind, severity, seed};
  std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(kind) + 0x3117));
  const std::size_t n = p.data_layout.size();

  auto pick_variables = [&](std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  switch (kind) {
    case MutationKind::tamper_data: {
      for (auto i : pick_variables(count_for(severity, n))) {
        auto& v = p.data_layout[i];
        const Bytes old = variable_init_bytes(v);
        Variable candidate = v;
        do {
          candidate.init_seed = rng();
        } while (variable_init_bytes(candidate)[0] == old[0]);
        v.init_seed = candidate.init_seed;
      }
      break;
    }
    case MutationKind::tamper_function: {
      // Alternate removals and insertions; later variables shift with the
      // changed code, the gaps between variables are preserved.
      std::vector<std::size_t> gaps = gaps_of(p);
      std::vector<Variable> vars = p.data_layout;
      const std::size_t ops = std::max<std::size_t>(1, count_for(severity, n));
      std::uniform_int_distribution<std::size_t> width(4, 32);
      for (std::size_t op = 0; op < ops; ++op) {
        if (op % 2 == 0 && !vars.empty()) {
          std::uniform_int_distribution<std::size_t> at(0, vars.size() - 1);
          const auto i = at(rng);
          vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(i));
          gaps.erase(gaps.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
          std::uniform_int_distribution<std::size_t> at(0, vars.size());
          const auto i = at(rng);
          Variable nv;
          nv.width = width(rng);
          nv.kind = static_cast<VariableKind>(rng() % 4);
          nv.init_seed = rng();
          vars.insert(vars.begin() + static_cast<std::ptrdiff_t>(i), nv);
          gaps.insert(gaps.begin() + static_cast<std::ptrdiff_t>(i), 0);
        }
      }
      place(vars, gaps);
      while (!vars.empty() && vars.back().offset + vars.back().width > p.data_section_len) vars.pop_back();
      p.data_layout = std::move(vars);
      break;
    }
    case MutationKind::tamper_control_flow: {
      // Diverted control flow changes which code updates a variable.
      for (auto i : pick_variables(count_for(severity, n))) {
        auto& v = p.data_layout[i];
        switch (v.kind) {
          case VariableKind::constant: v.kind = VariableKind::counter; break;
          case VariableKind::counter: v.kind = VariableKind::constant; break;
          case VariableKind::random_walk: v.kind = VariableKind::flag; break;
          case VariableKind::flag: v.kind = VariableKind::random_walk; break;
        }
      }
      const double fill = std::min(1.0, base.stack_pattern.fill_fraction * (1.0 + severity));
      p.stack_pattern = draw_stack_pattern(p.stack_len, base.stack_pattern.frame_count + 1, fill, rng);
      break;
    }
    case MutationKind::data_injection: {
      const std::size_t free_bytes = unused_bytes(p);
      if (free_bytes == 0)
        throw std::invalid_argument("mutate_profile: data_injection needs unused data-section gaps");
      std::size_t budget = std::max<std::size_t>(
          4, count_for(severity, std::min<std::size_t>(free_bytes, 256)));
      budget = std::min(budget, free_bytes);
      // Fill gaps front-to-back starting from a seeded gap, in chunks of up
      // to 32 bytes.
      std::vector<std::size_t> gaps = gaps_of(p);
      const std::size_t tail_start =
          p.data_layout.empty() ? 0 : p.data_layout.back().offset + p.data_layout.back().width;
      std::vector<std::pair<std::size_t, std::size_t>> holes;  // (offset, length)
      for (std::size_t i = 0; i < gaps.size(); ++i)
        if (gaps[i] > 0) holes.emplace_back(p.data_layout[i].offset - gaps[i], gaps[i]);
      if (tail_start < p.data_section_len) holes.emplace_back(tail_start, p.data_section_len - tail_start);
      const std::size_t first = rng() % holes.size();
      std::vector<Variable> injected;
      for (std::size_t h = 0; h < holes.size() && budget > 0; ++h) {
        auto [off, len] = holes[(first + h) % holes.size()];
        while (len > 0 && budget > 0) {
          const std::size_t w = std::min({len, budget, std::size_t{32}});
          Variable nv;
          nv.offset = off;
          nv.width = w;
          nv.kind = VariableKind::constant;
          nv.init_seed = rng();
          injected.push_back(nv);
          off += w;
          len -= w;
          budget -= w;
        }
      }
      p.data_layout.insert(p.data_layout.end(), injected.begin(), injected.end());
      std::sort(p.data_layout.begin(), p.data_layout.end(),
                [](const auto& a, const auto& b) { return a.offset < b.offset; });
      break;
    }
  }
  validate_profile(p);
  return p;
}

SramTrace sample_trace(const FirmwareProfile& profile, std::uint64_t device_seed, std::uint64_t time_step) {
  SramTrace trace;
  trace.device_id = device_name(device_seed);
  trace.firmware_id = profile.firmware_id();
  trace.time_step = time_step;
  trace.label = profile.mutation ? Label::unsafe : Label::safe;
  trace.bytes.assign(profile.sram_len(), 0);

  // Data section: .bss zero, variables per their dynamics.
  std::span<std::uint8_t> data(trace.bytes.data(), profile.data_section_len);
  for (const auto& v : profile.data_layout) write_variable(data, profile.firmware_seed, v, time_step);

  // Stack: power-up noise of this particular device, then the frames the
  // firmware pushes from the top of the stack downwards.
  std::span<std::uint8_t> stack(trace.bytes.data() + profile.data_section_len, profile.stack_len);
  std::mt19937_64 noise(mix(device_seed, 0x57ac));
  for (auto& b : stack) b = static_cast<std::uint8_t>(noise() >> 56);
  std::size_t top = profile.stack_len;
  const auto& sp = profile.stack_pattern;
  for (std::size_t f = 0; f < sp.frame_sizes.size(); ++f) {
    const std::size_t size = std::min(sp.frame_sizes[f], top);
    std::mt19937_64 frame_rng(mix(mix(profile.firmware_seed, f), time_step % 8));
    for (std::size_t i = top - size; i < top; ++i) stack[i] = static_cast<std::uint8_t>(frame_rng() >> 56);
    top -= size;
  }
  return trace;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> aggregate_bytes(ByteView bytes, std::size_t s, std::size_t used) {
  if (s == 0) throw std::invalid_argument("aggregate: block width must be positive");
  if (used > bytes.size()) throw std::invalid_argument("aggregate: L_used exceeds trace length");
  if (used % s != 0)
    throw std::invalid_argument("aggregate: L_used " + std::to_string(used) + " is not a multiple of s=" +
                                std::to_string(s));
  const std::size_t l = used / s;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(static_cast<Eigen::Index>(l));
  const double denom = 255.0 * static_cast<double>(s);
  for (std::size_t i = 0; i < l; ++i) {
    std::uint64_t sum = 0;
    for (std::size_t k = i * s; k < (i + 1) * s; ++k) sum += bytes[k];
    out[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(static_cast<double>(sum) / denom);
  }
  return out;
}

template Eigen::VectorXd aggregate_bytes<double>(ByteView, std::size_t, std::size_t);
template Eigen::VectorXf aggregate_bytes<float>(ByteView, std::size_t, std::size_t);

AggregatedTrace aggregate(const SramTrace& trace, std::size_t s, std::size_t used) {
  AggregatedTrace out;
  out.features = aggregate_bytes<double>(trace.bytes, s, used);
  out.source = {trace.device_id, trace.firmware_id, trace.time_step};
  out.label = trace.label;
  return out;
}

Eigen::MatrixXd stack_rows(std::span<const AggregatedTrace> traces) {
  if (traces.empty()) return {};
  const auto l = traces.front().features.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traces.size()), l);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].features.size() != l) throw std::invalid_argument("stack_rows: inconsistent feature length");
    m.row(static_cast<Eigen::Index>(i)) = traces[i].features.transpose();
  }
  return m;
}

Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& input, double n_f, std::uint64_t seed) {
  if (n_f < 0.0) throw std::invalid_argument("inject_noise: n_f must be non-negative");
  Eigen::MatrixXd out = input;
  if (n_f == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> eps(0.0, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += n_f * eps(rng);
  return out;
}

Dataset build_dataset(std::span<const AggregatedTrace> safe, std::span<const AggregatedTrace> unsafe,
                      const SplitRatios& ratios, double n_f, std::uint64_t seed) {
  if (safe.empty()) throw std::invalid_argument("build_dataset: no safe traces");
  if (safe.size() < 8) throw std::invalid_argument("build_dataset: need at least 8 safe traces");
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("build_dataset: split ratios must be positive and sum to 1");

  const std::size_t n = safe.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(seed, 0xd5));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n) + 1e-9));

  Dataset ds;
  ds.meta.ratios = ratios;
  ds.meta.seed = seed;
  ds.meta.n_f = n_f;
  ds.meta.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.meta.val_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  ds.meta.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());

  const auto l = safe.front().features.size();
  auto gather = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), l);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& f = safe[rows[i]].features;
      if (f.size() != l) throw std::invalid_argument("build_dataset: inconsistent feature length");
      m.row(static_cast<Eigen::Index>(i)) = f.transpose();
    }
    return m;
  };
  ds.train = gather(ds.meta.train_rows);
  ds.val = gather(ds.meta.val_rows);
  ds.test_safe = gather(ds.meta.test_rows);
  ds.test_unsafe = unsafe.empty() ? Eigen::MatrixXd(0, l) : stack_rows(unsafe);
  if (ds.test_unsafe.cols() != l) throw std::invalid_argument("build_dataset: unsafe feature length mismatch");
  ds.train_noisy = inject_noise(ds.train, n_f, mix(seed, 0x401e));
  return ds;
}

}  // namespace liteatt
