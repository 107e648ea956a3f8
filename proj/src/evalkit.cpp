#include "liteatt/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "liteatt/error.hpp"
#include "liteatt/model_io.hpp"

namespace liteatt {

namespace {

constexpr std::uint64_t kFirmwareStream = 100;
constexpr std::uint64_t kDatasetStream = 1000;
constexpr std::uint64_t kTrainStream = 2000;

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void append_errors(std::vector<double>& out, const Eigen::VectorXd& e) { out.insert(out.end(), e.data(), e.data() + e.size()); }

}  // namespace

MetricsReport score(std::span<const double> errors, std::span<const Label> labels, double t_opt) {
  if (errors.empty()) throw std::invalid_argument("score: empty input");
  if (errors.size() != labels.size()) throw std::invalid_argument("score: errors and labels differ in length");
  MetricsReport r;
  auto& c = r.counts;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const bool predicted_unsafe = errors[i] >= t_opt;
    if (labels[i] == Label::unsafe)
      (predicted_unsafe ? c.tp : c.fn)++;
    else
      (predicted_unsafe ? c.fp : c.tn)++;
  }
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.tpr = ratio(c.tp, c.tp + c.fn);
  r.fnr = ratio(c.fn, c.tp + c.fn);
  r.tnr = ratio(c.tn, c.tn + c.fp);
  r.fpr = ratio(c.fp, c.tn + c.fp);
  r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  r.f1_safe = ratio(2 * c.tn, 2 * c.tn + c.fn + c.fp);
  const bool both = (c.tp + c.fn) > 0 && (c.tn + c.fp) > 0;
  r.roc_auc = both ? roc_auc(errors, labels) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double roc_auc(std::span<const double> errors, std::span<const Label> labels) {
  if (errors.size() != labels.size()) throw std::invalid_argument("roc_auc: errors and labels differ in length");
  std::vector<std::size_t> order(errors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return errors[a] < errors[b]; });
  // Midranks over tied groups.
  double unsafe_rank_sum = 0.0;
  std::size_t n_unsafe = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && errors[order[j]] == errors[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == Label::unsafe) {
        unsafe_rank_sum += midrank;
        ++n_unsafe;
      }
    i = j;
  }
  const std::size_t n_safe = errors.size() - n_unsafe;
  if (n_unsafe == 0 || n_safe == 0) throw std::invalid_argument("roc_auc: both classes are required");
  const double nu = static_cast<double>(n_unsafe);
  return (unsafe_rank_sum - nu * (nu + 1.0) / 2.0) / (nu * static_cast<double>(n_safe));
}

FirmwareCorpus firmware_corpus(const ExperimentConfig& cfg, std::size_t index, std::uint64_t device_seed) {
  FirmwareCorpus d;
  d.profile = firmware_profile(cfg, index);
  d.safe = features_of(cfg, collect_traces(d.profile, device_seed, cfg.safe_traces));
  const auto variants = firmware_variants(cfg, d.profile);
  d.unsafe.resize(static_cast<Eigen::Index>(variants.size() * cfg.mutated_traces), d.safe.cols());
  Eigen::Index row = 0;
  for (const auto& v : variants) {
    const auto m = features_of(cfg, collect_traces(v, device_seed, cfg.mutated_traces));
    d.unsafe.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  return d;
}

FirmwareProfile firmware_profile(const ExperimentConfig& cfg, std::size_t index) {
  return generate_profile(derive_seed(cfg.seed, kFirmwareStream + index), cfg.layout);
}

std::vector<FirmwareProfile> firmware_variants(const ExperimentConfig& cfg, const FirmwareProfile& base) {
  std::vector<FirmwareProfile> out;
  for (std::size_t k = 0; k < cfg.mutations.size(); ++k)
    for (std::size_t s = 0; s < cfg.severities.size(); ++s)
      out.push_back(mutate_profile(base, cfg.mutations[k], cfg.severities[s],
                                   derive_seed(base.firmware_seed, 16 * static_cast<std::uint64_t>(cfg.mutations[k]) + s)));
  return out;
}

std::vector<SramTrace> collect_traces(const FirmwareProfile& profile, std::uint64_t device_seed, std::size_t count,
                                      std::uint64_t first_step) {
  std::vector<SramTrace> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) out.push_back(sample_trace(profile, device_seed, first_step + t));
  return out;
}

Eigen::MatrixXd features_of(const ExperimentConfig& cfg, std::span<const SramTrace> traces) {
  const auto used = cfg.effective_used_bytes();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traces.size()), static_cast<Eigen::Index>(used / cfg.block_width));
  for (std::size_t i = 0; i < traces.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = aggregate_bytes<double>(traces[i].bytes, cfg.block_width, used).transpose();
  return m;
}

Dataset make_dataset(const ExperimentConfig& cfg, const Eigen::MatrixXd& safe, const Eigen::MatrixXd& unsafe,
                     std::uint64_t stream) {
  auto rows_of = [](const Eigen::MatrixXd& m, Label label) {
    std::vector<AggregatedTrace> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out[static_cast<std::size_t>(r)].features = m.row(r).transpose();
      out[static_cast<std::size_t>(r)].label = label;
    }
    return out;
  };
  const auto s = rows_of(safe, Label::safe);
  const auto u = rows_of(unsafe, Label::unsafe);
  return build_dataset(s, u, cfg.split, cfg.noise_factor, derive_seed(cfg.seed, kDatasetStream + stream));
}

AutoencoderModel train_model(const ExperimentConfig& cfg, const Dataset& ds, std::uint64_t stream) {
  const auto seed = derive_seed(cfg.seed, kTrainStream + stream);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const auto initial = init_model<float>(cfg.arch, ds.feature_count(), seed);
  return train(initial, ds, tc);
}

CalibrationResult calibrate_detector(const QuantizedModel& qmodel, const Dataset& ds) {
  const auto errors = to_vector(q_reconstruction_errors(qmodel, ds.val));
  return calibrate(errors);
}

Detector build_detector(const ExperimentConfig& cfg, const Eigen::MatrixXd& safe, const Eigen::MatrixXd& unsafe,
                        std::uint64_t stream) {
  Detector d;
  d.dataset = make_dataset(cfg, safe, unsafe, stream);
  d.model = train_model(cfg, d.dataset, stream);
  d.qmodel = quantize_model(d.model, d.dataset.train);
  d.calibration = calibrate_detector(d.qmodel, d.dataset);
  return d;
}

double decision_agreement(const AutoencoderModel& model, const QuantizedModel& qmodel, const Eigen::MatrixXd& rows,
                          double t_opt) {
  if (rows.rows() == 0) throw std::invalid_argument("decision_agreement: no rows");
  const auto fe = reconstruction_errors(model, rows);
  const auto qe = q_reconstruction_errors(qmodel, rows);
  std::size_t same = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) same += (fe[i] >= t_opt) == (qe[i] >= t_opt);
  return ratio(same, static_cast<std::size_t>(rows.rows()));
}

Averages average_of(std::span<const FirmwareResult> results, bool quantized) {
  Averages a;
  if (results.empty()) return a;
  for (const auto& r : results) {
    const auto& m = quantized ? r.metrics : r.float_metrics;
    a.accuracy += m.accuracy;
    a.precision += m.precision;
    a.tpr += m.tpr;
    a.tnr += m.tnr;
    a.fpr += m.fpr;
    a.fnr += m.fnr;
    a.f1 += m.f1;
    a.f1_safe += m.f1_safe;
    a.roc_auc += m.roc_auc;
  }
  const double n = static_cast<double>(results.size());
  for (double* v : {&a.accuracy, &a.precision, &a.tpr, &a.tnr, &a.fpr, &a.fnr, &a.f1, &a.f1_safe, &a.roc_auc}) *v /= n;
  return a;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_fw = cfg.firmware_count;
  std::vector<FirmwareCorpus> data(n_fw);
  parallel_for(n_fw, cfg.threads, [&](std::size_t i) { data[i] = firmware_corpus(cfg, i, cfg.device_seed); });

  ExperimentReport report;
  report.config_digest = cfg.digest();
  report.seed = cfg.seed;
  report.firmware.resize(n_fw);

  parallel_for(n_fw, cfg.threads, [&](std::size_t f) {
    const auto det = build_detector(cfg, data[f].safe, data[f].unsafe, f);
    FirmwareResult r;
    r.firmware_id = data[f].profile.firmware_id();
    r.calibration = det.calibration;
    r.size = size_report(det.model, det.qmodel);
    r.agreement_val = decision_agreement(det.model, det.qmodel, det.dataset.val, det.calibration.t_opt);

    std::vector<double> q_err, f_err;
    std::vector<Label> labels;
    auto add = [&](const Eigen::MatrixXd& rows, Label label) {
      if (rows.rows() == 0) return;
      append_errors(q_err, q_reconstruction_errors(det.qmodel, rows));
      append_errors(f_err, reconstruction_errors(det.model, rows));
      labels.insert(labels.end(), static_cast<std::size_t>(rows.rows()), label);
    };
    add(det.dataset.test_safe, Label::safe);
    r.negatives = static_cast<std::size_t>(det.dataset.test_safe.rows());
    r.safe_errors = q_err;
    add(det.dataset.test_unsafe, Label::unsafe);
    r.own_mutation_positives = static_cast<std::size_t>(det.dataset.test_unsafe.rows());
    for (std::size_t g = 0; g < n_fw; ++g) {
      if (g == f) continue;
      add(data[g].safe, Label::unsafe);
      add(data[g].unsafe, Label::unsafe);
    }
    r.positives = labels.size() - r.negatives;
    r.unsafe_errors.assign(q_err.begin() + static_cast<std::ptrdiff_t>(r.negatives), q_err.end());
    r.metrics = score(q_err, labels, det.calibration.t_opt);
    r.float_metrics = score(f_err, labels, det.calibration.t_opt);
    r.model = det.model;
    r.qmodel = det.qmodel;
    report.firmware[f] = std::move(r);
  });

  report.average = average_of(report.firmware, true);
  report.float_average = average_of(report.firmware, false);
  return report;
}

std::string ExperimentReport::text() const {
  std::string out;
  out += "# config_digest=" + config_digest + " seed=" + std::to_string(seed) + "\n";
  out += "firmware: " + std::to_string(firmware.size()) + "\n\n";
  for (const auto& r : firmware) {
    const auto& m = r.metrics;
    out += r.firmware_id + "\n";
    out += "  " + format_calibration(r.calibration) + "\n";
    out += "  negatives " + std::to_string(r.negatives) + "  positives " + std::to_string(r.positives) +
           " (own mutations " + std::to_string(r.own_mutation_positives) + ")\n";
    out += "  TP " + std::to_string(m.counts.tp) + "  FP " + std::to_string(m.counts.fp) + "  TN " +
           std::to_string(m.counts.tn) + "  FN " + std::to_string(m.counts.fn) + "\n";
    out += "  accuracy " + fixed(m.accuracy) + "  precision " + fixed(m.precision) + "  tpr " + fixed(m.tpr) +
           "  tnr " + fixed(m.tnr) + "  f1 " + fixed(m.f1) + "  f1_safe " + fixed(m.f1_safe) + "  auc " +
           fixed(m.roc_auc) + "\n";
    out += "  float model: accuracy " + fixed(r.float_metrics.accuracy) + "  tnr " + fixed(r.float_metrics.tnr) +
           "  tpr " + fixed(r.float_metrics.tpr) + "  validation agreement " + fixed(r.agreement_val) + "\n";
    out += "  size: float " + std::to_string(r.size.float_bytes) + " B  int8 " + std::to_string(r.size.quant_bytes) +
           " B  payload factor " + fixed(r.size.payload_factor, 3) + "  peak activations " +
           std::to_string(r.size.peak_activation_bytes) + " B\n\n";
  }
  auto avg = [&](const char* name, const Averages& a) {
    out += std::string(name) + ": accuracy " + fixed(a.accuracy) + "  precision " + fixed(a.precision) + "  tpr " +
           fixed(a.tpr) + "  tnr " + fixed(a.tnr) + "  fpr " + fixed(a.fpr) + "  fnr " + fixed(a.fnr) + "  f1 " +
           fixed(a.f1) + "  f1_safe " + fixed(a.f1_safe) + "  auc " + fixed(a.roc_auc) + "\n";
  };
  avg("average (int8)", average);
  avg("average (float)", float_average);
  return out;
}

std::string ExperimentReport::table_csv() const {
  std::string out = "# config_digest=" + config_digest + " seed=" + std::to_string(seed) + "\n";
  out += "firmware,tnr_target,float_kb,int8_kb,arena_kb,A,P,TPR,TNR,FPR,FNR,F1,F1_safe,AUC\n";
  for (const auto& r : firmware) {
    const auto& m = r.metrics;
    out += r.firmware_id + "," + fixed(r.calibration.tnr_target, 2) + "," + fixed(r.size.float_bytes / 1024.0, 2) +
           "," + fixed(r.size.quant_bytes / 1024.0, 2) + "," + fixed(r.size.peak_activation_bytes / 1024.0, 2) + "," +
           fixed(m.accuracy) + "," + fixed(m.precision) + "," + fixed(m.tpr) + "," + fixed(m.tnr) + "," +
           fixed(m.fpr) + "," + fixed(m.fnr) + "," + fixed(m.f1) + "," + fixed(m.f1_safe) + "," +
           fixed(m.roc_auc) + "\n";
  }
  const auto& a = average;
  out += "average,,,,," + fixed(a.accuracy) + "," + fixed(a.precision) + "," + fixed(a.tpr) + "," + fixed(a.tnr) +
         "," + fixed(a.fpr) + "," + fixed(a.fnr) + "," + fixed(a.f1) + "," + fixed(a.f1_safe) + "," +
         fixed(a.roc_auc) + "\n";
  return out;
}

std::string ExperimentReport::histogram_csv(std::size_t bins) const {
  std::string out = "# config_digest=" + config_digest + " seed=" + std::to_string(seed) + "\n";
  out += "firmware,class,log10_lo,log10_hi,count,t_opt\n";
  constexpr double kFloor = 1e-12;
  for (const auto& r : firmware) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* v : {&r.safe_errors, &r.unsafe_errors})
      for (double e : *v) {
        lo = std::min(lo, std::log10(std::max(e, kFloor)));
        hi = std::max(hi, std::log10(std::max(e, kFloor)));
      }
    if (!(hi > lo)) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    auto emit = [&](const std::vector<double>& values, const char* cls) {
      std::vector<std::size_t> counts(bins, 0);
      for (double e : values) {
        auto b = static_cast<std::size_t>((std::log10(std::max(e, kFloor)) - lo) / width);
        counts[std::min(b, bins - 1)]++;
      }
      for (std::size_t b = 0; b < bins; ++b)
        out += r.firmware_id + "," + cls + "," + fixed(lo + width * b, 6) + "," + fixed(lo + width * (b + 1), 6) +
               "," + std::to_string(counts[b]) + "," + sci(r.calibration.t_opt) + "\n";
    };
    emit(r.safe_errors, "safe");
    emit(r.unsafe_errors, "unsafe");
  }
  return out;
}

void write_experiment(const ExperimentConfig& cfg, const ExperimentReport& report, const std::filesystem::path& dir,
                      bool with_models) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  put(dir / "report.txt", report.text());
  put(dir / "table.csv", report.table_csv());
  put(dir / "histogram.csv", report.histogram_csv());
  std::filesystem::create_directories(dir / "calibration");
  std::string cal = "# config_digest=" + report.config_digest + " seed=" + std::to_string(report.seed) + "\n";
  for (const auto& r : report.firmware) cal += r.firmware_id + " " + format_calibration(r.calibration) + "\n";
  put(dir / "calibration" / "calibration.txt", cal);
  if (!with_models) return;
  std::filesystem::create_directories(dir / "models");
  for (std::size_t f = 0; f < report.firmware.size(); ++f) {
    const auto& r = report.firmware[f];
    ContainerMeta meta{r.calibration, cfg.stamp()};
    save_model(dir / "models" / ("fw" + std::to_string(f) + ".lam1"), r.model, meta);
    save_qmodel(dir / "models" / ("fw" + std::to_string(f) + ".q.lam1"), r.qmodel, meta);
  }
}

TwinResult run_twin(const ExperimentConfig& cfg, std::size_t firmware_index) {
  cfg.validate();
  if (firmware_index >= cfg.firmware_count) throw ConfigError("twin: firmware index out of range");
  const auto a = firmware_corpus(cfg, firmware_index, cfg.device_seed);
  const auto det = build_detector(cfg, a.safe, a.unsafe, firmware_index);

  // Device B: same firmware, same schedule, different silicon.
  const auto b = firmware_corpus(cfg, firmware_index, cfg.twin_device_seed);
  Eigen::MatrixXd negatives(static_cast<Eigen::Index>(det.dataset.meta.test_rows.size()), b.safe.cols());
  for (std::size_t i = 0; i < det.dataset.meta.test_rows.size(); ++i)
    negatives.row(static_cast<Eigen::Index>(i)) = b.safe.row(static_cast<Eigen::Index>(det.dataset.meta.test_rows[i]));

  std::vector<double> errors;
  std::vector<Label> labels;
  auto add = [&](const Eigen::MatrixXd& rows, Label label) {
    append_errors(errors, q_reconstruction_errors(det.qmodel, rows));
    labels.insert(labels.end(), static_cast<std::size_t>(rows.rows()), label);
  };
  add(negatives, Label::safe);
  add(b.unsafe, Label::unsafe);
  for (std::size_t g = 0; g < cfg.firmware_count; ++g) {
    if (g == firmware_index) continue;
    const auto other = firmware_corpus(cfg, g, cfg.twin_device_seed);
    add(other.safe, Label::unsafe);
  }
  TwinResult r;
  r.firmware_id = a.profile.firmware_id();
  r.calibration = det.calibration;
  r.metrics = score(errors, labels, det.calibration.t_opt);
  r.negatives = static_cast<std::size_t>(negatives.rows());
  r.positives = labels.size() - r.negatives;
  return r;
}

}  // namespace liteatt
