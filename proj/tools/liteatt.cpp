// liteatt: trace generation, training, quantization, calibration,
// attestation and handshake simulation from one binary.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liteatt/attestor.hpp"
#include "liteatt/config.hpp"
#include "liteatt/error.hpp"
#include "liteatt/evalkit.hpp"
#include "liteatt/handshake.hpp"
#include "liteatt/model_io.hpp"

namespace fs = std::filesystem;
using namespace liteatt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  std::optional<std::size_t> threads;
  std::size_t firmware_index = 0;
};

std::string default_out() {
  if (const char* env = std::getenv("LITEATT_OUT"); env && *env) return env;
  return "liteatt-out";
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  cfg.out = default_out();
  if (c.config != "default" && !c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("config: cannot open " + c.config);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    apply_config_text(cfg, text);
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

void finish(const ExperimentConfig& cfg, const Common& c) {
  cfg.validate();
  if (c.firmware_index >= cfg.firmware_count)
    throw ConfigError("--firmware-index: " + std::to_string(c.firmware_index) + " is out of range");
}

std::string stamp_line(const ExperimentConfig& cfg) {
  return "# config_digest=" + cfg.digest() + " seed=" + std::to_string(cfg.seed) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string fw_name(std::size_t i) { return "fw" + std::to_string(i); }

// Safe and unsafe feature rows, generated or imported from a trace CSV.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> corpus(const ExperimentConfig& cfg, std::size_t index,
                                                   const std::string& traces_csv) {
  if (traces_csv.empty()) {
    auto c = firmware_corpus(cfg, index, cfg.device_seed);
    return {std::move(c.safe), std::move(c.unsafe)};
  }
  const auto traces = import_traces(traces_csv);
  std::vector<SramTrace> safe, unsafe;
  for (const auto& t : traces) {
    if (t.bytes.size() < cfg.effective_used_bytes())
      throw FormatError(traces_csv + ": trace shorter than the used byte count");
    (t.label == Label::safe ? safe : unsafe).push_back(t);
  }
  if (safe.empty()) throw FormatError(traces_csv + ": no safe traces");
  return {features_of(cfg, safe), features_of(cfg, unsafe)};
}

fs::path pick(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

struct Deployed {
  QuantizedModel qmodel;
  CalibrationResult calibration;
};

Deployed deployed_model(const ExperimentConfig& cfg, std::size_t index, const std::string& model_path) {
  if (model_path.empty()) {
    const auto c = firmware_corpus(cfg, index, cfg.device_seed);
    auto det = build_detector(cfg, c.safe, c.unsafe, index);
    return {std::move(det.qmodel), det.calibration};
  }
  auto loaded = load_container(model_path);
  auto* q = std::get_if<QuantizedModel>(&loaded.model);
  if (!q) throw ConfigError("--model: " + model_path + " is not a quantized container");
  if (!loaded.meta.calibration) throw ConfigError("--model: " + model_path + " has no calibration record");
  return {std::move(*q), *loaded.meta.calibration};
}

FirmwareProfile host_firmware(const ExperimentConfig& cfg, std::size_t index, const std::string& mutate,
                              double severity) {
  auto profile = firmware_profile(cfg, index);
  if (mutate.empty()) return profile;
  MutationKind kind;
  try {
    kind = parse_mutation_kind(mutate);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--mutate: ") + e.what());
  }
  return mutate_profile(profile, kind, severity, derive_seed(profile.firmware_seed, 0xa77ac4));
}

AttestorSettings settings_of(const ExperimentConfig& cfg) {
  AttestorSettings s;
  s.epsilon_ms = cfg.epsilon_ms;
  s.block_width = cfg.block_width;
  s.used_bytes = cfg.effective_used_bytes();
  return s;
}

const DeviceId kInitiatorId = device_id_from_u32(1);
const DeviceId kResponderId = device_id_from_u32(2);

// ---------------------------------------------------------------------------

int cmd_gen(const Common& c, std::optional<std::size_t> firmware, std::optional<std::size_t> traces,
            std::optional<std::size_t> mutated) {
  auto cfg = resolve(c);
  if (firmware) cfg.firmware_count = *firmware;
  if (traces) cfg.safe_traces = *traces;
  if (mutated) cfg.mutated_traces = *mutated;
  finish(cfg, c);
  const fs::path dir = cfg.out / "gen";
  const auto stamp = cfg.stamp();
  for (std::size_t i = 0; i < cfg.firmware_count; ++i) {
    const auto profile = firmware_profile(cfg, i);
    write_text(dir / (fw_name(i) + ".profile.json"), profile_to_text(profile, stamp));
    const auto safe = collect_traces(profile, cfg.device_seed, cfg.safe_traces);
    export_traces(dir / (fw_name(i) + ".safe.csv"), safe, stamp);
    std::vector<SramTrace> unsafe;
    for (const auto& v : firmware_variants(cfg, profile)) {
      auto t = collect_traces(v, cfg.device_seed, cfg.mutated_traces);
      unsafe.insert(unsafe.end(), t.begin(), t.end());
    }
    export_traces(dir / (fw_name(i) + ".unsafe.csv"), unsafe, stamp);
    std::vector<AggregatedTrace> rows;
    for (const auto& t : safe) rows.push_back(aggregate(t, cfg.block_width, cfg.effective_used_bytes()));
    export_aggregated(dir / (fw_name(i) + ".agg.csv"), rows, stamp);
    std::cout << profile.firmware_id() << ": " << safe.size() << " safe, " << unsafe.size() << " unsafe traces\n";
  }
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& traces_csv) {
  auto cfg = resolve(c);
  finish(cfg, c);
  const auto [safe, unsafe] = corpus(cfg, c.firmware_index, traces_csv);
  const auto ds = make_dataset(cfg, safe, unsafe, c.firmware_index);
  const auto model = train_model(cfg, ds, c.firmware_index);
  const fs::path path = cfg.out / "train" / (fw_name(c.firmware_index) + ".lam1");
  fs::create_directories(path.parent_path());
  save_model(path, model, ContainerMeta{std::nullopt, cfg.stamp()});
  std::printf("arch %s  input %ld  final train mse %.6e\n", std::string(to_string(model.arch())).c_str(),
              static_cast<long>(model.input_dim()), model.train_meta().final_train_mse);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_quantize(const Common& c, const std::string& model_flag, const std::string& traces_csv) {
  auto cfg = resolve(c);
  finish(cfg, c);
  const auto src = pick(model_flag, cfg.out / "train" / (fw_name(c.firmware_index) + ".lam1"));
  auto loaded = load_container(src);
  const auto* model = std::get_if<AutoencoderModel>(&loaded.model);
  if (!model) throw ConfigError("--model: " + src.string() + " is not a float container");
  const auto [safe, unsafe] = corpus(cfg, c.firmware_index, traces_csv);
  if (safe.cols() != model->input_dim()) throw ConfigError("--model: input width does not match the features");
  const auto ds = make_dataset(cfg, safe, unsafe, c.firmware_index);
  const auto qmodel = quantize_model(*model, ds.train);
  const fs::path path = cfg.out / "quantize" / (fw_name(c.firmware_index) + ".q.lam1");
  fs::create_directories(path.parent_path());
  save_qmodel(path, qmodel, ContainerMeta{std::nullopt, cfg.stamp()});
  const auto s = size_report(*model, qmodel);
  std::printf("float %zu B  int8 %zu B  reduction %.3f  payload %zu -> %zu B  payload factor %.3f  "
              "peak activations %zu B\n",
              s.float_bytes, s.quant_bytes, s.reduction_factor, s.float_payload, s.quant_payload, s.payload_factor,
              s.peak_activation_bytes);
  std::printf("validation agreement %.4f\n",
              decision_agreement(*model, qmodel, ds.val, calibrate_detector(qmodel, ds).t_opt));
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& model_flag, const std::string& traces_csv) {
  auto cfg = resolve(c);
  finish(cfg, c);
  const auto src = pick(model_flag, cfg.out / "quantize" / (fw_name(c.firmware_index) + ".q.lam1"));
  auto loaded = load_container(src);
  const auto* qmodel = std::get_if<QuantizedModel>(&loaded.model);
  if (!qmodel) throw ConfigError("--model: " + src.string() + " is not a quantized container");
  const auto [safe, unsafe] = corpus(cfg, c.firmware_index, traces_csv);
  if (safe.cols() != qmodel->input_dim) throw ConfigError("--model: input width does not match the features");
  const auto ds = make_dataset(cfg, safe, unsafe, c.firmware_index);
  const auto cal = calibrate_detector(*qmodel, ds);
  const fs::path dir = cfg.out / "calibrate";
  fs::create_directories(dir);
  save_qmodel(dir / (fw_name(c.firmware_index) + ".q.lam1"), *qmodel, ContainerMeta{cal, cfg.stamp()});
  const auto record = format_calibration(cal);
  write_text(dir / (fw_name(c.firmware_index) + ".calibration.txt"), stamp_line(cfg) + record + "\n");
  std::cout << record << "\n";
  std::cout << "wrote " << (dir / (fw_name(c.firmware_index) + ".q.lam1")).string() << "\n";
  return 0;
}

struct AttestFlags {
  std::string model;
  std::string mutate;
  double severity = 1.0;
  std::string report_hex;
  bool peer_report = false;
  std::string peer_mutate;
  std::int64_t delay_ms = 0;
  int a_self = 1;
  bool no_sender = false;
  std::uint64_t time_step = 0;
};

int cmd_attest(const Common& c, const AttestFlags& f) {
  auto cfg = resolve(c);
  finish(cfg, c);
  if (!f.report_hex.empty() && f.peer_report) throw ConfigError("--report and --peer-report are exclusive");
  const auto det = deployed_model(cfg, c.firmware_index, f.model);
  SimNodeSpec self{kInitiatorId, host_firmware(cfg, c.firmware_index, f.mutate, f.severity), cfg.device_seed,
                   cfg.safe_traces + f.time_step, 0};
  SimNodeSpec peer{kResponderId, host_firmware(cfg, c.firmware_index, f.peer_mutate, f.severity),
                   cfg.twin_device_seed, cfg.safe_traces + f.time_step, 0};
  auto pair = make_sim_pair(det.qmodel, det.calibration.t_opt, self, peer, cfg.seed, settings_of(cfg));

  std::optional<Bytes> r_s;
  if (!f.report_hex.empty()) r_s = from_hex(f.report_hex);
  if (f.peer_report) {
    const auto o = pair->responder->attestor().app_sa(kInitiatorId, std::nullopt, true);
    if (!o.report) throw std::runtime_error("peer produced no report");
    r_s = o.report->ciphertext;
  }
  pair->clock.advance(f.delay_ms);

  auto& ctx = pair->initiator->attestor();
  std::optional<DeviceId> id_s;
  if (!f.no_sender) id_s = kResponderId;
  std::optional<ByteView> view;
  if (r_s) view = ByteView(*r_s);
  const auto o = ctx.app_sa(id_s, view, f.a_self != 0);

  std::string text = "outcome " + std::string(to_string(o.kind)) + "\n";
  text += "line " + std::to_string(algorithm_line(o.kind, o.report.has_value())) + "\n";
  text += "delta_s " + std::string(o.delta_s ? (*o.delta_s == Verdict::safe ? "safe" : "unsafe") : "none") + "\n";
  text += "report " + (o.report ? to_hex(o.report->ciphertext) : std::string("none")) + "\n";
  if (o.report) {
    // The peer's view of the fresh report.
    const auto check = pair->responder->attestor().decode_validate_report(kInitiatorId, o.report->ciphertext);
    text += "gamma " + std::string(check.gamma == Verdict::safe ? "safe" : "unsafe") + "\n";
  }
  text += "inferences " + std::to_string(ctx.inference_count()) + "  encryptions " +
          std::to_string(ctx.encrypt_count()) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "t_opt %.9g\n", det.calibration.t_opt);
  text += buf;
  std::cout << text;
  write_text(cfg.out / "attest" / "outcome.txt", stamp_line(cfg) + text);
  return 0;
}

struct HandshakeFlags {
  std::string model;
  std::string adversary;
  std::optional<std::size_t> sessions;
  std::string mutate;
  double severity = 1.0;
};

struct HandshakeRun {
  std::vector<TranscriptEntry> transcript;
  std::string summary;
  std::size_t wins = 0;
};

HandshakeRun run_handshakes(const ExperimentConfig& cfg, std::size_t index, const Deployed& det,
                            const FirmwareProfile& initiator_fw, const std::optional<AdversaryScript>& script,
                            std::size_t sessions) {
  const auto responder_fw = firmware_profile(cfg, index);
  SimNodeSpec ispec{kInitiatorId, initiator_fw, cfg.device_seed, cfg.safe_traces, 0};
  SimNodeSpec rspec{kResponderId, responder_fw, cfg.twin_device_seed, cfg.safe_traces, 0};
  auto pair = make_sim_pair(det.qmodel, det.calibration.t_opt, ispec, rspec, cfg.seed, settings_of(cfg));

  HandshakeRun run;
  std::size_t completed = 0;
  std::vector<HandshakeMessage> recorded;
  std::uint64_t next_id = 0;
  auto one = [&](const AdversaryScript& adv) {
    SessionOptions opt;
    opt.session_id = next_id++;
    opt.latency_ms = cfg.latency_ms;
    const auto out = run_session(*pair->initiator, *pair->responder, pair->clock, adv, opt);
    run.transcript.insert(run.transcript.end(), out.transcript.begin(), out.transcript.end());
    run.summary += "session " + std::to_string(opt.session_id) + ": " + out.verdict() + " (initiator " +
                   std::string(to_string(out.initiator.phase)) + "/" + std::string(to_string(out.initiator.reason)) +
                   ", responder " + std::string(to_string(out.responder.phase)) + "/" +
                   std::string(to_string(out.responder.reason)) + ")\n";
    return out;
  };
  if (script) {
    // Session 0 is observed passively and becomes the replay library.
    recorded = one(AdversaryScript{}).delivered;
    auto adv = *script;
    adv.recorded = recorded;
    for (std::size_t s = 0; s < sessions; ++s) {
      const auto out = one(adv);
      completed += out.completed;
      run.wins += out.adversary_win;
    }
  } else {
    for (std::size_t s = 0; s < sessions; ++s) completed += one(AdversaryScript{}).completed;
  }
  run.summary += "sessions " + std::to_string(sessions) + "  completed " + std::to_string(completed) +
                 "  adversary wins " + std::to_string(run.wins) + "\n";
  run.summary += std::string("verdict ") + (run.wins == 0 ? "no-win" : "win") + "\n";
  return run;
}

int cmd_handshake(const Common& c, const HandshakeFlags& f) {
  auto cfg = resolve(c);
  if (!f.adversary.empty()) cfg.adversary = f.adversary;
  if (f.sessions) cfg.sessions = *f.sessions;
  finish(cfg, c);
  std::optional<AdversaryScript> script;
  if (!cfg.adversary.empty()) {
    std::ifstream in(cfg.adversary);
    if (!in) throw ConfigError("--adversary: cannot open " + cfg.adversary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      script = AdversaryScript::parse(text);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
  }
  const auto det = deployed_model(cfg, c.firmware_index, f.model);
  const auto run = run_handshakes(cfg, c.firmware_index, det,
                                  host_firmware(cfg, c.firmware_index, f.mutate, f.severity), script, cfg.sessions);
  const fs::path dir = cfg.out / "handshake";
  write_text(dir / "transcript.jsonl", transcript_jsonl(run.transcript, cfg.stamp()));
  write_text(dir / "verdict.txt", stamp_line(cfg) + run.summary);
  std::cout << run.summary;
  return 0;
}

int cmd_eval(const Common& c) {
  auto cfg = resolve(c);
  finish(cfg, c);
  const fs::path dir = cfg.out / "eval";
  const auto report = run_experiment(cfg);
  write_experiment(cfg, report, dir);
  const auto twin = run_twin(cfg, c.firmware_index);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "twin %s: negatives %zu positives %zu  tnr %.4f  tpr %.4f  accuracy %.4f  auc %.4f\n",
                twin.firmware_id.c_str(), twin.negatives, twin.positives, twin.metrics.tnr, twin.metrics.tpr,
                twin.metrics.accuracy, twin.metrics.roc_auc);
  write_text(dir / "twin.txt", stamp_line(cfg) + format_calibration(twin.calibration) + "\n" + buf);

  const auto& fw = report.firmware[c.firmware_index];
  const Deployed det{fw.qmodel, fw.calibration};
  const auto hs = run_handshakes(cfg, c.firmware_index, det, firmware_profile(cfg, c.firmware_index), std::nullopt, 1);
  write_text(dir / "transcript.jsonl", transcript_jsonl(hs.transcript, cfg.stamp()));

  std::cout << report.text() << "\n" << buf << hs.summary;
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liteatt: SRAM self-attestation lab"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config, "Config file, or 'default'")->capture_default_str();
  app.add_option("--seed", common.seed, "Run seed");
  app.add_option("--out", common.out, "Output root (default: $LITEATT_OUT or config 'out')");
  app.add_option("--set", common.sets, "Override a config key, key=value; repeatable");
  app.add_option("--threads", common.threads, "Worker threads for eval");
  app.add_option("--firmware-index", common.firmware_index, "Firmware to act on")->capture_default_str();

  int rc = 0;

  auto* gen = app.add_subcommand("gen", "Generate firmware profiles and SRAM trace CSVs");
  std::optional<std::size_t> gen_fw, gen_traces, gen_mutated;
  gen->add_option("--firmware", gen_fw, "Number of firmware profiles");
  gen->add_option("--traces", gen_traces, "Safe traces per firmware");
  gen->add_option("--mutated", gen_mutated, "Traces per mutated variant");
  gen->callback([&] { rc = cmd_gen(common, gen_fw, gen_traces, gen_mutated); });

  std::string traces_csv;
  auto* train = app.add_subcommand("train", "Train the float autoencoder");
  train->add_option("--traces", traces_csv, "Trace CSV to train on instead of generated traces");
  train->callback([&] { rc = cmd_train(common, traces_csv); });

  std::string model_path;
  auto* quant = app.add_subcommand("quantize", "Convert a float model to int8");
  quant->add_option("--model", model_path, "Float container (default: <out>/train/fw<i>.lam1)");
  quant->add_option("--traces", traces_csv, "Trace CSV used for calibration ranges");
  quant->callback([&] { rc = cmd_quantize(common, model_path, traces_csv); });

  auto* calib = app.add_subcommand("calibrate", "Pick the detection threshold on validation errors");
  calib->add_option("--model", model_path, "Quantized container (default: <out>/quantize/fw<i>.q.lam1)");
  calib->add_option("--traces", traces_csv, "Trace CSV to calibrate on");
  calib->callback([&] { rc = cmd_calibrate(common, model_path, traces_csv); });

  AttestFlags af;
  auto* attest = app.add_subcommand("attest", "Run one App_SA invocation on a simulated device");
  attest->add_option("--model", af.model, "Calibrated quantized container (default: build in-process)");
  attest->add_option("--mutate", af.mutate, "Mutation applied to this device's firmware");
  attest->add_option("--severity", af.severity, "Mutation severity")->capture_default_str();
  attest->add_option("--report", af.report_hex, "Peer report r_s, hex");
  attest->add_flag("--peer-report", af.peer_report, "Let the simulated peer produce r_s");
  attest->add_option("--peer-mutate", af.peer_mutate, "Mutation applied to the peer's firmware");
  attest->add_option("--delay", af.delay_ms, "Clock advance before evaluation, ms")->capture_default_str();
  attest->add_option("--a-self", af.a_self, "Self-attest flag, 0 or 1")->capture_default_str()->check(CLI::Range(0, 1));
  attest->add_flag("--no-sender", af.no_sender, "Omit the sender id");
  attest->add_option("--time-step", af.time_step, "Offset of the sampled SRAM image")->capture_default_str();
  attest->callback([&] { rc = cmd_attest(common, af); });

  HandshakeFlags hf;
  auto* hs = app.add_subcommand("handshake", "Simulate mutual-attestation sessions");
  hs->add_option("--model", hf.model, "Calibrated quantized container (default: build in-process)");
  hs->add_option("--adversary", hf.adversary, "Adversary script");
  hs->add_option("--sessions", hf.sessions, "Number of sessions");
  hs->add_option("--mutate", hf.mutate, "Mutation applied to the initiator's firmware");
  hs->add_option("--severity", hf.severity, "Mutation severity")->capture_default_str();
  hs->callback([&] { rc = cmd_handshake(common, hf); });

  auto* ev = app.add_subcommand("eval", "Run the full evaluation campaign");
  ev->callback([&] { rc = cmd_eval(common); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return rc;
}
