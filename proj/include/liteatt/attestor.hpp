#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string_view>

#include "liteatt/bytes.hpp"
#include "liteatt/quantize.hpp"
#include "liteatt/secure_channel.hpp"
#include "liteatt/trace.hpp"

namespace liteatt {

enum class Verdict : std::uint8_t { safe = 0, unsafe = 1 };

enum class AppSaKind : std::uint8_t {
  AbortNoSenderId,
  AbortTrivialInput,
  AbortInconsistentId,
  AbortExpiredReport,
  SenderUnsafe,
  Completed,
};

std::string_view to_string(AppSaKind kind);

/// Line of the attestation pseudo-code that produces each outcome.
/// Completed maps to 20 without a new report and 29 with one.
int algorithm_line(AppSaKind kind, bool with_report);

inline constexpr std::size_t kReportPayloadBytes = 4 + 1 + 8 + 16;
// IV + two AES blocks.
inline constexpr std::size_t kReportCipherBytes = 48;
inline constexpr std::int64_t kDefaultExpiryMs = 5000;

/// ID (4) | gamma (1) | t, big-endian ms (8) | N (16).
struct ReportPayload {
  DeviceId id{};
  std::uint8_t gamma = 0;
  std::int64_t t_ms = 0;
  Nonce nonce{};

  Bytes encode() const;
  static std::optional<ReportPayload> decode(ByteView bytes);
};

struct AttestationReport {
  Bytes ciphertext;
};

struct AppSaOutcome {
  AppSaKind kind = AppSaKind::Completed;
  std::optional<AttestationReport> report;
  std::optional<Verdict> delta_s;
};

struct ReportCheck {
  std::optional<AppSaKind> abort;
  Verdict gamma = Verdict::safe;
  std::int64_t t_ms = 0;
};

struct SelfAttestation {
  Verdict gamma = Verdict::safe;
  double mse = 0.0;
};

using SramView = std::function<SramTrace()>;

struct AttestorSettings {
  std::int64_t epsilon_ms = kDefaultExpiryMs;
  std::size_t block_width = kDefaultBlockWidth;
  // Bytes of the SRAM image fed to the model; 0 means the model input width
  // times the block width.
  std::size_t used_bytes = 0;
};

/// Isolated attestation context of one device. All state changes go
/// through the App_SA entry points below.
class AttestationContext {
 public:
  AttestationContext(DeviceId self_id, QuantizedModel qmodel, double t_opt, std::map<DeviceId, Key128> peer_keys,
                     const Clock& clock, Prng prng, SramView sram_view, AttestorSettings settings = {});

  AppSaOutcome app_sa(const std::optional<DeviceId>& id_s, const std::optional<ByteView>& r_s, bool a_self);

  AttestationReport encode_report(const DeviceId& peer, Verdict gamma);
  ReportCheck decode_validate_report(const DeviceId& id_s, ByteView r_s) const;
  SelfAttestation self_attest();

  const DeviceId& self_id() const { return self_id_; }
  double t_opt() const { return t_opt_; }
  std::int64_t epsilon_ms() const { return settings_.epsilon_ms; }

  // Instrumentation.
  std::size_t inference_count() const { return inference_count_; }
  std::size_t encrypt_count() const { return encrypt_count_; }
  std::size_t nonces_issued() const { return nonces_.size(); }

 private:
  const Key128& key_for(const DeviceId& peer) const;

  DeviceId self_id_;
  QuantizedModel qmodel_;
  double t_opt_;
  std::map<DeviceId, Key128> peer_keys_;
  const Clock* clock_;
  Prng prng_;
  SramView sram_view_;
  AttestorSettings settings_;
  std::set<Nonce> nonces_;
  std::size_t inference_count_ = 0;
  std::size_t encrypt_count_ = 0;
};

/// Inner keys a device holds towards each of `peers`.
std::map<DeviceId, Key128> inner_keys_for(const KeyStore& keys, const DeviceId& self,
                                          std::span<const DeviceId> peers);

/// Simulated host whose SRAM is read on demand; each read advances the
/// sample index, wrapping after `period` steps when period > 0.
struct SimHost {
  FirmwareProfile profile;
  std::uint64_t device_seed = 0;
  std::uint64_t time_step = 0;
  std::uint64_t period = 0;

  SramTrace read() {
    const std::uint64_t t = time_step++;
    return sample_trace(profile, device_seed, period > 0 ? t % period : t);
  }
};

inline constexpr double kNeverUnsafe = std::numeric_limits<double>::infinity();

}  // namespace liteatt
