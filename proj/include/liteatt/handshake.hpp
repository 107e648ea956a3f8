#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "liteatt/attestor.hpp"
#include "liteatt/bytes.hpp"
#include "liteatt/secure_channel.hpp"

namespace liteatt {

// Wire layouts (plaintext before Enc under the outer key K):
//   m1 = ID_i | N1 | R_i        (4 + 16 + 48 bytes)
//   m2 = ID_j | N1 | N2 | R_j   (4 + 16 + 16 + 48 bytes)
//   m3 = ID_i | N2 | N3         (4 + 16 + 16 bytes)
//   m4 = ID_j | N3 | N4         (4 + 16 + 16 bytes)
// Each message travels as (sender_id, m, I) with I = HMAC(sender_id | m, K).

struct HandshakeMessage {
  DeviceId sender_id{};
  Bytes m;
  Tag256 i_tag{};

  bool operator==(const HandshakeMessage&) const = default;
};

Bytes tag_input(const DeviceId& sender, ByteView m);

enum class Role : std::uint8_t { initiator, responder };
enum class Phase : std::uint8_t { Start, Sent1, Sent2, Sent3, Sent4, Done, Failed };
enum class FailReason : std::uint8_t {
  none,
  setup,
  bad_hmac,
  bad_nonce_echo,
  bad_layout,
  report_expired,
  report_inconsistent_id,
  peer_unsafe,
};

std::string_view to_string(Role r);
std::string_view to_string(Phase p);
std::string_view to_string(FailReason r);

struct SessionState {
  Role role = Role::initiator;
  Phase phase = Phase::Start;
  FailReason reason = FailReason::none;
  std::optional<DeviceId> peer;
  std::optional<Nonce> n1, n2, n3, n4;
  std::optional<Verdict> peer_delta;
  std::vector<HandshakeMessage> transcript;

  bool terminal() const { return phase == Phase::Done || phase == Phase::Failed; }
};

/// One protocol participant: identity, outer keys, attestation context and
/// the nonce/IV source of its network stack.
class Device {
 public:
  Device(DeviceId id, KeyStore keys, std::unique_ptr<AttestationContext> attestor, Prng prng);

  const DeviceId& id() const { return id_; }
  AttestationContext& attestor() { return *attestor_; }
  std::optional<Key128> outer_key(const DeviceId& peer) const { return keys_.outer(id_, peer); }
  Nonce fresh_nonce() { return prng_.nonce(); }
  Prng& prng() { return prng_; }

  // Responder-side rejection of initiator nonces seen before. Off by default.
  bool reject_seen_nonces = false;
  bool remember_nonce(const Nonce& n) { return seen_.insert(n).second; }

 private:
  DeviceId id_;
  KeyStore keys_;
  std::unique_ptr<AttestationContext> attestor_;
  Prng prng_;
  std::set<Nonce> seen_;
};

SessionState responder_state();

/// Builds m1. On a setup problem the returned state is Failed(setup) and no
/// message is produced.
std::pair<SessionState, std::optional<HandshakeMessage>> initiator_start(Device& device, const DeviceId& peer_id);

/// Processes one inbound message. Terminal states ignore input.
std::optional<HandshakeMessage> step(Device& device, SessionState& state, const HandshakeMessage& incoming);

// ---------------------------------------------------------------------------
// Simulated network and adversary
// ---------------------------------------------------------------------------

enum class ActionKind : std::uint8_t { passthrough, drop, replay, tamper, inject, impersonate, delay };

std::string_view to_string(ActionKind k);

/// One manipulation, applied when delivery step `at` (1-based) comes up.
/// Steps 1 and 3 travel initiator -> responder, steps 2 and 4 back.
struct AdversaryAction {
  ActionKind kind = ActionKind::passthrough;
  std::size_t at = 1;
  // replay: index (1-based) into AdversaryScript::recorded.
  std::size_t recorded = 0;
  // tamper: offset into m | I, and the xor mask.
  std::size_t byte_index = 0;
  std::uint8_t mask = 0;
  // inject: message delivered instead of the in-flight one.
  std::optional<HandshakeMessage> message;
  // impersonate: claimed sender.
  DeviceId claimed{};
  // delay: clock advance before delivery.
  std::int64_t delta_ms = 0;
};

struct AdversaryScript {
  std::vector<AdversaryAction> actions;
  // Messages captured from earlier sessions, in step order.
  std::vector<HandshakeMessage> recorded;
  std::uint64_t seed = 0;

  /// Line format, '#' comments:
  ///   passthrough <at> | drop <at> | replay <at> <recorded> |
  ///   tamper <at> <byte_index> <mask> | inject <at> <sender_hex> <m_hex> <tag_hex> |
  ///   impersonate <at> <id_hex> | delay <at> <ms>
  static AdversaryScript parse(std::string_view text);
};

struct TranscriptEntry {
  std::uint64_t session_id = 0;
  std::size_t step = 0;
  std::string direction;
  DeviceId sender_id{};
  Bytes payload;
  Tag256 tag{};
  std::string adversary_action;
  std::string verdict;

  std::string to_json() const;
};

struct SessionOptions {
  std::uint64_t session_id = 0;
  // Clock advance per delivery.
  std::int64_t latency_ms = 10;
  std::size_t max_steps = 16;
};

struct SessionOutcome {
  SessionState initiator;
  SessionState responder;
  std::vector<TranscriptEntry> transcript;
  // Authentic messages delivered in order; usable as a replay library.
  std::vector<HandshakeMessage> delivered;
  bool completed = false;
  // Some party accepted an altered message. A replayed m1 only counts if
  // the responder then finishes.
  bool adversary_win = false;

  std::string verdict() const;
};

SessionOutcome run_session(Device& initiator, Device& responder, SimClock& clock, const AdversaryScript& adversary,
                           const SessionOptions& options = {});

/// Optional leading record `{"meta":{"config_digest":...,"seed":...}}`.
std::string transcript_jsonl(std::span<const TranscriptEntry> entries,
                             const std::optional<FileStamp>& stamp = std::nullopt);

// ---------------------------------------------------------------------------
// Two-device simulation
// ---------------------------------------------------------------------------

struct SimNodeSpec {
  DeviceId id{};
  FirmwareProfile firmware;
  std::uint64_t device_seed = 0;
  std::uint64_t first_step = 0;
  std::uint64_t period = 0;
};

/// Initiator and responder sharing one simulated clock and a seeded key
/// store. Not movable: devices keep references into it.
struct SimPair {
  SimClock clock;
  KeyStore keys;
  SimHost initiator_host;
  SimHost responder_host;
  std::unique_ptr<Device> initiator;
  std::unique_ptr<Device> responder;

  SimPair() = default;
  SimPair(const SimPair&) = delete;
  SimPair& operator=(const SimPair&) = delete;
};

std::unique_ptr<SimPair> make_sim_pair(const QuantizedModel& qmodel, double t_opt, const SimNodeSpec& initiator,
                                       const SimNodeSpec& responder, std::uint64_t seed,
                                       const AttestorSettings& settings = {});

}  // namespace liteatt
