#include "liteatt/handshake.hpp"

#include "liteatt/error.hpp"

namespace liteatt {

namespace {

constexpr std::size_t kIdBytes = 4;
constexpr std::size_t kNonceBytes = 16;
constexpr std::size_t kM1Bytes = kIdBytes + kNonceBytes + kReportCipherBytes;
constexpr std::size_t kM2Bytes = kIdBytes + 2 * kNonceBytes + kReportCipherBytes;
constexpr std::size_t kM34Bytes = kIdBytes + 2 * kNonceBytes;

void fail(SessionState& state, FailReason reason) {
  state.phase = Phase::Failed;
  state.reason = reason;
}

HandshakeMessage seal(Device& device, const Key128& key, ByteView plaintext) {
  HandshakeMessage msg;
  msg.sender_id = device.id();
  msg.m = enc(plaintext, key, device.prng());
  msg.i_tag = hmac(tag_input(msg.sender_id, msg.m), key);
  return msg;
}

// Verifies the tag and decrypts; on failure marks the state and returns
// nothing.
std::optional<Bytes> open(Device& device, SessionState& state, const HandshakeMessage& msg, std::size_t expected) {
  if (state.peer && msg.sender_id != *state.peer) {
    fail(state, FailReason::bad_hmac);
    return std::nullopt;
  }
  const auto key = device.outer_key(msg.sender_id);
  if (!key || !verify_hmac(tag_input(msg.sender_id, msg.m), msg.i_tag, *key)) {
    fail(state, FailReason::bad_hmac);
    return std::nullopt;
  }
  Bytes pt;
  try {
    pt = dec(msg.m, *key);
  } catch (const PaddingError&) {
    fail(state, FailReason::bad_layout);
    return std::nullopt;
  } catch (const FormatError&) {
    fail(state, FailReason::bad_layout);
    return std::nullopt;
  }
  if (pt.size() != expected || take_array<4>(pt) != msg.sender_id) {
    fail(state, FailReason::bad_layout);
    return std::nullopt;
  }
  return pt;
}

FailReason reason_for(AppSaKind kind) {
  switch (kind) {
    case AppSaKind::AbortExpiredReport: return FailReason::report_expired;
    case AppSaKind::SenderUnsafe: return FailReason::peer_unsafe;
    case AppSaKind::AbortInconsistentId: return FailReason::report_inconsistent_id;
    default: return FailReason::setup;
  }
}

Nonce nonce_at(ByteView pt, std::size_t offset) { return take_array<16>(pt.subspan(offset)); }

std::optional<HandshakeMessage> responder_on_m1(Device& device, SessionState& state, const HandshakeMessage& msg) {
  const auto pt = open(device, state, msg, kM1Bytes);
  if (!pt) return std::nullopt;
  state.peer = msg.sender_id;
  state.n1 = nonce_at(*pt, kIdBytes);
  if (device.reject_seen_nonces && !device.remember_nonce(*state.n1)) {
    fail(state, FailReason::bad_nonce_echo);
    return std::nullopt;
  }
  AppSaOutcome out;
  try {
    out = device.attestor().app_sa(msg.sender_id, ByteView(*pt).subspan(kIdBytes + kNonceBytes), true);
  } catch (const ConfigError&) {
    fail(state, FailReason::setup);
    return std::nullopt;
  }
  if (out.kind != AppSaKind::Completed || !out.report) {
    if (out.delta_s) state.peer_delta = out.delta_s;
    fail(state, reason_for(out.kind));
    return std::nullopt;
  }
  state.peer_delta = out.delta_s;
  state.n2 = device.fresh_nonce();
  Bytes body;
  append(body, device.id());
  append(body, *state.n1);
  append(body, *state.n2);
  append(body, out.report->ciphertext);
  auto reply = seal(device, *device.outer_key(msg.sender_id), body);
  state.transcript.push_back(reply);
  state.phase = Phase::Sent2;
  return reply;
}

std::optional<HandshakeMessage> initiator_on_m2(Device& device, SessionState& state, const HandshakeMessage& msg) {
  const auto pt = open(device, state, msg, kM2Bytes);
  if (!pt) return std::nullopt;
  if (nonce_at(*pt, kIdBytes) != *state.n1) {
    fail(state, FailReason::bad_nonce_echo);
    return std::nullopt;
  }
  AppSaOutcome out;
  try {
    out = device.attestor().app_sa(msg.sender_id, ByteView(*pt).subspan(kIdBytes + 2 * kNonceBytes), false);
  } catch (const ConfigError&) {
    fail(state, FailReason::setup);
    return std::nullopt;
  }
  if (out.delta_s) state.peer_delta = out.delta_s;
  if (out.kind != AppSaKind::Completed) {
    fail(state, reason_for(out.kind));
    return std::nullopt;
  }
  state.n2 = nonce_at(*pt, kIdBytes + kNonceBytes);
  state.n3 = device.fresh_nonce();
  Bytes body;
  append(body, device.id());
  append(body, *state.n2);
  append(body, *state.n3);
  auto reply = seal(device, *device.outer_key(msg.sender_id), body);
  state.transcript.push_back(reply);
  state.phase = Phase::Sent3;
  return reply;
}

std::optional<HandshakeMessage> responder_on_m3(Device& device, SessionState& state, const HandshakeMessage& msg) {
  const auto pt = open(device, state, msg, kM34Bytes);
  if (!pt) return std::nullopt;
  if (nonce_at(*pt, kIdBytes) != *state.n2) {
    fail(state, FailReason::bad_nonce_echo);
    return std::nullopt;
  }
  state.n3 = nonce_at(*pt, kIdBytes + kNonceBytes);
  state.n4 = device.fresh_nonce();
  Bytes body;
  append(body, device.id());
  append(body, *state.n3);
  append(body, *state.n4);
  auto reply = seal(device, *device.outer_key(msg.sender_id), body);
  state.transcript.push_back(reply);
  state.phase = Phase::Done;
  return reply;
}

void initiator_on_m4(Device& device, SessionState& state, const HandshakeMessage& msg) {
  const auto pt = open(device, state, msg, kM34Bytes);
  if (!pt) return;
  if (nonce_at(*pt, kIdBytes) != *state.n3) {
    fail(state, FailReason::bad_nonce_echo);
    return;
  }
  state.n4 = nonce_at(*pt, kIdBytes + kNonceBytes);
  state.phase = Phase::Done;
}

}  // namespace

Bytes tag_input(const DeviceId& sender, ByteView m) {
  Bytes out;
  out.reserve(sender.size() + m.size());
  append(out, sender);
  append(out, m);
  return out;
}

std::string_view to_string(Role r) { return r == Role::initiator ? "initiator" : "responder"; }

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Start: return "Start";
    case Phase::Sent1: return "Sent1";
    case Phase::Sent2: return "Sent2";
    case Phase::Sent3: return "Sent3";
    case Phase::Sent4: return "Sent4";
    case Phase::Done: return "Done";
    case Phase::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(FailReason r) {
  switch (r) {
    case FailReason::none: return "none";
    case FailReason::setup: return "setup";
    case FailReason::bad_hmac: return "bad_hmac";
    case FailReason::bad_nonce_echo: return "bad_nonce_echo";
    case FailReason::bad_layout: return "bad_layout";
    case FailReason::report_expired: return "report_expired";
    case FailReason::report_inconsistent_id: return "report_inconsistent_id";
    case FailReason::peer_unsafe: return "peer_unsafe";
  }
  return "?";
}

Device::Device(DeviceId id, KeyStore keys, std::unique_ptr<AttestationContext> attestor, Prng prng)
    : id_(id), keys_(keys.view_for(id)), attestor_(std::move(attestor)), prng_(std::move(prng)) {
  if (!attestor_) throw ConfigError("device: missing attestation context");
  if (attestor_->self_id() != id_) throw ConfigError("device: attestation context belongs to another device");
}

SessionState responder_state() {
  SessionState s;
  s.role = Role::responder;
  return s;
}

std::pair<SessionState, std::optional<HandshakeMessage>> initiator_start(Device& device, const DeviceId& peer_id) {
  SessionState state;
  state.role = Role::initiator;
  state.peer = peer_id;
  const auto key = device.outer_key(peer_id);
  if (!key) {
    fail(state, FailReason::setup);
    return {std::move(state), std::nullopt};
  }
  AppSaOutcome out;
  try {
    out = device.attestor().app_sa(peer_id, std::nullopt, true);
  } catch (const ConfigError&) {
    fail(state, FailReason::setup);
    return {std::move(state), std::nullopt};
  }
  if (!out.report) {
    fail(state, FailReason::setup);
    return {std::move(state), std::nullopt};
  }
  state.n1 = device.fresh_nonce();
  Bytes body;
  append(body, device.id());
  append(body, *state.n1);
  append(body, out.report->ciphertext);
  auto msg = seal(device, *key, body);
  state.transcript.push_back(msg);
  state.phase = Phase::Sent1;
  return {std::move(state), std::move(msg)};
}

std::optional<HandshakeMessage> step(Device& device, SessionState& state, const HandshakeMessage& incoming) {
  if (state.terminal()) return std::nullopt;
  state.transcript.push_back(incoming);
  if (state.role == Role::responder) {
    if (state.phase == Phase::Start) return responder_on_m1(device, state, incoming);
    if (state.phase == Phase::Sent2) return responder_on_m3(device, state, incoming);
  } else {
    if (state.phase == Phase::Sent1) return initiator_on_m2(device, state, incoming);
    if (state.phase == Phase::Sent3) {
      initiator_on_m4(device, state, incoming);
      return std::nullopt;
    }
  }
  fail(state, FailReason::bad_layout);
  return std::nullopt;
}

}  // namespace liteatt
