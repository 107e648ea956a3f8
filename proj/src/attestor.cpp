#include "liteatt/attestor.hpp"

#include "liteatt/autoenc.hpp"
#include "liteatt/error.hpp"

namespace liteatt {

std::string_view to_string(AppSaKind kind) {
  switch (kind) {
    case AppSaKind::AbortNoSenderId: return "AbortNoSenderId";
    case AppSaKind::AbortTrivialInput: return "AbortTrivialInput";
    case AppSaKind::AbortInconsistentId: return "AbortInconsistentId";
    case AppSaKind::AbortExpiredReport: return "AbortExpiredReport";
    case AppSaKind::SenderUnsafe: return "SenderUnsafe";
    case AppSaKind::Completed: return "Completed";
  }
  return "?";
}

int algorithm_line(AppSaKind kind, bool with_report) {
  switch (kind) {
    case AppSaKind::AbortNoSenderId: return 5;
    case AppSaKind::AbortTrivialInput: return 7;
    case AppSaKind::AbortInconsistentId: return 13;
    case AppSaKind::AbortExpiredReport: return 15;
    case AppSaKind::SenderUnsafe: return 17;
    case AppSaKind::Completed: return with_report ? 29 : 20;
  }
  return 0;
}

Bytes ReportPayload::encode() const {
  Bytes out;
  out.reserve(kReportPayloadBytes);
  append(out, id);
  out.push_back(gamma);
  put_be64(out, static_cast<std::uint64_t>(t_ms));
  append(out, nonce);
  return out;
}

std::optional<ReportPayload> ReportPayload::decode(ByteView bytes) {
  if (bytes.size() != kReportPayloadBytes) return std::nullopt;
  ReportPayload p;
  p.id = take_array<4>(bytes);
  p.gamma = bytes[4];
  p.t_ms = static_cast<std::int64_t>(get_be64(bytes.subspan(5, 8)));
  p.nonce = take_array<16>(bytes.subspan(13));
  return p;
}

AttestationContext::AttestationContext(DeviceId self_id, QuantizedModel qmodel, double t_opt,
                                       std::map<DeviceId, Key128> peer_keys, const Clock& clock, Prng prng,
                                       SramView sram_view, AttestorSettings settings)
    : self_id_(self_id),
      qmodel_(std::move(qmodel)),
      t_opt_(t_opt),
      peer_keys_(std::move(peer_keys)),
      clock_(&clock),
      prng_(std::move(prng)),
      sram_view_(std::move(sram_view)),
      settings_(settings) {
  if (settings_.epsilon_ms <= 0) throw ConfigError("attestor: expiry window must be positive");
  if (settings_.block_width == 0) throw ConfigError("attestor: block width must be positive");
  if (settings_.used_bytes == 0)
    settings_.used_bytes = static_cast<std::size_t>(qmodel_.input_dim) * settings_.block_width;
  if (settings_.used_bytes != static_cast<std::size_t>(qmodel_.input_dim) * settings_.block_width)
    throw ConfigError("attestor: used SRAM bytes do not match the model input width");
  if (!sram_view_) throw ConfigError("attestor: no SRAM accessor");
}

const Key128& AttestationContext::key_for(const DeviceId& peer) const {
  const auto it = peer_keys_.find(peer);
  if (it == peer_keys_.end()) throw ConfigError("attestor: no inner key for peer " + to_hex(peer));
  return it->second;
}

AppSaOutcome AttestationContext::app_sa(const std::optional<DeviceId>& id_s, const std::optional<ByteView>& r_s,
                                        bool a_self) {
  if (!id_s) return {AppSaKind::AbortNoSenderId, std::nullopt, std::nullopt};
  if (!r_s && !a_self) return {AppSaKind::AbortTrivialInput, std::nullopt, std::nullopt};

  AppSaOutcome out;
  if (r_s) {
    const auto check = decode_validate_report(*id_s, *r_s);
    if (check.abort) {
      out.kind = *check.abort;
      if (out.kind == AppSaKind::SenderUnsafe) out.delta_s = Verdict::unsafe;
      return out;
    }
    out.delta_s = Verdict::safe;
    if (!a_self) return out;
  }
  key_for(*id_s);
  const auto sa = self_attest();
  out.report = encode_report(*id_s, sa.gamma);
  return out;
}

AttestationReport AttestationContext::encode_report(const DeviceId& peer, Verdict gamma) {
  const Key128& key = key_for(peer);
  ReportPayload p;
  p.id = self_id_;
  p.gamma = static_cast<std::uint8_t>(gamma);
  p.t_ms = clock_->now_ms();
  do {
    p.nonce = prng_.nonce();
  } while (!nonces_.insert(p.nonce).second);
  ++encrypt_count_;
  return AttestationReport{enc(p.encode(), key, prng_)};
}

ReportCheck AttestationContext::decode_validate_report(const DeviceId& id_s, ByteView r_s) const {
  const Key128& key = key_for(id_s);
  ReportCheck check;
  std::optional<ReportPayload> p;
  try {
    p = ReportPayload::decode(dec(r_s, key));
  } catch (const PaddingError&) {
  } catch (const FormatError&) {
  }
  if (!p || p->id != id_s || p->gamma > 1) {
    check.abort = AppSaKind::AbortInconsistentId;
    return check;
  }
  check.t_ms = p->t_ms;
  check.gamma = static_cast<Verdict>(p->gamma);
  if (clock_->now_ms() - p->t_ms > settings_.epsilon_ms) {
    check.abort = AppSaKind::AbortExpiredReport;
    return check;
  }
  if (check.gamma == Verdict::unsafe) check.abort = AppSaKind::SenderUnsafe;
  return check;
}

SelfAttestation AttestationContext::self_attest() {
  const SramTrace trace = sram_view_();
  if (trace.bytes.size() < settings_.used_bytes)
    throw ConfigError("attestor: SRAM image has " + std::to_string(trace.bytes.size()) + " bytes, model needs " +
                      std::to_string(settings_.used_bytes));
  const Eigen::VectorXd s = aggregate_bytes<double>(trace.bytes, settings_.block_width, settings_.used_bytes);
  ++inference_count_;
  const Eigen::VectorXd recon = q_reconstruct(qmodel_, s);
  const double mse = reconstruction_error(recon, s);
  return {mse < t_opt_ ? Verdict::safe : Verdict::unsafe, mse};
}

std::map<DeviceId, Key128> inner_keys_for(const KeyStore& keys, const DeviceId& self,
                                          std::span<const DeviceId> peers) {
  std::map<DeviceId, Key128> out;
  for (const auto& peer : peers) {
    if (peer == self) continue;
    if (auto k = keys.inner(self, peer)) out.emplace(peer, *k);
  }
  return out;
}

}  // namespace liteatt
