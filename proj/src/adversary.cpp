#include <algorithm>
#include <charconv>
#include <sstream>

#include <json.hpp>

#include "liteatt/error.hpp"
#include "liteatt/handshake.hpp"

namespace liteatt {

namespace {

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T value{};
  int base = 10;
  const char* first = s.data();
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    first += 2;
  }
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, value, base);
  if (ec != std::errc{} || p != last)
    throw FormatError("adversary script line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return value;
}

DeviceId parse_id(const std::string& s, std::size_t line_no) {
  const Bytes b = from_hex(s);
  if (b.size() != 4) throw FormatError("adversary script line " + std::to_string(line_no) + ": id must be 4 bytes");
  return take_array<4>(b);
}

std::string direction_of(std::size_t step) { return step % 2 == 1 ? "i->r" : "r->i"; }

}  // namespace

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::passthrough: return "passthrough";
    case ActionKind::drop: return "drop";
    case ActionKind::replay: return "replay";
    case ActionKind::tamper: return "tamper";
    case ActionKind::inject: return "inject";
    case ActionKind::impersonate: return "impersonate";
    case ActionKind::delay: return "delay";
  }
  return "?";
}

AdversaryScript AdversaryScript::parse(std::string_view text) {
  AdversaryScript script;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto w = words(line);
    if (w.empty()) continue;
    const auto where = "adversary script line " + std::to_string(line_no);
    auto need = [&](std::size_t n) {
      if (w.size() != n) throw FormatError(where + ": '" + w[0] + "' takes " + std::to_string(n - 1) + " arguments");
    };
    AdversaryAction a;
    const auto& verb = w[0];
    if (verb == "seed") {
      need(2);
      script.seed = parse_number<std::uint64_t>(w[1], line_no);
      continue;
    }
    if (w.size() < 2) throw FormatError(where + ": missing step");
    a.at = parse_number<std::size_t>(w[1], line_no);
    if (a.at == 0) throw FormatError(where + ": steps are 1-based");
    if (verb == "passthrough") {
      need(2);
      a.kind = ActionKind::passthrough;
    } else if (verb == "drop") {
      need(2);
      a.kind = ActionKind::drop;
    } else if (verb == "replay") {
      need(3);
      a.kind = ActionKind::replay;
      a.recorded = parse_number<std::size_t>(w[2], line_no);
      if (a.recorded == 0) throw FormatError(where + ": recorded messages are 1-based");
    } else if (verb == "tamper") {
      need(4);
      a.kind = ActionKind::tamper;
      a.byte_index = parse_number<std::size_t>(w[2], line_no);
      a.mask = static_cast<std::uint8_t>(parse_number<unsigned>(w[3], line_no));
    } else if (verb == "inject") {
      need(5);
      a.kind = ActionKind::inject;
      HandshakeMessage m;
      m.sender_id = parse_id(w[2], line_no);
      m.m = from_hex(w[3]);
      const Bytes tag = from_hex(w[4]);
      if (tag.size() != 32) throw FormatError(where + ": tag must be 32 bytes");
      m.i_tag = take_array<32>(tag);
      a.message = std::move(m);
    } else if (verb == "impersonate") {
      need(3);
      a.kind = ActionKind::impersonate;
      a.claimed = parse_id(w[2], line_no);
    } else if (verb == "delay") {
      need(3);
      a.kind = ActionKind::delay;
      a.delta_ms = parse_number<std::int64_t>(w[2], line_no);
      if (a.delta_ms < 0) throw FormatError(where + ": delay must be non-negative");
    } else {
      throw FormatError(where + ": unknown action '" + verb + "'");
    }
    script.actions.push_back(std::move(a));
  }
  return script;
}

std::string TranscriptEntry::to_json() const {
  nlohmann::ordered_json j;
  j["session_id"] = session_id;
  j["step"] = step;
  j["direction"] = direction;
  j["sender_id"] = to_hex(sender_id);
  j["payload_hex"] = to_hex(payload);
  j["tag_hex"] = to_hex(tag);
  j["adversary_action"] = adversary_action;
  j["verdict"] = verdict;
  return j.dump();
}

std::string transcript_jsonl(std::span<const TranscriptEntry> entries, const std::optional<FileStamp>& stamp) {
  std::string out;
  if (stamp) {
    nlohmann::ordered_json j;
    j["meta"]["config_digest"] = stamp->config_digest;
    j["meta"]["seed"] = stamp->seed;
    out += j.dump() + "\n";
  }
  for (const auto& e : entries) {
    out += e.to_json();
    out += '\n';
  }
  return out;
}

std::string SessionOutcome::verdict() const {
  std::string v = completed ? "completed" : "failed";
  v += adversary_win ? ", win" : ", no-win";
  return v;
}

SessionOutcome run_session(Device& initiator, Device& responder, SimClock& clock, const AdversaryScript& adversary,
                           const SessionOptions& options) {
  SessionOutcome out;
  out.responder = responder_state();
  auto [istate, first] = initiator_start(initiator, responder.id());
  out.initiator = std::move(istate);

  std::size_t last_action = 0;
  for (const auto& a : adversary.actions) last_action = std::max(last_action, a.at);
  Prng forge(adversary.seed ^ (options.session_id * 0x9e3779b97f4a7c15ULL));

  bool forged_accepted = false;
  // A party that took in a replayed m1 must not finish the session.
  bool responder_took_replay = false;
  std::optional<HandshakeMessage> in_flight = std::move(first);

  for (std::size_t k = 1; k <= options.max_steps; ++k) {
    if (!in_flight && k > last_action) break;
    const AdversaryAction* act = nullptr;
    for (const auto& a : adversary.actions) {
      if (a.at != k) continue;
      if (a.kind == ActionKind::delay)
        clock.advance(a.delta_ms);
      else if (!act)
        act = &a;
    }
    const std::string action_name(act ? to_string(act->kind) : "passthrough");
    auto entry = [&](const HandshakeMessage& m, std::string verdict) {
      TranscriptEntry e;
      e.session_id = options.session_id;
      e.step = k;
      e.direction = direction_of(k);
      e.sender_id = m.sender_id;
      e.payload = m.m;
      e.tag = m.i_tag;
      e.adversary_action = action_name;
      e.verdict = std::move(verdict);
      out.transcript.push_back(std::move(e));
    };

    std::optional<HandshakeMessage> deliver = in_flight;
    bool substituted = false;
    if (act) {
      switch (act->kind) {
        case ActionKind::drop:
          deliver.reset();
          break;
        case ActionKind::replay:
          if (act->recorded > adversary.recorded.size())
            throw FormatError("adversary script: replay of unrecorded message " + std::to_string(act->recorded));
          deliver = adversary.recorded[act->recorded - 1];
          substituted = true;
          break;
        case ActionKind::inject:
          deliver = act->message;
          substituted = true;
          break;
        case ActionKind::impersonate: {
          HandshakeMessage m;
          m.sender_id = act->claimed;
          m.m.resize(in_flight ? in_flight->m.size() : 64);
          forge.fill(m.m);
          forge.fill(m.i_tag);
          deliver = std::move(m);
          substituted = true;
          break;
        }
        case ActionKind::tamper:
          if (deliver) {
            const std::size_t total = deliver->m.size() + deliver->i_tag.size();
            const std::size_t idx = act->byte_index % total;
            if (idx < deliver->m.size())
              deliver->m[idx] ^= act->mask;
            else
              deliver->i_tag[idx - deliver->m.size()] ^= act->mask;
          }
          break;
        default:
          break;
      }
    }

    const std::optional<HandshakeMessage> honest = std::move(in_flight);
    in_flight.reset();
    if (honest && (!deliver || substituted)) entry(*honest, "dropped");
    if (!deliver) continue;

    const bool to_responder = k % 2 == 1;
    Device& to = to_responder ? responder : initiator;
    SessionState& state = to_responder ? out.responder : out.initiator;
    const bool was_terminal = state.terminal();
    const bool fresh_responder = to_responder && state.phase == Phase::Start;
    clock.advance(options.latency_ms);
    in_flight = step(to, state, *deliver);

    bool accepted = false;
    if (was_terminal) {
      entry(*deliver, "ignored");
    } else if (state.phase == Phase::Failed) {
      entry(*deliver, "rejected:" + std::string(to_string(state.reason)));
    } else {
      accepted = true;
      entry(*deliver, "accepted");
    }
    const bool altered = !honest || !(*deliver == *honest);
    if (!altered) {
      if (accepted) out.delivered.push_back(*deliver);
      continue;
    }
    const bool replayed_first = act && act->kind == ActionKind::replay && fresh_responder;
    if (accepted && replayed_first) responder_took_replay = true;
    if (accepted && !replayed_first) forged_accepted = true;
  }

  out.completed = out.initiator.phase == Phase::Done && out.responder.phase == Phase::Done;
  out.adversary_win = forged_accepted || (responder_took_replay && out.responder.phase == Phase::Done);
  return out;
}

std::unique_ptr<SimPair> make_sim_pair(const QuantizedModel& qmodel, double t_opt, const SimNodeSpec& initiator,
                                       const SimNodeSpec& responder, std::uint64_t seed,
                                       const AttestorSettings& settings) {
  if (initiator.id == responder.id) throw ConfigError("simulation: devices need distinct ids");
  auto pair = std::make_unique<SimPair>();
  Prng key_prng(seed);
  const std::array<DeviceId, 2> ids{initiator.id, responder.id};
  pair->keys = KeyStore::generate(ids, key_prng);
  pair->initiator_host = SimHost{initiator.firmware, initiator.device_seed, initiator.first_step, initiator.period};
  pair->responder_host = SimHost{responder.firmware, responder.device_seed, responder.first_step, responder.period};

  auto make = [&](const SimNodeSpec& spec, SimHost& host, std::uint64_t stream) {
    auto ctx = std::make_unique<AttestationContext>(spec.id, qmodel, t_opt, inner_keys_for(pair->keys, spec.id, ids),
                                                    pair->clock, Prng(seed ^ (0x5a17ULL + stream)),
                                                    [&host] { return host.read(); }, settings);
    return std::make_unique<Device>(spec.id, pair->keys, std::move(ctx), Prng(seed ^ (0x7e70ULL + stream)));
  };
  pair->initiator = make(initiator, pair->initiator_host, 1);
  pair->responder = make(responder, pair->responder_host, 2);
  return pair;
}

}  // namespace liteatt
