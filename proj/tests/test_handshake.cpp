#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "liteatt/error.hpp"
#include "liteatt/handshake.hpp"

using namespace liteatt;
using liteatt::testing_support::small_config;
using liteatt::testing_support::small_detector;

namespace {

const DeviceId kI = device_id_from_u32(1);
const DeviceId kR = device_id_from_u32(2);

std::unique_ptr<SimPair> make_pair(std::optional<FirmwareProfile> initiator_fw = std::nullopt, std::uint64_t seed = 7) {
  const auto cfg = small_config();
  const auto& det = small_detector();
  const auto base = firmware_profile(cfg, 0);
  AttestorSettings s;
  s.block_width = cfg.block_width;
  s.used_bytes = cfg.effective_used_bytes();
  SimNodeSpec i{kI, initiator_fw.value_or(base), cfg.device_seed, cfg.safe_traces, 0};
  SimNodeSpec r{kR, base, cfg.device_seed, cfg.safe_traces, 0};
  return make_sim_pair(det.qmodel, det.calibration.t_opt, i, r, seed, s);
}

SessionOutcome run(SimPair& p, const AdversaryScript& adv, std::uint64_t id) {
  SessionOptions opt;
  opt.session_id = id;
  return run_session(*p.initiator, *p.responder, p.clock, adv, opt);
}

AdversaryScript script(const std::string& text) { return AdversaryScript::parse(text); }

}  // namespace

TEST(Handshake, HonestSessionsComplete) {
  auto p = make_pair();
  std::size_t completed = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto out = run(*p, {}, s);
    EXPECT_FALSE(out.adversary_win);
    completed += out.completed;
    if (out.completed) {
      EXPECT_EQ(out.delivered.size(), 4u);
      EXPECT_EQ(out.initiator.peer_delta, Verdict::safe);
      EXPECT_EQ(out.responder.peer_delta, Verdict::safe);
      EXPECT_EQ(out.initiator.n4, out.responder.n4);
      EXPECT_EQ(out.transcript.size(), 4u);
    }
  }
  EXPECT_GE(completed, 95u);
}

TEST(Handshake, MessageSizes) {
  auto p = make_pair();
  const auto out = run(*p, {}, 0);
  ASSERT_TRUE(out.completed);
  // IV plus PKCS#7-padded plaintexts of 68, 84, 36 and 36 bytes.
  EXPECT_EQ(out.delivered[0].m.size(), 16u + 80u);
  EXPECT_EQ(out.delivered[1].m.size(), 16u + 96u);
  EXPECT_EQ(out.delivered[2].m.size(), 16u + 48u);
  EXPECT_EQ(out.delivered[3].m.size(), 16u + 48u);
  for (const auto& m : out.delivered) EXPECT_EQ(m.i_tag, hmac(tag_input(m.sender_id, m.m), *p->initiator->outer_key(kR)));
}

TEST(Game, FabricationWithoutKeys) {
  auto p = make_pair();
  std::mt19937_64 rng(1);
  std::size_t wins = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const std::size_t at = 1 + s % 4;
    AdversaryScript adv;
    adv.seed = s;
    AdversaryAction a;
    a.at = at;
    if (s % 2 == 0) {
      a.kind = ActionKind::impersonate;
      a.claimed = at % 2 == 1 ? kI : kR;
    } else {
      // Random ciphertext tagged under a guessed key.
      a.kind = ActionKind::inject;
      HandshakeMessage m;
      m.sender_id = at % 2 == 1 ? kI : kR;
      m.m.resize(at <= 2 ? 96 : 64);
      for (auto& b : m.m) b = static_cast<std::uint8_t>(rng());
      Key128 guess;
      for (auto& b : guess) b = static_cast<std::uint8_t>(rng());
      m.i_tag = hmac(tag_input(m.sender_id, m.m), guess);
      a.message = m;
    }
    adv.actions.push_back(a);
    const auto out = run(*p, adv, s);
    wins += out.adversary_win;
    EXPECT_FALSE(out.completed);
  }
  EXPECT_EQ(wins, 0u);
}

TEST(Game, FullSessionReplay) {
  auto p = make_pair();
  auto recorded = run(*p, {}, 0);
  ASSERT_TRUE(recorded.completed);
  std::size_t wins = 0, completed = 0;
  for (std::uint64_t s = 1; s <= 1000; ++s) {
    AdversaryScript adv;
    adv.recorded = recorded.delivered;
    if (s % 5 == 0) {
      for (std::size_t k = 1; k <= 4; ++k) {
        AdversaryAction a;
        a.kind = ActionKind::replay;
        a.at = k;
        a.recorded = k;
        adv.actions.push_back(a);
      }
    } else {
      AdversaryAction a;
      a.kind = ActionKind::replay;
      a.at = 1 + s % 4;
      a.recorded = 1 + (s / 4) % 4;
      adv.actions.push_back(a);
    }
    const auto out = run(*p, adv, s);
    wins += out.adversary_win;
    completed += out.completed;
  }
  EXPECT_EQ(wins, 0u);
  EXPECT_EQ(completed, 0u);
}

TEST(Game, ReplayedM1AloneIsNotAWin) {
  auto p = make_pair();
  const auto recorded = run(*p, {}, 0);
  AdversaryScript adv = script("replay 1 1\n");
  adv.recorded = recorded.delivered;
  const auto out = run(*p, adv, 1);
  // The responder may answer a replayed m1 but the initiator never accepts.
  EXPECT_FALSE(out.adversary_win);
  EXPECT_NE(out.initiator.phase, Phase::Done);
  EXPECT_NE(out.responder.phase, Phase::Done);
}

TEST(Game, SeenNonceCacheRejectsReplayedM1) {
  auto p = make_pair();
  p->responder->reject_seen_nonces = true;
  const auto recorded = run(*p, {}, 0);
  AdversaryScript adv = script("replay 1 1\n");
  adv.recorded = recorded.delivered;
  const auto out = run(*p, adv, 1);
  EXPECT_EQ(out.responder.reason, FailReason::bad_nonce_echo);
}

TEST(Game, SingleBitTamperAtEveryPosition) {
  auto p = make_pair();
  const auto honest = run(*p, {}, 0);
  ASSERT_TRUE(honest.completed);
  std::size_t sessions = 0, wins = 0, completed = 0;
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto& msg = honest.delivered[k - 1];
    const std::size_t len = msg.m.size() + msg.i_tag.size();
    for (std::size_t idx = 0; idx < len; ++idx)
      for (int bit = 0; bit < 8; ++bit) {
        AdversaryScript adv;
        AdversaryAction a;
        a.kind = ActionKind::tamper;
        a.at = k;
        a.byte_index = idx;
        a.mask = static_cast<std::uint8_t>(1u << bit);
        adv.actions.push_back(a);
        const auto out = run(*p, adv, ++sessions);
        wins += out.adversary_win;
        completed += out.completed;
        for (const auto& e : out.transcript)
          if (e.adversary_action == "tamper" && e.verdict != "dropped") EXPECT_EQ(e.verdict, "rejected:bad_hmac");
      }
  }
  EXPECT_GE(sessions, 1000u);
  EXPECT_EQ(wins, 0u);
  EXPECT_EQ(completed, 0u);
}

TEST(Game, ExpiredReports) {
  auto p = make_pair();
  const std::int64_t eps = kDefaultExpiryMs;
  std::size_t wins = 0, expired = 0, eligible = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    AdversaryScript adv;
    AdversaryAction a;
    a.kind = ActionKind::delay;
    a.at = 1 + s % 2;  // hold m1 or m2
    a.delta_ms = eps + 1 + static_cast<std::int64_t>(s % 7);
    adv.actions.push_back(a);
    const auto out = run(*p, adv, s);
    wins += out.adversary_win;
    const auto& victim = a.at == 1 ? out.responder : out.initiator;
    expired += victim.reason == FailReason::report_expired;
    // m2 only exists when the responder accepted the initiator.
    eligible += a.at == 1 || out.responder.reason == FailReason::none;
    EXPECT_FALSE(out.completed);
  }
  EXPECT_EQ(wins, 0u);
  EXPECT_EQ(expired, eligible);
  EXPECT_GE(eligible, 950u);
}

TEST(Game, CachedReportReplayedAfterExpiry) {
  auto p = make_pair();
  const auto recorded = run(*p, {}, 0);
  AdversaryScript adv = script("delay 1 5001\nreplay 1 1\n");
  adv.recorded = recorded.delivered;
  const auto out = run(*p, adv, 1);
  EXPECT_EQ(out.responder.reason, FailReason::report_expired);
  EXPECT_FALSE(out.adversary_win);
}

TEST(Game, UnsafeSenderRejected) {
  const auto cfg = small_config();
  const auto bad = mutate_profile(firmware_profile(cfg, 0), MutationKind::tamper_data, 1.0, 99);
  auto p = make_pair(bad);
  std::size_t rejected = 0;
  const std::size_t n = 1000;
  for (std::uint64_t s = 0; s < n; ++s) {
    const auto out = run(*p, {}, s);
    rejected += out.responder.reason == FailReason::peer_unsafe;
    EXPECT_FALSE(out.completed && out.responder.peer_delta == Verdict::unsafe);
  }
  EXPECT_GE(double(rejected) / double(n), 0.95);
}

TEST(StateMachine, TerminalStatesIgnoreInput) {
  auto p = make_pair();
  const auto out = run(*p, {}, 0);
  ASSERT_TRUE(out.completed);
  auto state = out.responder;
  const auto before = state.transcript.size();
  EXPECT_FALSE(step(*p->responder, state, out.delivered[0]));
  EXPECT_EQ(state.transcript.size(), before);
  EXPECT_EQ(state.phase, Phase::Done);
}

TEST(StateMachine, OutOfOrderMessageIsBadLayout) {
  auto p = make_pair();
  auto [istate, m1] = initiator_start(*p->initiator, kR);
  ASSERT_TRUE(m1);
  // m1 delivered back to the initiator instead of an m2.
  EXPECT_FALSE(step(*p->initiator, istate, *m1));
  EXPECT_EQ(istate.phase, Phase::Failed);
  EXPECT_NE(istate.reason, FailReason::none);
}

TEST(StateMachine, UnknownPeerIsSetupFailure) {
  auto p = make_pair();
  auto [state, msg] = initiator_start(*p->initiator, device_id_from_u32(77));
  EXPECT_FALSE(msg);
  EXPECT_EQ(state.phase, Phase::Failed);
  EXPECT_EQ(state.reason, FailReason::setup);
}

TEST(Script, ParsesEveryAction) {
  const auto s = script(
      "# comment\n"
      "seed 0x10\n"
      "passthrough 1\n"
      "drop 2\n"
      "replay 3 1\n"
      "tamper 4 7 0x80\n"
      "impersonate 1 00000002\n"
      "delay 2 100   # trailing comment\n"
      "inject 3 00000001 00ff " + std::string(64, 'a') + "\n");
  EXPECT_EQ(s.seed, 16u);
  ASSERT_EQ(s.actions.size(), 7u);
  EXPECT_EQ(s.actions[3].kind, ActionKind::tamper);
  EXPECT_EQ(s.actions[3].mask, 0x80);
  EXPECT_EQ(s.actions[5].delta_ms, 100);
  EXPECT_EQ(s.actions[6].message->m, (Bytes{0x00, 0xff}));
}

TEST(Script, ErrorsNameTheLine) {
  for (const char* bad : {"bogus 1\n", "drop\n", "drop 0\n", "replay 1 0\n", "tamper 1 2\n", "delay 1 -5\n",
                          "impersonate 1 0102\n", "inject 1 00000001 00 ab\n", "drop x\n"}) {
    try {
      script(std::string("# ok\n") + bad);
      ADD_FAILURE() << bad;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(Transcript, JsonlFieldsAndMeta) {
  auto p = make_pair();
  const auto out = run(*p, script("tamper 3 0 1\n"), 5);
  const auto text = transcript_jsonl(out.transcript, FileStamp{"feed", 3});
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  const auto meta = nlohmann::json::parse(line);
  EXPECT_EQ(meta["meta"]["config_digest"], "feed");
  EXPECT_EQ(meta["meta"]["seed"], 3);
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), out.transcript.size());
  const std::vector<std::string> keys{"session_id", "step",    "direction",        "sender_id",
                                      "payload_hex", "tag_hex", "adversary_action", "verdict"};
  for (const auto& r : rows) {
    std::vector<std::string> got;
    for (auto it = r.begin(); it != r.end(); ++it) got.push_back(it.key());
    EXPECT_EQ(got.size(), keys.size());
    EXPECT_EQ(r["session_id"], 5);
  }
  EXPECT_EQ(rows[0]["direction"], "i->r");
  EXPECT_EQ(rows[1]["direction"], "r->i");
  EXPECT_EQ(rows[2]["adversary_action"], "tamper");
  EXPECT_EQ(rows[2]["verdict"], "rejected:bad_hmac");
  // Field order on the wire.
  EXPECT_EQ(out.transcript[0].to_json().rfind("{\"session_id\":5,\"step\":1,\"direction\":\"i->r\"", 0), 0u);
}
