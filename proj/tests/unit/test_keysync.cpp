#include <set>

#include "doctest.h"
#include "fault_schedule.hpp"
#include "lightguard/keysync.hpp"
#include "lightguard/scenario.hpp"
#include "lightguard/wire.hpp"

using namespace lightguard;
using namespace lightguard::keysync;

namespace {

template <typename T>
int count(const std::vector<Action> &actions) {
  int n = 0;
  for (const auto &a : actions) n += std::holds_alternative<T>(a) ? 1 : 0;
  return n;
}

std::vector<SyncKind> sent(const std::vector<Action> &actions) {
  std::vector<SyncKind> out;
  for (const auto &a : actions) {
    if (const auto *s = std::get_if<SendSync>(&a)) out.push_back(s->message.kind);
  }
  return out;
}

const SyncMessage &first_sync(const std::vector<Action> &actions) {
  for (const auto &a : actions) {
    if (const auto *s = std::get_if<SendSync>(&a)) return s->message;
  }
  throw std::logic_error("no SendSync action");
}

Ptk random_ptk(Rng &rng) {
  Octets<48> raw;
  rng.fill(raw);
  return Ptk::from_bytes(raw);
}

fourway::HandshakeOutcome success(const Ptk &ptk) {
  fourway::HandshakeOutcome o;
  o.result = fourway::HandshakeResult::Success;
  o.ptk = ptk;
  return o;
}

fourway::HandshakeOutcome timeout() {
  fourway::HandshakeOutcome o;
  o.result = fourway::HandshakeResult::Timeout;
  return o;
}

KeySyncSession active(Role role, Rng &rng, std::uint32_t epoch = 1) {
  auto s = make_session(role);
  s.phase = Phase::Active;
  s.epoch = epoch;
  s.active_ptk = random_ptk(rng);
  return s;
}

Bytes digest_of(const Ptk &ptk) {
  const auto d = crypto::ptk_digest(ptk);
  return Bytes(d.begin(), d.end());
}

// AP session from Active to PrepareSent with `ptk` pending.
KeySyncSession ap_prepare_sent(Rng &rng, const Ptk &ptk, SimTime now = SimTime(0)) {
  auto t = start_rekey(active(Role::AP, rng), rng, now);
  t = advance(t.session, HandshakeStarted{}, now);
  t = advance(t.session, HandshakeDone{success(ptk)}, now);
  return t.session;
}

// STA session from Active to PtkDerived with `ptk` pending.
KeySyncSession sta_ptk_derived(Rng &rng, const Ptk &ptk, SimTime now = SimTime(0)) {
  auto s = active(Role::STA, rng);
  const auto p = Passphrase::generate(rng);
  auto t = advance(s, SyncIn{{SyncKind::PassphraseDeliver, 2, Bytes(p.str().begin(), p.str().end())}}, now);
  t = advance(t.session, HandshakeDone{success(ptk)}, now);
  return t.session;
}

}  // namespace

TEST_SUITE("keysync") {
  TEST_CASE("sync message codec") {
    const SyncMessage m{SyncKind::Prepare, 0x01020304, Bytes(32, 0xab)};
    const auto bytes = encode(m);
    CHECK(bytes.size() == 7 + 32);
    CHECK(bytes[0] == 2);
    CHECK(decode_sync(bytes) == m);
    CHECK_THROWS_AS(decode_sync(ByteView(bytes).first(5)), SyncDecodeError);
    auto bad = bytes;
    bad[0] = 9;
    CHECK_THROWS_AS(decode_sync(bad), SyncDecodeError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_sync(bad), SyncDecodeError);
    CHECK_THROWS(encode(SyncMessage{SyncKind::Abort, 1, Bytes(257, 0)}));
  }

  TEST_CASE("start_rekey delivers a fresh passphrase and starts the handshake") {
    Rng rng(1);
    auto s = active(Role::AP, rng);
    const auto t = start_rekey(s, rng, SimTime(0));
    CHECK(t.session.phase == Phase::PassphraseSent);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::PassphraseDeliver});
    const auto &deliver = first_sync(t.actions);
    CHECK(deliver.epoch == 2);
    REQUIRE(count<StartHandshake>(t.actions) == 1);
    const auto &start = std::get<StartHandshake>(t.actions.back());
    CHECK(std::string(deliver.payload.begin(), deliver.payload.end()) == start.passphrase.str());

    const auto again = start_rekey(s, rng, SimTime(0));
    CHECK_FALSE(std::get<StartHandshake>(again.actions.back()).passphrase == start.passphrase);
  }

  TEST_CASE("role and busy errors") {
    Rng rng(2);
    CHECK_THROWS_AS(start_rekey(make_session(Role::STA), rng, SimTime(0)), RoleError);
    const auto busy = start_rekey(make_session(Role::AP), rng, SimTime(0)).session;
    CHECK_THROWS_AS(start_rekey(busy, rng, SimTime(0)), BusyError);
    CHECK_THROWS(make_session(Role::AP, {}, ""));
    RekeyPolicy bad;
    bad.commit_timeout = SimTime(0);
    CHECK_THROWS(make_session(Role::AP, bad));
  }

  TEST_CASE("happy path on both sides") {
    Rng rng(3);
    const auto ptk = random_ptk(rng);
    auto ap = ap_prepare_sent(rng, ptk);
    auto sta = sta_ptk_derived(rng, ptk);
    CHECK(ap.phase == Phase::PrepareSent);
    CHECK(sta.phase == Phase::PtkDerived);

    auto ap_prepare = advance(ap, TimerFired{}, SimTime(0));  // not due yet: no-op
    CHECK(ap_prepare.actions.empty());

    const SyncMessage prepare{SyncKind::Prepare, 2, digest_of(ptk)};
    auto t = advance(sta, SyncIn{prepare}, SimTime(0));
    CHECK(t.session.phase == Phase::Prepared);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::PrepareAck});
    sta = t.session;

    t = advance(ap, SyncIn{{SyncKind::PrepareAck, 2, {}}}, from_ms(1));
    CHECK(t.session.phase == Phase::Committed);
    REQUIRE(t.actions.size() == 3);
    CHECK(std::holds_alternative<PauseData>(t.actions[0]));
    CHECK(std::get<InstallKey>(t.actions[1]).epoch == 2);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::Commit});
    ap = t.session;

    t = advance(sta, SyncIn{{SyncKind::Commit, 2, {}}}, from_ms(2));
    CHECK(t.session.phase == Phase::Committed);
    CHECK(count<PauseData>(t.actions) == 1);
    CHECK(count<InstallKey>(t.actions) == 1);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::CommitAck});
    sta = t.session;

    t = advance(ap, SyncIn{{SyncKind::CommitAck, 2, {}}}, from_ms(3));
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 2);
    CHECK(count<ResumeData>(t.actions) == 1);
    ap = t.session;

    t = advance(sta, DataConfirmed{2}, from_ms(4));
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 2);
    sta = t.session;
    CHECK(*ap.active_ptk == *sta.active_ptk);

    // A repeated Commit after the STA went Active is re-acknowledged.
    t = advance(sta, SyncIn{{SyncKind::Commit, 2, {}}}, from_ms(5));
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::CommitAck});
    CHECK(t.session.phase == Phase::Active);
  }

  TEST_CASE("digest mismatch aborts and both keep the old key") {
    Rng rng(4);
    const auto ptk = random_ptk(rng);
    auto sta = sta_ptk_derived(rng, ptk);
    const auto old_sta = sta.active_ptk;
    auto wrong = digest_of(ptk);
    wrong[0] ^= 0xff;
    auto t = advance(sta, SyncIn{{SyncKind::Prepare, 2, wrong}}, SimTime(0));
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::Abort});
    CHECK(count<InstallKey>(t.actions) == 0);
    CHECK(count<RevertKey>(t.actions) == 0);
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 1);
    CHECK(*t.session.active_ptk == *old_sta);

    auto ap = ap_prepare_sent(rng, ptk);
    const auto old_ap = ap.active_ptk;
    t = advance(ap, SyncIn{{SyncKind::Abort, 2, {}}}, SimTime(0));
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 1);
    CHECK(*t.session.active_ptk == *old_ap);
    CHECK(count<RevertKey>(t.actions) == 0);
  }

  TEST_CASE("CommitAck lost forever: retries, then Abort back to the old key") {
    Rng rng(5);
    const auto ptk = random_ptk(rng);
    auto ap = ap_prepare_sent(rng, ptk);
    auto t = advance(ap, SyncIn{{SyncKind::PrepareAck, 2, {}}}, SimTime(0));
    ap = t.session;
    const auto step = ap.policy.commit_timeout / 4;
    int commits = 1;
    SimTime now{0};
    while (ap.phase == Phase::Committed) {
      REQUIRE(ap.timer);
      CHECK(*ap.timer == now + step);
      now = *ap.timer;
      t = advance(ap, TimerFired{}, now);
      ap = t.session;
      for (auto k : sent(t.actions)) commits += k == SyncKind::Commit ? 1 : 0;
    }
    CHECK(commits == 1 + ap.policy.commit_retries);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::Abort});
    CHECK(count<RevertKey>(t.actions) == 1);
    CHECK(count<ResumeData>(t.actions) == 1);
    CHECK(ap.phase == Phase::Active);
    CHECK(ap.epoch == 1);
    CHECK(now == step * (1 + ap.policy.commit_retries));

    // The STA installed on Commit and reverts on the Abort.
    auto sta = sta_ptk_derived(rng, ptk);
    sta = advance(sta, SyncIn{{SyncKind::Prepare, 2, digest_of(ptk)}}, SimTime(0)).session;
    sta = advance(sta, SyncIn{{SyncKind::Commit, 2, {}}}, SimTime(0)).session;
    REQUIRE(sta.phase == Phase::Committed);
    t = advance(sta, SyncIn{{SyncKind::Abort, 2, {}}}, now);
    CHECK(count<RevertKey>(t.actions) == 1);
    CHECK(count<ResumeData>(t.actions) == 1);
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 1);
  }

  TEST_CASE("STA reverts on its own deadline when the Abort is lost") {
    Rng rng(6);
    const auto ptk = random_ptk(rng);
    auto sta = sta_ptk_derived(rng, ptk);
    sta = advance(sta, SyncIn{{SyncKind::Prepare, 2, digest_of(ptk)}}, SimTime(0)).session;
    sta = advance(sta, SyncIn{{SyncKind::Commit, 2, {}}}, from_ms(1)).session;
    REQUIRE(sta.timer);
    CHECK(*sta.timer == from_ms(1) + sta.policy.commit_timeout * 3);
    auto early = advance(sta, TimerFired{}, *sta.timer - SimTime(1));
    CHECK(early.session.phase == Phase::Committed);
    auto t = advance(sta, TimerFired{}, *sta.timer);
    CHECK(count<RevertKey>(t.actions) == 1);
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.session.epoch == 1);
  }

  TEST_CASE("a stalled STA gives up without touching keys") {
    Rng rng(7);
    auto sta = sta_ptk_derived(rng, random_ptk(rng));
    REQUIRE(sta.timer);
    auto t = advance(sta, TimerFired{}, *sta.timer);
    CHECK(t.actions.empty());
    CHECK(t.session.phase == Phase::Active);
  }

  TEST_CASE("handshake failure disconnects, or holds the key under the comparison policy") {
    Rng rng(8);
    auto ap = start_rekey(active(Role::AP, rng), rng, SimTime(0)).session;
    auto t = advance(ap, HandshakeDone{timeout()}, from_ms(500));
    CHECK(t.session.phase == Phase::Disconnected);
    CHECK(count<LinkDown>(t.actions) == 1);
    CHECK(count<SendDeauth>(t.actions) == 1);
    CHECK(t.session.epoch == 1);

    auto hold = active(Role::AP, rng);
    hold.policy.hold_old_key_on_failure = true;
    t = advance(start_rekey(hold, rng, SimTime(0)).session, HandshakeDone{timeout()}, from_ms(500));
    CHECK(t.session.phase == Phase::Active);
    CHECK(t.actions.empty());
  }

  TEST_CASE("link reports") {
    Rng rng(9);
    auto ap = active(Role::AP, rng);
    auto t = handle_link_report(ap, {35.0, false}, rng, SimTime(0));
    CHECK(t.actions.empty());
    CHECK(t.session.phase == Phase::Active);

    ap.phase = Phase::Disconnected;
    t = handle_link_report(ap, {35.0, false}, rng, SimTime(0));
    CHECK(t.actions.empty());
    CHECK(t.session.phase == Phase::Disconnected);

    t = handle_link_report(ap, {0.0, true}, rng, SimTime(0));
    CHECK(t.session.phase == Phase::PassphraseSent);
    CHECK(sent(t.actions) == std::vector<SyncKind>{SyncKind::PassphraseDeliver});

    auto sta = active(Role::STA, rng);
    sta.phase = Phase::Disconnected;
    CHECK(handle_link_report(sta, {0.0, true}, rng, SimTime(0)).actions.empty());
  }

  TEST_CASE("atomicity check") {
    NodeView ap{Phase::Active, 2, true, true, 2, {1, 2}};
    NodeView sta{Phase::Active, 2, true, true, 2, {1, 2}};
    CHECK(commit_atomicity_check(ap, sta));
    sta.epoch = 1;
    CHECK_FALSE(commit_atomicity_check(ap, sta));
    sta = {Phase::Committed, 1, false, true, 2, {1, 2}};
    CHECK(commit_atomicity_check(ap, sta));
    sta = {Phase::Prepared, 1, true, true, 1, {1}};
    CHECK_FALSE(commit_atomicity_check(ap, sta));
    REQUIRE(explain_atomicity_violation(ap, sta));
  }

  TEST_CASE("full lossless rekeys agree and keep the atomicity hook quiet") {
    scenario::ScenarioConfig cfg;
    cfg.duration = from_ms(2'000);
    cfg.rekey.interval = from_ms(500);
    cfg.traffic_enabled = false;
    const auto r = scenario::run_scenario(cfg);
    REQUIRE(r.report.ok());
    CHECK(r.ap.epoch == 4);
    CHECK(r.sta.epoch == 4);
    CHECK(*r.ap.active_ptk == *r.sta.active_ptk);
    CHECK(r.keys.size() == 4);
    std::set<std::string> phrases;
    for (const auto &k : r.keys) phrases.insert(k.passphrase.str());
    CHECK(phrases.size() == 4);
  }

  TEST_CASE("PassphraseDeliver only ever goes out on LiFi") {
    scenario::ScenarioConfig cfg;
    cfg.duration = from_ms(1'000);
    cfg.rekey.interval = from_ms(300);
    cfg.taps = {{"rf_eve", netsim::Medium::RF, true, std::nullopt}};
    const auto r = scenario::run_scenario(cfg);
    REQUIRE(r.report.ok());
    int delivers = 0;
    for (const auto &rec : r.log) {
      if (rec.message_kind == "tx:PassphraseDeliver") {
        ++delivers;
        CHECK(rec.medium == "LiFi");
      }
    }
    CHECK(delivers == 4);
    REQUIRE(r.transcripts.size() == 1);
    for (const auto &f : r.transcripts[0].transcript.frames()) CHECK_FALSE(wire::is_key_establishment(f.octets));
  }

  TEST_CASE("targeted schedule: CommitAck dropped forever") {
    auto cfg = faults::base_config(21);
    cfg.lifi_faults = [](const netsim::MediumTaggedFrame &f, Rng &) {
      netsim::FaultAction a;
      if (wire::type_of(f.payload()) == wire::FrameType::Sync) {
        const auto m = decode_sync(wire::body_of(f.payload()));
        a.drop = m.kind == SyncKind::CommitAck && m.epoch >= 2;
      }
      return a;
    };
    const auto r = scenario::run_scenario(cfg);
    const auto o = faults::check_run(r);
    CHECK_MESSAGE(o.ok, o.why);
    CHECK(r.ap.epoch == 1);
    CHECK(o.aborted_windows == 2);
    CHECK(r.aborts >= 2);
  }

  TEST_CASE("targeted schedule: every Prepare corrupted") {
    auto cfg = faults::base_config(22);
    cfg.lifi_faults = [](const netsim::MediumTaggedFrame &f, Rng &) {
      netsim::FaultAction a;
      if (wire::type_of(f.payload()) == wire::FrameType::Sync) {
        auto m = decode_sync(wire::body_of(f.payload()));
        if (m.kind == SyncKind::Prepare && m.epoch >= 2) {
          m.payload[3] ^= 0x01;
          a.corrupted_payload = wire::frame(wire::FrameType::Sync, encode(m));
        }
      }
      return a;
    };
    const auto r = scenario::run_scenario(cfg);
    const auto o = faults::check_run(r);
    CHECK_MESSAGE(o.ok, o.why);
    CHECK(r.ap.epoch == 1);
    CHECK(o.aborted_windows == 2);
  }

  TEST_CASE("randomized commit-phase fault schedules") {
    int aborted = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto cache = std::make_shared<crypto::PmkCache>();
      for (std::uint64_t f = 0; f < 40; ++f) {
        auto cfg = faults::base_config(500 + s);
        cfg.pmk_cache = cache;
        cfg.lifi_faults = faults::make_injector(
            faults::draw_params(mix_seed(s * 1000 + f, "unit"), cfg.rekey.commit_timeout));
        const auto o = faults::check_run(scenario::run_scenario(cfg));
        CAPTURE(s);
        CAPTURE(f);
        CHECK_MESSAGE(o.ok, o.why);
        aborted += o.aborted_windows;
      }
    }
    CHECK(aborted > 0);
  }

  TEST_CASE("liveness: rekeys reach Active when per-frame delivery is 0.99") {
    scenario::ScenarioConfig base;
    base.lifi.angle_deg = 15.1;
    REQUIRE(base.lifi.delivery_probability() >= 0.99);
    auto cache = std::make_shared<crypto::PmkCache>();
    int active_runs = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      auto cfg = base;
      cfg.seed = mix_seed(seed, "liveness");
      cfg.duration = from_ms(1'000);
      cfg.periodic_rekey = false;
      cfg.traffic_enabled = false;
      cfg.record_log = false;
      const auto r = scenario::run_scenario(cfg);
      REQUIRE(r.report.ok());
      if (r.ap.phase == Phase::Active && r.sta.phase == Phase::Active && r.ap.epoch == 1) ++active_runs;
    }
    CHECK(active_runs == 1000);
  }
}
