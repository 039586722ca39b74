#include "doctest.h"
#include "lightguard/scenario.hpp"
#include "lightguard/wire.hpp"

using namespace lightguard;
using namespace lightguard::scenario;

namespace {

ScenarioConfig misaligned_config() {
  ScenarioConfig cfg;
  cfg.duration = from_ms(6'000);
  cfg.rekey.interval = from_ms(1'000);
  // Tilt just before the second rekey, realign at 3.6 s.
  cfg.angle_schedule = {{from_ms(900), 35.0}, {from_ms(3'600), 0.0}};
  return cfg;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("config validation") {
    ScenarioConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.duration = SimTime(0);
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.angle_schedule = {{from_ms(10), 1.0}, {from_ms(5), 2.0}};
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.taps = {{"x", Medium::RF, true, {}}, {"x", Medium::LiFi, true, {}}};
    CHECK_THROWS(cfg.validate());
    CHECK(parse_mode("baseline") == Mode::Baseline);
    CHECK_FALSE(parse_mode("other"));
  }

  TEST_CASE("misalignment before a rekey: it fails, the link stays down until realignment") {
    const auto cfg = misaligned_config();
    const auto r = run_scenario(cfg);
    REQUIRE(r.report.ok());
    REQUIRE(r.rekeys.size() >= 4);
    CHECK(r.rekeys[1].start == from_ms(1'000));
    CHECK(r.rekeys[0].succeeded);
    CHECK_FALSE(r.rekeys[1].succeeded);
    CHECK(r.rekeys[1].outcome == "HandshakeFailed");

    REQUIRE(r.ap_down_intervals.size() == 1);
    const auto &down = r.ap_down_intervals[0];
    CHECK(down.start >= from_ms(900));
    CHECK(down.start <= from_ms(1'000) + from_ms(1'000));
    CHECK(down.end >= from_ms(3'600));
    CHECK(down.end <= from_ms(3'600) + from_ms(1'000));
    CHECK(r.downtime == down.end - down.start);

    // Rekeys while tilted fail; the realignment rekey and every later one succeed.
    bool saw_realign = false;
    for (std::size_t i = 1; i < r.rekeys.size(); ++i) {
      if (r.rekeys[i].start < from_ms(3'600)) {
        CHECK_FALSE(r.rekeys[i].succeeded);
        continue;
      }
      if (!saw_realign) CHECK(r.rekeys[i].start == from_ms(3'600));
      saw_realign = true;
      CHECK(r.rekeys[i].succeeded);
    }
    CHECK(saw_realign);
    CHECK(r.ap.phase == keysync::Phase::Active);
    CHECK(r.sta.phase == keysync::Phase::Active);
    CHECK(r.decrypt_failures() == 0);

    // Zero goodput while down, full goodput after recovery.
    for (const auto &s : r.samples) {
      if (s.t_ms > to_ms(down.start) + to_ms(cfg.traffic.window) && s.t_ms < to_ms(down.end)) {
        CHECK(s.throughput_mbps == 0.0);
        CHECK(s.link_state == dataplane::LinkState::Down);
      }
      if (s.t_ms > to_ms(down.end) + to_ms(cfg.traffic.window)) CHECK(s.throughput_mbps >= 76.0);
    }
  }

  TEST_CASE("hold-old-key policy keeps the link up through a failed rekey") {
    auto cfg = misaligned_config();
    cfg.rekey.hold_old_key_on_failure = true;
    const auto r = run_scenario(cfg);
    REQUIRE(r.report.ok());
    CHECK_FALSE(r.rekeys[1].succeeded);
    CHECK(r.downtime == SimTime(0));
    CHECK(r.decrypt_failures() == 0);
  }

  TEST_CASE("log records carry the documented fields") {
    ScenarioConfig cfg;
    cfg.duration = from_ms(200);
    cfg.periodic_rekey = false;
    const auto r = run_scenario(cfg);
    REQUIRE_FALSE(r.log.empty());
    bool saw_active = false;
    for (const auto &rec : r.log) {
      CHECK((rec.node == "AP" || rec.node == "STA"));
      CHECK_FALSE(rec.message_kind.empty());
      if (rec.phase_to == "Active") saw_active = true;
    }
    CHECK(saw_active);
  }

  TEST_CASE("taps: out-of-cone LiFi hears nothing, in-cone hears the handshake") {
    ScenarioConfig cfg;
    cfg.duration = from_ms(2'000);
    cfg.rekey.interval = from_ms(500);
    cfg.taps = {{"rf", Medium::RF, true, {}},
                {"far", Medium::LiFi, false, {}},
                {"near", Medium::LiFi, true, {}}};
    const auto r = run_scenario(cfg);
    REQUIRE(r.report.ok());
    REQUIRE(r.transcripts.size() == 3);
    for (const auto &t : r.transcripts) {
      if (t.info.id == "far") {
        CHECK_FALSE(t.info.in_cone);
        CHECK(t.transcript.empty());
      } else if (t.info.id == "near") {
        int eapol = 0;
        for (const auto &f : t.transcript.frames()) eapol += wire::type_of(f.octets) == wire::FrameType::Eapol;
        CHECK(eapol >= 16);
      } else {
        CHECK(t.info.medium == Medium::RF);
        CHECK_FALSE(t.transcript.empty());
        for (const auto &f : t.transcript.frames()) CHECK_FALSE(wire::is_key_establishment(f.octets));
      }
    }
  }

  TEST_CASE("baseline mode carries EAPOL on RF and nothing else changes") {
    ScenarioConfig cfg;
    cfg.mode = Mode::Baseline;
    cfg.duration = from_ms(500);
    cfg.periodic_rekey = false;
    cfg.taps = {{"rf", Medium::RF, true, {}}};
    const auto r = run_scenario(cfg);
    REQUIRE(r.report.ok());
    int eapol = 0, sync = 0;
    for (const auto &f : r.transcripts[0].transcript.frames()) {
      eapol += wire::type_of(f.octets) == wire::FrameType::Eapol;
      sync += wire::type_of(f.octets) == wire::FrameType::Sync;
    }
    // M1 on RF can outrun the passphrase on LiFi; the retransmission completes.
    CHECK(eapol >= 4);
    CHECK(sync == 0);
    CHECK(r.ap.phase == keysync::Phase::Active);
  }
}
