#include <vector>

#include "doctest.h"
#include "lightguard/dataplane.hpp"
#include "lightguard/scenario.hpp"
#include "lightguard/wire.hpp"

using namespace lightguard;
using namespace lightguard::dataplane;

namespace {

crypto::Ptk random_ptk(Rng &rng) {
  Octets<48> raw;
  rng.fill(raw);
  return crypto::Ptk::from_bytes(raw);
}

const crypto::MacAddress kAp{{0x02, 0, 0, 0, 0, 1}};
const crypto::MacAddress kSta{{0x02, 0, 0, 0, 0, 2}};

}  // namespace

TEST_SUITE("dataplane") {
  TEST_CASE("bootstrap install brings the link up") {
    Rng rng(1);
    WifiLink link;
    CHECK(link.state() == LinkState::Down);
    CHECK_FALSE(link.can_transmit());
    CHECK(link.install_key(1, random_ptk(rng)));
    link.resume(from_ms(1));
    CHECK(link.state() == LinkState::Up);
    CHECK(link.can_transmit());
    CHECK(link.current_epoch() == 1u);
    CHECK(link.first_up() == from_ms(1));
  }

  TEST_CASE("epoch gaps and stale epochs are rejected") {
    Rng rng(2);
    WifiLink link;
    REQUIRE(link.install_key(1, random_ptk(rng)));
    CHECK_FALSE(link.install_key(3, random_ptk(rng)));
    CHECK_FALSE(link.install_key(1, random_ptk(rng)));
    CHECK(link.current_epoch() == 1u);
    CHECK(link.install_key(2, random_ptk(rng)));
    CHECK(link.rx_epochs() == std::vector<std::uint32_t>{1, 2});
    CHECK(link.install_key(3, random_ptk(rng)));
    CHECK(link.rx_epochs() == std::vector<std::uint32_t>{2, 3});
    link.revert_key();
    CHECK(link.current_epoch() == 2u);
  }

  TEST_CASE("frames only decrypt under the epoch they were protected with") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const auto k1 = random_ptk(rng), k2 = random_ptk(rng);
      WifiLink tx, rx_same, rx_other, rx_mislabelled;
      REQUIRE(tx.install_key(1, k1));
      REQUIRE(rx_same.install_key(1, k1));
      REQUIRE(rx_other.install_key(1, k1));
      REQUIRE(rx_other.install_key(2, k2));
      REQUIRE(rx_mislabelled.install_key(1, k2));
      const auto body = tx.protect(Bytes(20, 0x5a));
      CHECK(rx_same.receive(body).status == RxStatus::Accepted);
      // rx_other still holds epoch 1 for receive, so the frame is accepted
      // under epoch 1 and never under epoch 2.
      const auto r = rx_other.receive(body);
      CHECK(r.status == RxStatus::Accepted);
      CHECK(r.epoch == 1);
      // Same epoch number, different key.
      CHECK(rx_mislabelled.receive(body).status == RxStatus::AuthFailure);

      WifiLink rx_new;
      REQUIRE(rx_new.install_key(2, k2));
      CHECK(rx_new.receive(body).status == RxStatus::NoKey);
    }
  }

  TEST_CASE("replayed frames are rejected") {
    Rng rng(4);
    const auto k = random_ptk(rng);
    WifiLink tx, rx;
    REQUIRE(tx.install_key(1, k));
    REQUIRE(rx.install_key(1, k));
    const auto a = tx.protect(Bytes{1});
    const auto b = tx.protect(Bytes{2});
    CHECK(rx.receive(a).status == RxStatus::Accepted);
    CHECK(rx.receive(b).status == RxStatus::Accepted);
    CHECK(rx.receive(a).status == RxStatus::Replay);
  }

  TEST_CASE("pause, resume and down intervals are measured") {
    Rng rng(5);
    WifiLink link;
    REQUIRE(link.install_key(1, random_ptk(rng)));
    link.resume(from_ms(0));
    link.pause(from_ms(10));
    link.resume(from_ms(12));
    link.take_down(from_ms(20));
    CHECK(link.downtime(from_ms(25)) == from_ms(5));
    link.pause(from_ms(30));  // rejoin during a switchover
    CHECK(link.state() == LinkState::Paused);
    link.resume(from_ms(31));
    REQUIRE(link.pause_durations().size() == 2);
    CHECK(link.pause_durations()[0] == from_ms(2));
    CHECK(link.pause_durations()[1] == from_ms(1));
    REQUIRE(link.down_intervals().size() == 1);
    CHECK(link.down_intervals()[0].start == from_ms(20));
    CHECK(link.down_intervals()[0].end == from_ms(30));
  }

  TEST_CASE("batches queued across a switchover decrypt under the new epoch") {
    Rng rng(6);
    netsim::Simulator sim;
    netsim::RfChannel rf(sim, netsim::RfChannelModel{}, Rng(7));
    WifiLink ap, sta;
    const auto k1 = random_ptk(rng), k2 = random_ptk(rng);
    REQUIRE(ap.install_key(1, k1));
    REQUIRE(sta.install_key(1, k1));
    ap.resume(SimTime(0));
    sta.resume(SimTime(0));

    TrafficPump pump(sim, rf, {kAp, &ap}, {kSta, &sta}, TrafficConfig{});
    rf.attach(kAp, [&](const netsim::MediumTaggedFrame &f) { pump.receive(Side::Ap, wire::body_of(f.payload())); });
    rf.attach(kSta, [&](const netsim::MediumTaggedFrame &f) { pump.receive(Side::Sta, wire::body_of(f.payload())); });
    std::vector<std::pair<SimTime, std::uint32_t>> sta_accepted;
    pump.on_accepted = [&](Side side, std::uint32_t epoch) {
      if (side == Side::Sta) sta_accepted.emplace_back(sim.now(), epoch);
    };
    pump.start(from_ms(100));

    sim.schedule(from_ms(20.5), "switch", [&] {
      ap.pause(sim.now());
      sta.pause(sim.now());
      REQUIRE(ap.install_key(2, k2));
      REQUIRE(sta.install_key(2, k2));
    });
    sim.schedule(from_ms(24.5), "resume", [&] {
      ap.resume(sim.now());
      sta.resume(sim.now());
      pump.flush(Side::Ap);
      pump.flush(Side::Sta);
    });
    sim.run_until(from_ms(100));

    CHECK(pump.total_decrypt_failures() == 0);
    CHECK(pump.counters(Side::Ap).conserved());
    CHECK(pump.counters(Side::Sta).conserved());
    int after = 0;
    for (const auto &[t, epoch] : sta_accepted) {
      if (t > from_ms(24.5)) {
        CHECK(epoch == 2);
        ++after;
      } else {
        CHECK(epoch == 1);
      }
    }
    CHECK(after > 0);
    // The four batches generated while paused went out on resume.
    CHECK(pump.counters(Side::Ap).delivered + pump.counters(Side::Ap).queued ==
          pump.counters(Side::Ap).offered);
  }

  TEST_CASE("abort without install keeps traffic on the old key") {
    Rng rng(8);
    netsim::Simulator sim;
    netsim::RfChannel rf(sim, netsim::RfChannelModel{}, Rng(9));
    WifiLink ap, sta;
    const auto k1 = random_ptk(rng);
    REQUIRE(ap.install_key(1, k1));
    REQUIRE(sta.install_key(1, k1));
    ap.resume(SimTime(0));
    sta.resume(SimTime(0));
    TrafficPump pump(sim, rf, {kAp, &ap}, {kSta, &sta}, TrafficConfig{});
    rf.attach(kAp, [&](const netsim::MediumTaggedFrame &f) { pump.receive(Side::Ap, wire::body_of(f.payload())); });
    rf.attach(kSta, [&](const netsim::MediumTaggedFrame &f) { pump.receive(Side::Sta, wire::body_of(f.payload())); });
    pump.start(from_ms(50));
    sim.schedule(from_ms(10.5), "pause", [&] { ap.pause(sim.now()); });
    sim.schedule(from_ms(12.5), "resume", [&] {
      ap.resume(sim.now());
      pump.flush(Side::Ap);
    });
    sim.run_until(from_ms(50));
    CHECK(pump.total_decrypt_failures() == 0);
    CHECK(pump.counters(Side::Ap).dropped == 0);
    CHECK(ap.current_epoch() == 1u);
  }

  TEST_CASE("aligned scenario: steady 80 Mbps and 1 ms, brief pauses") {
    scenario::ScenarioConfig cfg;
    cfg.duration = from_ms(5'000);
    cfg.rekey.interval = from_ms(1'000);
    const auto r = scenario::run_scenario(cfg);
    REQUIRE(r.report.ok());
    CHECK(r.decrypt_failures() == 0);
    CHECK(r.downlink.conserved());
    CHECK(r.uplink.conserved());
    CHECK(r.downtime == SimTime(0));
    CHECK(r.rekeys_succeeded() == r.rekeys.size());
    for (const auto &s : r.samples) {
      if (s.t_ms < to_ms(cfg.traffic.window)) continue;
      CAPTURE(s.t_ms);
      CHECK(s.throughput_mbps >= 76.0);
      CHECK(s.throughput_mbps <= 80.0);
      CHECK(s.latency_ms == doctest::Approx(1.0).epsilon(0.1));
    }
    // Two LiFi round trips plus serialization bound each switchover pause.
    const double rtt_ms = 2 * (cfg.lifi.propagation_delay_ms + 1.0 / cfg.lifi.bitrate_frames_per_ms);
    REQUIRE_FALSE(r.pause_durations.empty());
    for (const auto p : r.pause_durations) CHECK(to_ms(p) <= 2 * rtt_ms);
  }
}
