#pragma once

// Randomized fault schedules over the commit-phase messages, shared by the
// unit tests and the acceptance run.

#include <cstdint>
#include <memory>
#include <string>

#include "lightguard/keysync.hpp"
#include "lightguard/rng.hpp"
#include "lightguard/scenario.hpp"
#include "lightguard/wire.hpp"

namespace faults {

namespace ks = lightguard::keysync;

struct ScheduleParams {
  double drop = 0;
  double duplicate = 0;
  double delay = 0;
  double corrupt_prepare = 0;
  lightguard::SimTime max_delay{0};
};

inline ScheduleParams draw_params(std::uint64_t fault_seed, lightguard::SimTime commit_timeout) {
  lightguard::Rng rng(lightguard::mix_seed(fault_seed, "fault-params"));
  ScheduleParams p;
  p.drop = 0.6 * rng.uniform01();
  p.duplicate = 0.3 * rng.uniform01();
  p.delay = 0.5 * rng.uniform01();
  p.corrupt_prepare = 0.05;
  p.max_delay = commit_timeout / 2;
  return p;
}

inline bool is_commit_phase(ks::SyncKind kind) {
  return kind == ks::SyncKind::Prepare || kind == ks::SyncKind::PrepareAck ||
         kind == ks::SyncKind::Commit || kind == ks::SyncKind::CommitAck ||
         kind == ks::SyncKind::Abort;
}

// Faults apply to commit-phase messages of every rekey after the bootstrap.
inline lightguard::netsim::FaultInjector make_injector(ScheduleParams p) {
  return [p](const lightguard::netsim::MediumTaggedFrame &frame, lightguard::Rng &rng) {
    lightguard::netsim::FaultAction action;
    const auto &octets = frame.payload();
    if (lightguard::wire::type_of(octets) != lightguard::wire::FrameType::Sync) return action;
    const auto m = ks::decode_sync(lightguard::wire::body_of(octets));
    if (!is_commit_phase(m.kind) || m.epoch < 2) return action;
    if (rng.bernoulli(p.drop)) {
      action.drop = true;
      return action;
    }
    if (rng.bernoulli(p.duplicate)) action.extra_copies = 1;
    if (rng.bernoulli(p.delay)) {
      action.extra_delay = lightguard::SimTime(
          static_cast<std::int64_t>(rng.uniform_int(0, static_cast<std::uint64_t>(p.max_delay.count()))));
    }
    if (m.kind == ks::SyncKind::Prepare && !m.payload.empty() && rng.bernoulli(p.corrupt_prepare)) {
      auto bad = m;
      bad.payload[rng.uniform_int(0, bad.payload.size() - 1)] ^= 0x5a;
      action.corrupted_payload =
          lightguard::wire::frame(lightguard::wire::FrameType::Sync, ks::encode(bad));
    }
    return action;
  };
}

// Three rekeys at 0, 400 and 800 ms with coarse traffic. The run lasts long
// enough for a stalled STA to give up before the end.
inline lightguard::scenario::ScenarioConfig base_config(std::uint64_t scenario_seed) {
  lightguard::scenario::ScenarioConfig cfg;
  cfg.seed = scenario_seed;
  cfg.duration = lightguard::from_ms(3'000);
  cfg.rekey.interval = lightguard::from_ms(400);
  cfg.max_scheduled_rekeys = 3;
  cfg.traffic.tick = lightguard::from_ms(10);
  cfg.record_log = false;
  return cfg;
}

struct Outcome {
  bool ok = true;
  std::string why;
  int aborted_windows = 0;
  int succeeded_windows = 0;
};

// Checks one faulted run: no invariant fired, both sides end Active on the
// same epoch and key, each epoch advance matches a successful window, and
// no frame failed to decrypt.
inline Outcome check_run(const lightguard::scenario::ScenarioResult &r) {
  Outcome o;
  auto fail = [&](std::string why) {
    o.ok = false;
    o.why = std::move(why);
    return o;
  };
  for (const auto &w : r.rekeys) {
    if (w.succeeded) ++o.succeeded_windows;
    if (w.outcome == "Aborted") ++o.aborted_windows;
  }
  if (r.report.violation) {
    return fail("invariant " + r.report.violation->hook + ": " + r.report.violation->detail);
  }
  if (r.ap.phase != ks::Phase::Active || r.sta.phase != ks::Phase::Active) {
    return fail(std::string("end phases ") + ks::to_string(r.ap.phase) + "/" +
                ks::to_string(r.sta.phase));
  }
  if (r.ap.epoch != r.sta.epoch) return fail("epochs differ at the end");
  if (!r.ap.active_ptk || !r.sta.active_ptk || !(*r.ap.active_ptk == *r.sta.active_ptk)) {
    return fail("active keys differ at the end");
  }
  if (static_cast<int>(r.ap.epoch) != o.succeeded_windows) {
    return fail("epoch " + std::to_string(r.ap.epoch) + " after " +
                std::to_string(o.succeeded_windows) + " successful rekeys");
  }
  if (r.decrypt_failures() != 0) {
    return fail(std::to_string(r.decrypt_failures()) + " decrypt failures");
  }
  return o;
}

}  // namespace faults
