#pragma once

// One simulated AP/STA pair: the key synchronization sessions and the
// 4-way handshake driven over the simulated media, WiFi traffic, taps and
// the global invariant hooks.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lightguard/crypto.hpp"
#include "lightguard/dataplane.hpp"
#include "lightguard/fourway.hpp"
#include "lightguard/keysync.hpp"
#include "lightguard/netsim.hpp"

namespace lightguard::scenario {

using netsim::Medium;

// LightGuard runs the handshake on LiFi. Baseline runs the same handshake
// in-band on RF and changes nothing else.
enum class Mode { LightGuard, Baseline };
const char *to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

struct AngleChange {
  SimTime at{0};
  double angle_deg = 0.0;
};

struct TapSpec {
  std::string id;
  Medium medium = Medium::RF;
  // LiFi only. An in-cone tap sits on the beam axis unless angle_deg is
  // given; an out-of-cone tap sits beyond the cut-off.
  bool in_cone = true;
  std::optional<double> angle_deg;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  SimTime duration = from_ms(120'000);
  Mode mode = Mode::LightGuard;

  netsim::LifiChannelModel lifi;
  netsim::RfChannelModel rf;
  std::vector<AngleChange> angle_schedule;

  keysync::RekeyPolicy rekey;
  fourway::HandshakeConfig handshake;
  // false: only the bootstrap rekey at t = 0.
  bool periodic_rekey = true;
  // Caps the number of scheduled rekeys, bootstrap included; 0 = no cap.
  int max_scheduled_rekeys = 0;

  dataplane::TrafficConfig traffic;
  bool traffic_enabled = true;

  std::vector<TapSpec> taps;

  // Shared memo of PBKDF2 results; optional.
  std::shared_ptr<crypto::PmkCache> pmk_cache;

  // Faults applied to frames on each medium after channel loss.
  netsim::FaultInjector lifi_faults;
  netsim::FaultInjector rf_faults;

  // Test-only: the supplicant sends M2 on RF. Must trip the confinement hook.
  bool inject_m2_over_rf = false;

  bool record_log = true;

  void validate() const;
};

// One keysync record: a phase change or a sent synchronization message.
struct LogRecord {
  double time_ms = 0;
  std::string node;
  std::string phase_from;
  std::string phase_to;
  std::uint32_t epoch = 0;
  std::string medium;
  std::string message_kind;
};

struct RekeyWindow {
  SimTime start{0};
  SimTime end{0};
  std::uint32_t target_epoch = 0;
  bool succeeded = false;
  std::string outcome;  // Active, Aborted, Disconnected, ...
};

// Ground truth for the adversary checks.
struct KeyRecord {
  std::uint32_t epoch = 0;
  crypto::Passphrase passphrase;
  crypto::Ptk ptk;
};

struct NodeSummary {
  keysync::Phase phase = keysync::Phase::Idle;
  std::uint32_t epoch = 0;
  std::optional<crypto::Ptk> active_ptk;
};

struct ScenarioResult {
  netsim::SimulationReport report;
  std::vector<LogRecord> log;
  std::vector<RekeyWindow> rekeys;
  std::vector<KeyRecord> keys;
  std::vector<netsim::TapTranscript> transcripts;
  std::vector<dataplane::MetricSample> samples;
  dataplane::FlowCounters downlink;
  dataplane::FlowCounters uplink;
  std::vector<dataplane::Interval> ap_down_intervals;  // closed at the end time
  std::optional<SimTime> ap_first_up;
  SimTime downtime{0};
  std::vector<SimTime> pause_durations;
  NodeSummary ap;
  NodeSummary sta;
  std::uint64_t aborts = 0;

  std::uint64_t decrypt_failures() const {
    return downlink.decrypt_failures + uplink.decrypt_failures;
  }
  std::size_t rekeys_succeeded() const;
};

inline const crypto::MacAddress kApAddress{{0x02, 0x00, 0x00, 0x00, 0x00, 0x01}};
inline const crypto::MacAddress kStaAddress{{0x02, 0x00, 0x00, 0x00, 0x00, 0x02}};
inline constexpr std::string_view kSsid = "LightGuard";

// Runs one scenario to config.duration, or to the first invariant violation.
ScenarioResult run_scenario(const ScenarioConfig &config);

}  // namespace lightguard::scenario
