#pragma once

// Simulated WiFi data channel: per-epoch key installation, protected
// traffic, and throughput/latency metering.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lightguard/crypto.hpp"
#include "lightguard/netsim.hpp"
#include "lightguard/time.hpp"

namespace lightguard::dataplane {

using crypto::Ptk;

enum class LinkState { Up, Paused, Down };
const char *to_string(LinkState state);

struct Interval {
  SimTime start{0};
  SimTime end{0};
};

enum class RxStatus { Accepted, NoKey, AuthFailure, Replay, Malformed };

struct RxResult {
  RxStatus status = RxStatus::Malformed;
  std::uint32_t epoch = 0;
  Bytes payload;
};

// One endpoint's WiFi interface. Holds the transmit key and, after a
// switchover, the previous epoch's key for receive only. Transmission
// happens only in Up with a key installed.
class WifiLink {
 public:
  LinkState state() const { return state_; }
  bool has_key() const { return !keys_.empty(); }
  std::optional<std::uint32_t> current_epoch() const;
  std::vector<std::uint32_t> rx_epochs() const;

  // Accepted when the link has no key or epoch == current + 1; a stale or
  // skipped epoch is rejected and the link is left unchanged. Resets the
  // packet counter and replay window for the new epoch. Does not change
  // the link state: traffic resumes through resume().
  [[nodiscard]] bool install_key(std::uint32_t epoch, const Ptk &ptk);

  // Abort path: drops the newest key and returns transmission to the
  // previous one (or to no key at all).
  void revert_key();

  // From Up or Down. A Down link that pauses starts accepting frames again,
  // which is how a disconnected endpoint rejoins during a switchover.
  void pause(SimTime now);
  // Paused or Down -> Up when a key is installed.
  void resume(SimTime now);
  void take_down(SimTime now);

  bool can_transmit() const { return state_ == LinkState::Up && has_key(); }

  // epoch (4 octets BE) || AEAD frame under the current key.
  Bytes protect(ByteView payload);
  RxResult receive(ByteView body);

  const std::vector<SimTime> &pause_durations() const { return pause_durations_; }
  const std::vector<Interval> &down_intervals() const { return down_intervals_; }
  std::optional<SimTime> first_up() const { return first_up_; }
  // Total downtime after the link first came up, counting an open interval
  // up to `now`.
  SimTime downtime(SimTime now) const;

 private:
  struct KeySlot {
    std::uint32_t epoch;
    crypto::Key128 tk;
    std::uint64_t next_pn = 0;
    crypto::ReplayWindow replay;
  };

  void enter(LinkState next, SimTime now);

  LinkState state_ = LinkState::Down;
  std::vector<KeySlot> keys_;  // back() transmits; at most two
  std::optional<SimTime> paused_at_;
  std::optional<SimTime> down_at_;
  std::optional<SimTime> first_up_;
  std::vector<SimTime> pause_durations_;
  std::vector<Interval> down_intervals_;
};

struct TrafficConfig {
  double offered_load_mbps = 80.0;  // downlink, metered
  double uplink_mbps = 8.0;
  double nominal_throughput_mbps = 80.0;
  SimTime tick = from_ms(1);
  SimTime metric_interval = from_ms(100);
  SimTime window = from_ms(500);

  void validate() const;
};

struct MetricSample {
  double t_ms = 0;
  double throughput_mbps = 0;
  double latency_ms = 0;
  std::uint64_t decrypt_failures = 0;
  LinkState link_state = LinkState::Down;
  std::uint32_t epoch = 0;
  std::string rekey_phase;
};

enum class Side { Ap = 0, Sta = 1 };

struct FlowCounters {
  std::uint64_t offered = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t queued = 0;     // waiting in the sender queue or on the air
  std::uint64_t decrypt_failures = 0;
  std::uint64_t replays = 0;
  double delivered_bytes = 0;
  double latency_sum_ms = 0;
  std::uint64_t latency_samples = 0;

  bool conserved() const { return offered == delivered + dropped + queued; }
};

// Fluid traffic model: every tick each direction offers one batch frame
// carrying tick * rate worth of bytes. Batches are queued while the sender
// is Paused, dropped while it is Down, and flushed on resume.
class TrafficPump {
 public:
  struct Endpoint {
    crypto::MacAddress address;
    WifiLink *link;
  };

  TrafficPump(netsim::Simulator &sim, netsim::RfChannel &rf, Endpoint ap, Endpoint sta,
              TrafficConfig config);

  // Schedules traffic ticks and metric samples up to `until`.
  void start(SimTime until);

  // Route an RF data frame body addressed to `side`.
  void receive(Side side, ByteView body);

  // Transmit everything queued while paused.
  void flush(Side side);
  // Drop everything queued (link torn down).
  void discard_queue(Side side);
  // Protected null frame, used to confirm a new key to the peer.
  void send_keepalive(Side side);

  // Called for each accepted frame with the epoch it was protected under.
  std::function<void(Side receiver, std::uint32_t epoch)> on_accepted;
  // Label for the rekey_phase column.
  std::function<std::string()> phase_label;

  const std::vector<MetricSample> &samples() const { return samples_; }
  const FlowCounters &counters(Side sender) const {
    return flows_[static_cast<int>(sender)].counters;
  }
  std::uint64_t total_decrypt_failures() const {
    return flows_[0].counters.decrypt_failures + flows_[1].counters.decrypt_failures;
  }

 private:
  struct Batch {
    std::uint64_t seq;
    SimTime generated;
    std::uint32_t bytes;
  };
  struct Flow {
    Endpoint from;
    Endpoint to;
    double rate_mbps;
    std::uint64_t next_seq = 0;
    std::deque<Batch> queue;
    FlowCounters counters;
  };

  void tick();
  void sample();
  void offer(Flow &flow, Batch batch);
  void send(Flow &flow, const Batch &batch);
  Flow &flow_from(Side side) { return flows_[static_cast<int>(side)]; }

  netsim::Simulator &sim_;
  netsim::RfChannel &rf_;
  TrafficConfig config_;
  Flow flows_[2];
  SimTime until_{0};
  std::deque<std::pair<SimTime, double>> window_;  // downlink deliveries
  double interval_latency_sum_ = 0;
  std::uint64_t interval_latency_n_ = 0;
  std::vector<MetricSample> samples_;
};

// Plaintext of one traffic batch: seq || generation time (us) || byte count.
Bytes encode_batch(std::uint64_t seq, SimTime generated, std::uint32_t bytes);

// The WifiLink body (epoch || AEAD frame) inside an RF data frame body,
// or nullopt when too short.
std::optional<ByteView> link_body(ByteView data_frame_body);

}  // namespace lightguard::dataplane
