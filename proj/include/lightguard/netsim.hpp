#pragma once

// Deterministic discrete-event simulator with two media: an open RF
// broadcast channel and an angularly confined LiFi channel.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "lightguard/bytes.hpp"
#include "lightguard/crypto.hpp"
#include "lightguard/rng.hpp"
#include "lightguard/time.hpp"

namespace lightguard::netsim {

using crypto::MacAddress;

enum class Medium : std::uint8_t { RF, LiFi };
const char *to_string(Medium medium);

// A frame as it was put on a medium. Immutable once constructed.
class MediumTaggedFrame {
 public:
  MediumTaggedFrame(Medium medium, MacAddress src, MacAddress dst, Bytes payload,
                    SimTime tx_time)
      : medium_(medium), src_(src), dst_(dst), payload_(std::move(payload)),
        tx_time_(tx_time) {}

  Medium medium() const { return medium_; }
  const MacAddress &src() const { return src_; }
  const MacAddress &dst() const { return dst_; }
  const Bytes &payload() const { return payload_; }
  SimTime tx_time() const { return tx_time_; }

 private:
  Medium medium_;
  MacAddress src_;
  MacAddress dst_;
  Bytes payload_;
  SimTime tx_time_;
};

// ---------------------------------------------------------------------------
// Clock and event queue

using EventId = std::uint64_t;

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct InvariantViolation {
  std::string hook;
  std::string event;
  SimTime at{0};
  std::string detail;
};

struct SimulationReport {
  SimTime end{0};
  std::uint64_t events_processed = 0;
  std::optional<InvariantViolation> violation;

  bool ok() const { return !violation.has_value(); }
};

// Returns a description of the violation, or nullopt when the invariant holds.
using InvariantHook = std::function<std::optional<std::string>()>;

class Simulator {
 public:
  SimTime now() const { return now_; }

  // Throws SchedulingError when `at` is in the past.
  EventId schedule(SimTime at, std::string label, std::function<void()> action);
  EventId schedule_in(SimTime delay, std::string label, std::function<void()> action) {
    return schedule(now_ + delay, std::move(label), std::move(action));
  }
  // False when the event already fired or was cancelled.
  bool cancel(EventId id);

  void add_invariant(std::string name, InvariantHook hook);

  // Processes every event with time <= t_end, checking all invariant hooks
  // after each one. Stops at the first violation. On a clean finish the
  // clock is advanced to t_end.
  SimulationReport run_until(SimTime t_end);

  std::size_t pending() const { return queue_.size() - cancelled_.size(); }

 private:
  struct Event {
    SimTime at;
    EventId id;
    std::string label;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Event &a, const Event &b) const {
      return a.at != b.at ? a.at > b.at : a.id > b.id;
    }
  };

  SimTime now_{0};
  EventId next_id_ = 1;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<EventId> cancelled_;
  std::unordered_set<EventId> live_;
  std::vector<std::pair<std::string, InvariantHook>> hooks_;
  std::uint64_t processed_ = 0;
};

// ---------------------------------------------------------------------------
// Channel models

struct LifiChannelModel {
  double angle_deg = 0.0;
  double theta_full_deg = 15.0;
  double theta_cut_deg = 25.0;
  double propagation_delay_ms = 1.0;
  double bitrate_frames_per_ms = 10.0;

  // Throws std::invalid_argument unless 0 < theta_full < theta_cut and the
  // timing parameters are positive.
  void validate() const;

  // 1 inside theta_full, 0 at or beyond theta_cut, linear in between.
  double delivery_probability(double angle) const;
  double delivery_probability() const { return delivery_probability(angle_deg); }

  SimTime serialization_time() const { return from_ms(1.0 / bitrate_frames_per_ms); }
};

struct RfChannelModel {
  double delivery_probability = 1.0;
  double propagation_delay_ms = 1.0;

  void validate() const;
};

struct TransmitOutcome {
  bool delivered = false;
  SimTime at{0};  // arrival time when delivered
};

// Single Bernoulli draw against p(angle); arrival = tx_time + delay.
TransmitOutcome lifi_transmit(const LifiChannelModel &model,
                              const MediumTaggedFrame &frame, Rng &rng);
TransmitOutcome rf_transmit(const RfChannelModel &model,
                            const MediumTaggedFrame &frame, Rng &rng);

// ---------------------------------------------------------------------------
// Taps and channels

struct TranscriptEntry {
  SimTime t{0};
  Bytes octets;
};

// Append-only record of what a passive listener heard on one medium.
class Transcript {
 public:
  explicit Transcript(Medium medium) : medium_(medium) {}

  Medium medium() const { return medium_; }
  const std::vector<TranscriptEntry> &frames() const { return frames_; }
  bool empty() const { return frames_.empty(); }

 private:
  friend class RfChannel;
  friend class LifiChannel;
  void append(SimTime t, const Bytes &octets) { frames_.push_back({t, octets}); }

  Medium medium_;
  std::vector<TranscriptEntry> frames_;
};

struct TapInfo {
  std::string id;
  Medium medium = Medium::RF;
  // LiFi only: the tap's own angular offset from the beam axis.
  double angle_deg = 0.0;
  bool in_cone = true;
};

struct TapTranscript {
  TapInfo info;
  Transcript transcript;
};

using Receiver = std::function<void(const MediumTaggedFrame &)>;

// Per-frame fault decision, applied on top of the channel's own loss.
struct FaultAction {
  bool drop = false;
  int extra_copies = 0;       // duplicates
  SimTime extra_delay{0};     // reordering
  std::optional<Bytes> corrupted_payload;  // delivered instead of the original
};
using FaultInjector = std::function<FaultAction(const MediumTaggedFrame &, Rng &)>;

// Observer called for every frame accepted for transmission, before any
// loss is applied. The medium confinement check hangs off this.
using TransmitObserver = std::function<void(const MediumTaggedFrame &)>;

class Channel {
 public:
  Channel(Simulator &sim, Rng rng) : sim_(sim), rng_(rng), fault_rng_(rng.substream("faults")) {}
  virtual ~Channel() = default;

  void attach(const MacAddress &address, Receiver receiver) {
    receivers_[address] = std::move(receiver);
  }
  void set_fault_injector(FaultInjector injector) { injector_ = std::move(injector); }
  void add_observer(TransmitObserver observer) { observers_.push_back(std::move(observer)); }

  virtual Medium medium() const = 0;
  virtual TransmitOutcome transmit(const MacAddress &src, const MacAddress &dst,
                                   Bytes payload) = 0;

  std::uint64_t frames_transmitted() const { return transmitted_; }

 protected:
  void deliver_later(const MediumTaggedFrame &frame, SimTime at);
  void notify(const MediumTaggedFrame &frame);

  Simulator &sim_;
  Rng rng_;
  Rng fault_rng_;
  std::map<MacAddress, Receiver> receivers_;
  FaultInjector injector_;
  std::vector<TransmitObserver> observers_;
  std::uint64_t transmitted_ = 0;
};

class RfChannel : public Channel {
 public:
  RfChannel(Simulator &sim, RfChannelModel model, Rng rng)
      : Channel(sim, rng), model_(model) {
    model_.validate();
  }

  Medium medium() const override { return Medium::RF; }
  const RfChannelModel &model() const { return model_; }

  // Every RF tap hears every transmitted frame.
  std::size_t add_tap(std::string id);
  const Transcript &transcript(std::size_t tap) const { return taps_.at(tap).second; }
  const std::string &tap_id(std::size_t tap) const { return taps_.at(tap).first; }
  std::size_t tap_count() const { return taps_.size(); }

  TransmitOutcome transmit(const MacAddress &src, const MacAddress &dst,
                           Bytes payload) override;

 private:
  RfChannelModel model_;
  std::vector<std::pair<std::string, Transcript>> taps_;
};

class LifiChannel : public Channel {
 public:
  LifiChannel(Simulator &sim, LifiChannelModel model, Rng rng)
      : Channel(sim, rng), model_(model), tap_rng_(rng.substream("taps")) {
    model_.validate();
  }

  Medium medium() const override { return Medium::LiFi; }
  const LifiChannelModel &model() const { return model_; }
  void set_angle(double angle_deg) { model_.angle_deg = angle_deg; }

  // A tap hears a frame with probability p(tap angle); taps outside the
  // cut-off cone hear nothing.
  std::size_t add_tap(std::string id, double angle_deg);
  const Transcript &transcript(std::size_t tap) const { return taps_.at(tap).transcript; }
  const std::string &tap_id(std::size_t tap) const { return taps_.at(tap).id; }
  std::size_t tap_count() const { return taps_.size(); }

  // Frames from one sender are serialized back to back at the model's
  // frame rate before propagating.
  TransmitOutcome transmit(const MacAddress &src, const MacAddress &dst,
                           Bytes payload) override;

 private:
  struct LifiTap {
    std::string id;
    double angle_deg;
    Transcript transcript{Medium::LiFi};
  };

  LifiChannelModel model_;
  Rng tap_rng_;
  std::vector<LifiTap> taps_;
  std::map<MacAddress, SimTime> busy_until_;
};

}  // namespace lightguard::netsim
