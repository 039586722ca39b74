#include "lightguard/netsim.hpp"

#include <cmath>

namespace lightguard::netsim {

const char *to_string(Medium medium) {
  return medium == Medium::RF ? "RF" : "LiFi";
}

EventId Simulator::schedule(SimTime at, std::string label, std::function<void()> action) {
  if (at < now_) {
    throw SchedulingError("cannot schedule '" + label + "' in the past (at " +
                          std::to_string(to_ms(at)) + " ms, now " +
                          std::to_string(to_ms(now_)) + " ms)");
  }
  const EventId id = next_id_++;
  queue_.push(Event{at, id, std::move(label), std::move(action)});
  live_.insert(id);
  return id;
}

bool Simulator::cancel(EventId id) {
  if (live_.erase(id) == 0) return false;
  cancelled_.insert(id);
  return true;
}

void Simulator::add_invariant(std::string name, InvariantHook hook) {
  hooks_.emplace_back(std::move(name), std::move(hook));
}

SimulationReport Simulator::run_until(SimTime t_end) {
  if (t_end < now_) throw SchedulingError("run_until target is in the past");
  SimulationReport report;
  while (!queue_.empty() && queue_.top().at <= t_end) {
    Event event = queue_.top();
    queue_.pop();
    if (cancelled_.erase(event.id) > 0) continue;
    live_.erase(event.id);
    now_ = event.at;
    event.action();
    ++processed_;
    for (const auto &[name, hook] : hooks_) {
      if (auto detail = hook()) {
        report.violation = InvariantViolation{name, event.label, now_, *detail};
        report.end = now_;
        report.events_processed = processed_;
        return report;
      }
    }
  }
  now_ = t_end;
  report.end = now_;
  report.events_processed = processed_;
  return report;
}

void LifiChannelModel::validate() const {
  if (!(theta_full_deg > 0.0 && theta_full_deg < theta_cut_deg)) {
    throw std::invalid_argument("lifi: require 0 < theta_full_deg < theta_cut_deg");
  }
  if (!(propagation_delay_ms >= 0.0) || !(bitrate_frames_per_ms > 0.0)) {
    throw std::invalid_argument("lifi: delay must be >= 0 and frame rate > 0");
  }
}

double LifiChannelModel::delivery_probability(double angle) const {
  const double a = std::fabs(angle);
  if (a <= theta_full_deg) return 1.0;
  if (a >= theta_cut_deg) return 0.0;
  return (theta_cut_deg - a) / (theta_cut_deg - theta_full_deg);
}

void RfChannelModel::validate() const {
  if (!(delivery_probability >= 0.0 && delivery_probability <= 1.0)) {
    throw std::invalid_argument("rf: delivery_probability must be in [0, 1]");
  }
  if (!(propagation_delay_ms >= 0.0)) {
    throw std::invalid_argument("rf: propagation_delay_ms must be >= 0");
  }
}

TransmitOutcome lifi_transmit(const LifiChannelModel &model,
                              const MediumTaggedFrame &frame, Rng &rng) {
  if (!rng.bernoulli(model.delivery_probability())) return {};
  return {true, frame.tx_time() + from_ms(model.propagation_delay_ms)};
}

TransmitOutcome rf_transmit(const RfChannelModel &model, const MediumTaggedFrame &frame,
                            Rng &rng) {
  if (!rng.bernoulli(model.delivery_probability)) return {};
  return {true, frame.tx_time() + from_ms(model.propagation_delay_ms)};
}

void Channel::notify(const MediumTaggedFrame &frame) {
  ++transmitted_;
  for (const auto &observer : observers_) observer(frame);
}

void Channel::deliver_later(const MediumTaggedFrame &frame, SimTime at) {
  int copies = 1;
  MediumTaggedFrame delivered = frame;
  if (injector_) {
    FaultAction fault = injector_(frame, fault_rng_);
    if (fault.drop) return;
    copies += fault.extra_copies;
    at += fault.extra_delay;
    if (fault.corrupted_payload) {
      delivered = MediumTaggedFrame(frame.medium(), frame.src(), frame.dst(),
                                    std::move(*fault.corrupted_payload), frame.tx_time());
    }
  }
  auto it = receivers_.find(frame.dst());
  if (it == receivers_.end()) return;
  Receiver receiver = it->second;
  for (int i = 0; i < copies; ++i) {
    // Duplicates trail the original by one microsecond each.
    sim_.schedule(at + SimTime(i),
                  std::string(to_string(frame.medium())) + " delivery to " +
                      frame.dst().to_string(),
                  [receiver, delivered] { receiver(delivered); });
  }
}

std::size_t RfChannel::add_tap(std::string id) {
  taps_.emplace_back(std::move(id), Transcript(Medium::RF));
  return taps_.size() - 1;
}

TransmitOutcome RfChannel::transmit(const MacAddress &src, const MacAddress &dst,
                                    Bytes payload) {
  MediumTaggedFrame frame(Medium::RF, src, dst, std::move(payload), sim_.now());
  notify(frame);
  for (auto &[id, transcript] : taps_) transcript.append(sim_.now(), frame.payload());
  const auto outcome = rf_transmit(model_, frame, rng_);
  if (outcome.delivered) deliver_later(frame, outcome.at);
  return outcome;
}

std::size_t LifiChannel::add_tap(std::string id, double angle_deg) {
  taps_.push_back(LifiTap{std::move(id), angle_deg});
  return taps_.size() - 1;
}

TransmitOutcome LifiChannel::transmit(const MacAddress &src, const MacAddress &dst,
                                      Bytes payload) {
  SimTime start = sim_.now();
  if (auto it = busy_until_.find(src); it != busy_until_.end() && it->second > start) {
    start = it->second;
  }
  const SimTime on_air = start + model_.serialization_time();
  busy_until_[src] = on_air;

  MediumTaggedFrame frame(Medium::LiFi, src, dst, std::move(payload), on_air);
  notify(frame);
  for (auto &tap : taps_) {
    if (tap_rng_.bernoulli(model_.delivery_probability(tap.angle_deg))) {
      tap.transcript.append(on_air, frame.payload());
    }
  }
  const auto outcome = lifi_transmit(model_, frame, rng_);
  if (outcome.delivered) deliver_later(frame, outcome.at);
  return outcome;
}

}  // namespace lightguard::netsim
