#include "lightguard/dataplane.hpp"

#include <algorithm>
#include <stdexcept>

#include "lightguard/wire.hpp"

namespace lightguard::dataplane {

namespace {

constexpr std::uint8_t kBatchFrame = 0;
constexpr std::uint8_t kKeepaliveFrame = 1;
constexpr std::size_t kDataHeader = 1 + 8;  // kind || seq

}  // namespace

const char *to_string(LinkState state) {
  switch (state) {
    case LinkState::Up: return "Up";
    case LinkState::Paused: return "Paused";
    case LinkState::Down: return "Down";
  }
  return "?";
}

std::optional<std::uint32_t> WifiLink::current_epoch() const {
  if (keys_.empty()) return std::nullopt;
  return keys_.back().epoch;
}

std::vector<std::uint32_t> WifiLink::rx_epochs() const {
  std::vector<std::uint32_t> out;
  for (const auto &k : keys_) out.push_back(k.epoch);
  return out;
}

bool WifiLink::install_key(std::uint32_t epoch, const Ptk &ptk) {
  if (!keys_.empty() && epoch != keys_.back().epoch + 1) return false;
  keys_.push_back(KeySlot{epoch, ptk.tk, 0, {}});
  if (keys_.size() > 2) keys_.erase(keys_.begin());
  return true;
}

void WifiLink::revert_key() {
  if (!keys_.empty()) keys_.pop_back();
}

void WifiLink::enter(LinkState next, SimTime now) {
  if (next == state_) return;
  if (state_ == LinkState::Down && down_at_) {
    down_intervals_.push_back({*down_at_, now});
    down_at_.reset();
  }
  if (state_ == LinkState::Paused && paused_at_) {
    pause_durations_.push_back(now - *paused_at_);
    paused_at_.reset();
  }
  if (next == LinkState::Down && first_up_) down_at_ = now;
  if (next == LinkState::Paused) paused_at_ = now;
  if (next == LinkState::Up && !first_up_) first_up_ = now;
  state_ = next;
}

void WifiLink::pause(SimTime now) {
  enter(LinkState::Paused, now);
}

void WifiLink::resume(SimTime now) {
  if (has_key()) enter(LinkState::Up, now);
}

void WifiLink::take_down(SimTime now) { enter(LinkState::Down, now); }

SimTime WifiLink::downtime(SimTime now) const {
  SimTime total{0};
  for (const auto &i : down_intervals_) total += i.end - i.start;
  if (down_at_) total += now - *down_at_;
  return total;
}

Bytes WifiLink::protect(ByteView payload) {
  if (keys_.empty()) throw std::logic_error("protect without an installed key");
  auto &slot = keys_.back();
  Bytes body;
  append_be(body, slot.epoch, 4);
  append(body, crypto::protect_frame(slot.tk, slot.next_pn++, payload));
  return body;
}

RxResult WifiLink::receive(ByteView body) {
  RxResult r;
  if (body.size() < 4 + crypto::kAeadOverhead) return r;
  r.epoch = static_cast<std::uint32_t>(read_be(body, 4));
  auto slot = std::find_if(keys_.begin(), keys_.end(),
                           [&](const KeySlot &k) { return k.epoch == r.epoch; });
  if (slot == keys_.end()) {
    r.status = RxStatus::NoKey;
    return r;
  }
  auto plain = crypto::unprotect_frame(slot->tk, body.subspan(4));
  if (!plain) {
    r.status = RxStatus::AuthFailure;
    return r;
  }
  if (!slot->replay.accept(plain->packet_number)) {
    r.status = RxStatus::Replay;
    return r;
  }
  r.status = RxStatus::Accepted;
  r.payload = std::move(plain->payload);
  return r;
}

void TrafficConfig::validate() const {
  if (offered_load_mbps < 0 || uplink_mbps < 0 || nominal_throughput_mbps <= 0) {
    throw std::invalid_argument("traffic: rates must be non-negative, nominal > 0");
  }
  if (tick <= SimTime(0) || metric_interval <= SimTime(0) || window <= SimTime(0)) {
    throw std::invalid_argument("traffic: tick, metric interval and window must be > 0");
  }
}

Bytes encode_batch(std::uint64_t seq, SimTime generated, std::uint32_t bytes) {
  Bytes out;
  append_be(out, seq, 8);
  append_be(out, static_cast<std::uint64_t>(generated.count()), 8);
  append_be(out, bytes, 4);
  return out;
}

std::optional<ByteView> link_body(ByteView data_frame_body) {
  if (data_frame_body.size() < kDataHeader) return std::nullopt;
  return data_frame_body.subspan(kDataHeader);
}

TrafficPump::TrafficPump(netsim::Simulator &sim, netsim::RfChannel &rf, Endpoint ap,
                         Endpoint sta, TrafficConfig config)
    : sim_(sim), rf_(rf), config_(config) {
  config_.validate();
  flows_[0] = Flow{ap, sta, config_.offered_load_mbps, 0, {}, {}};
  flows_[1] = Flow{sta, ap, config_.uplink_mbps, 0, {}, {}};
}

void TrafficPump::start(SimTime until) {
  until_ = until;
  sim_.schedule(sim_.now(), "traffic tick", [this] { tick(); });
  if (sim_.now() + config_.metric_interval <= until_) {
    sim_.schedule(sim_.now() + config_.metric_interval, "metric sample", [this] { sample(); });
  }
}

void TrafficPump::tick() {
  const double seconds = static_cast<double>(config_.tick.count()) / 1e6;
  for (auto &flow : flows_) {
    if (flow.rate_mbps <= 0) continue;
    const auto bytes = static_cast<std::uint32_t>(flow.rate_mbps * 1e6 / 8.0 * seconds);
    offer(flow, Batch{flow.next_seq++, sim_.now(), bytes});
  }
  if (sim_.now() + config_.tick <= until_) {
    sim_.schedule(sim_.now() + config_.tick, "traffic tick", [this] { tick(); });
  }
}

void TrafficPump::offer(Flow &flow, Batch batch) {
  ++flow.counters.offered;
  switch (flow.from.link->state()) {
    case LinkState::Down:
      ++flow.counters.dropped;
      return;
    case LinkState::Paused:
      ++flow.counters.queued;
      flow.queue.push_back(batch);
      return;
    case LinkState::Up:
      if (!flow.from.link->has_key()) {
        ++flow.counters.dropped;
        return;
      }
      send(flow, batch);
      return;
  }
}

void TrafficPump::send(Flow &flow, const Batch &batch) {
  Bytes body{kBatchFrame};
  append_be(body, batch.seq, 8);
  append(body, flow.from.link->protect(encode_batch(batch.seq, batch.generated, batch.bytes)));
  const auto outcome =
      rf_.transmit(flow.from.address, flow.to.address, wire::frame(wire::FrameType::Data, body));
  if (outcome.delivered) {
    ++flow.counters.queued;  // on the air
  } else {
    ++flow.counters.dropped;
  }
}

void TrafficPump::flush(Side side) {
  auto &flow = flow_from(side);
  while (!flow.queue.empty() && flow.from.link->can_transmit()) {
    Batch b = flow.queue.front();
    flow.queue.pop_front();
    --flow.counters.queued;
    send(flow, b);
  }
}

void TrafficPump::discard_queue(Side side) {
  auto &flow = flow_from(side);
  flow.counters.queued -= flow.queue.size();
  flow.counters.dropped += flow.queue.size();
  flow.queue.clear();
}

void TrafficPump::send_keepalive(Side side) {
  auto &flow = flow_from(side);
  if (!flow.from.link->can_transmit()) return;
  Bytes body{kKeepaliveFrame};
  append_be(body, 0, 8);
  append(body, flow.from.link->protect({}));
  rf_.transmit(flow.from.address, flow.to.address, wire::frame(wire::FrameType::Data, body));
}

void TrafficPump::receive(Side side, ByteView body) {
  if (body.size() < kDataHeader) return;
  const bool keepalive = body[0] == kKeepaliveFrame;
  // The sending flow is the one addressed to `side`.
  auto &flow = flow_from(side == Side::Ap ? Side::Sta : Side::Ap);
  if (!keepalive) --flow.counters.queued;

  auto &link = *flow.to.link;
  if (link.state() == LinkState::Down) {
    if (!keepalive) ++flow.counters.dropped;
    return;
  }
  auto rx = link.receive(body.subspan(kDataHeader));
  if (rx.status != RxStatus::Accepted) {
    if (rx.status == RxStatus::Replay) {
      ++flow.counters.replays;
    } else {
      ++flow.counters.decrypt_failures;
    }
    if (!keepalive) ++flow.counters.dropped;
    return;
  }
  if (on_accepted) on_accepted(side, rx.epoch);
  if (keepalive || rx.payload.size() < 20) return;

  ++flow.counters.delivered;
  const SimTime generated(static_cast<std::int64_t>(read_be(ByteView(rx.payload).subspan(8), 8)));
  const auto bytes = static_cast<double>(read_be(ByteView(rx.payload).subspan(16), 4));
  const double latency = to_ms(sim_.now() - generated);
  flow.counters.delivered_bytes += bytes;
  flow.counters.latency_sum_ms += latency;
  ++flow.counters.latency_samples;
  if (side == Side::Sta) {
    window_.emplace_back(sim_.now(), bytes);
    interval_latency_sum_ += latency;
    ++interval_latency_n_;
  }
}

void TrafficPump::sample() {
  const SimTime now = sim_.now();
  while (!window_.empty() && window_.front().first <= now - config_.window) {
    window_.pop_front();
  }
  double bytes = 0;
  for (const auto &[t, b] : window_) bytes += b;
  const SimTime span = std::min(config_.window, now);
  const double seconds = static_cast<double>(span.count()) / 1e6;

  MetricSample s;
  s.t_ms = to_ms(now);
  s.throughput_mbps =
      std::min(config_.nominal_throughput_mbps, bytes * 8.0 / seconds / 1e6);
  s.latency_ms = interval_latency_n_ ? interval_latency_sum_ / interval_latency_n_ : 0.0;
  s.decrypt_failures = total_decrypt_failures();
  const auto a = flows_[0].from.link->state();
  const auto b = flows_[1].from.link->state();
  if (a == LinkState::Down || b == LinkState::Down) {
    s.link_state = LinkState::Down;
  } else if (a == LinkState::Paused || b == LinkState::Paused) {
    s.link_state = LinkState::Paused;
  } else {
    s.link_state = LinkState::Up;
  }
  s.epoch = flows_[0].from.link->current_epoch().value_or(0);
  if (phase_label) s.rekey_phase = phase_label();
  samples_.push_back(std::move(s));

  interval_latency_sum_ = 0;
  interval_latency_n_ = 0;
  if (now + config_.metric_interval <= until_) {
    sim_.schedule(now + config_.metric_interval, "metric sample", [this] { sample(); });
  }
}

}  // namespace lightguard::dataplane
