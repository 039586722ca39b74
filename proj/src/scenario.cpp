#include "lightguard/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "lightguard/eapol.hpp"
#include "lightguard/wire.hpp"

namespace lightguard::scenario {

namespace {

using dataplane::Side;
using keysync::Phase;

constexpr double kOutOfConeMarginDeg = 10.0;

std::string kind_name(const keysync::Event &event) { return keysync::describe(event); }

class Scenario {
 public:
  explicit Scenario(const ScenarioConfig &config)
      : cfg_(config),
        root_(config.seed),
        lifi_(sim_, config.lifi, root_.substream("lifi")),
        rf_(sim_, config.rf, root_.substream("rf")),
        keysync_rng_(root_.substream("keysync")),
        fourway_rng_(root_.substream("fourway")),
        cache_(config.pmk_cache ? config.pmk_cache : std::make_shared<crypto::PmkCache>()),
        pump_(sim_, rf_, {kApAddress, &ap_link_}, {kStaAddress, &sta_link_}, config.traffic) {
    ap_.side = Side::Ap;
    ap_.session = keysync::make_session(keysync::Role::AP, config.rekey, std::string(kSsid));
    sta_.side = Side::Sta;
    sta_.session = keysync::make_session(keysync::Role::STA, config.rekey, std::string(kSsid));
  }

  ScenarioResult run() {
    setup();
    result_.report = sim_.run_until(cfg_.duration);
    finish();
    return std::move(result_);
  }

 private:
  struct Node {
    Side side = Side::Ap;
    keysync::KeySyncSession session;
    std::optional<netsim::EventId> timer_event;
    std::optional<SimTime> timer_at;
  };

  struct Pending {
    Side side;
    keysync::Event event;
    std::string medium;
  };

  // ------------------------------------------------------------------ setup

  void setup() {
    lifi_.attach(kApAddress, [this](const auto &f) { on_frame(Side::Ap, f); });
    lifi_.attach(kStaAddress, [this](const auto &f) { on_frame(Side::Sta, f); });
    rf_.attach(kApAddress, [this](const auto &f) { on_frame(Side::Ap, f); });
    rf_.attach(kStaAddress, [this](const auto &f) { on_frame(Side::Sta, f); });
    if (cfg_.lifi_faults) lifi_.set_fault_injector(cfg_.lifi_faults);
    if (cfg_.rf_faults) rf_.set_fault_injector(cfg_.rf_faults);

    for (const auto &tap : cfg_.taps) {
      netsim::TapInfo info{tap.id, tap.medium, 0.0, true};
      if (tap.medium == Medium::RF) {
        rf_taps_.emplace_back(rf_.add_tap(tap.id), info);
      } else {
        info.angle_deg = tap.angle_deg.value_or(
            tap.in_cone ? 0.0 : cfg_.lifi.theta_cut_deg + kOutOfConeMarginDeg);
        info.in_cone = std::fabs(info.angle_deg) < cfg_.lifi.theta_cut_deg;
        lifi_taps_.emplace_back(lifi_.add_tap(tap.id, info.angle_deg), info);
      }
    }

    if (cfg_.mode == Mode::LightGuard) {
      rf_.add_observer([this](const netsim::MediumTaggedFrame &f) {
        if (wire::is_key_establishment(f.payload()) && !confinement_error_) {
          confinement_error_ = "key-establishment frame (type " +
                               std::to_string(f.payload()[0]) + ") transmitted on RF by " +
                               f.src().to_string();
        }
      });
      sim_.add_invariant("medium_confinement", [this] { return confinement_error_; });
    }
    sim_.add_invariant("commit_atomicity", [this] {
      return keysync::explain_atomicity_violation(view(ap_, ap_link_), view(sta_, sta_link_));
    });
    sim_.add_invariant("epoch_monotonicity", [this] { return epoch_error_; });
    sim_.add_invariant("traffic_conservation", [this]() -> std::optional<std::string> {
      if (!pump_.counters(Side::Ap).conserved()) return "downlink frame counts do not balance";
      if (!pump_.counters(Side::Sta).conserved()) return "uplink frame counts do not balance";
      return std::nullopt;
    });

    pump_.on_accepted = [this](Side receiver, std::uint32_t epoch) {
      if (receiver == Side::Sta && sta_.session.phase == Phase::Committed) {
        feed(Side::Sta, keysync::DataConfirmed{epoch}, "RF");
      }
    };
    pump_.phase_label = [this] { return std::string(keysync::to_string(ap_.session.phase)); };
    if (cfg_.traffic_enabled) pump_.start(cfg_.duration);

    for (const auto &change : cfg_.angle_schedule) {
      sim_.schedule(change.at, "angle change", [this, change] { on_angle(change.angle_deg); });
    }
    sim_.schedule(SimTime{0}, "rekey", [this] { try_start_rekey(); });
    if (cfg_.periodic_rekey) {
      int scheduled = 1;
      for (SimTime t = cfg_.rekey.interval; t < cfg_.duration; t += cfg_.rekey.interval) {
        if (cfg_.max_scheduled_rekeys > 0 && scheduled++ >= cfg_.max_scheduled_rekeys) break;
        sim_.schedule(t, "rekey", [this] { try_start_rekey(); });
      }
    }
  }

  keysync::NodeView view(const Node &node, const dataplane::WifiLink &link) const {
    keysync::NodeView v;
    v.phase = node.session.phase;
    v.epoch = node.session.epoch;
    v.transmitting = link.can_transmit();
    v.accepting = link.state() != dataplane::LinkState::Down && link.has_key();
    v.tx_epoch = link.current_epoch();
    v.rx_epochs = link.rx_epochs();
    return v;
  }

  Node &node(Side side) { return side == Side::Ap ? ap_ : sta_; }
  dataplane::WifiLink &link(Side side) { return side == Side::Ap ? ap_link_ : sta_link_; }
  const crypto::MacAddress &address(Side side) const {
    return side == Side::Ap ? kApAddress : kStaAddress;
  }
  const crypto::MacAddress &peer(Side side) const {
    return side == Side::Ap ? kStaAddress : kApAddress;
  }
  static const char *node_name(Side side) { return side == Side::Ap ? "AP" : "STA"; }

  // ---------------------------------------------------------------- frames

  void on_frame(Side to, const netsim::MediumTaggedFrame &frame) {
    const auto type = wire::type_of(frame.payload());
    if (!type) return;
    const ByteView body = wire::body_of(frame.payload());
    switch (*type) {
      case wire::FrameType::Eapol: {
        eapol::EapolKeyFrame key_frame;
        try {
          key_frame = eapol::decode(body);
        } catch (const eapol::CodecError &) {
          return;
        }
        if (to == Side::Ap) {
          if (auth_) handle_auth_step(fourway::authenticator_step(*auth_, fourway::FrameIn{key_frame}), false);
        } else if (supp_) {
          handle_supp_step(fourway::supplicant_step(*supp_, fourway::FrameIn{key_frame}));
        }
        return;
      }
      case wire::FrameType::Sync: {
        keysync::SyncMessage message;
        try {
          message = keysync::decode_sync(body);
        } catch (const keysync::SyncDecodeError &) {
          return;
        }
        feed(to, keysync::SyncIn{std::move(message)}, netsim::to_string(frame.medium()));
        return;
      }
      case wire::FrameType::Data:
        pump_.receive(to, body);
        return;
      case wire::FrameType::Deauth:
        if (to == Side::Sta) feed(Side::Sta, keysync::PeerDisconnected{}, "RF");
        return;
    }
  }

  netsim::Channel &eapol_channel(Side from, const eapol::EapolKeyFrame &frame) {
    if (cfg_.mode == Mode::Baseline) return rf_;
    if (cfg_.inject_m2_over_rf && from == Side::Sta && frame.msg_kind == eapol::MsgKind::M2) {
      return rf_;
    }
    return lifi_;
  }

  void send_eapol(Side from, const std::vector<eapol::EapolKeyFrame> &frames) {
    for (const auto &f : frames) {
      eapol_channel(from, f).transmit(address(from), peer(from),
                                      wire::frame(wire::FrameType::Eapol, eapol::encode(f)));
    }
  }

  // -------------------------------------------------------------- handshake

  void start_authenticator(const crypto::Pmk &pmk) {
    auth_ = fourway::make_authenticator(pmk, {kApAddress, kStaAddress}, fourway_rng_,
                                        cfg_.handshake.max_retries);
    ++hs_generation_;
    hs_started_ = sim_.now();
    mic_failure_seen_ = false;
    handle_auth_step(fourway::authenticator_step(*auth_, fourway::Start{}), false);
    feed(Side::Ap, keysync::HandshakeStarted{}, "");
  }

  void stop_authenticator() {
    auth_.reset();
    ++hs_generation_;
  }

  void handle_auth_step(fourway::Step<fourway::AuthenticatorState> step, bool from_timer) {
    if (step.discard == fourway::Discard::MicFailure) mic_failure_seen_ = true;
    auth_ = std::move(step.state);
    if (!step.out.empty()) {
      const bool m1_again =
          from_timer && std::any_of(step.out.begin(), step.out.end(), [](const auto &f) {
            return f.msg_kind == eapol::MsgKind::M1;
          });
      // The passphrase goes out ahead of the repeated M1.
      if (m1_again) feed(Side::Ap, keysync::HandshakeRetransmit{}, "");
      send_eapol(Side::Ap, step.out);
      const auto generation = ++hs_generation_;
      sim_.schedule_in(cfg_.handshake.timeout, "handshake timeout", [this, generation] {
        if (generation == hs_generation_ && auth_) {
          handle_auth_step(fourway::authenticator_step(*auth_, fourway::Timeout{}), true);
        }
      });
    }
    const int frames = auth_->frames_sent + (supp_ ? supp_->frames_sent : 0);
    if (auto done = fourway::outcome_of(*auth_, mic_failure_seen_, frames,
                                        sim_.now() - hs_started_)) {
      stop_authenticator();
      feed(Side::Ap, keysync::HandshakeDone{*done}, "");
    }
  }

  void handle_supp_step(fourway::Step<fourway::SupplicantState> step) {
    supp_ = std::move(step.state);
    send_eapol(Side::Sta, step.out);
    if (supp_reported_) return;
    if (supp_->phase == fourway::SuppPhase::Done) {
      supp_reported_ = true;
      fourway::HandshakeOutcome outcome;
      outcome.result = fourway::HandshakeResult::Success;
      outcome.ptk = supp_->derived;
      outcome.frames_sent = supp_->frames_sent;
      feed(Side::Sta, keysync::HandshakeDone{outcome}, "");
    } else if (supp_->phase == fourway::SuppPhase::Failed) {
      supp_reported_ = true;
      feed(Side::Sta, keysync::HandshakeDone{fourway::HandshakeOutcome{}}, "");
    }
  }

  // ---------------------------------------------------------------- keysync

  void try_start_rekey() {
    const auto phase = ap_.session.phase;
    if (phase != Phase::Idle && phase != Phase::Active && phase != Phase::Disconnected) return;
    apply(Side::Ap, keysync::start_rekey(ap_.session, keysync_rng_, sim_.now()), "", "StartRekey");
    drain();
  }

  void on_angle(double angle) {
    lifi_.set_angle(angle);
    const keysync::LinkReport report{angle, std::fabs(angle) <= cfg_.lifi.theta_full_deg};
    auto t = keysync::handle_link_report(ap_.session, report, keysync_rng_, sim_.now());
    if (t.session.phase != ap_.session.phase) {
      apply(Side::Ap, std::move(t), "", keysync::describe(report));
      drain();
    }
  }

  // Events raised while a transition is being applied are queued and
  // processed afterwards, in order.
  void feed(Side side, keysync::Event event, std::string medium) {
    pending_.push_back(Pending{side, std::move(event), std::move(medium)});
    if (!applying_) drain();
  }

  void drain() {
    if (applying_) return;
    while (!pending_.empty()) {
      Pending p = std::move(pending_.front());
      pending_.pop_front();
      auto t = keysync::advance(node(p.side).session, p.event, sim_.now());
      apply(p.side, std::move(t), p.medium, kind_name(p.event));
    }
  }

  void log(Side side, const std::string &from, const std::string &to, std::uint32_t epoch,
           std::string medium, std::string kind) {
    if (!cfg_.record_log) return;
    result_.log.push_back(LogRecord{to_ms(sim_.now()), node_name(side), from, to, epoch,
                                    std::move(medium), std::move(kind)});
  }

  void apply(Side side, keysync::Transition t, const std::string &medium,
             const std::string &cause) {
    applying_ = true;
    Node &n = node(side);
    const keysync::KeySyncSession before = n.session;
    n.session = std::move(t.session);
    const auto &after = n.session;

    if (after.epoch < before.epoch || after.epoch > before.epoch + 1) {
      epoch_error_ = std::string(node_name(side)) + " epoch moved from " +
                     std::to_string(before.epoch) + " to " + std::to_string(after.epoch);
    }
    if (before.phase != after.phase) {
      log(side, keysync::to_string(before.phase), keysync::to_string(after.phase), after.epoch,
          medium, cause);
    }
    if (side == Side::Ap) track_rekey(before, after);

    for (auto &action : t.actions) perform(side, action);
    sync_timer(n);
    applying_ = false;
  }

  void track_rekey(const keysync::KeySyncSession &before,
                   const keysync::KeySyncSession &after) {
    if (!before.rekey_in_progress() && after.rekey_in_progress()) {
      window_ = RekeyWindow{sim_.now(), sim_.now(), after.target_epoch(), false, "InProgress"};
      return;
    }
    if (!(before.rekey_in_progress() && !after.rekey_in_progress()) || !window_) return;
    window_->end = sim_.now();
    if (after.phase == Phase::Active && after.epoch == before.epoch + 1) {
      window_->succeeded = true;
      window_->outcome = "Active";
      result_.keys.push_back(KeyRecord{after.epoch, *before.passphrase, *after.active_ptk});
    } else if (after.phase == Phase::Disconnected) {
      window_->outcome = before.phase == Phase::PassphraseSent ||
                                 before.phase == Phase::Handshaking
                             ? "HandshakeFailed"
                             : "Aborted";
    } else if (before.phase == Phase::PassphraseSent || before.phase == Phase::Handshaking) {
      window_->outcome = "HandshakeFailed";
    } else {
      window_->outcome = "Aborted";
    }
    if (window_->outcome == "Aborted") ++result_.aborts;
    result_.rekeys.push_back(*window_);
    window_.reset();
  }

  void perform(Side side, keysync::Action &action) {
    Node &n = node(side);
    auto &l = link(side);
    std::visit(
        [&](auto &a) {
          using A = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<A, keysync::SendSync>) {
            lifi_.transmit(address(side), peer(side),
                           wire::frame(wire::FrameType::Sync, keysync::encode(a.message)));
            log(side, keysync::to_string(n.session.phase), keysync::to_string(n.session.phase),
                n.session.epoch, "LiFi", std::string("tx:") + keysync::to_string(a.message.kind));
          } else if constexpr (std::is_same_v<A, keysync::StartHandshake>) {
            const auto pmk = cache_->get(a.passphrase, kSsid);
            if (side == Side::Ap) {
              start_authenticator(pmk);
            } else {
              supp_ = fourway::make_supplicant(pmk, {kApAddress, kStaAddress}, fourway_rng_);
              supp_reported_ = false;
            }
          } else if constexpr (std::is_same_v<A, keysync::CancelHandshake>) {
            if (side == Side::Ap) {
              stop_authenticator();
            } else {
              supp_.reset();
            }
          } else if constexpr (std::is_same_v<A, keysync::InstallKey>) {
            if (!l.install_key(a.epoch, a.ptk)) {
              epoch_error_ = std::string(node_name(side)) + " link rejected key for epoch " +
                             std::to_string(a.epoch);
            }
          } else if constexpr (std::is_same_v<A, keysync::RevertKey>) {
            l.revert_key();
          } else if constexpr (std::is_same_v<A, keysync::PauseData>) {
            l.pause(sim_.now());
          } else if constexpr (std::is_same_v<A, keysync::ResumeData>) {
            l.resume(sim_.now());
            pump_.flush(side);
            if (side == Side::Ap && n.session.phase == Phase::Active) pump_.send_keepalive(side);
          } else if constexpr (std::is_same_v<A, keysync::LinkDown>) {
            l.take_down(sim_.now());
            pump_.discard_queue(side);
          } else if constexpr (std::is_same_v<A, keysync::SendDeauth>) {
            rf_.transmit(address(side), peer(side), wire::frame(wire::FrameType::Deauth, {}));
          }
        },
        action);
  }

  void sync_timer(Node &n) {
    if (n.session.timer == n.timer_at) return;
    if (n.timer_event) sim_.cancel(*n.timer_event);
    n.timer_event.reset();
    n.timer_at = n.session.timer;
    if (!n.timer_at) return;
    const Side side = n.side;
    n.timer_event = sim_.schedule(std::max(*n.timer_at, sim_.now()), "keysync timer", [this, side] {
      node(side).timer_event.reset();
      node(side).timer_at.reset();
      feed(side, keysync::TimerFired{}, "");
    });
  }

  // ----------------------------------------------------------------- finish

  void finish() {
    const SimTime end = sim_.now();
    if (window_) {
      window_->end = end;
      result_.rekeys.push_back(*window_);
    }
    for (const auto &[index, info] : rf_taps_) {
      result_.transcripts.push_back({info, rf_.transcript(index)});
    }
    for (const auto &[index, info] : lifi_taps_) {
      result_.transcripts.push_back({info, lifi_.transcript(index)});
    }
    result_.samples = pump_.samples();
    result_.downlink = pump_.counters(Side::Ap);
    result_.uplink = pump_.counters(Side::Sta);
    result_.ap_down_intervals = ap_link_.down_intervals();
    if (ap_link_.first_up() && ap_link_.state() == dataplane::LinkState::Down) {
      // Close the open interval at the end of the run.
      const SimTime open_since = end - (ap_link_.downtime(end) - closed_downtime());
      result_.ap_down_intervals.push_back({open_since, end});
    }
    result_.ap_first_up = ap_link_.first_up();
    result_.downtime = ap_link_.downtime(end);
    result_.pause_durations = ap_link_.pause_durations();
    result_.ap = {ap_.session.phase, ap_.session.epoch, ap_.session.active_ptk};
    result_.sta = {sta_.session.phase, sta_.session.epoch, sta_.session.active_ptk};
  }

  SimTime closed_downtime() const {
    SimTime total{0};
    for (const auto &i : ap_link_.down_intervals()) total += i.end - i.start;
    return total;
  }

  const ScenarioConfig &cfg_;
  netsim::Simulator sim_;
  Rng root_;
  netsim::LifiChannel lifi_;
  netsim::RfChannel rf_;
  Rng keysync_rng_;
  Rng fourway_rng_;
  std::shared_ptr<crypto::PmkCache> cache_;
  dataplane::WifiLink ap_link_;
  dataplane::WifiLink sta_link_;
  dataplane::TrafficPump pump_;

  Node ap_;
  Node sta_;
  std::deque<Pending> pending_;
  bool applying_ = false;

  std::optional<fourway::AuthenticatorState> auth_;
  std::uint64_t hs_generation_ = 0;
  SimTime hs_started_{0};
  bool mic_failure_seen_ = false;
  std::optional<fourway::SupplicantState> supp_;
  bool supp_reported_ = false;

  std::vector<std::pair<std::size_t, netsim::TapInfo>> rf_taps_;
  std::vector<std::pair<std::size_t, netsim::TapInfo>> lifi_taps_;
  std::optional<std::string> confinement_error_;
  std::optional<std::string> epoch_error_;
  std::optional<RekeyWindow> window_;
  ScenarioResult result_;
};

}  // namespace

const char *to_string(Mode mode) {
  return mode == Mode::LightGuard ? "lightguard" : "baseline";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "lightguard") return Mode::LightGuard;
  if (text == "baseline") return Mode::Baseline;
  return std::nullopt;
}

void ScenarioConfig::validate() const {
  if (duration <= SimTime::zero()) throw std::invalid_argument("duration must be > 0");
  if (max_scheduled_rekeys < 0) throw std::invalid_argument("max_scheduled_rekeys must be >= 0");
  lifi.validate();
  rf.validate();
  rekey.validate();
  traffic.validate();
  if (handshake.timeout <= SimTime::zero() || handshake.max_retries < 0) {
    throw std::invalid_argument("handshake timeout must be > 0 and retries >= 0");
  }
  SimTime last{0};
  for (const auto &change : angle_schedule) {
    if (change.at < last) throw std::invalid_argument("angle schedule must be time-ordered");
    if (!std::isfinite(change.angle_deg)) throw std::invalid_argument("angle must be finite");
    last = change.at;
  }
  std::set<std::string> ids;
  for (const auto &tap : taps) {
    if (tap.id.empty()) throw std::invalid_argument("tap id must not be empty");
    if (!ids.insert(tap.id).second) throw std::invalid_argument("duplicate tap id " + tap.id);
  }
}

std::size_t ScenarioResult::rekeys_succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(rekeys.begin(), rekeys.end(), [](const auto &w) { return w.succeeded; }));
}

ScenarioResult run_scenario(const ScenarioConfig &config) {
  config.validate();
  Scenario scenario(config);
  return scenario.run();
}

}  // namespace lightguard::scenario
