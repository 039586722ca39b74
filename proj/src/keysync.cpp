#include "lightguard/keysync.hpp"

#include <algorithm>
#include <sstream>

namespace lightguard::keysync {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::size_t kMaxSyncPayload = 256;

SendSync sync(SyncKind kind, std::uint32_t epoch, Bytes payload = {}) {
  return SendSync{SyncMessage{kind, epoch, std::move(payload)}};
}

Bytes digest_payload(const Ptk &ptk) {
  const auto d = crypto::ptk_digest(ptk);
  return Bytes(d.begin(), d.end());
}

SimTime retry_interval(const RekeyPolicy &policy) { return policy.commit_timeout / 4; }
SimTime sta_commit_deadline(const RekeyPolicy &policy) { return policy.commit_timeout * 3; }

void clear_rekey(KeySyncSession &s) {
  s.pending_ptk.reset();
  s.passphrase.reset();
  s.timer.reset();
  s.retries_left = 0;
}

// Returns to where the rekey started. `reverting` means the new key was
// already installed and data is paused.
void abandon(Transition &t, bool reverting) {
  auto &s = t.session;
  if (s.phase == Phase::Handshaking || s.phase == Phase::PassphraseSent) {
    t.actions.emplace_back(CancelHandshake{});
  }
  if (reverting) {
    t.actions.emplace_back(RevertKey{});
    if (s.resume_phase == Phase::Disconnected) {
      t.actions.emplace_back(LinkDown{});
    } else {
      t.actions.emplace_back(ResumeData{});
    }
  }
  clear_rekey(s);
  s.phase = s.resume_phase;
}

void become_active(Transition &t) {
  auto &s = t.session;
  s.active_ptk = s.pending_ptk;
  s.epoch = s.target_epoch();
  clear_rekey(s);
  s.phase = Phase::Active;
  t.actions.emplace_back(ResumeData{});
}

// ---------------------------------------------------------------------------
// Access point

void ap_send_prepare(Transition &t, SimTime now) {
  auto &s = t.session;
  t.actions.emplace_back(sync(SyncKind::Prepare, s.target_epoch(), digest_payload(*s.pending_ptk)));
  s.timer = now + retry_interval(s.policy);
}

void ap_send_commit(Transition &t, SimTime now) {
  auto &s = t.session;
  t.actions.emplace_back(sync(SyncKind::Commit, s.target_epoch()));
  s.timer = now + retry_interval(s.policy);
}

void ap_abort(Transition &t) {
  const bool reverting = t.session.phase == Phase::Committed;
  t.actions.emplace_back(sync(SyncKind::Abort, t.session.target_epoch()));
  abandon(t, reverting);
}

void ap_handshake_failed(Transition &t) {
  auto &s = t.session;
  clear_rekey(s);
  if (s.policy.hold_old_key_on_failure && s.resume_phase == Phase::Active) {
    s.phase = Phase::Active;
    return;
  }
  s.phase = Phase::Disconnected;
  t.actions.emplace_back(LinkDown{});
  t.actions.emplace_back(SendDeauth{});
}

void ap_sync_in(Transition &t, const SyncMessage &m, SimTime now) {
  auto &s = t.session;
  if (m.epoch != s.target_epoch()) return;
  switch (m.kind) {
    case SyncKind::PrepareAck:
      if (s.phase != Phase::PrepareSent) return;
      t.actions.emplace_back(PauseData{});
      t.actions.emplace_back(InstallKey{s.target_epoch(), *s.pending_ptk});
      s.phase = Phase::Committed;
      s.retries_left = s.policy.commit_retries;
      ap_send_commit(t, now);
      return;
    case SyncKind::CommitAck:
      if (s.phase == Phase::Committed) become_active(t);
      return;
    case SyncKind::Abort:
      if (s.phase == Phase::PrepareSent || s.phase == Phase::Committed) {
        abandon(t, s.phase == Phase::Committed);
      }
      return;
    default:
      return;
  }
}

void ap_timer(Transition &t, SimTime now) {
  auto &s = t.session;
  if (s.phase != Phase::PrepareSent && s.phase != Phase::Committed) {
    s.timer.reset();
    return;
  }
  if (s.retries_left <= 0) {
    ap_abort(t);
    return;
  }
  --s.retries_left;
  if (s.phase == Phase::PrepareSent) {
    ap_send_prepare(t, now);
  } else {
    ap_send_commit(t, now);
  }
}

void ap_advance(Transition &t, const Event &event, SimTime now) {
  auto &s = t.session;
  std::visit(
      Overloaded{
          [&](const SyncIn &e) { ap_sync_in(t, e.message, now); },
          [&](const HandshakeStarted &) {
            if (s.phase == Phase::PassphraseSent) s.phase = Phase::Handshaking;
          },
          [&](const HandshakeRetransmit &) {
            if ((s.phase == Phase::PassphraseSent || s.phase == Phase::Handshaking) &&
                s.passphrase) {
              t.actions.emplace_back(sync(SyncKind::PassphraseDeliver, s.target_epoch(),
                                          Bytes(s.passphrase->bytes().begin(),
                                                s.passphrase->bytes().end())));
            }
          },
          [&](const HandshakeDone &e) {
            if (s.phase != Phase::PassphraseSent && s.phase != Phase::Handshaking) return;
            if (e.outcome.result == fourway::HandshakeResult::Success && e.outcome.ptk) {
              s.pending_ptk = e.outcome.ptk;
              s.phase = Phase::PrepareSent;
              s.retries_left = s.policy.commit_retries;
              ap_send_prepare(t, now);
            } else {
              ap_handshake_failed(t);
            }
          },
          [&](const TimerFired &) {
            if (s.timer && now >= *s.timer) ap_timer(t, now);
          },
          [](const auto &) {},
      },
      event);
}

// ---------------------------------------------------------------------------
// Station

void sta_begin(Transition &t, const Passphrase &passphrase, SimTime now) {
  auto &s = t.session;
  if (s.rekey_in_progress()) {
    // The AP restarted the rekey with a new passphrase.
    const Phase resume = s.resume_phase;
    abandon(t, s.phase == Phase::Committed);
    s.resume_phase = resume;
  } else {
    s.resume_phase = s.phase;
  }
  s.passphrase = passphrase;
  s.phase = Phase::Handshaking;
  s.timer = now + s.policy.stall_timeout;
  t.actions.emplace_back(StartHandshake{passphrase});
}

void sta_sync_in(Transition &t, const SyncMessage &m, SimTime now) {
  auto &s = t.session;
  switch (m.kind) {
    case SyncKind::PassphraseDeliver: {
      if (m.epoch != s.target_epoch()) return;
      std::optional<Passphrase> p;
      try {
        p.emplace(std::string(m.payload.begin(), m.payload.end()));
      } catch (const crypto::ValidationError &) {
        return;
      }
      if (s.rekey_in_progress() && s.passphrase && *s.passphrase == *p) return;
      sta_begin(t, *p, now);
      return;
    }
    case SyncKind::Prepare:
      if (m.epoch != s.target_epoch() || !s.pending_ptk) return;
      if (s.phase != Phase::PtkDerived && s.phase != Phase::Prepared) return;
      if (crypto::constant_time_equal(m.payload, digest_payload(*s.pending_ptk))) {
        s.phase = Phase::Prepared;
        s.commit_deadline = now + sta_commit_deadline(s.policy);
        s.timer = s.commit_deadline;
        t.actions.emplace_back(sync(SyncKind::PrepareAck, m.epoch));
      } else {
        t.actions.emplace_back(sync(SyncKind::Abort, m.epoch));
        abandon(t, false);
      }
      return;
    case SyncKind::Commit:
      if (s.phase == Phase::Active && m.epoch == s.epoch) {
        t.actions.emplace_back(sync(SyncKind::CommitAck, m.epoch));
        return;
      }
      if (m.epoch != s.target_epoch()) return;
      if (s.phase == Phase::Prepared) {
        t.actions.emplace_back(PauseData{});
        t.actions.emplace_back(InstallKey{m.epoch, *s.pending_ptk});
        s.phase = Phase::Committed;
        s.commit_deadline = now + sta_commit_deadline(s.policy);
        s.timer = s.commit_deadline;
      }
      if (s.phase == Phase::Committed) {
        t.actions.emplace_back(sync(SyncKind::CommitAck, m.epoch));
      }
      return;
    case SyncKind::Abort:
      if (m.epoch == s.target_epoch() && s.rekey_in_progress()) {
        abandon(t, s.phase == Phase::Committed);
      }
      return;
    default:
      return;
  }
}

void sta_advance(Transition &t, const Event &event, SimTime now) {
  auto &s = t.session;
  std::visit(
      Overloaded{
          [&](const SyncIn &e) { sta_sync_in(t, e.message, now); },
          [&](const HandshakeDone &e) {
            if (s.phase != Phase::Handshaking) return;
            if (e.outcome.result == fourway::HandshakeResult::Success && e.outcome.ptk) {
              s.pending_ptk = e.outcome.ptk;
              s.phase = Phase::PtkDerived;
              s.timer = now + s.policy.stall_timeout;
            } else {
              abandon(t, false);
            }
          },
          [&](const TimerFired &) {
            if (!s.timer || now < *s.timer) return;
            if (s.rekey_in_progress()) {
              abandon(t, s.phase == Phase::Committed);
            } else {
              s.timer.reset();
            }
          },
          [&](const PeerDisconnected &) {
            if (s.phase == Phase::Disconnected) return;
            const bool reverting = s.phase == Phase::Committed;
            if (s.rekey_in_progress()) abandon(t, reverting);
            clear_rekey(s);
            s.phase = Phase::Disconnected;
            t.actions.emplace_back(LinkDown{});
          },
          [&](const DataConfirmed &e) {
            if (s.phase == Phase::Committed && e.epoch == s.target_epoch()) become_active(t);
          },
          [](const auto &) {},
      },
      event);
}

}  // namespace

const char *to_string(Role role) { return role == Role::AP ? "AP" : "STA"; }

const char *to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::PassphraseSent: return "PassphraseSent";
    case Phase::Handshaking: return "Handshaking";
    case Phase::PtkDerived: return "PtkDerived";
    case Phase::PrepareSent: return "PrepareSent";
    case Phase::Prepared: return "Prepared";
    case Phase::Committed: return "Committed";
    case Phase::Active: return "Active";
    case Phase::Disconnected: return "Disconnected";
  }
  return "?";
}

const char *to_string(SyncKind kind) {
  switch (kind) {
    case SyncKind::PassphraseDeliver: return "PassphraseDeliver";
    case SyncKind::Prepare: return "Prepare";
    case SyncKind::PrepareAck: return "PrepareAck";
    case SyncKind::Commit: return "Commit";
    case SyncKind::CommitAck: return "CommitAck";
    case SyncKind::Abort: return "Abort";
  }
  return "?";
}

Bytes encode(const SyncMessage &message) {
  if (message.payload.size() > kMaxSyncPayload) {
    throw std::invalid_argument("sync payload exceeds 256 octets");
  }
  Bytes out;
  out.reserve(7 + message.payload.size());
  out.push_back(static_cast<std::uint8_t>(message.kind));
  append_be(out, message.epoch, 4);
  append_be(out, message.payload.size(), 2);
  append(out, message.payload);
  return out;
}

SyncMessage decode_sync(ByteView bytes) {
  if (bytes.size() < 7) throw SyncDecodeError("sync message truncated");
  const auto kind = bytes[0];
  if (kind < 1 || kind > 6) throw SyncDecodeError("unknown sync kind " + std::to_string(kind));
  const auto len = read_be(bytes.subspan(5, 2), 2);
  if (len > kMaxSyncPayload) throw SyncDecodeError("sync payload too long");
  if (bytes.size() != 7 + len) throw SyncDecodeError("sync length mismatch");
  SyncMessage m;
  m.kind = static_cast<SyncKind>(kind);
  m.epoch = static_cast<std::uint32_t>(read_be(bytes.subspan(1, 4), 4));
  m.payload.assign(bytes.begin() + 7, bytes.end());
  return m;
}

void RekeyPolicy::validate() const {
  if (interval <= SimTime::zero()) throw std::invalid_argument("rekey interval must be > 0");
  if (commit_timeout <= SimTime::zero()) {
    throw std::invalid_argument("commit_timeout must be > 0");
  }
  if (commit_retries < 0) throw std::invalid_argument("commit_retries must be >= 0");
  if (stall_timeout <= SimTime::zero()) throw std::invalid_argument("stall_timeout must be > 0");
}

bool KeySyncSession::rekey_in_progress() const {
  switch (phase) {
    case Phase::PassphraseSent:
    case Phase::Handshaking:
    case Phase::PtkDerived:
    case Phase::PrepareSent:
    case Phase::Prepared:
    case Phase::Committed:
      return true;
    default:
      return false;
  }
}

KeySyncSession make_session(Role role, RekeyPolicy policy, std::string ssid) {
  policy.validate();
  if (ssid.empty() || ssid.size() > 32) throw std::invalid_argument("ssid must be 1..32 octets");
  KeySyncSession s;
  s.role = role;
  s.policy = policy;
  s.ssid = std::move(ssid);
  return s;
}

std::string describe(const Event &event) {
  return std::visit(
      Overloaded{
          [](const SyncIn &e) { return std::string("SyncIn:") + to_string(e.message.kind); },
          [](const HandshakeStarted &) { return std::string("HandshakeStarted"); },
          [](const HandshakeRetransmit &) { return std::string("HandshakeRetransmit"); },
          [](const HandshakeDone &e) {
            return std::string("HandshakeDone:") + fourway::to_string(e.outcome.result);
          },
          [](const TimerFired &) { return std::string("TimerFired"); },
          [](const LinkReport &e) {
            std::ostringstream os;
            os << "LinkReport:" << e.lifi_angle_deg << (e.realigned ? ":realigned" : "");
            return os.str();
          },
          [](const PeerDisconnected &) { return std::string("PeerDisconnected"); },
          [](const DataConfirmed &e) { return "DataConfirmed:" + std::to_string(e.epoch); },
      },
      event);
}

Transition start_rekey(const KeySyncSession &session, Rng &rng, SimTime) {
  if (session.role != Role::AP) throw RoleError("only the AP starts a rekey");
  if (session.phase != Phase::Idle && session.phase != Phase::Active &&
      session.phase != Phase::Disconnected) {
    throw BusyError(std::string("cannot start a rekey while ") + to_string(session.phase));
  }
  Transition t{session, {}};
  auto &s = t.session;
  s.passphrase = Passphrase::generate(rng);
  s.resume_phase = s.phase;
  s.phase = Phase::PassphraseSent;
  const auto p = s.passphrase->bytes();
  t.actions.emplace_back(sync(SyncKind::PassphraseDeliver, s.target_epoch(), Bytes(p.begin(), p.end())));
  t.actions.emplace_back(StartHandshake{*s.passphrase});
  return t;
}

Transition advance(const KeySyncSession &session, const Event &event, SimTime now) {
  Transition t{session, {}};
  if (session.role == Role::AP) {
    ap_advance(t, event, now);
  } else {
    sta_advance(t, event, now);
  }
  return t;
}

Transition handle_link_report(const KeySyncSession &session, const LinkReport &report,
                              Rng &rng, SimTime now) {
  if (session.role == Role::AP && session.phase == Phase::Disconnected && report.realigned) {
    return start_rekey(session, rng, now);
  }
  return Transition{session, {}};
}

std::optional<std::string> explain_atomicity_violation(const NodeView &ap,
                                                       const NodeView &sta) {
  std::ostringstream os;
  if (ap.phase == Phase::Active && sta.phase == Phase::Active && ap.epoch != sta.epoch) {
    os << "both Active on different epochs (AP " << ap.epoch << ", STA " << sta.epoch << ")";
    return os.str();
  }
  if (ap.transmitting && sta.transmitting && ap.tx_epoch != sta.tx_epoch) {
    os << "both transmitting under different epochs (AP " << ap.tx_epoch.value_or(0)
       << ", STA " << sta.tx_epoch.value_or(0) << ")";
    return os.str();
  }
  auto lacks = [](const NodeView &tx, const NodeView &rx) {
    return tx.transmitting && rx.accepting && tx.tx_epoch &&
           std::find(rx.rx_epochs.begin(), rx.rx_epochs.end(), *tx.tx_epoch) ==
               rx.rx_epochs.end();
  };
  if (lacks(ap, sta)) {
    os << "AP transmits under epoch " << *ap.tx_epoch << " which the STA cannot decrypt";
    return os.str();
  }
  if (lacks(sta, ap)) {
    os << "STA transmits under epoch " << *sta.tx_epoch << " which the AP cannot decrypt";
    return os.str();
  }
  return std::nullopt;
}

bool commit_atomicity_check(const NodeView &ap, const NodeView &sta) {
  return !explain_atomicity_violation(ap, sta).has_value();
}

}  // namespace lightguard::keysync
