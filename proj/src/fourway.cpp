#include "lightguard/fourway.hpp"

#include <queue>

namespace lightguard::fourway {

namespace {

EapolKeyFrame make_frame(eapol::MsgKind kind, std::uint64_t replay_counter,
                         const Nonce &nonce) {
  EapolKeyFrame f;
  f.msg_kind = kind;
  f.key_info = eapol::canonical_key_info(kind);
  f.replay_counter = replay_counter;
  f.nonce = nonce;
  return f;
}

EapolKeyFrame build_m3(const AuthenticatorState &s) {
  auto m3 = make_frame(eapol::MsgKind::M3, s.replay_counter, s.anonce);
  eapol::sign(m3, s.derived->kck);
  return m3;
}

template <typename State>
Step<State> emit(State state, std::vector<EapolKeyFrame> out) {
  state.frames_sent += static_cast<int>(out.size());
  return Step<State>{std::move(state), std::move(out), Discard::None};
}

template <typename State>
Step<State> drop(const State &state, Discard why) {
  return Step<State>{state, {}, why};
}

}  // namespace

const char *to_string(AuthPhase phase) {
  switch (phase) {
    case AuthPhase::Idle: return "Idle";
    case AuthPhase::SentM1: return "SentM1";
    case AuthPhase::GotM2: return "GotM2";
    case AuthPhase::SentM3: return "SentM3";
    case AuthPhase::Done: return "Done";
    case AuthPhase::Failed: return "Failed";
  }
  return "?";
}

const char *to_string(SuppPhase phase) {
  switch (phase) {
    case SuppPhase::Idle: return "Idle";
    case SuppPhase::GotM1: return "GotM1";
    case SuppPhase::SentM2: return "SentM2";
    case SuppPhase::GotM3: return "GotM3";
    case SuppPhase::Done: return "Done";
    case SuppPhase::Failed: return "Failed";
  }
  return "?";
}

const char *to_string(HandshakeResult result) {
  switch (result) {
    case HandshakeResult::Success: return "Success";
    case HandshakeResult::Timeout: return "Timeout";
    case HandshakeResult::MicFailure: return "MicFailure";
    case HandshakeResult::Aborted: return "Aborted";
  }
  return "?";
}

AuthenticatorState make_authenticator(const Pmk &pmk, const Endpoints &addresses,
                                      Rng &rng, int max_retries) {
  AuthenticatorState s;
  s.pmk = pmk;
  s.addresses = addresses;
  s.anonce = Nonce::random(rng);
  s.max_retries = max_retries;
  return s;
}

SupplicantState make_supplicant(const Pmk &pmk, const Endpoints &addresses, Rng &rng) {
  SupplicantState s;
  s.pmk = pmk;
  s.addresses = addresses;
  s.snonce = Nonce::random(rng);
  return s;
}

Step<AuthenticatorState> authenticator_step(const AuthenticatorState &state,
                                            const AuthenticatorEvent &event) {
  if (std::holds_alternative<Start>(event)) {
    if (state.phase != AuthPhase::Idle) return drop(state, Discard::Unexpected);
    auto next = state;
    next.replay_counter += 1;
    next.retries_left = next.max_retries;
    next.phase = AuthPhase::SentM1;
    return emit(std::move(next),
                {make_frame(eapol::MsgKind::M1, next.replay_counter, next.anonce)});
  }

  if (std::holds_alternative<Timeout>(event)) {
    if (state.phase != AuthPhase::SentM1 && state.phase != AuthPhase::SentM3) {
      return drop(state, Discard::None);
    }
    auto next = state;
    if (next.retries_left == 0) {
      next.phase = AuthPhase::Failed;
      next.derived.reset();
      return emit(std::move(next), {});
    }
    next.retries_left -= 1;
    next.replay_counter += 1;
    if (next.phase == AuthPhase::SentM1) {
      return emit(std::move(next),
                  {make_frame(eapol::MsgKind::M1, next.replay_counter, next.anonce)});
    }
    auto m3 = build_m3(next);
    return emit(std::move(next), {std::move(m3)});
  }

  const auto &frame = std::get<FrameIn>(event).frame;
  if (frame.replay_counter != state.replay_counter) {
    return drop(state, Discard::Replay);
  }

  if (state.phase == AuthPhase::SentM1 && frame.msg_kind == eapol::MsgKind::M2) {
    const auto ptk = crypto::derive_ptk(state.pmk, state.addresses.aa,
                                        state.addresses.spa, state.anonce, frame.nonce);
    if (!eapol::verify_mic(frame, ptk.kck)) return drop(state, Discard::MicFailure);
    auto next = state;
    next.derived = ptk;
    next.phase = AuthPhase::GotM2;
    next.replay_counter += 1;
    next.retries_left = next.max_retries;
    auto m3 = build_m3(next);
    next.phase = AuthPhase::SentM3;
    return emit(std::move(next), {std::move(m3)});
  }

  if (state.phase == AuthPhase::SentM3 && frame.msg_kind == eapol::MsgKind::M4) {
    if (!eapol::verify_mic(frame, state.derived->kck)) {
      return drop(state, Discard::MicFailure);
    }
    auto next = state;
    next.phase = AuthPhase::Done;
    return emit(std::move(next), {});
  }

  return drop(state, Discard::Unexpected);
}

Step<SupplicantState> supplicant_step(const SupplicantState &state,
                                      const SupplicantEvent &event) {
  // The supplicant never retransmits on its own.
  if (std::holds_alternative<Timeout>(event)) return drop(state, Discard::None);

  const auto &frame = std::get<FrameIn>(event).frame;
  if (state.phase == SuppPhase::Failed) return drop(state, Discard::Unexpected);
  if (state.anonce && frame.replay_counter <= state.last_replay_counter) {
    return drop(state, Discard::Replay);
  }

  if (frame.msg_kind == eapol::MsgKind::M1) {
    if (state.phase == SuppPhase::GotM3 || state.phase == SuppPhase::Done) {
      return drop(state, Discard::Unexpected);
    }
    auto next = state;
    next.phase = SuppPhase::GotM1;
    next.last_replay_counter = frame.replay_counter;
    next.anonce = frame.nonce;
    next.derived = crypto::derive_ptk(next.pmk, next.addresses.aa, next.addresses.spa,
                                      frame.nonce, next.snonce);
    auto m2 = make_frame(eapol::MsgKind::M2, frame.replay_counter, next.snonce);
    eapol::sign(m2, next.derived->kck);
    next.phase = SuppPhase::SentM2;
    return emit(std::move(next), {std::move(m2)});
  }

  if (frame.msg_kind == eapol::MsgKind::M3) {
    // Done still answers a retransmitted M3: its M4 may have been lost.
    if (state.phase != SuppPhase::SentM2 && state.phase != SuppPhase::Done) {
      return drop(state, Discard::Unexpected);
    }
    if (frame.nonce != *state.anonce) return drop(state, Discard::Unexpected);
    if (!eapol::verify_mic(frame, state.derived->kck)) {
      return drop(state, Discard::MicFailure);
    }
    auto next = state;
    next.phase = SuppPhase::GotM3;
    next.last_replay_counter = frame.replay_counter;
    auto m4 = make_frame(eapol::MsgKind::M4, frame.replay_counter, Nonce{});
    eapol::sign(m4, next.derived->kck);
    next.phase = SuppPhase::Done;
    return emit(std::move(next), {std::move(m4)});
  }

  return drop(state, Discard::Unexpected);
}

std::optional<HandshakeOutcome> outcome_of(const AuthenticatorState &state,
                                           bool mic_failure_seen, int frames_sent,
                                           SimTime duration) {
  HandshakeOutcome out;
  out.frames_sent = frames_sent;
  out.duration = duration;
  if (state.phase == AuthPhase::Done) {
    out.result = HandshakeResult::Success;
    out.ptk = state.derived;
    return out;
  }
  if (state.phase == AuthPhase::Failed) {
    out.result = mic_failure_seen ? HandshakeResult::MicFailure : HandshakeResult::Timeout;
    return out;
  }
  return std::nullopt;
}

std::optional<std::vector<Delivery>> LosslessTransport::transmit(Endpoint, ByteView frame,
                                                                 SimTime) {
  return std::vector<Delivery>{{delay_, Bytes(frame.begin(), frame.end())}};
}

std::optional<std::vector<Delivery>> LossyTransport::transmit(Endpoint, ByteView frame,
                                                              SimTime) {
  if (rng_.bernoulli(loss_)) return std::vector<Delivery>{};
  return std::vector<Delivery>{{delay_, Bytes(frame.begin(), frame.end())}};
}

namespace {

struct Pending {
  SimTime at;
  std::uint64_t seq;
  Endpoint to;
  bool is_timer;
  std::uint64_t timer_generation;
  Bytes frame;
};

struct Later {
  bool operator()(const Pending &a, const Pending &b) const {
    return a.at != b.at ? a.at > b.at : a.seq > b.seq;
  }
};

}  // namespace

RunResult run_handshake_detailed(FrameTransport &transport, const Pmk &pmk,
                                 const Endpoints &addresses,
                                 const HandshakeConfig &config, Rng &rng) {
  RunResult run;
  run.authenticator = make_authenticator(pmk, addresses, rng, config.max_retries);
  run.supplicant = make_supplicant(pmk, addresses, rng);

  std::priority_queue<Pending, std::vector<Pending>, Later> queue;
  std::uint64_t seq = 0;
  std::uint64_t timer_generation = 0;
  SimTime now{0};
  bool mic_failure = false;
  bool closed = false;

  auto send = [&](Endpoint from, const std::vector<EapolKeyFrame> &frames) {
    for (const auto &f : frames) {
      auto copies = transport.transmit(from, eapol::encode(f), now);
      if (!copies) {
        closed = true;
        return;
      }
      const Endpoint to =
          from == Endpoint::Authenticator ? Endpoint::Supplicant : Endpoint::Authenticator;
      for (auto &c : *copies) {
        queue.push(Pending{now + c.delay, seq++, to, false, 0, std::move(c.frame)});
      }
    }
  };

  auto authenticator_emitted = [&](Step<AuthenticatorState> step) {
    if (step.discard == Discard::MicFailure) mic_failure = true;
    run.authenticator = std::move(step.state);
    if (!step.out.empty()) {
      send(Endpoint::Authenticator, step.out);
      ++timer_generation;
      queue.push(Pending{now + config.timeout, seq++, Endpoint::Authenticator, true,
                         timer_generation, {}});
    }
  };

  authenticator_emitted(authenticator_step(run.authenticator, Start{}));

  auto frames_sent = [&] {
    return run.authenticator.frames_sent + run.supplicant.frames_sent;
  };

  while (!closed) {
    if (auto done = outcome_of(run.authenticator, mic_failure, frames_sent(), now)) {
      run.outcome = *done;
      return run;
    }
    if (queue.empty()) break;
    Pending p = queue.top();
    queue.pop();
    now = p.at;

    if (p.is_timer) {
      if (p.timer_generation == timer_generation) {
        authenticator_emitted(authenticator_step(run.authenticator, Timeout{}));
      }
      continue;
    }

    EapolKeyFrame frame;
    try {
      frame = eapol::decode(p.frame);
    } catch (const eapol::CodecError &) {
      continue;  // undecodable frames are dropped like corrupted ones
    }
    if (p.to == Endpoint::Supplicant) {
      auto step = supplicant_step(run.supplicant, FrameIn{frame});
      if (step.discard == Discard::MicFailure) mic_failure = true;
      run.supplicant = std::move(step.state);
      send(Endpoint::Supplicant, step.out);
    } else {
      authenticator_emitted(authenticator_step(run.authenticator, FrameIn{frame}));
    }
  }

  run.outcome.result = closed ? HandshakeResult::Aborted : HandshakeResult::Timeout;
  run.outcome.frames_sent = frames_sent();
  run.outcome.duration = now;
  return run;
}

}  // namespace lightguard::fourway
