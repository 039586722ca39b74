#pragma once

// WPA2 4-Way Handshake as two pure step machines. Neither machine performs
// I/O; each step returns the frames the caller must transmit. Retransmission
// is authenticator-driven: the caller arms a timer whenever the
// authenticator emits frames and feeds Timeout back in when it expires.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "lightguard/crypto.hpp"
#include "lightguard/eapol.hpp"
#include "lightguard/time.hpp"

namespace lightguard::fourway {

using crypto::MacAddress;
using crypto::Nonce;
using crypto::Pmk;
using crypto::Ptk;
using eapol::EapolKeyFrame;

struct Endpoints {
  MacAddress aa;   // authenticator
  MacAddress spa;  // supplicant
};

struct HandshakeConfig {
  SimTime timeout = from_ms(100);
  int max_retries = 4;
};

enum class AuthPhase { Idle, SentM1, GotM2, SentM3, Done, Failed };
enum class SuppPhase { Idle, GotM1, SentM2, GotM3, Done, Failed };

const char *to_string(AuthPhase phase);
const char *to_string(SuppPhase phase);

struct AuthenticatorState {
  AuthPhase phase = AuthPhase::Idle;
  Pmk pmk;
  Endpoints addresses;
  Nonce anonce;
  std::uint64_t replay_counter = 0;
  std::optional<Ptk> derived;
  int retries_left = 0;
  int max_retries = 4;
  int frames_sent = 0;
};

struct SupplicantState {
  SuppPhase phase = SuppPhase::Idle;
  Pmk pmk;
  Endpoints addresses;
  Nonce snonce;
  std::optional<Nonce> anonce;
  std::optional<Ptk> derived;
  std::uint64_t last_replay_counter = 0;
  int frames_sent = 0;
};

// Draws the ANonce / SNonce from rng; the machines themselves are pure.
AuthenticatorState make_authenticator(const Pmk &pmk, const Endpoints &addresses,
                                      Rng &rng, int max_retries = 4);
SupplicantState make_supplicant(const Pmk &pmk, const Endpoints &addresses, Rng &rng);

struct Start {};
struct Timeout {};
struct FrameIn {
  EapolKeyFrame frame;
};

using AuthenticatorEvent = std::variant<Start, Timeout, FrameIn>;
using SupplicantEvent = std::variant<Timeout, FrameIn>;

// Why an incoming frame was dropped without changing state.
enum class Discard { None, Replay, MicFailure, Unexpected };

template <typename State>
struct Step {
  State state;
  std::vector<EapolKeyFrame> out;
  Discard discard = Discard::None;
};

Step<AuthenticatorState> authenticator_step(const AuthenticatorState &state,
                                            const AuthenticatorEvent &event);
Step<SupplicantState> supplicant_step(const SupplicantState &state,
                                      const SupplicantEvent &event);

enum class HandshakeResult { Success, Timeout, MicFailure, Aborted };
const char *to_string(HandshakeResult result);

struct HandshakeOutcome {
  HandshakeResult result = HandshakeResult::Aborted;
  std::optional<Ptk> ptk;  // present iff result == Success
  int frames_sent = 0;
  SimTime duration{0};
};

// Maps a finished authenticator to an outcome; nullopt while still running.
// `mic_failure_seen` selects MicFailure over Timeout for a failed run.
std::optional<HandshakeOutcome> outcome_of(const AuthenticatorState &state,
                                           bool mic_failure_seen, int frames_sent,
                                           SimTime duration);

// ---------------------------------------------------------------------------
// Standalone driver over an abstract frame transport.

enum class Endpoint { Authenticator, Supplicant };

struct Delivery {
  SimTime delay{0};
  Bytes frame;
};

class FrameTransport {
 public:
  virtual ~FrameTransport() = default;

  // Copies of `frame` that reach the other endpoint, each with its delay;
  // empty when lost. nullopt means the transport is closed.
  virtual std::optional<std::vector<Delivery>> transmit(Endpoint from,
                                                        ByteView frame,
                                                        SimTime now) = 0;
};

// Fixed delay, never loses.
class LosslessTransport : public FrameTransport {
 public:
  explicit LosslessTransport(SimTime delay = from_ms(1)) : delay_(delay) {}
  std::optional<std::vector<Delivery>> transmit(Endpoint, ByteView frame,
                                                SimTime) override;

 private:
  SimTime delay_;
};

// Independent per-frame loss.
class LossyTransport : public FrameTransport {
 public:
  LossyTransport(double loss, Rng rng, SimTime delay = from_ms(1))
      : loss_(loss), rng_(rng), delay_(delay) {}
  std::optional<std::vector<Delivery>> transmit(Endpoint, ByteView frame,
                                                SimTime) override;

 private:
  double loss_;
  Rng rng_;
  SimTime delay_;
};

struct RunResult {
  HandshakeOutcome outcome;
  AuthenticatorState authenticator;
  SupplicantState supplicant;
};

// Runs both machines to completion over `transport`. Nonces come from rng.
RunResult run_handshake_detailed(FrameTransport &transport, const Pmk &pmk,
                                 const Endpoints &addresses,
                                 const HandshakeConfig &config, Rng &rng);

inline HandshakeOutcome run_handshake(FrameTransport &transport, const Pmk &pmk,
                                      const Endpoints &addresses,
                                      const HandshakeConfig &config, Rng &rng) {
  return run_handshake_detailed(transport, pmk, addresses, config, rng).outcome;
}

}  // namespace lightguard::fourway
