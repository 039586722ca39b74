#pragma once

// Cross-link key synchronization. A session is a pure step machine: every
// operation takes the current session value plus an event and returns the
// next session value and the actions its owner must perform. The AP is the
// coordinator of the commit protocol.
//
// One rekey, happy path (all messages on LiFi):
//
//   AP                                   STA
//   start_rekey: PassphraseDeliver  -->  derive PMK, start supplicant
//   4-way handshake (M1..M4)        <->
//   Prepare(epoch, digest)          -->  digest matches pending PTK
//                                   <--  PrepareAck
//   pause data, install key, Commit -->  pause data, install key
//                                   <--  CommitAck
//   Active, resume under new key
//   (RF) first data frame           -->  Active, resume under new key

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lightguard/crypto.hpp"
#include "lightguard/fourway.hpp"
#include "lightguard/time.hpp"

namespace lightguard::keysync {

using crypto::Passphrase;
using crypto::Pmk;
using crypto::Ptk;

enum class Role { AP, STA };

enum class Phase {
  Idle,
  PassphraseSent,
  Handshaking,
  PtkDerived,
  PrepareSent,
  Prepared,
  Committed,
  Active,
  Disconnected,
};

const char *to_string(Role role);
const char *to_string(Phase phase);

enum class SyncKind : std::uint8_t {
  PassphraseDeliver = 1,
  Prepare = 2,
  PrepareAck = 3,
  Commit = 4,
  CommitAck = 5,
  Abort = 6,
};

const char *to_string(SyncKind kind);

// Wire layout: kind (1) || epoch (4, BE) || payload length (2, BE) || payload.
struct SyncMessage {
  SyncKind kind = SyncKind::Abort;
  std::uint32_t epoch = 0;
  Bytes payload;

  friend bool operator==(const SyncMessage &, const SyncMessage &) = default;
};

class SyncDecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes encode(const SyncMessage &message);
SyncMessage decode_sync(ByteView bytes);

struct RekeyPolicy {
  SimTime interval = from_ms(30'000);
  SimTime commit_timeout = from_ms(200);
  int commit_retries = 4;
  // The STA abandons a rekey that makes no progress for this long while the
  // handshake is running or a Prepare is awaited.
  SimTime stall_timeout = from_ms(2'000);
  // The WiFi link is torn down when a rekey's handshake fails. Fixed.
  static constexpr bool disconnect_on_failure = true;
  // Comparison policy: keep transmitting under the old key instead of
  // tearing the link down when the handshake fails.
  bool hold_old_key_on_failure = false;

  void validate() const;
};

struct KeySyncSession {
  Role role = Role::AP;
  Phase phase = Phase::Idle;
  std::uint32_t epoch = 0;
  std::optional<Ptk> pending_ptk;
  std::optional<Ptk> active_ptk;
  SimTime commit_deadline{0};

  RekeyPolicy policy;
  std::string ssid = "LightGuard";

  // Rekey in progress.
  std::optional<Passphrase> passphrase;
  Phase resume_phase = Phase::Idle;  // where an aborted rekey returns to
  int retries_left = 0;
  // Next timer expiry the owner must deliver, if any.
  std::optional<SimTime> timer;

  std::uint32_t target_epoch() const { return epoch + 1; }
  bool rekey_in_progress() const;
};

KeySyncSession make_session(Role role, RekeyPolicy policy = {},
                            std::string ssid = "LightGuard");

// ---------------------------------------------------------------------------
// Events

struct SyncIn {
  SyncMessage message;
};
struct HandshakeStarted {};       // AP: the authenticator sent its first M1
struct HandshakeRetransmit {};    // AP: the authenticator retransmitted M1
struct HandshakeDone {
  fourway::HandshakeOutcome outcome;
};
struct TimerFired {};
struct LinkReport {
  double lifi_angle_deg = 0.0;
  bool realigned = false;
};
struct PeerDisconnected {};       // STA: deauthenticated over RF
struct DataConfirmed {            // STA: data decrypted under `epoch`
  std::uint32_t epoch = 0;
};

using Event = std::variant<SyncIn, HandshakeStarted, HandshakeRetransmit, HandshakeDone,
                           TimerFired, LinkReport, PeerDisconnected, DataConfirmed>;

std::string describe(const Event &event);

// ---------------------------------------------------------------------------
// Actions

struct SendSync {
  SyncMessage message;  // always on the LiFi medium
};
// The owner derives the PMK from the passphrase and the session SSID and
// launches its side of the handshake.
struct StartHandshake {
  Passphrase passphrase;
};
struct CancelHandshake {};
struct InstallKey {
  std::uint32_t epoch = 0;
  Ptk ptk;
};
struct RevertKey {};
struct PauseData {};
struct ResumeData {};
struct LinkDown {};
struct SendDeauth {};  // RF management frame, carries no key material

using Action = std::variant<SendSync, StartHandshake, CancelHandshake, InstallKey,
                            RevertKey, PauseData, ResumeData, LinkDown, SendDeauth>;

struct Transition {
  KeySyncSession session;
  std::vector<Action> actions;
};

class RoleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};
class BusyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// AP only, from Idle, Active or Disconnected. Draws a fresh passphrase,
// emits PassphraseDeliver and starts the authenticator.
Transition start_rekey(const KeySyncSession &session, Rng &rng, SimTime now);

Transition advance(const KeySyncSession &session, const Event &event, SimTime now);

// A Disconnected AP that sees a realigned link starts a rekey at once;
// everything else is a no-op.
Transition handle_link_report(const KeySyncSession &session, const LinkReport &report,
                              Rng &rng, SimTime now);

// ---------------------------------------------------------------------------
// Global atomicity check

struct NodeView {
  Phase phase = Phase::Idle;
  std::uint32_t epoch = 0;
  bool transmitting = false;   // data link Up with a key
  bool accepting = false;      // data link not Down
  std::optional<std::uint32_t> tx_epoch;
  std::vector<std::uint32_t> rx_epochs;
};

// False when the two endpoints could exchange data under different keys:
// both Active on different epochs, both transmitting under different
// epochs, or one transmitting under an epoch the accepting peer lacks.
bool commit_atomicity_check(const NodeView &ap, const NodeView &sta);
std::optional<std::string> explain_atomicity_violation(const NodeView &ap,
                                                       const NodeView &sta);

}  // namespace lightguard::keysync
