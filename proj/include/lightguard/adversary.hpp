#pragma once

// Passive eavesdroppers. An attacker holds a transcript captured by a tap
// and tries to recover the session PTK from it, either by reading a
// passphrase sent in the clear or by testing dictionary candidates against
// a captured M2 MIC.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lightguard/crypto.hpp"
#include "lightguard/eapol.hpp"
#include "lightguard/netsim.hpp"

namespace lightguard::adversary {

using crypto::Passphrase;
using crypto::Ptk;

enum class Method { DirectObservation, DictionaryAttack, Failed };
const char *to_string(Method method);

struct AttackResult {
  std::optional<Ptk> recovered_ptk;  // present iff method != Failed
  Method method = Method::Failed;
  std::uint64_t candidates_tried = 0;
};

struct KnownParams {
  std::string ssid;
  crypto::MacAddress aa;
  crypto::MacAddress spa;
};

// An M1/M2 pair with matching replay counters, enough for an offline test.
struct CapturedHandshake {
  crypto::Nonce anonce;
  eapol::EapolKeyFrame m2;
  std::size_t m1_index = 0;
  std::size_t m2_index = 0;
};

struct TranscriptView {
  std::vector<CapturedHandshake> handshakes;  // in capture order
  std::vector<Passphrase> passphrases;        // seen in PassphraseDeliver
};

TranscriptView parse_transcript(const netsim::Transcript &transcript);

// Precomputed PMKs for one SSID, as a dictionary attacker would build
// once and reuse across captures.
class PmkTable {
 public:
  PmkTable(std::string ssid, const std::vector<Passphrase> &candidates);
  const std::string &ssid() const { return ssid_; }
  std::optional<crypto::Pmk> find(const Passphrase &passphrase) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::string ssid_;
  std::map<std::string, crypto::Pmk> entries_;
};

// Attacks the most recent captured handshake. DirectObservation is tried
// first, then the dictionary in list order. `table` is consulted before
// running PBKDF2 and must match known.ssid when given.
AttackResult attack(const netsim::Transcript &transcript,
                    const std::vector<Passphrase> &dictionary, const KnownParams &known,
                    const PmkTable *table = nullptr);

// True when some data frame in `transcript` authenticates under ptk.tk;
// nullopt when the transcript holds no data frames.
std::optional<bool> validate_against_data(const Ptk &ptk, const netsim::Transcript &transcript);

struct ConfinementReport {
  bool confined = true;
  std::optional<std::string> tap_id;
  std::optional<std::size_t> frame_index;
  std::string reason;
};

// Every RF and every out-of-cone LiFi transcript must be free of
// key-establishment frames and must defeat the attack.
ConfinementReport verify_confinement(const std::vector<netsim::TapTranscript> &transcripts,
                                     const std::vector<Passphrase> &dictionary,
                                     const KnownParams &known,
                                     const PmkTable *table = nullptr);

}  // namespace lightguard::adversary
