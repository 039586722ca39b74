#include "lightguard/adversary.hpp"

#include "lightguard/dataplane.hpp"
#include "lightguard/keysync.hpp"
#include "lightguard/wire.hpp"

namespace lightguard::adversary {

namespace {

constexpr std::size_t kMaxDataProbes = 256;

std::optional<Ptk> test_candidate(const crypto::Pmk &pmk, const CapturedHandshake &hs,
                                  const KnownParams &known) {
  const Ptk ptk = crypto::derive_ptk(pmk, known.aa, known.spa, hs.anonce, hs.m2.nonce);
  if (eapol::verify_mic(hs.m2, ptk.kck)) return ptk;
  return std::nullopt;
}

}  // namespace

const char *to_string(Method method) {
  switch (method) {
    case Method::DirectObservation: return "DirectObservation";
    case Method::DictionaryAttack: return "DictionaryAttack";
    case Method::Failed: return "Failed";
  }
  return "?";
}

TranscriptView parse_transcript(const netsim::Transcript &transcript) {
  TranscriptView view;
  // Latest M1 per replay counter; M2 echoes the counter of the M1 it answers.
  std::map<std::uint64_t, std::pair<crypto::Nonce, std::size_t>> m1_by_counter;
  const auto &frames = transcript.frames();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ByteView octets = frames[i].octets;
    const auto type = wire::type_of(octets);
    if (type == wire::FrameType::Eapol) {
      eapol::EapolKeyFrame f;
      try {
        f = eapol::decode(wire::body_of(octets));
      } catch (const eapol::CodecError &) {
        continue;
      }
      if (f.msg_kind == eapol::MsgKind::M1) {
        m1_by_counter[f.replay_counter] = {f.nonce, i};
      } else if (f.msg_kind == eapol::MsgKind::M2) {
        if (auto it = m1_by_counter.find(f.replay_counter); it != m1_by_counter.end()) {
          view.handshakes.push_back({it->second.first, f, it->second.second, i});
        }
      }
    } else if (type == wire::FrameType::Sync) {
      try {
        const auto m = keysync::decode_sync(wire::body_of(octets));
        if (m.kind == keysync::SyncKind::PassphraseDeliver) {
          view.passphrases.emplace_back(std::string(m.payload.begin(), m.payload.end()));
        }
      } catch (const std::exception &) {
        continue;
      }
    }
  }
  return view;
}

PmkTable::PmkTable(std::string ssid, const std::vector<Passphrase> &candidates)
    : ssid_(std::move(ssid)) {
  for (const auto &p : candidates) {
    if (!entries_.contains(p.str())) entries_.emplace(p.str(), crypto::derive_pmk(p, ssid_));
  }
}

std::optional<crypto::Pmk> PmkTable::find(const Passphrase &passphrase) const {
  if (auto it = entries_.find(passphrase.str()); it != entries_.end()) return it->second;
  return std::nullopt;
}

AttackResult attack(const netsim::Transcript &transcript,
                    const std::vector<Passphrase> &dictionary, const KnownParams &known,
                    const PmkTable *table) {
  if (table && table->ssid() != known.ssid) {
    throw std::invalid_argument("PMK table was built for a different SSID");
  }
  AttackResult result;
  const auto view = parse_transcript(transcript);
  if (view.handshakes.empty()) return result;
  const auto &target = view.handshakes.back();

  // Newest passphrase first: it belongs to the newest handshake.
  for (auto it = view.passphrases.rbegin(); it != view.passphrases.rend(); ++it) {
    ++result.candidates_tried;
    if (auto ptk = test_candidate(crypto::derive_pmk(*it, known.ssid), target, known)) {
      result.recovered_ptk = ptk;
      result.method = Method::DirectObservation;
      return result;
    }
  }

  result.candidates_tried = 0;
  for (const auto &candidate : dictionary) {
    ++result.candidates_tried;
    std::optional<crypto::Pmk> pmk;
    if (table) pmk = table->find(candidate);
    if (!pmk) pmk = crypto::derive_pmk(candidate, known.ssid);
    if (auto ptk = test_candidate(*pmk, target, known)) {
      result.recovered_ptk = ptk;
      result.method = Method::DictionaryAttack;
      return result;
    }
  }
  return result;
}

std::optional<bool> validate_against_data(const Ptk &ptk, const netsim::Transcript &transcript) {
  bool saw_data = false;
  std::size_t probes = 0;
  const auto &frames = transcript.frames();
  for (auto it = frames.rbegin(); it != frames.rend() && probes < kMaxDataProbes; ++it) {
    if (wire::type_of(it->octets) != wire::FrameType::Data) continue;
    const auto body = dataplane::link_body(wire::body_of(it->octets));
    if (!body || body->size() < 4) continue;
    saw_data = true;
    ++probes;
    if (crypto::unprotect_frame(ptk.tk, body->subspan(4))) return true;
  }
  if (!saw_data) return std::nullopt;
  return false;
}

ConfinementReport verify_confinement(const std::vector<netsim::TapTranscript> &transcripts,
                                     const std::vector<Passphrase> &dictionary,
                                     const KnownParams &known, const PmkTable *table) {
  ConfinementReport report;
  for (const auto &t : transcripts) {
    const bool open = t.info.medium == netsim::Medium::RF || !t.info.in_cone;
    if (!open) continue;
    const auto &frames = t.transcript.frames();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (wire::is_key_establishment(frames[i].octets)) {
        report.confined = false;
        report.tap_id = t.info.id;
        report.frame_index = i;
        report.reason = "key-establishment frame captured";
        return report;
      }
    }
    const auto result = attack(t.transcript, dictionary, known, table);
    if (result.method != Method::Failed) {
      report.confined = false;
      report.tap_id = t.info.id;
      report.reason = std::string("key recovered by ") + to_string(result.method);
      return report;
    }
  }
  return report;
}

}  // namespace lightguard::adversary
