#pragma once

// Medium payload framing shared by the nodes, the taps and the attacker.
// Every frame put on either medium starts with one type octet.

#include <cstdint>
#include <optional>

#include "lightguard/bytes.hpp"

namespace lightguard::wire {

enum class FrameType : std::uint8_t {
  Eapol = 0x01,   // EAPOL-Key frame (eapol::encode)
  Sync = 0x02,    // key synchronization message (keysync::encode)
  Data = 0x03,    // protected data: epoch (4 octets BE) || AEAD frame
  Deauth = 0x04,  // management: link teardown, no body
};

inline Bytes frame(FrameType type, ByteView body) {
  Bytes out;
  out.reserve(1 + body.size());
  out.push_back(static_cast<std::uint8_t>(type));
  append(out, body);
  return out;
}

inline std::optional<FrameType> type_of(ByteView octets) {
  if (octets.empty() || octets[0] < 0x01 || octets[0] > 0x04) return std::nullopt;
  return static_cast<FrameType>(octets[0]);
}

inline ByteView body_of(ByteView octets) { return octets.subspan(1); }

// EAPOL and synchronization frames are key-establishment material.
inline bool is_key_establishment(ByteView octets) {
  auto t = type_of(octets);
  return t == FrameType::Eapol || t == FrameType::Sync;
}

}  // namespace lightguard::wire
