#pragma once

// EAPOL-Key frames for handshake messages M1..M4.
//
// Wire layout (all integers big-endian):
//
//   offset  size  field
//   0       2     magic 0x4C 0x47 ("LG")
//   2       1     layout version, 0x01
//   3       1     msg_kind (1 = M1 .. 4 = M4)
//   4       1     key_info: bit0 pairwise, bit1 install, bit2 ack,
//                           bit3 mic_present, bit4 secure; bits 5-7 zero
//   5       8     replay_counter
//   13      32    nonce
//   45      16    mic
//   61      2     key_data length (0..256)
//   63      n     key_data
//
// The encoding has no trailing bytes; decode rejects any.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "lightguard/bytes.hpp"
#include "lightguard/crypto.hpp"

namespace lightguard::eapol {

enum class MsgKind : std::uint8_t { M1 = 1, M2 = 2, M3 = 3, M4 = 4 };

std::string_view to_string(MsgKind kind);

struct KeyInfo {
  bool pairwise = false;
  bool install = false;
  bool ack = false;
  bool mic_present = false;
  bool secure = false;

  std::uint8_t to_bits() const;
  static KeyInfo from_bits(std::uint8_t bits);

  friend bool operator==(const KeyInfo &, const KeyInfo &) = default;
};

struct EapolKeyFrame {
  MsgKind msg_kind = MsgKind::M1;
  KeyInfo key_info;
  std::uint64_t replay_counter = 0;
  crypto::Nonce nonce;
  crypto::Mic mic{};
  Bytes key_data;

  friend bool operator==(const EapolKeyFrame &, const EapolKeyFrame &) = default;
};

// The key_info bits each message kind must carry.
KeyInfo canonical_key_info(MsgKind kind);

inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 63;
inline constexpr std::size_t kMaxKeyData = 256;

class CodecError : public std::runtime_error {
 public:
  enum class Kind {
    Truncated,
    BadMagic,
    UnsupportedVersion,
    UnknownMsgKind,
    InvariantViolation,
    KeyDataTooLong,
    TrailingBytes,
  };

  CodecError(Kind kind, std::string field, const std::string &what)
      : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

  Kind kind() const { return kind_; }
  // Name of the offending field, empty when not field-specific.
  const std::string &field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

// Throws CodecError(InvariantViolation) naming the field that does not
// match the message kind's invariants.
void validate(const EapolKeyFrame &frame);

Bytes encode(const EapolKeyFrame &frame);
EapolKeyFrame decode(ByteView bytes);

// Octets covered by the MIC: the encoding with the mic field zeroed.
Bytes mic_scope(const EapolKeyFrame &frame);

// Sets frame.mic to compute_mic(kck, mic_scope(frame)).
void sign(EapolKeyFrame &frame, const crypto::Key128 &kck);
bool verify_mic(const EapolKeyFrame &frame, const crypto::Key128 &kck);

}  // namespace lightguard::eapol
