#include "lightguard/eapol.hpp"

#include <algorithm>

namespace lightguard::eapol {

namespace {

constexpr std::uint8_t kMagic0 = 0x4c;
constexpr std::uint8_t kMagic1 = 0x47;

[[noreturn]] void violation(const char *field, const std::string &detail) {
  throw CodecError(CodecError::Kind::InvariantViolation, field,
                   std::string("invalid ") + field + ": " + detail);
}

}  // namespace

std::string_view to_string(MsgKind kind) {
  switch (kind) {
    case MsgKind::M1: return "M1";
    case MsgKind::M2: return "M2";
    case MsgKind::M3: return "M3";
    case MsgKind::M4: return "M4";
  }
  return "?";
}

std::uint8_t KeyInfo::to_bits() const {
  return static_cast<std::uint8_t>((pairwise ? 0x01 : 0) | (install ? 0x02 : 0) |
                                   (ack ? 0x04 : 0) | (mic_present ? 0x08 : 0) |
                                   (secure ? 0x10 : 0));
}

KeyInfo KeyInfo::from_bits(std::uint8_t bits) {
  return KeyInfo{
      .pairwise = (bits & 0x01) != 0,
      .install = (bits & 0x02) != 0,
      .ack = (bits & 0x04) != 0,
      .mic_present = (bits & 0x08) != 0,
      .secure = (bits & 0x10) != 0,
  };
}

KeyInfo canonical_key_info(MsgKind kind) {
  switch (kind) {
    case MsgKind::M1:
      return {.pairwise = true, .ack = true};
    case MsgKind::M2:
      return {.pairwise = true, .mic_present = true};
    case MsgKind::M3:
      return {.pairwise = true, .install = true, .ack = true,
              .mic_present = true, .secure = true};
    case MsgKind::M4:
      return {.pairwise = true, .mic_present = true, .secure = true};
  }
  return {};
}

void validate(const EapolKeyFrame &frame) {
  const auto &ki = frame.key_info;
  const auto want = canonical_key_info(frame.msg_kind);
  if (ki.pairwise != want.pairwise) violation("key_info.pairwise", "must be set");
  if (ki.ack != want.ack) {
    violation("key_info.ack", want.ack ? "must be set" : "must be clear");
  }
  if (ki.mic_present != want.mic_present) {
    violation("key_info.mic_present", want.mic_present ? "must be set" : "must be clear");
  }
  if (ki.install != want.install) {
    violation("key_info.install", want.install ? "must be set" : "must be clear");
  }
  if (ki.secure != want.secure) {
    violation("key_info.secure", want.secure ? "must be set" : "must be clear");
  }
  const bool mic_zero = std::all_of(frame.mic.begin(), frame.mic.end(),
                                    [](auto b) { return b == 0; });
  if (!ki.mic_present && !mic_zero) violation("mic", "must be zero without mic_present");
  if (frame.msg_kind == MsgKind::M4) {
    if (!frame.nonce.is_zero()) violation("nonce", "must be zero in M4");
  } else if (frame.nonce.is_zero()) {
    violation("nonce", "must carry a nonce");
  }
  if (frame.key_data.size() > kMaxKeyData) {
    throw CodecError(CodecError::Kind::KeyDataTooLong, "key_data",
                     "key_data exceeds 256 octets");
  }
}

Bytes encode(const EapolKeyFrame &frame) {
  validate(frame);
  Bytes out;
  out.reserve(kHeaderSize + frame.key_data.size());
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(frame.msg_kind));
  out.push_back(frame.key_info.to_bits());
  append_be(out, frame.replay_counter, 8);
  append(out, frame.nonce.bytes);
  append(out, frame.mic);
  append_be(out, frame.key_data.size(), 2);
  append(out, frame.key_data);
  return out;
}

EapolKeyFrame decode(ByteView bytes) {
  using Kind = CodecError::Kind;
  if (bytes.size() < kHeaderSize) {
    throw CodecError(Kind::Truncated, "", "frame shorter than header");
  }
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) {
    throw CodecError(Kind::BadMagic, "magic", "bad magic");
  }
  if (bytes[2] != kVersion) {
    throw CodecError(Kind::UnsupportedVersion, "version", "unsupported layout version");
  }
  if (bytes[3] < 1 || bytes[3] > 4) {
    throw CodecError(Kind::UnknownMsgKind, "msg_kind", "unknown message kind");
  }
  if ((bytes[4] & 0xe0) != 0) {
    throw CodecError(Kind::InvariantViolation, "key_info", "reserved key_info bits set");
  }

  EapolKeyFrame frame;
  frame.msg_kind = static_cast<MsgKind>(bytes[3]);
  frame.key_info = KeyInfo::from_bits(bytes[4]);
  frame.replay_counter = read_be(bytes.subspan(5), 8);
  std::copy_n(bytes.begin() + 13, 32, frame.nonce.bytes.begin());
  std::copy_n(bytes.begin() + 45, 16, frame.mic.begin());
  const std::size_t kd_len = read_be(bytes.subspan(61), 2);
  if (kd_len > kMaxKeyData) {
    throw CodecError(Kind::KeyDataTooLong, "key_data", "key_data exceeds 256 octets");
  }
  if (bytes.size() < kHeaderSize + kd_len) {
    throw CodecError(Kind::Truncated, "key_data", "key_data truncated");
  }
  if (bytes.size() > kHeaderSize + kd_len) {
    throw CodecError(Kind::TrailingBytes, "", "trailing bytes after key_data");
  }
  frame.key_data.assign(bytes.begin() + kHeaderSize, bytes.end());
  validate(frame);
  return frame;
}

Bytes mic_scope(const EapolKeyFrame &frame) {
  EapolKeyFrame zeroed = frame;
  zeroed.mic.fill(0);
  // mic_present frames with a zero mic are still valid to encode.
  return encode(zeroed);
}

void sign(EapolKeyFrame &frame, const crypto::Key128 &kck) {
  frame.mic = crypto::compute_mic(kck, mic_scope(frame));
}

bool verify_mic(const EapolKeyFrame &frame, const crypto::Key128 &kck) {
  if (!frame.key_info.mic_present) return false;
  return crypto::mic_equal(frame.mic, crypto::compute_mic(kck, mic_scope(frame)));
}

}  // namespace lightguard::eapol
