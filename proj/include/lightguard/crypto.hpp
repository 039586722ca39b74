#pragma once

// WPA2 key hierarchy (PBKDF2 -> PMK -> PRF-384 -> PTK), EAPOL MIC and the
// data-plane AEAD. Everything here is a pure function of its arguments.

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lightguard/bytes.hpp"
#include "lightguard/rng.hpp"

namespace lightguard::crypto {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Key128 = Octets<16>;
using Mic = Octets<16>;
using Digest = Octets<32>;

// 8..63 printable ASCII octets.
class Passphrase {
 public:
  static constexpr std::size_t kMinLength = 8;
  static constexpr std::size_t kMaxLength = 63;

  explicit Passphrase(std::string text);

  // Draws `length` characters from an alphanumeric alphabet.
  static Passphrase generate(Rng &rng, std::size_t length = 20);

  const std::string &str() const { return text_; }
  ByteView bytes() const { return as_bytes(text_); }

  friend bool operator==(const Passphrase &, const Passphrase &) = default;

 private:
  std::string text_;
};

struct Pmk {
  Octets<32> bytes{};
  friend bool operator==(const Pmk &, const Pmk &) = default;
};

struct Nonce {
  Octets<32> bytes{};

  static Nonce random(Rng &rng);
  bool is_zero() const;

  friend auto operator<=>(const Nonce &, const Nonce &) = default;
};

struct MacAddress {
  Octets<6> bytes{};

  std::string to_string() const;

  friend auto operator<=>(const MacAddress &, const MacAddress &) = default;
};

// Pairwise transient key, CCMP layout: KCK || KEK || TK.
struct Ptk {
  static constexpr std::size_t kSize = 48;

  Key128 kck{};
  Key128 kek{};
  Key128 tk{};

  static Ptk from_bytes(const Octets<kSize> &raw);
  Octets<kSize> bytes() const;

  friend bool operator==(const Ptk &, const Ptk &) = default;
};

// PBKDF2-HMAC-SHA1, 4096 iterations, 32 octets. SSID must be 1..32 octets.
Pmk derive_pmk(const Passphrase &passphrase, ByteView ssid);
inline Pmk derive_pmk(const Passphrase &passphrase, std::string_view ssid) {
  return derive_pmk(passphrase, as_bytes(ssid));
}

// Memoizes derive_pmk per (passphrase, ssid). Thread-safe.
class PmkCache {
 public:
  Pmk get(const Passphrase &passphrase, std::string_view ssid);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, Pmk> entries_;
};

Octets<20> hmac_sha1(ByteView key, ByteView data);

// HMAC-SHA1(pmk, label || 0x00 || data || i) for i = 0, 1, 2, truncated to 48.
Octets<48> prf_384(const Pmk &pmk, std::string_view label, ByteView data);

inline constexpr std::string_view kPairwiseLabel = "Pairwise key expansion";

// min(AA,SPA) || max(AA,SPA) || min(ANonce,SNonce) || max(ANonce,SNonce)
Bytes ptk_expansion_data(const MacAddress &aa, const MacAddress &spa,
                         const Nonce &anonce, const Nonce &snonce);

// Throws ValidationError when aa == spa.
Ptk derive_ptk(const Pmk &pmk, const MacAddress &aa, const MacAddress &spa,
               const Nonce &anonce, const Nonce &snonce);

// HMAC-SHA1 over a frame whose MIC field is already zeroed, first 16 octets.
Mic compute_mic(const Key128 &kck, ByteView frame_with_zero_mic);

// Constant-time comparisons.
bool mic_equal(const Mic &a, const Mic &b);
bool constant_time_equal(ByteView a, ByteView b);

// SHA-256 over the PTK, used to confirm agreement without exposing the key.
Digest ptk_digest(const Ptk &ptk);

// Data-plane protection: AES-128-GCM keyed by TK, 96-bit nonce made of six
// zero octets followed by the 48-bit packet number. Frame layout:
//   packet number (6 octets, big-endian) || ciphertext || tag (16 octets)
// The packet number header is authenticated as associated data.
inline constexpr std::uint64_t kMaxPacketNumber = (std::uint64_t{1} << 48) - 1;
inline constexpr std::size_t kAeadOverhead = 6 + 16;

Bytes protect_frame(const Key128 &tk, std::uint64_t packet_number,
                    ByteView payload);

struct Unprotected {
  std::uint64_t packet_number = 0;
  Bytes payload;
};

// nullopt on any authentication failure or malformed frame.
std::optional<Unprotected> unprotect_frame(const Key128 &tk, ByteView frame);

// Receiver-side replay check: packet numbers must strictly increase.
class ReplayWindow {
 public:
  bool accept(std::uint64_t packet_number) {
    if (seen_any_ && packet_number <= last_) return false;
    last_ = packet_number;
    seen_any_ = true;
    return true;
  }
  void reset() { *this = ReplayWindow{}; }
  std::optional<std::uint64_t> last() const {
    return seen_any_ ? std::optional(last_) : std::nullopt;
  }

 private:
  std::uint64_t last_ = 0;
  bool seen_any_ = false;
};

}  // namespace lightguard::crypto
