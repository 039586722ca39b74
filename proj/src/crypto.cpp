#include "lightguard/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstdio>
#include <memory>

namespace lightguard::crypto {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX *ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

constexpr std::size_t kPnSize = 6;
constexpr std::size_t kTagSize = 16;

Octets<12> gcm_nonce(std::uint64_t packet_number) {
  Octets<12> iv{};
  for (std::size_t i = 0; i < kPnSize; ++i) {
    iv[6 + i] = static_cast<std::uint8_t>(packet_number >> (8 * (kPnSize - 1 - i)));
  }
  return iv;
}

}  // namespace

Passphrase::Passphrase(std::string text) : text_(std::move(text)) {
  if (text_.size() < kMinLength || text_.size() > kMaxLength) {
    throw ValidationError("passphrase must be 8..63 octets, got " +
                          std::to_string(text_.size()));
  }
  for (unsigned char c : text_) {
    if (c < 0x20 || c > 0x7e) {
      throw ValidationError("passphrase contains a non-printable octet");
    }
  }
}

Passphrase Passphrase::generate(Rng &rng, std::size_t length) {
  static constexpr std::string_view kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::string text(length, '\0');
  for (auto &c : text) {
    c = kAlphabet[rng.uniform_int(0, kAlphabet.size() - 1)];
  }
  return Passphrase(std::move(text));
}

Nonce Nonce::random(Rng &rng) {
  Nonce n;
  rng.fill(n.bytes);
  return n;
}

bool Nonce::is_zero() const {
  return std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; });
}

std::string MacAddress::to_string() const {
  char buf[18];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", bytes[0],
                bytes[1], bytes[2], bytes[3], bytes[4], bytes[5]);
  return buf;
}

Ptk Ptk::from_bytes(const Octets<kSize> &raw) {
  Ptk ptk;
  std::copy_n(raw.begin(), 16, ptk.kck.begin());
  std::copy_n(raw.begin() + 16, 16, ptk.kek.begin());
  std::copy_n(raw.begin() + 32, 16, ptk.tk.begin());
  return ptk;
}

Octets<Ptk::kSize> Ptk::bytes() const {
  Octets<kSize> raw{};
  std::copy(kck.begin(), kck.end(), raw.begin());
  std::copy(kek.begin(), kek.end(), raw.begin() + 16);
  std::copy(tk.begin(), tk.end(), raw.begin() + 32);
  return raw;
}

Pmk derive_pmk(const Passphrase &passphrase, ByteView ssid) {
  if (ssid.empty() || ssid.size() > 32) {
    throw ValidationError("ssid must be 1..32 octets");
  }
  Pmk pmk;
  const auto &text = passphrase.str();
  if (PKCS5_PBKDF2_HMAC_SHA1(text.data(), static_cast<int>(text.size()),
                             ssid.data(), static_cast<int>(ssid.size()), 4096,
                             static_cast<int>(pmk.bytes.size()),
                             pmk.bytes.data()) != 1) {
    throw std::runtime_error("PBKDF2 failed");
  }
  return pmk;
}

Pmk PmkCache::get(const Passphrase &passphrase, std::string_view ssid) {
  std::pair<std::string, std::string> key{passphrase.str(), std::string(ssid)};
  {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  const Pmk pmk = derive_pmk(passphrase, ssid);
  std::lock_guard lock(mu_);
  entries_.emplace(std::move(key), pmk);
  return pmk;
}

std::size_t PmkCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

Octets<20> hmac_sha1(ByteView key, ByteView data) {
  Octets<20> out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha1(), key.data(), static_cast<int>(key.size()), data.data(),
           data.size(), out.data(), &len) == nullptr ||
      len != out.size()) {
    throw std::runtime_error("HMAC-SHA1 failed");
  }
  return out;
}

Octets<48> prf_384(const Pmk &pmk, std::string_view label, ByteView data) {
  Bytes block;
  block.reserve(label.size() + 1 + data.size() + 1);
  append(block, as_bytes(label));
  block.push_back(0x00);
  append(block, data);
  block.push_back(0x00);

  Octets<48> out{};
  std::size_t produced = 0;
  for (std::uint8_t counter = 0; produced < out.size(); ++counter) {
    block.back() = counter;
    auto h = hmac_sha1(pmk.bytes, block);
    const std::size_t n = std::min(h.size(), out.size() - produced);
    std::copy_n(h.begin(), n, out.begin() + produced);
    produced += n;
  }
  return out;
}

Bytes ptk_expansion_data(const MacAddress &aa, const MacAddress &spa,
                         const Nonce &anonce, const Nonce &snonce) {
  Bytes data;
  data.reserve(6 + 6 + 32 + 32);
  const auto &[lo_mac, hi_mac] = std::minmax(aa, spa);
  const auto &[lo_nonce, hi_nonce] = std::minmax(anonce, snonce);
  append(data, lo_mac.bytes);
  append(data, hi_mac.bytes);
  append(data, lo_nonce.bytes);
  append(data, hi_nonce.bytes);
  return data;
}

Ptk derive_ptk(const Pmk &pmk, const MacAddress &aa, const MacAddress &spa,
               const Nonce &anonce, const Nonce &snonce) {
  if (aa == spa) {
    throw ValidationError("authenticator and supplicant addresses must differ");
  }
  return Ptk::from_bytes(
      prf_384(pmk, kPairwiseLabel, ptk_expansion_data(aa, spa, anonce, snonce)));
}

Mic compute_mic(const Key128 &kck, ByteView frame_with_zero_mic) {
  auto h = hmac_sha1(kck, frame_with_zero_mic);
  Mic mic{};
  std::copy_n(h.begin(), mic.size(), mic.begin());
  return mic;
}

bool mic_equal(const Mic &a, const Mic &b) {
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

bool constant_time_equal(ByteView a, ByteView b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Digest ptk_digest(const Ptk &ptk) {
  Digest d{};
  const auto raw = ptk.bytes();
  SHA256(raw.data(), raw.size(), d.data());
  return d;
}

Bytes protect_frame(const Key128 &tk, std::uint64_t packet_number,
                    ByteView payload) {
  if (packet_number > kMaxPacketNumber) {
    throw ValidationError("packet number exceeds 48 bits");
  }
  Bytes out;
  out.reserve(kAeadOverhead + payload.size());
  append_be(out, packet_number, kPnSize);
  out.resize(kPnSize + payload.size() + kTagSize);

  const auto iv = gcm_nonce(packet_number);
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  bool ok = ctx &&
            EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr,
                               nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN,
                                static_cast<int>(iv.size()), nullptr) == 1 &&
            EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, tk.data(),
                               iv.data()) == 1 &&
            EVP_EncryptUpdate(ctx.get(), nullptr, &len, out.data(),
                              static_cast<int>(kPnSize)) == 1;
  if (ok && !payload.empty()) {
    ok = EVP_EncryptUpdate(ctx.get(), out.data() + kPnSize, &len,
                           payload.data(), static_cast<int>(payload.size())) == 1;
  }
  ok = ok &&
       EVP_EncryptFinal_ex(ctx.get(), out.data() + kPnSize + payload.size(),
                           &len) == 1 &&
       EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG,
                           static_cast<int>(kTagSize),
                           out.data() + kPnSize + payload.size()) == 1;
  if (!ok) throw std::runtime_error("AES-GCM encryption failed");
  return out;
}

std::optional<Unprotected> unprotect_frame(const Key128 &tk, ByteView frame) {
  if (frame.size() < kAeadOverhead) return std::nullopt;
  const std::size_t ct_len = frame.size() - kAeadOverhead;
  Unprotected result;
  result.packet_number = read_be(frame, kPnSize);
  result.payload.resize(ct_len);

  const auto iv = gcm_nonce(result.packet_number);
  Octets<kTagSize> tag{};
  std::copy_n(frame.end() - kTagSize, kTagSize, tag.begin());

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  bool ok = ctx &&
            EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr,
                               nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN,
                                static_cast<int>(iv.size()), nullptr) == 1 &&
            EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, tk.data(),
                               iv.data()) == 1 &&
            EVP_DecryptUpdate(ctx.get(), nullptr, &len, frame.data(),
                              static_cast<int>(kPnSize)) == 1;
  if (ok && ct_len > 0) {
    ok = EVP_DecryptUpdate(ctx.get(), result.payload.data(), &len,
                           frame.data() + kPnSize, static_cast<int>(ct_len)) == 1;
  }
  ok = ok &&
       EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG,
                           static_cast<int>(kTagSize), tag.data()) == 1 &&
       EVP_DecryptFinal_ex(ctx.get(), result.payload.data() + ct_len, &len) == 1;
  if (!ok) return std::nullopt;
  return result;
}

}  // namespace lightguard::crypto
