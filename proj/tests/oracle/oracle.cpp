#include "oracle.hpp"

#include <string>

namespace oracle {

namespace {

std::uint32_t rotl(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

}  // namespace

std::array<std::uint8_t, 20> sha1(const Bytes &message) {
  std::uint32_t h[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};

  Bytes m = message;
  const std::uint64_t bit_length = static_cast<std::uint64_t>(message.size()) * 8;
  m.push_back(0x80);
  while (m.size() % 64 != 56) m.push_back(0x00);
  for (int i = 7; i >= 0; --i) m.push_back(static_cast<std::uint8_t>(bit_length >> (8 * i)));

  for (std::size_t block = 0; block < m.size(); block += 64) {
    std::uint32_t w[80];
    for (int t = 0; t < 16; ++t) {
      const std::uint8_t *p = &m[block + 4 * t];
      w[t] = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
             (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    }
    for (int t = 16; t < 80; ++t) w[t] = rotl(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);

    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int t = 0; t < 80; ++t) {
      std::uint32_t f, k;
      if (t < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999;
      } else if (t < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1;
      } else if (t < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDC;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6;
      }
      const std::uint32_t temp = rotl(a, 5) + f + e + k + w[t];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = temp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  std::array<std::uint8_t, 20> out{};
  for (int i = 0; i < 5; ++i) {
    out[4 * i] = static_cast<std::uint8_t>(h[i] >> 24);
    out[4 * i + 1] = static_cast<std::uint8_t>(h[i] >> 16);
    out[4 * i + 2] = static_cast<std::uint8_t>(h[i] >> 8);
    out[4 * i + 3] = static_cast<std::uint8_t>(h[i]);
  }
  return out;
}

std::array<std::uint8_t, 20> hmac_sha1(const Bytes &key, const Bytes &message) {
  constexpr std::size_t kBlock = 64;
  Bytes k = key;
  if (k.size() > kBlock) {
    const auto digest = sha1(k);
    k.assign(digest.begin(), digest.end());
  }
  k.resize(kBlock, 0x00);

  Bytes inner(kBlock), outer(kBlock);
  for (std::size_t i = 0; i < kBlock; ++i) {
    inner[i] = k[i] ^ 0x36;
    outer[i] = k[i] ^ 0x5c;
  }
  inner.insert(inner.end(), message.begin(), message.end());
  const auto inner_digest = sha1(inner);
  outer.insert(outer.end(), inner_digest.begin(), inner_digest.end());
  return sha1(outer);
}

Bytes pbkdf2_hmac_sha1(const Bytes &password, const Bytes &salt, std::uint32_t iterations,
                       std::size_t length) {
  Bytes out;
  for (std::uint32_t block = 1; out.size() < length; ++block) {
    Bytes s = salt;
    s.push_back(static_cast<std::uint8_t>(block >> 24));
    s.push_back(static_cast<std::uint8_t>(block >> 16));
    s.push_back(static_cast<std::uint8_t>(block >> 8));
    s.push_back(static_cast<std::uint8_t>(block));
    auto u = hmac_sha1(password, s);
    auto t = u;
    for (std::uint32_t i = 1; i < iterations; ++i) {
      u = hmac_sha1(password, Bytes(u.begin(), u.end()));
      for (std::size_t j = 0; j < t.size(); ++j) t[j] ^= u[j];
    }
    out.insert(out.end(), t.begin(), t.end());
  }
  out.resize(length);
  return out;
}

Bytes prf(const Bytes &key, std::string_view label, const Bytes &data, std::size_t length) {
  Bytes out;
  for (std::uint8_t counter = 0; out.size() < length; ++counter) {
    Bytes input(label.begin(), label.end());
    input.push_back(0x00);
    input.insert(input.end(), data.begin(), data.end());
    input.push_back(counter);
    const auto block = hmac_sha1(key, input);
    out.insert(out.end(), block.begin(), block.end());
  }
  out.resize(length);
  return out;
}

Bytes bytes_of(std::string_view text) { return Bytes(text.begin(), text.end()); }

std::string hex(const std::uint8_t *data, std::size_t n) {
  static const char *digits = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(digits[data[i] >> 4]);
    s.push_back(digits[data[i] & 0xf]);
  }
  return s;
}

}  // namespace oracle
