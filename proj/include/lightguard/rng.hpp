#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace lightguard {

// Seedable deterministic random source. All draws are derived from the raw
// 64-bit engine output so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform01() < p;
  }

  // Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  void fill(std::span<std::uint8_t> out);

  // Independent stream keyed by a fixed label. Draws on the parent do not
  // shift the substream, so adding a consumer never perturbs the others.
  Rng substream(std::string_view label) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label);

}  // namespace lightguard
