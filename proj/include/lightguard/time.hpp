#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace lightguard {

// Simulated time, microsecond resolution. Used both as an instant (offset
// from simulation start) and as a duration.
using SimTime = std::chrono::duration<std::int64_t, std::micro>;

constexpr SimTime from_ms(double ms) {
  return SimTime(static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5)));
}

constexpr double to_ms(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }

}  // namespace lightguard
