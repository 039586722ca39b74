#pragma once

// Scenario files: INI with the sections sim, lifi, rf, rekey, traffic, taps
// and experiment. Unknown sections and keys are errors.
//
//   [sim]        seed, duration_ms, mode = lightguard | baseline
//   [lifi]       theta_full_deg, theta_cut_deg, propagation_delay_ms,
//                frames_per_ms, angle_deg,
//                angle_schedule = 35@29900, 0@45000   (angle@time_ms)
//   [rf]         delivery_probability, propagation_delay_ms
//   [rekey]      interval_ms, commit_timeout_ms, commit_retries,
//                stall_timeout_ms, handshake_timeout_ms, handshake_retries,
//                periodic, hold_old_key_on_failure
//   [traffic]    enabled, offered_load_mbps, uplink_mbps,
//                nominal_throughput_mbps, tick_ms, metric_interval_ms,
//                window_ms
//   [taps]       <id> = rf | lifi, in_cone | lifi, out_of_cone | lifi, <angle>
//   [experiment] kind = sweep | trace | adversarial, seeds = 1, 2 | 1..100,
//                angles = -40:40:5 | -10, 0, 10, attempts,
//                attempt_duration_ms, runs, dictionary_size,
//                dictionary_seed, run_duration_ms

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lightguard/scenario.hpp"

namespace lightguard::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { AngleSweep, Trace, Adversarial };
const char *to_string(ExperimentKind kind);

struct SweepSettings {
  std::vector<double> angles;  // default -40..40 step 5
  int attempts = 200;
  SimTime attempt_duration = from_ms(3'000);
};

struct AdversarialSettings {
  int runs = 100;
  int dictionary_size = 1000;
  std::uint64_t dictionary_seed = 7;
  SimTime run_duration = from_ms(500);
};

struct ExperimentSpec {
  std::optional<ExperimentKind> kind;
  scenario::ScenarioConfig scenario;
  std::vector<std::uint64_t> seeds;  // non-empty
  SweepSettings sweep;
  AdversarialSettings adversarial;

  // Throws ConfigError.
  void validate() const;
};

// Defaults plus the standard taps: an RF eavesdropper, an out-of-cone and an
// in-cone LiFi tap.
ExperimentSpec default_spec();

ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::filesystem::path &path);

// Helpers shared with the CLI.
std::vector<double> parse_angle_grid(std::string_view text);
std::vector<std::uint64_t> parse_seeds(std::string_view text);
std::vector<scenario::AngleChange> parse_angle_schedule(std::string_view text);

}  // namespace lightguard::config
