#pragma once

// The three experiments: angle sweep, throughput/latency trace and the
// adversarial A/B, plus their file writers. Every output file starts with a
// schema version: a "# schema=..." line in CSV, a "schema" field in JSON and
// a leading {"schema": ...} line in JSON-lines.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightguard/adversary.hpp"
#include "lightguard/config.hpp"
#include "lightguard/scenario.hpp"

namespace lightguard::experiments {

inline constexpr const char *kSweepSchema = "lightguard.sweep.v1";
inline constexpr const char *kTraceSchema = "lightguard.trace.v1";
inline constexpr const char *kTraceSummarySchema = "lightguard.trace_summary.v1";
inline constexpr const char *kTraceEventsSchema = "lightguard.trace_events.v1";
inline constexpr const char *kKeysyncLogSchema = "lightguard.keysync_log.v1";
inline constexpr const char *kAdversarialSchema = "lightguard.adversarial.v1";
inline constexpr const char *kAdversarialSummarySchema = "lightguard.adversarial_summary.v1";

// A simulator invariant fired during one of the runs.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(std::uint64_t seed, netsim::InvariantViolation violation);
  std::uint64_t seed() const { return seed_; }
  const netsim::InvariantViolation &violation() const { return violation_; }

 private:
  std::uint64_t seed_;
  netsim::InvariantViolation violation_;
};

// Runs fn(0..n-1) on up to `jobs` threads. fn must only touch its own slot.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)> &fn);

// ---------------------------------------------------------------------------
// Angle sweep

struct SweepRow {
  double angle_deg = 0;
  int attempts = 0;
  int successes = 0;
  double success_rate = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid order
  // Smallest |angle| from which every row at that |angle| or beyond has
  // success_rate <= 0.01.
  std::optional<double> threshold_deg;
};

// One bootstrap rekey in a fresh simulator at a fixed angle.
bool rekey_attempt(const scenario::ScenarioConfig &base, double angle_deg, std::uint64_t seed,
                   SimTime duration);

SweepResult run_angle_sweep(const config::ExperimentSpec &spec, int jobs = 1);
void write_sweep(const SweepResult &result, const config::ExperimentSpec &spec,
                 const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// Trace

struct TraceSummary {
  std::size_t rekeys_attempted = 0;
  std::size_t rekeys_succeeded = 0;
  std::uint64_t total_decrypt_failures = 0;
  double downtime_ms = 0;
  double mean_throughput_mbps = 0;
  double mean_latency_ms = 0;
  double max_pause_ms = 0;
};

struct TraceResult {
  std::uint64_t seed = 0;
  scenario::ScenarioResult run;
  TraceSummary summary;
};

TraceSummary summarize(const scenario::ScenarioResult &run);
TraceResult run_trace(const config::ExperimentSpec &spec);
void write_trace(const TraceResult &result, const config::ExperimentSpec &spec,
                 const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// Adversarial A/B

struct AttackRecord {
  std::uint64_t run_seed = 0;
  scenario::Mode mode = scenario::Mode::LightGuard;
  std::string tap_id;
  netsim::Medium medium = netsim::Medium::RF;
  bool in_cone = true;
  adversary::Method method = adversary::Method::Failed;
  std::uint64_t candidates_tried = 0;
  bool recovered = false;
  bool matches_ground_truth = false;
  std::optional<bool> validated_on_data;
};

struct ConfinementRecord {
  std::uint64_t run_seed = 0;
  scenario::Mode mode = scenario::Mode::LightGuard;
  adversary::ConfinementReport report;
  std::size_t true_passphrase_position = 0;  // 1-based
};

struct ModeSummary {
  int runs = 0;
  int bootstrapped = 0;
  int rf_attacks = 0;
  int rf_recovered = 0;
  int rf_recovered_validated = 0;
  int in_cone_recovered = 0;
  int confinement_holds = 0;
};

struct AdversarialResult {
  std::vector<AttackRecord> records;          // sorted by seed, mode, tap
  std::vector<ConfinementRecord> confinement;  // sorted by seed, mode
  ModeSummary lightguard;
  ModeSummary baseline;
  int dictionary_size = 0;
};

std::vector<std::uint64_t> adversarial_seeds(const config::ExperimentSpec &spec);
std::vector<crypto::Passphrase> make_decoys(std::size_t count, std::uint64_t seed);

AdversarialResult run_adversarial(const config::ExperimentSpec &spec, int jobs = 1);
void write_adversarial(const AdversarialResult &result, const config::ExperimentSpec &spec,
                       const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// Plot data

// Reads angle_sweep.csv and trace.csv from `dir` (whichever exist) and writes
// whitespace-separated gnuplot data files next to them. Returns the files
// written.
std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path &dir);

}  // namespace lightguard::experiments
