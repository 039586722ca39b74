#include "lightguard/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lightguard/rng.hpp"

namespace lightguard::experiments {

using nlohmann::json;
using scenario::Mode;
using scenario::ScenarioConfig;
using scenario::ScenarioResult;

namespace {

// Fixed-point text keeps files byte-stable across platforms.
std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Rounded value for JSON, so doubles print the same everywhere.
double rounded(double v, int digits = 6) {
  const double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

std::string angle_label(double angle) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", angle);
  return buf;
}

std::ofstream open_out(const std::filesystem::path &path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void check(const ScenarioResult &run, std::uint64_t seed) {
  if (run.report.violation) throw RunFailure(seed, *run.report.violation);
}

bool same_ptk(const crypto::Ptk &a, const crypto::Ptk &b) { return a.bytes() == b.bytes(); }

json angle_schedule_json(const ScenarioConfig &cfg) {
  json out = json::array();
  for (const auto &c : cfg.angle_schedule) {
    out.push_back({{"t_ms", rounded(to_ms(c.at))}, {"angle_deg", c.angle_deg}});
  }
  return out;
}

}  // namespace

RunFailure::RunFailure(std::uint64_t seed, netsim::InvariantViolation violation)
    : std::runtime_error("invariant " + violation.hook + " violated at " +
                         fixed(to_ms(violation.at)) + " ms (seed " + std::to_string(seed) +
                         "): " + violation.detail),
      seed_(seed),
      violation_(std::move(violation)) {}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)> &fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Angle sweep

bool rekey_attempt(const ScenarioConfig &base, double angle_deg, std::uint64_t seed,
                   SimTime duration) {
  ScenarioConfig cfg = base;
  cfg.seed = seed;
  cfg.duration = duration;
  cfg.lifi.angle_deg = angle_deg;
  cfg.angle_schedule.clear();
  cfg.periodic_rekey = false;
  cfg.max_scheduled_rekeys = 1;
  cfg.traffic_enabled = false;
  cfg.taps.clear();
  cfg.record_log = false;
  const auto run = scenario::run_scenario(cfg);
  check(run, seed);
  return run.ap.phase == keysync::Phase::Active && run.sta.phase == keysync::Phase::Active &&
         run.ap.epoch == 1 && run.sta.epoch == 1;
}

SweepResult run_angle_sweep(const config::ExperimentSpec &spec, int jobs) {
  spec.validate();
  const auto &angles = spec.sweep.angles;
  const auto attempts = static_cast<std::size_t>(spec.sweep.attempts);
  const std::uint64_t base = spec.seeds.front();

  std::vector<char> ok(angles.size() * attempts, 0);
  parallel_for(ok.size(), jobs, [&](std::size_t i) {
    const std::size_t a = i / attempts;
    const std::size_t k = i % attempts;
    const auto seed = mix_seed(base, "sweep/" + angle_label(angles[a]) + "/" + std::to_string(k));
    ok[i] = rekey_attempt(spec.scenario, angles[a], seed, spec.sweep.attempt_duration) ? 1 : 0;
  });

  SweepResult result;
  for (std::size_t a = 0; a < angles.size(); ++a) {
    SweepRow row;
    row.angle_deg = angles[a];
    row.attempts = static_cast<int>(attempts);
    for (std::size_t k = 0; k < attempts; ++k) row.successes += ok[a * attempts + k];
    row.success_rate = attempts ? static_cast<double>(row.successes) / attempts : 0.0;
    result.rows.push_back(row);
  }

  // Worst success rate per |angle|, then the start of the failing tail.
  std::map<double, double> by_magnitude;
  for (const auto &row : result.rows) {
    auto &rate = by_magnitude[std::abs(row.angle_deg)];
    rate = std::max(rate, row.success_rate);
  }
  for (auto it = by_magnitude.rbegin(); it != by_magnitude.rend(); ++it) {
    if (it->second > 0.01) break;
    result.threshold_deg = it->first;
  }
  return result;
}

void write_sweep(const SweepResult &result, const config::ExperimentSpec &spec,
                 const std::filesystem::path &dir) {
  auto csv = open_out(dir / "angle_sweep.csv");
  csv << "# schema=" << kSweepSchema << "\n";
  csv << "angle_deg,attempts,successes,success_rate\n";
  for (const auto &row : result.rows) {
    csv << angle_label(row.angle_deg) << ',' << row.attempts << ',' << row.successes << ','
        << fixed(row.success_rate, 4) << '\n';
  }

  json summary = {
      {"schema", kSweepSchema},
      {"seed", spec.seeds.front()},
      {"attempts_per_angle", spec.sweep.attempts},
      {"attempt_duration_ms", rounded(to_ms(spec.sweep.attempt_duration))},
      {"theta_full_deg", spec.scenario.lifi.theta_full_deg},
      {"theta_cut_deg", spec.scenario.lifi.theta_cut_deg},
      {"threshold_deg", result.threshold_deg ? json(*result.threshold_deg) : json(nullptr)},
  };
  auto out = open_out(dir / "angle_sweep_summary.json");
  out << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Trace

TraceSummary summarize(const ScenarioResult &run) {
  TraceSummary s;
  s.rekeys_attempted = run.rekeys.size();
  s.rekeys_succeeded = run.rekeys_succeeded();
  s.total_decrypt_failures = run.decrypt_failures();
  s.downtime_ms = to_ms(run.downtime);
  if (!run.samples.empty()) {
    double sum = 0;
    for (const auto &sample : run.samples) sum += sample.throughput_mbps;
    s.mean_throughput_mbps = sum / static_cast<double>(run.samples.size());
  }
  if (run.downlink.latency_samples > 0) {
    s.mean_latency_ms = run.downlink.latency_sum_ms / static_cast<double>(run.downlink.latency_samples);
  }
  for (const auto p : run.pause_durations) s.max_pause_ms = std::max(s.max_pause_ms, to_ms(p));
  return s;
}

TraceResult run_trace(const config::ExperimentSpec &spec) {
  spec.validate();
  ScenarioConfig cfg = spec.scenario;
  cfg.seed = spec.seeds.front();
  TraceResult result;
  result.seed = cfg.seed;
  result.run = scenario::run_scenario(cfg);
  check(result.run, cfg.seed);
  result.summary = summarize(result.run);
  return result;
}

void write_trace(const TraceResult &result, const config::ExperimentSpec &spec,
                 const std::filesystem::path &dir) {
  const auto &run = result.run;
  {
    auto csv = open_out(dir / "trace.csv");
    csv << "# schema=" << kTraceSchema << "\n";
    csv << "t_ms,throughput_mbps,latency_ms,link_state,epoch,rekey_phase\n";
    for (const auto &s : run.samples) {
      csv << fixed(s.t_ms, 1) << ',' << fixed(s.throughput_mbps) << ',' << fixed(s.latency_ms, 4)
          << ',' << dataplane::to_string(s.link_state) << ',' << s.epoch << ',' << s.rekey_phase
          << '\n';
    }
  }

  const auto &sum = result.summary;
  json down = json::array();
  for (const auto &iv : run.ap_down_intervals) {
    down.push_back({{"start_ms", rounded(to_ms(iv.start))}, {"end_ms", rounded(to_ms(iv.end))}});
  }
  json summary = {
      {"schema", kTraceSummarySchema},
      {"seed", result.seed},
      {"mode", scenario::to_string(spec.scenario.mode)},
      {"duration_ms", rounded(to_ms(spec.scenario.duration))},
      {"rekeys_attempted", sum.rekeys_attempted},
      {"rekeys_succeeded", sum.rekeys_succeeded},
      {"total_decrypt_failures", sum.total_decrypt_failures},
      {"downtime_ms", rounded(sum.downtime_ms)},
      {"mean_throughput", rounded(sum.mean_throughput_mbps)},
      {"mean_latency", rounded(sum.mean_latency_ms)},
      {"max_pause_ms", rounded(sum.max_pause_ms)},
      {"aborts", run.aborts},
      {"down_intervals", down},
      {"angle_schedule", angle_schedule_json(spec.scenario)},
  };
  {
    auto out = open_out(dir / "trace_summary.json");
    out << summary.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "trace_events.jsonl");
    out << json{{"schema", kTraceEventsSchema}}.dump() << '\n';
    for (const auto &w : run.rekeys) {
      out << json{{"start_ms", rounded(to_ms(w.start))},
                  {"end_ms", rounded(to_ms(w.end))},
                  {"epoch", w.target_epoch},
                  {"succeeded", w.succeeded},
                  {"outcome", w.outcome}}
                 .dump()
          << '\n';
    }
  }
  {
    auto out = open_out(dir / "keysync_log.jsonl");
    out << json{{"schema", kKeysyncLogSchema}}.dump() << '\n';
    for (const auto &r : run.log) {
      out << json{{"time_ms", rounded(r.time_ms)},
                  {"node", r.node},
                  {"phase_from", r.phase_from},
                  {"phase_to", r.phase_to},
                  {"epoch", r.epoch},
                  {"medium", r.medium},
                  {"message_kind", r.message_kind}}
                 .dump()
          << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Adversarial A/B

std::vector<std::uint64_t> adversarial_seeds(const config::ExperimentSpec &spec) {
  if (spec.seeds.size() > 1) return spec.seeds;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < spec.adversarial.runs; ++i) seeds.push_back(spec.seeds.front() + i);
  return seeds;
}

std::vector<crypto::Passphrase> make_decoys(std::size_t count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, "decoys"));
  std::vector<crypto::Passphrase> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(crypto::Passphrase::generate(rng, 8 + rng.uniform_int(0, 12)));
  }
  return out;
}

namespace {

struct ModeRun {
  std::vector<AttackRecord> records;
  ConfinementRecord confinement;
  bool bootstrapped = false;
};

ModeRun attack_run(const config::ExperimentSpec &spec, std::uint64_t seed, Mode mode,
                   const std::vector<crypto::Passphrase> &decoys,
                   const adversary::PmkTable &table) {
  ScenarioConfig cfg = spec.scenario;
  cfg.seed = seed;
  cfg.mode = mode;
  cfg.duration = spec.adversarial.run_duration;
  cfg.periodic_rekey = false;
  cfg.max_scheduled_rekeys = 1;
  cfg.record_log = false;
  const auto run = scenario::run_scenario(cfg);
  check(run, seed);

  ModeRun out;
  out.bootstrapped = !run.keys.empty();
  auto dictionary = decoys;
  std::size_t position = 0;
  if (out.bootstrapped) {
    Rng rng(mix_seed(seed, "dictionary-position"));
    position = rng.uniform_int(0, dictionary.size());
    dictionary.insert(dictionary.begin() + static_cast<std::ptrdiff_t>(position),
                      run.keys.front().passphrase);
  }
  const adversary::KnownParams known{std::string(scenario::kSsid), scenario::kApAddress,
                                     scenario::kStaAddress};

  for (const auto &t : run.transcripts) {
    AttackRecord rec;
    rec.run_seed = seed;
    rec.mode = mode;
    rec.tap_id = t.info.id;
    rec.medium = t.info.medium;
    rec.in_cone = t.info.in_cone;
    const auto result = adversary::attack(t.transcript, dictionary, known, &table);
    rec.method = result.method;
    rec.candidates_tried = result.candidates_tried;
    rec.recovered = result.recovered_ptk.has_value();
    if (rec.recovered) {
      for (const auto &k : run.keys) {
        if (same_ptk(k.ptk, *result.recovered_ptk)) rec.matches_ground_truth = true;
      }
      rec.validated_on_data = adversary::validate_against_data(*result.recovered_ptk, t.transcript);
    }
    out.records.push_back(std::move(rec));
  }

  out.confinement.run_seed = seed;
  out.confinement.mode = mode;
  out.confinement.report = adversary::verify_confinement(run.transcripts, dictionary, known, &table);
  out.confinement.true_passphrase_position = out.bootstrapped ? position + 1 : 0;
  return out;
}

void tally(ModeSummary &s, const ModeRun &run) {
  ++s.runs;
  if (run.bootstrapped) ++s.bootstrapped;
  if (run.confinement.report.confined) ++s.confinement_holds;
  for (const auto &r : run.records) {
    if (r.medium == netsim::Medium::RF) {
      ++s.rf_attacks;
      if (r.recovered) ++s.rf_recovered;
      if (r.recovered && r.matches_ground_truth && r.validated_on_data.value_or(false)) {
        ++s.rf_recovered_validated;
      }
    } else if (r.in_cone && r.recovered) {
      ++s.in_cone_recovered;
    }
  }
}

json summary_json(const ModeSummary &s) {
  return {{"runs", s.runs},
          {"bootstrapped", s.bootstrapped},
          {"rf_attacks", s.rf_attacks},
          {"rf_recovered", s.rf_recovered},
          {"rf_recovered_validated", s.rf_recovered_validated},
          {"in_cone_recovered", s.in_cone_recovered},
          {"confinement_holds", s.confinement_holds}};
}

}  // namespace

AdversarialResult run_adversarial(const config::ExperimentSpec &spec, int jobs) {
  spec.validate();
  const auto seeds = adversarial_seeds(spec);
  const auto decoys = make_decoys(static_cast<std::size_t>(spec.adversarial.dictionary_size - 1),
                                  spec.adversarial.dictionary_seed);
  const adversary::PmkTable table(std::string(scenario::kSsid), decoys);

  std::vector<ModeRun> runs(seeds.size() * 2);
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    const Mode mode = i % 2 == 0 ? Mode::LightGuard : Mode::Baseline;
    runs[i] = attack_run(spec, seeds[i / 2], mode, decoys, table);
  });

  AdversarialResult result;
  result.dictionary_size = spec.adversarial.dictionary_size;
  for (const auto &r : runs) {
    result.records.insert(result.records.end(), r.records.begin(), r.records.end());
    result.confinement.push_back(r.confinement);
    tally(r.confinement.mode == Mode::LightGuard ? result.lightguard : result.baseline, r);
  }
  return result;
}

void write_adversarial(const AdversarialResult &result, const config::ExperimentSpec &spec,
                       const std::filesystem::path &dir) {
  {
    auto out = open_out(dir / "adversarial.jsonl");
    out << json{{"schema", kAdversarialSchema}}.dump() << '\n';
    // Attack records of one run, then that run's verdict.
    std::size_t i = 0;
    for (const auto &conf : result.confinement) {
      for (; i < result.records.size() && result.records[i].run_seed == conf.run_seed &&
             result.records[i].mode == conf.mode;
           ++i) {
        const auto &r = result.records[i];
        out << json{{"record", "attack"},
                    {"run_seed", r.run_seed},
                    {"mode", scenario::to_string(r.mode)},
                    {"tap_id", r.tap_id},
                    {"medium", netsim::to_string(r.medium)},
                    {"in_cone", r.medium == netsim::Medium::LiFi ? json(r.in_cone) : json(nullptr)},
                    {"method", adversary::to_string(r.method)},
                    {"candidates_tried", r.candidates_tried},
                    {"recovered", r.recovered},
                    {"ptk_matches_ground_truth", r.matches_ground_truth},
                    {"validated_on_data",
                     r.validated_on_data ? json(*r.validated_on_data) : json(nullptr)}}
                   .dump()
            << '\n';
      }
      json verdict = {{"record", "confinement"},
                      {"run_seed", conf.run_seed},
                      {"mode", scenario::to_string(conf.mode)},
                      {"confined", conf.report.confined},
                      {"true_passphrase_position", conf.true_passphrase_position}};
      if (!conf.report.confined) {
        if (conf.report.tap_id) verdict["tap_id"] = *conf.report.tap_id;
        verdict["reason"] = conf.report.reason;
        if (conf.report.frame_index) verdict["frame_index"] = *conf.report.frame_index;
      }
      out << verdict.dump() << '\n';
    }
  }

  json summary = {
      {"schema", kAdversarialSummarySchema},
      {"runs", result.lightguard.runs},
      {"dictionary_size", result.dictionary_size},
      {"dictionary_seed", spec.adversarial.dictionary_seed},
      {"run_duration_ms", rounded(to_ms(spec.adversarial.run_duration))},
      {"lightguard", summary_json(result.lightguard)},
      {"baseline", summary_json(result.baseline)},
  };
  auto out = open_out(dir / "adversarial_summary.json");
  out << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path &dir) {
  std::vector<std::filesystem::path> written;
  if (const auto src = dir / "angle_sweep.csv"; std::filesystem::exists(src)) {
    const auto path = dir / "angle_sweep.dat";
    auto out = open_out(path);
    out << "# schema=" << kSweepSchema << "\n# angle_deg success_rate\n";
    for (const auto &row : read_csv(src)) {
      if (row.size() >= 4) out << row[0] << ' ' << row[3] << '\n';
    }
    written.push_back(path);
  }
  if (const auto src = dir / "trace.csv"; std::filesystem::exists(src)) {
    const auto rows = read_csv(src);
    const auto path = dir / "trace.dat";
    auto out = open_out(path);
    out << "# schema=" << kTraceSchema
        << "\n# t_s throughput_mbps latency_ms link_up epoch rekeying\n";
    for (const auto &row : rows) {
      if (row.size() < 6) continue;
      const bool up = row[3] == "Up";
      const bool rekeying = row[5] != "Active" && row[5] != "Idle";
      out << fixed(std::stod(row[0]) / 1000.0, 4) << ' ' << row[1] << ' ' << row[2] << ' '
          << (up ? 1 : 0) << ' ' << row[4] << ' ' << (rekeying ? 1 : 0) << '\n';
    }
    written.push_back(path);

    if (const auto ev = dir / "trace_events.jsonl"; std::filesystem::exists(ev)) {
      const auto shade = dir / "rekey_windows.dat";
      auto sout = open_out(shade);
      sout << "# schema=" << kTraceEventsSchema << "\n# start_s end_s epoch succeeded\n";
      std::ifstream in(ev);
      std::string line;
      while (std::getline(in, line)) {
        const auto j = json::parse(line);
        if (!j.contains("start_ms")) continue;
        sout << fixed(j["start_ms"].get<double>() / 1000.0, 4) << ' '
             << fixed(j["end_ms"].get<double>() / 1000.0, 4) << ' ' << j["epoch"].get<int>() << ' '
             << (j["succeeded"].get<bool>() ? 1 : 0) << '\n';
      }
      written.push_back(shade);
    }
  }
  return written;
}

}  // namespace lightguard::experiments
