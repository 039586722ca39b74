#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lightguard/config.hpp"
#include "lightguard/crypto.hpp"
#include "lightguard/experiments.hpp"

namespace lg = lightguard;
namespace ex = lightguard::experiments;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int jobs = 1;
  std::string mode;
};

lg::config::ExperimentSpec load_spec(const Options &opt, lg::config::ExperimentKind kind) {
  auto spec = opt.config.empty() ? lg::config::default_spec() : lg::config::load_config(opt.config);
  if (spec.kind && *spec.kind != kind) {
    throw lg::config::ConfigError(std::string("config is for experiment '") +
                                  lg::config::to_string(*spec.kind) + "', not '" +
                                  lg::config::to_string(kind) + "'");
  }
  spec.kind = kind;
  if (opt.seed) spec.seeds = {*opt.seed};
  if (!opt.mode.empty()) {
    const auto mode = lg::scenario::parse_mode(opt.mode);
    if (!mode) throw lg::config::ConfigError("unknown mode '" + opt.mode + "'");
    spec.scenario.mode = *mode;
  }
  if (opt.jobs < 1) throw lg::config::ConfigError("--jobs must be at least 1");
  spec.validate();
  return spec;
}

int cmd_sweep(const Options &opt) {
  const auto spec = load_spec(opt, lg::config::ExperimentKind::AngleSweep);
  const auto result = ex::run_angle_sweep(spec, opt.jobs);
  ex::write_sweep(result, spec, opt.out);
  for (const auto &row : result.rows) {
    std::printf("%6.1f deg  %4d/%-4d  %.3f\n", row.angle_deg, row.successes, row.attempts,
                row.success_rate);
  }
  if (result.threshold_deg) {
    std::printf("failure threshold: %.1f deg\n", *result.threshold_deg);
  } else {
    std::printf("failure threshold: none within the grid\n");
  }
  return kExitOk;
}

int cmd_trace(const Options &opt) {
  const auto spec = load_spec(opt, lg::config::ExperimentKind::Trace);
  const auto result = ex::run_trace(spec);
  ex::write_trace(result, spec, opt.out);
  const auto &s = result.summary;
  std::printf("rekeys %zu/%zu succeeded, decrypt failures %llu, downtime %.1f ms\n",
              s.rekeys_succeeded, s.rekeys_attempted,
              static_cast<unsigned long long>(s.total_decrypt_failures), s.downtime_ms);
  std::printf("mean throughput %.2f Mbps, mean latency %.3f ms\n", s.mean_throughput_mbps,
              s.mean_latency_ms);
  return kExitOk;
}

int cmd_adversarial(const Options &opt) {
  const auto spec = load_spec(opt, lg::config::ExperimentKind::Adversarial);
  const auto result = ex::run_adversarial(spec, opt.jobs);
  ex::write_adversarial(result, spec, opt.out);
  for (const auto *name : {"lightguard", "baseline"}) {
    const auto &m = std::string(name) == "lightguard" ? result.lightguard : result.baseline;
    std::printf("%-10s runs %d, RF attacks %d, RF recovered %d (validated %d), confined %d/%d\n",
                name, m.runs, m.rf_attacks, m.rf_recovered, m.rf_recovered_validated,
                m.confinement_holds, m.runs);
  }
  return kExitOk;
}

int cmd_validate(const Options &opt) {
  if (opt.config.empty()) throw lg::config::ConfigError("--config is required");
  const auto spec = lg::config::load_config(opt.config);
  spec.validate();
  std::printf("%s: ok (%s, %zu seed%s)\n", opt.config.c_str(),
              spec.kind ? lg::config::to_string(*spec.kind) : "no experiment kind",
              spec.seeds.size(), spec.seeds.size() == 1 ? "" : "s");
  return kExitOk;
}

bool kat(const char *name, const std::string &got, const std::string &want) {
  const bool ok = got == want;
  std::printf("%s  %s\n", ok ? "PASS" : "FAIL", name);
  if (!ok) std::printf("      got  %s\n      want %s\n", got.c_str(), want.c_str());
  return ok;
}

int cmd_selftest() {
  using lg::as_bytes;
  using lg::to_hex;
  bool ok = true;
  ok &= kat("PBKDF2 password/IEEE",
            to_hex(lg::crypto::derive_pmk(lg::crypto::Passphrase("password"), "IEEE").bytes),
            "f42c6fc52df0ebef9ebb4b90b38a5f902e83fe1b135a70e23aed762e9710a12e");
  ok &= kat("PBKDF2 ThisIsAPassword/ThisIsASSID",
            to_hex(lg::crypto::derive_pmk(lg::crypto::Passphrase("ThisIsAPassword"), "ThisIsASSID")
                       .bytes),
            "0dc0d6eb90555ed6419756b9a15ec3e3209b63df707dd508d14581f8982721af");
  const lg::Bytes key0b(20, 0x0b);
  ok &= kat("HMAC-SHA1 case 1", to_hex(lg::crypto::hmac_sha1(key0b, as_bytes("Hi There"))),
            "b617318655057264e28bc0b6fb378c8ef146be00");
  ok &= kat("HMAC-SHA1 case 2",
            to_hex(lg::crypto::hmac_sha1(as_bytes("Jefe"), as_bytes("what do ya want for nothing?"))),
            "effcdf6ae5eb2fa2d27416d5f184df9c259a7c79");
  const lg::Bytes keyaa(20, 0xaa), datadd(50, 0xdd);
  ok &= kat("HMAC-SHA1 case 3", to_hex(lg::crypto::hmac_sha1(keyaa, datadd)),
            "125d7342b9ac11cd91a39af48aa17b4f63f175d3");
  std::printf("%s\n", ok ? "selftest passed" : "selftest FAILED");
  return ok ? kExitOk : kExitViolation;
}

int cmd_plotdata(const Options &opt) {
  const auto files = ex::write_plot_data(opt.out);
  if (files.empty()) {
    std::fprintf(stderr, "no angle_sweep.csv or trace.csv in %s\n", opt.out.c_str());
    return kExitConfig;
  }
  for (const auto &f : files) std::printf("wrote %s\n", f.string().c_str());
  return kExitOk;
}

void add_common(CLI::App *cmd, Options &opt) {
  cmd->add_option("--config", opt.config, "Scenario file (INI)");
  cmd->add_option("--seed", opt.seed, "Base seed, overrides [experiment] seeds");
  cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
  cmd->add_option("--jobs", opt.jobs, "Worker threads")->capture_default_str();
  cmd->add_option("--mode", opt.mode, "lightguard | baseline");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"LightGuard key synchronization simulator"};
  app.require_subcommand(1);
  Options opt;

  auto *sweep = app.add_subcommand("sweep", "Rekey success rate against LiFi misalignment");
  auto *trace = app.add_subcommand("trace", "WiFi throughput and latency across periodic rekeys");
  auto *adversarial = app.add_subcommand("adversarial", "RF eavesdropper attack, LightGuard vs in-band");
  auto *validate = app.add_subcommand("validate-config", "Parse and check a scenario file");
  auto *selftest = app.add_subcommand("selftest", "Run the crypto known-answer vectors");
  auto *plotdata = app.add_subcommand("plotdata", "Write gnuplot data files from experiment output");
  for (auto *cmd : {sweep, trace, adversarial}) add_common(cmd, opt);
  validate->add_option("--config", opt.config, "Scenario file (INI)")->required();
  plotdata->add_option("--out", opt.out, "Directory holding experiment output")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sweep) return cmd_sweep(opt);
    if (*trace) return cmd_trace(opt);
    if (*adversarial) return cmd_adversarial(opt);
    if (*validate) return cmd_validate(opt);
    if (*selftest) return cmd_selftest();
    if (*plotdata) return cmd_plotdata(opt);
  } catch (const ex::RunFailure &e) {
    const auto &v = e.violation();
    std::fprintf(stderr, "invariant violated: %s\n  at %.3f ms, seed %llu, event %s\n  %s\n",
                 v.hook.c_str(), lg::to_ms(v.at), static_cast<unsigned long long>(e.seed()),
                 v.event.c_str(), v.detail.c_str());
    return kExitViolation;
  } catch (const lg::config::ConfigError &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
