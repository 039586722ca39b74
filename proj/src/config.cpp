#include "lightguard/config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lightguard::config {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) { return boost::algorithm::trim_copy(std::string(s)); }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    throw ConfigError(std::string(where) + ": expected a number, got '" + s + "'");
  }
  return v;
}

std::int64_t to_int(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(where) + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(where) + ": expected an unsigned integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(std::string(where) + ": expected true or false, got '" + s + "'");
}

SimTime to_ms_time(std::string_view where, std::string_view text) {
  const double ms = to_double(where, text);
  if (ms < 0) throw ConfigError(std::string(where) + ": must be >= 0");
  return from_ms(ms);
}

int to_count(std::string_view where, std::string_view text) {
  const auto v = to_int(where, text);
  if (v < 0 || v > 1'000'000'000) throw ConfigError(std::string(where) + ": out of range");
  return static_cast<int>(v);
}

using Setter = std::function<void(ExperimentSpec &, const std::string &where, const std::string &)>;
using Section = std::map<std::string, Setter>;

const std::map<std::string, Section> &schema() {
  static const std::map<std::string, Section> sections = {
      {"sim",
       {
           {"seed", [](auto &s, auto &w, auto &v) { s.scenario.seed = to_u64(w, v); }},
           {"duration_ms", [](auto &s, auto &w, auto &v) { s.scenario.duration = to_ms_time(w, v); }},
           {"mode",
            [](auto &s, auto &w, auto &v) {
              auto mode = scenario::parse_mode(trim(v));
              if (!mode) throw ConfigError(w + ": expected lightguard or baseline");
              s.scenario.mode = *mode;
            }},
       }},
      {"lifi",
       {
           {"theta_full_deg", [](auto &s, auto &w, auto &v) { s.scenario.lifi.theta_full_deg = to_double(w, v); }},
           {"theta_cut_deg", [](auto &s, auto &w, auto &v) { s.scenario.lifi.theta_cut_deg = to_double(w, v); }},
           {"propagation_delay_ms", [](auto &s, auto &w, auto &v) { s.scenario.lifi.propagation_delay_ms = to_double(w, v); }},
           {"frames_per_ms", [](auto &s, auto &w, auto &v) { s.scenario.lifi.bitrate_frames_per_ms = to_double(w, v); }},
           {"angle_deg", [](auto &s, auto &w, auto &v) { s.scenario.lifi.angle_deg = to_double(w, v); }},
           {"angle_schedule",
            [](auto &s, auto &w, auto &v) {
              try {
                s.scenario.angle_schedule = parse_angle_schedule(v);
              } catch (const ConfigError &e) {
                throw ConfigError(w + ": " + e.what());
              }
            }},
       }},
      {"rf",
       {
           {"delivery_probability", [](auto &s, auto &w, auto &v) { s.scenario.rf.delivery_probability = to_double(w, v); }},
           {"propagation_delay_ms", [](auto &s, auto &w, auto &v) { s.scenario.rf.propagation_delay_ms = to_double(w, v); }},
       }},
      {"rekey",
       {
           {"interval_ms", [](auto &s, auto &w, auto &v) { s.scenario.rekey.interval = to_ms_time(w, v); }},
           {"commit_timeout_ms", [](auto &s, auto &w, auto &v) { s.scenario.rekey.commit_timeout = to_ms_time(w, v); }},
           {"commit_retries", [](auto &s, auto &w, auto &v) { s.scenario.rekey.commit_retries = to_count(w, v); }},
           {"stall_timeout_ms", [](auto &s, auto &w, auto &v) { s.scenario.rekey.stall_timeout = to_ms_time(w, v); }},
           {"handshake_timeout_ms", [](auto &s, auto &w, auto &v) { s.scenario.handshake.timeout = to_ms_time(w, v); }},
           {"handshake_retries", [](auto &s, auto &w, auto &v) { s.scenario.handshake.max_retries = to_count(w, v); }},
           {"periodic", [](auto &s, auto &w, auto &v) { s.scenario.periodic_rekey = to_bool(w, v); }},
           {"hold_old_key_on_failure", [](auto &s, auto &w, auto &v) { s.scenario.rekey.hold_old_key_on_failure = to_bool(w, v); }},
       }},
      {"traffic",
       {
           {"enabled", [](auto &s, auto &w, auto &v) { s.scenario.traffic_enabled = to_bool(w, v); }},
           {"offered_load_mbps", [](auto &s, auto &w, auto &v) { s.scenario.traffic.offered_load_mbps = to_double(w, v); }},
           {"uplink_mbps", [](auto &s, auto &w, auto &v) { s.scenario.traffic.uplink_mbps = to_double(w, v); }},
           {"nominal_throughput_mbps", [](auto &s, auto &w, auto &v) { s.scenario.traffic.nominal_throughput_mbps = to_double(w, v); }},
           {"tick_ms", [](auto &s, auto &w, auto &v) { s.scenario.traffic.tick = to_ms_time(w, v); }},
           {"metric_interval_ms", [](auto &s, auto &w, auto &v) { s.scenario.traffic.metric_interval = to_ms_time(w, v); }},
           {"window_ms", [](auto &s, auto &w, auto &v) { s.scenario.traffic.window = to_ms_time(w, v); }},
       }},
      {"experiment",
       {
           {"kind",
            [](auto &s, auto &w, auto &v) {
              const auto k = trim(v);
              if (k == "sweep") {
                s.kind = ExperimentKind::AngleSweep;
              } else if (k == "trace") {
                s.kind = ExperimentKind::Trace;
              } else if (k == "adversarial") {
                s.kind = ExperimentKind::Adversarial;
              } else {
                throw ConfigError(w + ": expected sweep, trace or adversarial");
              }
            }},
           {"seeds",
            [](auto &s, auto &w, auto &v) {
              try {
                s.seeds = parse_seeds(v);
              } catch (const ConfigError &e) {
                throw ConfigError(w + ": " + e.what());
              }
            }},
           {"angles",
            [](auto &s, auto &w, auto &v) {
              try {
                s.sweep.angles = parse_angle_grid(v);
              } catch (const ConfigError &e) {
                throw ConfigError(w + ": " + e.what());
              }
            }},
           {"attempts", [](auto &s, auto &w, auto &v) { s.sweep.attempts = to_count(w, v); }},
           {"attempt_duration_ms", [](auto &s, auto &w, auto &v) { s.sweep.attempt_duration = to_ms_time(w, v); }},
           {"runs", [](auto &s, auto &w, auto &v) { s.adversarial.runs = to_count(w, v); }},
           {"dictionary_size", [](auto &s, auto &w, auto &v) { s.adversarial.dictionary_size = to_count(w, v); }},
           {"dictionary_seed", [](auto &s, auto &w, auto &v) { s.adversarial.dictionary_seed = to_u64(w, v); }},
           {"run_duration_ms", [](auto &s, auto &w, auto &v) { s.adversarial.run_duration = to_ms_time(w, v); }},
       }},
  };
  return sections;
}

scenario::TapSpec parse_tap(const std::string &where, const std::string &id,
                            const std::string &value) {
  const auto parts = split(value, ',');
  scenario::TapSpec tap;
  tap.id = id;
  if (parts[0] == "rf") {
    if (parts.size() != 1) throw ConfigError(where + ": an RF tap takes no options");
    tap.medium = netsim::Medium::RF;
    return tap;
  }
  if (parts[0] != "lifi") throw ConfigError(where + ": medium must be rf or lifi");
  tap.medium = netsim::Medium::LiFi;
  if (parts.size() == 1) return tap;
  if (parts.size() != 2) throw ConfigError(where + ": expected 'lifi, in_cone|out_of_cone|<angle>'");
  if (parts[1] == "in_cone") {
    tap.in_cone = true;
  } else if (parts[1] == "out_of_cone") {
    tap.in_cone = false;
  } else {
    tap.angle_deg = to_double(where, parts[1]);
  }
  return tap;
}

}  // namespace

const char *to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::AngleSweep: return "sweep";
    case ExperimentKind::Trace: return "trace";
    case ExperimentKind::Adversarial: return "adversarial";
  }
  return "?";
}

std::vector<double> parse_angle_grid(std::string_view text) {
  const std::string s = trim(text);
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw ConfigError("angle grid must be start:stop:step");
    const double start = to_double("angle grid", parts[0]);
    const double stop = to_double("angle grid", parts[1]);
    const double step = to_double("angle grid", parts[2]);
    if (!(step > 0) || stop < start) throw ConfigError("angle grid needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    if (n > 100'000) throw ConfigError("angle grid too large");
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  } else {
    for (const auto &p : split(s, ',')) out.push_back(to_double("angle grid", p));
  }
  if (out.empty()) throw ConfigError("angle grid is empty");
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  const std::string s = trim(text);
  std::vector<std::uint64_t> out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto lo = to_u64("seeds", s.substr(0, dots));
    const auto hi = to_u64("seeds", s.substr(dots + 2));
    if (hi < lo || hi - lo > 10'000'000) throw ConfigError("seed range must be lo..hi with lo <= hi");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  } else {
    for (const auto &p : split(s, ',')) out.push_back(to_u64("seeds", p));
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<scenario::AngleChange> parse_angle_schedule(std::string_view text) {
  std::vector<scenario::AngleChange> out;
  if (trim(text).empty()) return out;
  for (const auto &item : split(text, ',')) {
    const auto at = item.find('@');
    if (at == std::string::npos) throw ConfigError("schedule entries are angle@time_ms, got '" + item + "'");
    scenario::AngleChange change;
    change.angle_deg = to_double("angle", item.substr(0, at));
    change.at = to_ms_time("time", item.substr(at + 1));
    if (!out.empty() && change.at < out.back().at) {
      throw ConfigError("schedule entries must be in time order");
    }
    out.push_back(change);
  }
  return out;
}

ExperimentSpec default_spec() {
  ExperimentSpec spec;
  spec.scenario.taps = {
      {"rf_eve", netsim::Medium::RF, true, std::nullopt},
      {"lifi_far", netsim::Medium::LiFi, false, std::nullopt},
      {"lifi_near", netsim::Medium::LiFi, true, std::nullopt},
  };
  spec.seeds = {spec.scenario.seed};
  spec.sweep.angles = parse_angle_grid("-40:40:5");
  return spec;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  try {
    scenario.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  if (sweep.angles.empty()) throw ConfigError("experiment.angles must not be empty");
  if (sweep.attempts <= 0) throw ConfigError("experiment.attempts must be > 0");
  if (sweep.attempt_duration <= SimTime::zero()) {
    throw ConfigError("experiment.attempt_duration_ms must be > 0");
  }
  if (adversarial.runs <= 0) throw ConfigError("experiment.runs must be > 0");
  if (adversarial.dictionary_size <= 0) throw ConfigError("experiment.dictionary_size must be > 0");
  if (adversarial.run_duration <= SimTime::zero()) {
    throw ConfigError("experiment.run_duration_ms must be > 0");
  }
}

ExperimentSpec parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  ExperimentSpec spec = default_spec();
  bool seeds_given = false;
  const auto &sections = schema();
  // Fixed section order so later sections can rely on earlier values.
  static const std::vector<std::string> order = {"sim", "lifi", "rf", "rekey",
                                                 "traffic", "taps", "experiment"};
  for (const auto &[name, node] : tree) {
    if (std::find(order.begin(), order.end(), name) == order.end()) {
      throw ConfigError("unknown section [" + name + "]");
    }
    if (!node.data().empty()) throw ConfigError("key '" + name + "' outside a section");
  }
  for (const auto &name : order) {
    const auto child = tree.get_child_optional(name);
    if (!child) continue;
    if (name == "taps") {
      spec.scenario.taps.clear();
      for (const auto &[id, value] : *child) {
        spec.scenario.taps.push_back(parse_tap("taps." + id, id, value.data()));
      }
      continue;
    }
    const auto &section = sections.at(name);
    for (const auto &[key, value] : *child) {
      const auto it = section.find(key);
      if (it == section.end()) throw ConfigError("unknown key " + name + "." + key);
      if (name == "experiment" && key == "seeds") seeds_given = true;
      it->second(spec, name + "." + key, value.data());
    }
  }
  if (!seeds_given) spec.seeds = {spec.scenario.seed};
  spec.validate();
  return spec;
}

ExperimentSpec load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace lightguard::config
