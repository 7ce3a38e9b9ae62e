#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <tripath/error.hpp>
#include <tripath/io/csv.hpp>
#include <tripath/io/run_config.hpp>

namespace tripath::io {

namespace {

constexpr double kPi = std::numbers::pi;

double to_double(const std::string& key, const std::string& text) {
  std::string_view s = text;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(fmt::format("{}: '{}' is not a number", key, text));
  return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ParseError(fmt::format("{}: '{}' is not an integer", key, text));
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParseError(fmt::format("{}: '{}' is not a boolean", key, text));
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_number(xs[i]);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define TP_DOUBLE(sec, name, member)                                                   \
  Field{sec, name, [](const RunConfig& c) { return format_number(c.member); },        \
        [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); }}
#define TP_INT(sec, name, member)                                                      \
  Field{sec, name, [](const RunConfig& c) { return std::to_string(c.member); },       \
        [](RunConfig& c, const std::string& v) { c.member = to_int<decltype(c.member)>(name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TP_DOUBLE("interferometer", "rate_a_cps", rate_a_cps),
      TP_DOUBLE("interferometer", "rate_b_cps", rate_b_cps),
      TP_DOUBLE("interferometer", "rate_c_cps", rate_c_cps),
      Field{"interferometer", "rate_kind",
            [](const RunConfig& c) { return std::string(to_string(c.rate_kind)); },
            [](RunConfig& c, const std::string& v) {
              if (v == "incident") c.rate_kind = RateKind::incident;
              else if (v == "detected") c.rate_kind = RateKind::detected;
              else throw ParseError(fmt::format("rate_kind: '{}' is not incident|detected", v));
            }},
      TP_DOUBLE("interferometer", "phi_a_pi", phi_a_pi),
      TP_DOUBLE("interferometer", "phi_c_pi", phi_c_pi),
      TP_DOUBLE("interferometer", "visibility_ab", visibility_ab),
      TP_DOUBLE("interferometer", "visibility_ac", visibility_ac),
      TP_DOUBLE("interferometer", "visibility_bc", visibility_bc),
      TP_DOUBLE("detector", "dead_time_ns", dead_time_ns),
      TP_DOUBLE("detector", "dark_rate_cps", dark_rate_cps),
      TP_DOUBLE("detector", "efficiency", efficiency),
      Field{"source", "mode", [](const RunConfig& c) { return std::string(sim::to_string(c.source_mode)); },
            [](RunConfig& c, const std::string& v) {
              try {
                c.source_mode = sim::parse_source_mode(v);
              } catch (const Error& e) {
                throw ParseError(fmt::format("mode: {}", e.what()));
              }
            }},
      TP_DOUBLE("source", "period_ns", period_ns),
      TP_INT("measurement", "runs", runs),
      TP_DOUBLE("measurement", "leg_duration_s", leg_duration_s),
      TP_DOUBLE("measurement", "violation_strength", violation_strength),
      TP_DOUBLE("measurement", "intensity_drift_per_leg", intensity_drift),
      Field{"measurement", "randomize_order",
            [](const RunConfig& c) { return std::string(c.randomize_order ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.randomize_order = to_bool("randomize_order", v); }},
      TP_DOUBLE("scan", "phi_a_min_pi", scan_phi_a_min_pi),
      TP_DOUBLE("scan", "phi_a_max_pi", scan_phi_a_max_pi),
      TP_INT("scan", "phi_a_steps", scan_phi_a_steps),
      TP_DOUBLE("scan", "phi_c_min_pi", scan_phi_c_min_pi),
      TP_DOUBLE("scan", "phi_c_max_pi", scan_phi_c_max_pi),
      TP_INT("scan", "phi_c_steps", scan_phi_c_steps),
      TP_DOUBLE("scan", "origin_phi_a_pi", origin_phi_a_pi),
      TP_DOUBLE("scan", "origin_phi_c_pi", origin_phi_c_pi),
      TP_INT("scan", "runs_per_point", scan_runs_per_point),
      Field{"sweep", "scale_factors", [](const RunConfig& c) { return join(c.sweep_scale_factors); },
            [](RunConfig& c, const std::string& v) { c.sweep_scale_factors = parse_number_list(v); }},
      Field{"sweep", "target_r_abc_det_cps",
            [](const RunConfig& c) { return join(c.sweep_target_r_abc_det_cps); },
            [](RunConfig& c, const std::string& v) { c.sweep_target_r_abc_det_cps = parse_number_list(v); }},
      TP_INT("run", "seed", seed),
      TP_INT("run", "threads", threads),
      Field{"run", "output_dir", [](const RunConfig& c) { return c.output_dir; },
            [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      TP_INT("run", "verbosity", verbosity),
  };
  return table;
}

#undef TP_DOUBLE
#undef TP_INT

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidConfigError(message);
}

void check_grid(double lo, double hi, int steps, const char* axis) {
  require(std::isfinite(lo) && std::isfinite(hi), fmt::format("scan {} range must be finite", axis));
  require(steps >= 1, fmt::format("scan {} steps must be >= 1", axis));
  require(steps == 1 || hi > lo, fmt::format("scan {} range must be increasing", axis));
}

}  // namespace

std::string_view to_string(RateKind kind) {
  return kind == RateKind::incident ? "incident" : "detected";
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    auto item = text.substr(start, comma - start);
    const auto a = item.find_first_not_of(" \t");
    if (a != std::string::npos) {
      item = item.substr(a, item.find_last_not_of(" \t") - a + 1);
      out.push_back(to_double("list", item));
    } else if (comma != text.size() || !out.empty()) {
      throw ParseError(fmt::format("empty entry in number list '{}'", text));
    }
    start = comma + 1;
  }
  return out;
}

core::DetectorModel RunConfig::detector() const {
  return {dead_time_ns * 1e-9, dark_rate_cps, efficiency};
}

sim::SourceStatistics RunConfig::source() const {
  return {source_mode, source_mode == sim::SourceMode::regular_emitter ? period_ns * 1e-9 : 0.0};
}

core::PhasePoint RunConfig::phase() const { return {phi_a_pi * kPi, phi_c_pi * kPi}; }

core::PhasePoint RunConfig::phase_origin() const {
  return {origin_phi_a_pi * kPi, origin_phi_c_pi * kPi};
}

core::InterferometerConfig RunConfig::interferometer() const {
  core::InterferometerConfig c;
  if (rate_kind == RateKind::detected) {
    c = experiment::config_from_single_rates({rate_a_cps, rate_b_cps, rate_c_cps}, detector(), phase());
  } else {
    c.rate_a = rate_a_cps;
    c.rate_b = rate_b_cps;
    c.rate_c = rate_c_cps;
    c.phase = phase();
  }
  c.visibility_ab = visibility_ab;
  c.visibility_ac = visibility_ac;
  c.visibility_bc = visibility_bc;
  c.validate();
  return c;
}

experiment::Experiment RunConfig::experiment() const {
  return {interferometer(), detector(), source(), violation_strength, intensity_drift};
}

experiment::MeasureOptions RunConfig::measure_options() const {
  experiment::MeasureOptions o;
  o.n_runs = runs;
  o.leg_duration = leg_duration_s;
  o.seed = seed;
  o.randomize_order = randomize_order;
  o.threads = threads;
  return o;
}

experiment::ScanSpec RunConfig::scan_spec() const {
  experiment::ScanSpec s;
  s.grid_a = experiment::linspace(scan_phi_a_min_pi * kPi, scan_phi_a_max_pi * kPi, scan_phi_a_steps);
  s.grid_c = experiment::linspace(scan_phi_c_min_pi * kPi, scan_phi_c_max_pi * kPi, scan_phi_c_steps);
  s.runs_per_point = scan_runs_per_point > 0 ? scan_runs_per_point : 1;
  s.simulate = scan_runs_per_point > 0;
  s.leg_duration = leg_duration_s;
  s.base_seed = seed;
  s.phase_origin = phase_origin();
  s.threads = threads;
  return s;
}

void RunConfig::validate() const {
  detector().validate();
  for (double r : {rate_a_cps, rate_b_cps, rate_c_cps})
    require(std::isfinite(r) && r >= 0.0, "single-path rates must be finite and >= 0");
  for (double p : {phi_a_pi, phi_c_pi, origin_phi_a_pi, origin_phi_c_pi})
    require(std::isfinite(p), "phases must be finite");
  interferometer();  // visibilities, and detected rates below saturation
  if (source_mode == sim::SourceMode::regular_emitter)
    require(std::isfinite(period_ns) && period_ns > 0.0, "regular emitter needs period_ns > 0");
  require(runs >= 1, "runs must be >= 1");
  require(std::isfinite(leg_duration_s) && leg_duration_s > 0.0, "leg_duration_s must be > 0");
  require(std::isfinite(violation_strength), "violation_strength must be finite");
  require(std::isfinite(intensity_drift), "intensity_drift_per_leg must be finite");
  check_grid(scan_phi_a_min_pi, scan_phi_a_max_pi, scan_phi_a_steps, "phi_a");
  check_grid(scan_phi_c_min_pi, scan_phi_c_max_pi, scan_phi_c_steps, "phi_c");
  require(scan_runs_per_point >= 0, "runs_per_point must be >= 0");
  for (double s : sweep_scale_factors)
    require(std::isfinite(s) && s > 0.0, "sweep scale factors must be > 0");
  for (double t : sweep_target_r_abc_det_cps)
    require(std::isfinite(t) && t > 0.0, "sweep targets must be > 0");
  require(threads >= 1, "threads must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");
  require(verbosity >= 0, "verbosity must be >= 0");
}

RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty())
      throw ParseError(fmt::format("config key '{}' is outside any section", section));
    for (const auto& [key, value] : body) {
      const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
        return section == f.section && key == f.key;
      });
      if (it == fields().end()) throw ParseError(fmt::format("unknown config key [{}] {}", section, key));
      it->set(config, value.get_value<std::string>());
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open config '{}'", path));
  return parse_run_config(in);
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

}  // namespace tripath::io
