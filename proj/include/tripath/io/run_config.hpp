#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <tripath/experiment/runner.hpp>

namespace tripath::io {

enum class RateKind { incident, detected };

/// Everything a CLI run needs. Angles are stored in units of pi, as they
/// appear in config files; conversion to radians happens in the accessors.
struct RunConfig {
  // [interferometer]
  double rate_a_cps = 2080.0;
  double rate_b_cps = 5760.0;
  double rate_c_cps = 1990.0;
  /// `detected`: the rates are expected detected single-path rates and are
  /// inverted through the detector model before use.
  RateKind rate_kind = RateKind::incident;
  double phi_a_pi = 0.0;
  double phi_c_pi = 0.0;
  double visibility_ab = 1.0;
  double visibility_ac = 1.0;
  double visibility_bc = 1.0;

  // [detector]
  double dead_time_ns = 0.0;
  double dark_rate_cps = 0.0;
  double efficiency = 1.0;

  // [source]
  sim::SourceMode source_mode = sim::SourceMode::poissonian;
  double period_ns = 0.0;

  // [measurement]
  int runs = 1000;
  double leg_duration_s = 1.0;
  double violation_strength = 0.0;
  double intensity_drift = 0.0;
  bool randomize_order = true;

  // [scan]
  double scan_phi_a_min_pi = 0.0;
  double scan_phi_a_max_pi = 2.0;
  int scan_phi_a_steps = 41;
  double scan_phi_c_min_pi = 0.0;
  double scan_phi_c_max_pi = 2.0;
  int scan_phi_c_steps = 41;
  double origin_phi_a_pi = 0.0;
  double origin_phi_c_pi = 0.0;
  int scan_runs_per_point = 0;  ///< 0: analytic surfaces only

  // [sweep]
  std::vector<double> sweep_scale_factors;
  std::vector<double> sweep_target_r_abc_det_cps;  ///< takes precedence when set

  // [run]
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = ".";
  int verbosity = 0;

  /// Throws InvalidConfigError unless every physical parameter passes its
  /// type invariants.
  void validate() const;

  core::DetectorModel detector() const;
  sim::SourceStatistics source() const;
  core::PhasePoint phase() const;  ///< radians
  core::PhasePoint phase_origin() const;
  /// Interferometer at phase(), with detected rates inverted if needed.
  core::InterferometerConfig interferometer() const;
  experiment::Experiment experiment() const;
  experiment::MeasureOptions measure_options() const;
  experiment::ScanSpec scan_spec() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string_view to_string(RateKind kind);

/// Sectioned key-value text ([section] then `key = value`). Unknown keys and
/// malformed values raise ParseError; missing keys keep their defaults.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);
/// Every key, written so that parse_run_config reproduces the config exactly.
void write_run_config(std::ostream& out, const RunConfig& config);

/// "1, 2.5,3" -> {1, 2.5, 3}; empty text -> {}.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace tripath::io
