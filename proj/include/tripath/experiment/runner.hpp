#pragma once
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <tripath/core/model.hpp>
#include <tripath/core/path_set.hpp>
#include <tripath/core/types.hpp>
#include <tripath/sim/photon_sim.hpp>

namespace tripath::experiment {

/// Everything that defines the virtual apparatus apart from the phase point.
struct Experiment {
  core::InterferometerConfig config{};
  core::DetectorModel detector{};
  sim::SourceStatistics source{};
  /// Genuine three-path term added to R_ABC (see sim::inject_violation).
  double violation_strength = 0.0;
  /// Relative laser-intensity change per leg within a run: the leg at order
  /// position k sees photon rates scaled by (1 + intensity_drift * k).
  double intensity_drift = 0.0;
};

struct MeasureOptions {
  int n_runs = 1000;
  double leg_duration = 1.0;  ///< seconds per combination
  std::uint64_t seed = 0;
  bool randomize_order = true;
  int threads = 1;
  sim::SimulationLimits limits{};
};

struct KappaEstimate {
  double kappa_mean = 0.0;
  double kappa_stderr = 0.0;  ///< standard error of the mean over runs
  double epsilon_mean = 0.0;  ///< counts/s
  double delta_mean = 0.0;
  int n_runs = 0;
  core::PhasePoint phase{};
};

/// One integration window of a kappa measurement, for the audit trail.
struct LegRecord {
  int run_index = 0;
  core::PathSet combination{};
  int order_position = 0;
  std::uint64_t count = 0;
  double duration = 0.0;
  std::uint64_t seed = 0;
};

/// The eight combinations in the order run `run_index` visits them.
/// Fisher-Yates shuffle seeded from (seed, run_index) when `randomize`, mask
/// order otherwise.
std::array<core::PathSet, 8> combination_order(std::uint64_t seed, int run_index, bool randomize);

/// Repeats the eight-combination protocol n_runs times at `phase`, computes
/// kappa per run from the simulated detected rates and returns the mean and
/// its standard error. Each leg's seed depends only on (seed, run, combination),
/// so results are identical for any thread count. Throws
/// DegenerateNormalizationError if any run has delta = 0.
KappaEstimate measure_kappa(const Experiment& experiment, core::PhasePoint phase,
                            const MeasureOptions& options, std::vector<LegRecord>* audit = nullptr);

/// Detected single-path rates R_A^det, R_B^det, R_C^det (counts/s).
struct SingleRates {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  SingleRates scaled(double factor) const { return {a * factor, b * factor, c * factor}; }
};

/// Expected detected single-path rates of a configuration.
SingleRates expected_single_rates(const core::InterferometerConfig& config,
                                  const core::DetectorModel& detector);

/// Predicted detected rates of all eight combinations from the single-path
/// detected rates alone: invert the singles, rebuild the multi-path incident
/// rates assuming Born's rule with full visibility, push them forward again.
core::SumRuleInputs predict_detected_rates(const SingleRates& measured,
                                           const core::DetectorModel& detector,
                                           core::PhasePoint phase);

/// kappa of predict_detected_rates: the systematic kappa produced by the
/// detector nonlinearity alone.
double predict_kappa_det(const SingleRates& measured, const core::DetectorModel& detector,
                         core::PhasePoint phase);

/// Scales `ratios` so that the predicted detected R_ABC at `phase` equals
/// `target_r_abc_det`. Throws OutOfRangeError if the target is unreachable
/// below saturation.
SingleRates reconstruct_single_rates(const SingleRates& ratios, double target_r_abc_det,
                                     const core::DetectorModel& detector, core::PhasePoint phase);

/// Interferometer whose expected detected single-path rates are `singles`.
core::InterferometerConfig config_from_single_rates(const SingleRates& singles,
                                                    const core::DetectorModel& detector,
                                                    core::PhasePoint phase = {});

/// Raster over phase space. Grid coordinates are the phases set by the
/// plates; the interferometer sees grid - phase_origin, so `phase_origin` is
/// the plate setting at which all three paths are in phase.
struct ScanSpec {
  std::vector<double> grid_a;  ///< phi_A values, radians, strictly increasing
  std::vector<double> grid_c;
  int runs_per_point = 1;
  double leg_duration = 1.0;
  std::uint64_t base_seed = 0;
  core::PhasePoint phase_origin{};
  bool simulate = true;  ///< false: analytic surfaces only
  int threads = 1;

  void validate() const;
};

struct ScanPoint {
  double phi_a = 0.0;  ///< grid coordinates
  double phi_c = 0.0;
  double r_abc_det = 0.0;  ///< expected detected three-path rate
  std::optional<KappaEstimate> measured;
  std::optional<double> kappa_det;
};

struct ScanResult {
  /// Row-major with phi_C varying fastest: index = ia * grid_c.size() + ic.
  std::vector<ScanPoint> points;
  std::size_t n_a = 0;
  std::size_t n_c = 0;
  std::size_t argmax = 0;  ///< grid point of largest r_abc_det
  core::PhasePoint refined_max{};  ///< argmax after golden-section refinement
};

ScanResult scan_phase_space(const ScanSpec& spec, const Experiment& experiment);

/// `n` evenly spaced values from lo to hi inclusive (n >= 2), or {lo} for n = 1.
std::vector<double> linspace(double lo, double hi, int n);

struct SweepRow {
  double scale = 1.0;
  double r_abc_det = 0.0;  ///< expected detected R_ABC at the phase point
  double kappa_det = 0.0;
  double kappa_exp = std::numeric_limits<double>::quiet_NaN();
  double kappa_stderr = std::numeric_limits<double>::quiet_NaN();
  int n_runs = 0;
};

/// Multiplies all three incident single-path rates by each factor, then
/// measures kappa (when options.n_runs > 0) and predicts kappa_det at `phase`.
/// Row k uses measurement seed derive_seed(options.seed, {k}).
std::vector<SweepRow> intensity_sweep(const Experiment& base, const std::vector<double>& scale_factors,
                                      core::PhasePoint phase, const MeasureOptions& options);

/// Table-style sweep: for each target detected R_ABC, reconstruct single-path
/// detected rates with fixed `ratios`, then measure and predict as above. The
/// row's `scale` is the factor applied to `ratios`.
std::vector<SweepRow> intensity_sweep_to_targets(const Experiment& base, const SingleRates& ratios,
                                                 const std::vector<double>& targets_r_abc_det,
                                                 core::PhasePoint phase,
                                                 const MeasureOptions& options);

}  // namespace tripath::experiment
