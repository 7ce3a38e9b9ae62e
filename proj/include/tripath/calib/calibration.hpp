#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <tripath/core/types.hpp>

namespace tripath::calib {

/// Four detected rates from one beam-combination setting: detector dark,
/// beam A alone, beam B alone, both beams (non-interfering).
///
/// Assumes the two beam intensities are stable over the four legs, tau is
/// constant over the rate range and the live-time efficiency does not depend
/// on rate. These are not checked here; see drift_check for repeated legs.
struct QuadrupleMeasurement {
  double dark_rate = 0.0;  ///< counts/s
  double rate_a = 0.0;
  double rate_b = 0.0;
  double rate_ab = 0.0;
  double duration = 1.0;  ///< seconds per leg

  void validate() const;
};

/// Additivity defect of the inferred incident rates,
///   fbar(ab) - fbar(a) - fbar(b) + fbar(dark),
/// which vanishes for the true (tau, R0) in the absence of counting noise.
/// Negative when tau is underestimated (dead-time loss makes the combined
/// leg sub-additive).
double nonlinearity_defect(const QuadrupleMeasurement& q, double tau, double r0);

/// Incident-domain residual of the dark leg, fbar(dark) = 0 at the true R0.
double dark_residual(const QuadrupleMeasurement& q, double tau, double r0);

struct EstimateOptions {
  int bootstrap_resamples = 1000;
  std::uint64_t seed = 0x5eed;
  double relative_tolerance = 1e-12;
  int max_iterations = 200;
  /// Overrides each quadruple's leg duration for the variance weights when > 0.
  double counting_duration = 0.0;
};

struct CalibrationResult {
  double tau_hat = 0.0;  ///< seconds
  double tau_stderr = 0.0;
  double r0_hat = 0.0;  ///< counts/s
  double r0_stderr = 0.0;
  std::vector<double> residuals;  ///< per-quadruple defect at the estimate
  int n_quadruples = 0;
  int iterations = 0;
  double chi_square = 0.0;
  int bootstrap_used = 0;
  std::vector<std::string> warnings;
};

/// Point estimate only (no bootstrap). Weighted least squares over the
/// per-quadruple defects and dark-leg residuals; weights are the Poisson
/// variances of the legs propagated through fbar to first order.
CalibrationResult fit_parameters(const std::vector<QuadrupleMeasurement>& data,
                                 const EstimateOptions& options = {});

/// fit_parameters plus nonparametric bootstrap standard errors over
/// quadruples. Requires >= 3 quadruples; warns when rate_ab spans less than a
/// decade. Throws NonConvergenceError if the full-data fit fails.
CalibrationResult estimate_parameters(const std::vector<QuadrupleMeasurement>& data,
                                      const EstimateOptions& options = {});

/// Weighted sum of squares at (tau, r0); exposed for identifiability checks.
double objective(const std::vector<QuadrupleMeasurement>& data, double tau, double r0,
                 double counting_duration = 0.0);

struct DriftReport {
  double max_abs_z = 0.0;
  bool drifted = false;  ///< any leg moved by more than `threshold` sigma
};

/// Compares two recordings of the same setting leg by leg.
DriftReport drift_check(const QuadrupleMeasurement& first, const QuadrupleMeasurement& repeat,
                        double threshold_sigma = 5.0);

/// Noise-free quadruple from the analytic transfer function.
QuadrupleMeasurement expected_quadruple(double incident_a, double incident_b,
                                        const core::DetectorModel& detector, double duration);

/// Quadruple with each leg drawn from the event-stream simulator.
QuadrupleMeasurement simulate_quadruple(double incident_a, double incident_b,
                                        const core::DetectorModel& detector, double duration,
                                        std::uint64_t seed);

}  // namespace tripath::calib
