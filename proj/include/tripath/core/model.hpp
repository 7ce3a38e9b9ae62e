#pragma once
#include <tripath/core/path_set.hpp>
#include <tripath/core/types.hpp>

namespace tripath::core {

/// Expected incident rate with the shutters in `paths` open:
///   sum_x R_x + sum_{x<y} 2 V_xy sqrt(R_x R_y) cos(phi_x - phi_y),  phi_B = 0.
double incident_rate(const InterferometerConfig& config, PathSet paths);

/// Incident rates of all eight combinations.
SumRuleInputs incident_rates(const InterferometerConfig& config);

/// Detected rate f(R) = (eta R + R0) / (1 + (eta R + R0) tau).
double detector_forward(double incident_rate, const DetectorModel& model);

enum class DarkFloor {
  reject,  ///< detected rates below f(0) are an error
  extend,  ///< return the (negative) algebraic preimage; for fitting noisy legs
};

/// Exact algebraic inverse of detector_forward. Throws OutOfRangeError at or
/// above the 1/tau ceiling and, under DarkFloor::reject, below f(0).
double detector_inverse(double detected_rate, const DetectorModel& model,
                        DarkFloor floor = DarkFloor::reject);

/// Pushes each of the eight rates through detector_forward.
SumRuleInputs detected_rates(const SumRuleInputs& incident, const DetectorModel& model);

// Second-order sum-rule statistics over the eight combination rates.

/// R_ABC - R_AB - R_AC - R_BC + R_A + R_B + R_C - R_0
double epsilon(const SumRuleInputs& rates);
/// Sum of the magnitudes of the three background-corrected two-path terms.
double delta(const SumRuleInputs& rates);
/// epsilon / delta; throws DegenerateNormalizationError when delta == 0.
double kappa(const SumRuleInputs& rates);

/// Optical phase (radians) added by a tilted plate traversed twice.
double plate_angle_to_phase(double theta, const PhasePlateGeometry& geom);

}  // namespace tripath::core
