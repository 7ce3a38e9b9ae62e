#pragma once
#include <array>
#include <tripath/core/path_set.hpp>

namespace tripath::core {

/// Phases applied to paths A and C in radians. Path B is the reference.
struct PhasePoint {
  double phi_a = 0.0;
  double phi_c = 0.0;

  /// Both coordinates reduced to [0, 2pi).
  PhasePoint canonical() const;
  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

/// Single-path incident rates (photons/s), phase point and pairwise
/// visibilities of the three-path interferometer.
struct InterferometerConfig {
  double rate_a = 0.0;
  double rate_b = 0.0;
  double rate_c = 0.0;
  PhasePoint phase{};
  double visibility_ab = 1.0;
  double visibility_ac = 1.0;
  double visibility_bc = 1.0;

  /// Throws InvalidConfigError on negative/non-finite rates or a visibility
  /// outside [0, 1].
  void validate() const;

  double rate(Path p) const;
  /// Copy with all three single-path rates multiplied by `factor`.
  InterferometerConfig scaled(double factor) const;
  InterferometerConfig at(PhasePoint p) const;
};

/// Nonparalyzable dead-time detector with additive dark counts.
struct DetectorModel {
  double dead_time = 0.0;   ///< seconds
  double dark_rate = 0.0;   ///< counts/s
  double efficiency = 1.0;  ///< applied to photons only

  void validate() const;
  bool linear() const { return dead_time == 0.0; }
};

/// Detected (or incident) rate for each of the eight path combinations,
/// indexed by PathSet::index().
class SumRuleInputs {
 public:
  SumRuleInputs() = default;
  /// Throws InvalidConfigError if any rate is negative or non-finite.
  explicit SumRuleInputs(const std::array<double, 8>& rates);

  double operator[](PathSet s) const { return rates_[s.index()]; }
  const std::array<double, 8>& rates() const { return rates_; }

 private:
  std::array<double, 8> rates_{};
};

struct PhasePlateGeometry {
  double thickness = 0.9e-3;     ///< meters
  double wavelength = 800e-9;    ///< meters
  double n_air = 1.0;
  double n_glass = 1.5;
  double zero_angle_offset = 0.0;  ///< radians, added to the rotation angle

  void validate() const;
};

}  // namespace tripath::core
