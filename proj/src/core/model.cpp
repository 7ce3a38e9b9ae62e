#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include <tripath/core/model.hpp>
#include <tripath/error.hpp>

namespace tripath::core {

namespace {

struct PathTerm {
  Path path;
  double rate;
  double phase;
};

double pair_visibility(const InterferometerConfig& c, Path x, Path y) {
  const unsigned m = static_cast<unsigned>(x) | static_cast<unsigned>(y);
  switch (m) {
    case 3: return c.visibility_ab;
    case 5: return c.visibility_ac;
    case 6: return c.visibility_bc;
  }
  return 1.0;
}

}  // namespace

double incident_rate(const InterferometerConfig& config, PathSet paths) {
  config.validate();
  const std::array<PathTerm, 3> terms{{
      {Path::A, config.rate_a, config.phase.phi_a},
      {Path::B, config.rate_b, 0.0},
      {Path::C, config.rate_c, config.phase.phi_c},
  }};

  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!paths.contains(terms[i].path)) continue;
    total += terms[i].rate;
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      if (!paths.contains(terms[j].path)) continue;
      const double v = pair_visibility(config, terms[i].path, terms[j].path);
      total += 2.0 * v * std::sqrt(terms[i].rate * terms[j].rate) *
               std::cos(terms[i].phase - terms[j].phase);
    }
  }
  // cancellation at a dark fringe can leave -1e-13 or so
  return total < 0.0 ? 0.0 : total;
}

SumRuleInputs incident_rates(const InterferometerConfig& config) {
  std::array<double, 8> r{};
  for (PathSet s : PathSet::all()) r[s.index()] = incident_rate(config, s);
  return SumRuleInputs(r);
}

double detector_forward(double incident_rate, const DetectorModel& model) {
  if (!std::isfinite(incident_rate) || incident_rate < 0.0)
    throw InvalidConfigError(fmt::format("incident rate must be finite and >= 0, got {}", incident_rate));
  model.validate();
  const double x = model.efficiency * incident_rate + model.dark_rate;
  return x / (1.0 + x * model.dead_time);
}

double detector_inverse(double detected_rate, const DetectorModel& model, DarkFloor floor) {
  model.validate();
  if (!std::isfinite(detected_rate) || detected_rate < 0.0)
    throw OutOfRangeError(fmt::format("detected rate must be finite and >= 0, got {}", detected_rate));
  const double tau = model.dead_time;
  const double r0 = model.dark_rate;
  if (tau > 0.0 && detected_rate * tau >= 1.0)
    throw OutOfRangeError(fmt::format(
        "detected rate {} cps is at or above the saturation ceiling 1/tau = {} cps", detected_rate,
        1.0 / tau));

  const double photon_part = (r0 - detected_rate * (1.0 + r0 * tau)) / (-1.0 + detected_rate * tau);
  if (floor == DarkFloor::reject && photon_part < 0.0) {
    // allow rounding noise when detected_rate is exactly f(0)
    const double slack = 1e-12 * std::max(detected_rate, r0);
    if (photon_part < -slack)
      throw OutOfRangeError(fmt::format(
          "detected rate {} cps is below the dark-count floor {} cps", detected_rate,
          r0 / (1.0 + r0 * tau)));
    return 0.0;
  }
  return photon_part / model.efficiency;
}

SumRuleInputs detected_rates(const SumRuleInputs& incident, const DetectorModel& model) {
  std::array<double, 8> r{};
  for (PathSet s : PathSet::all()) r[s.index()] = detector_forward(incident[s], model);
  return SumRuleInputs(r);
}

double epsilon(const SumRuleInputs& r) {
  using P = Path;
  const PathSet a = PathSet::none() | P::A, b = PathSet::none() | P::B, c = PathSet::none() | P::C;
  return r[PathSet::all_open()] - r[P::A | P::B] - r[P::A | P::C] - r[P::B | P::C] + r[a] + r[b] +
         r[c] - r[PathSet::none()];
}

double delta(const SumRuleInputs& r) {
  using P = Path;
  const double bg = r[PathSet::none()];
  const double ra = r[PathSet::none() | P::A];
  const double rb = r[PathSet::none() | P::B];
  const double rc = r[PathSet::none() | P::C];
  return std::abs(r[P::A | P::B] - ra - rb + bg) + std::abs(r[P::A | P::C] - ra - rc + bg) +
         std::abs(r[P::B | P::C] - rb - rc + bg);
}

double kappa(const SumRuleInputs& rates) {
  const double d = delta(rates);
  if (!(d > 0.0))
    throw DegenerateNormalizationError("delta is zero: no two-path interference, kappa undefined");
  return epsilon(rates) / d;
}

double plate_angle_to_phase(double theta, const PhasePlateGeometry& geom) {
  geom.validate();
  const double angle = theta + geom.zero_angle_offset;
  const double n1 = geom.n_air;
  const double n2 = geom.n_glass;
  const double sin_refracted = n1 * std::sin(angle) / n2;
  if (!(std::abs(sin_refracted) <= 1.0))
    throw TotalInternalReflectionError(
        fmt::format("no refracted ray for angle {} rad (n1={}, n2={})", angle, n1, n2));
  const double refracted = std::asin(sin_refracted);
  const double bracket = n1 - n2 + (n2 - n1 * std::cos(angle - refracted)) / std::cos(refracted);
  return 2.0 * std::numbers::pi / geom.wavelength * 2.0 * geom.thickness * bracket;
}

}  // namespace tripath::core
