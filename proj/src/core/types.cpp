#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include <tripath/core/path_set.hpp>
#include <tripath/core/types.hpp>
#include <tripath/error.hpp>

namespace tripath::core {

namespace {

void require_rate(double value, const char* name) {
  if (!std::isfinite(value) || value < 0.0)
    throw InvalidConfigError(fmt::format("{} must be finite and >= 0, got {}", name, value));
}

void require_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0))
    throw InvalidConfigError(fmt::format("{} must lie in [0, 1], got {}", name, value));
}

double wrap_two_pi(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(phi, two_pi);
  if (r < 0.0) r += two_pi;
  // fmod of a tiny negative value can round up to exactly 2pi
  return r >= two_pi ? 0.0 : r;
}

}  // namespace

PathSet PathSet::parse(std::string_view label) {
  if (label.empty() || label == "0") return none();
  PathSet s;
  for (char c : label) {
    switch (c) {
      case 'A': case 'a': s = s | Path::A; break;
      case 'B': case 'b': s = s | Path::B; break;
      case 'C': case 'c': s = s | Path::C; break;
      default:
        throw ParseError(fmt::format("invalid path-set label '{}'", label));
    }
  }
  return s;
}

std::string PathSet::label() const {
  if (empty()) return "0";
  std::string out;
  if (contains(Path::A)) out += 'A';
  if (contains(Path::B)) out += 'B';
  if (contains(Path::C)) out += 'C';
  return out;
}

PhasePoint PhasePoint::canonical() const { return {wrap_two_pi(phi_a), wrap_two_pi(phi_c)}; }

void InterferometerConfig::validate() const {
  require_rate(rate_a, "rate_A");
  require_rate(rate_b, "rate_B");
  require_rate(rate_c, "rate_C");
  if (!std::isfinite(phase.phi_a) || !std::isfinite(phase.phi_c))
    throw InvalidConfigError("phases must be finite");
  require_unit_interval(visibility_ab, "visibility_AB");
  require_unit_interval(visibility_ac, "visibility_AC");
  require_unit_interval(visibility_bc, "visibility_BC");
  // The mutual-coherence matrix [[1,Vab,Vac],[Vab,1,Vbc],[Vac,Vbc,1]] must be
  // positive semidefinite or some phase point yields a negative intensity.
  // Path phases enter as a unitary diagonal similarity, so the test is
  // phase independent.
  const double det = 1.0 + 2.0 * visibility_ab * visibility_ac * visibility_bc -
                     visibility_ab * visibility_ab - visibility_ac * visibility_ac -
                     visibility_bc * visibility_bc;
  if (det < -1e-12)
    throw InvalidConfigError(fmt::format(
        "visibilities (AB={}, AC={}, BC={}) are not jointly realizable by partially coherent beams",
        visibility_ab, visibility_ac, visibility_bc));
}

double InterferometerConfig::rate(Path p) const {
  switch (p) {
    case Path::A: return rate_a;
    case Path::B: return rate_b;
    case Path::C: return rate_c;
  }
  return 0.0;
}

InterferometerConfig InterferometerConfig::scaled(double factor) const {
  InterferometerConfig out = *this;
  out.rate_a *= factor;
  out.rate_b *= factor;
  out.rate_c *= factor;
  return out;
}

InterferometerConfig InterferometerConfig::at(PhasePoint p) const {
  InterferometerConfig out = *this;
  out.phase = p;
  return out;
}

void DetectorModel::validate() const {
  require_rate(dead_time, "dead_time");
  require_rate(dark_rate, "dark_rate");
  if (!(efficiency > 0.0 && efficiency <= 1.0))
    throw InvalidConfigError(fmt::format("efficiency must lie in (0, 1], got {}", efficiency));
}

SumRuleInputs::SumRuleInputs(const std::array<double, 8>& rates) : rates_(rates) {
  for (PathSet s : PathSet::all()) {
    double r = rates_[s.index()];
    if (!std::isfinite(r) || r < 0.0)
      throw InvalidConfigError(
          fmt::format("rate for combination {} must be finite and >= 0, got {}", s.label(), r));
  }
}

void PhasePlateGeometry::validate() const {
  if (!(thickness > 0.0) || !std::isfinite(thickness))
    throw InvalidConfigError("plate thickness must be > 0");
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw InvalidConfigError("wavelength must be > 0");
  if (!(n_air >= 1.0 && n_glass >= n_air))
    throw InvalidConfigError(
        fmt::format("refractive indices must satisfy n2 >= n1 >= 1, got n1={} n2={}", n_air, n_glass));
}

}  // namespace tripath::core
