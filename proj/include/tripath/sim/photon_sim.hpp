#pragma once
#include <cstdint>
#include <functional>
#include <string_view>

#include <tripath/core/model.hpp>
#include <tripath/core/path_set.hpp>
#include <tripath/core/types.hpp>

namespace tripath::sim {

enum class SourceMode { poissonian, regular_emitter };

std::string_view to_string(SourceMode mode);
SourceMode parse_source_mode(std::string_view text);

/// Photon statistics of the light source. A regular emitter fires one pulse
/// every `period` seconds; each pulse delivers a photon to the detector with
/// probability eta * R * period, so the mean incident rate is R.
struct SourceStatistics {
  SourceMode mode = SourceMode::poissonian;
  double period = 0.0;  ///< seconds, regular_emitter only

  static SourceStatistics poissonian() { return {}; }
  static SourceStatistics regular(double period) { return {SourceMode::regular_emitter, period}; }
};

struct SimulationLimits {
  double max_expected_events = 1e9;
};

struct SimulationRun {
  double incident_rate = 0.0;  ///< photons/s arriving at the detector
  core::DetectorModel detector{};
  double duration = 1.0;  ///< seconds
  std::uint64_t seed = 0;
  SourceStatistics statistics{};
};

struct CountRecord {
  core::PathSet path_set{};
  std::uint64_t detected_count = 0;
  double duration = 0.0;
  std::uint64_t seed = 0;

  double rate() const { return static_cast<double>(detected_count) / duration; }
};

/// Receives the timestamp (seconds from window start) of every detection.
using DetectionSink = std::function<void(double)>;

/// Merges the photon arrival stream with an independent Poisson dark-count
/// stream and applies nonparalyzable dead-time filtering: an event is
/// detected iff it arrives at least tau after the previous detection. The
/// window opens with the detector live. Streams are generated lazily, so
/// memory use does not grow with the event count.
///
/// Identical runs give bit-identical results. Throws ResourceLimitError when
/// the expected number of events exceeds `limits.max_expected_events`.
CountRecord simulate_stream(const SimulationRun& run, const DetectionSink& sink = {},
                            const SimulationLimits& limits = {});

/// Rates of the eight combinations with an optional genuine three-path term
/// added to R_ABC:  strength * cbrt(R_A R_B R_C) * cos(phi_A) * cos(phi_C).
/// With strength 0 this is exactly core::incident_rate.
class InjectedInterferometer {
 public:
  explicit InjectedInterferometer(const core::InterferometerConfig& config, double strength = 0.0);

  double rate(core::PathSet paths) const;
  core::SumRuleInputs rates() const;
  /// The term added to R_ABC, which is also epsilon over the incident rates.
  double injected_term() const { return term_; }
  const core::InterferometerConfig& config() const { return config_; }
  double strength() const { return strength_; }

 private:
  core::InterferometerConfig config_;
  double strength_;
  double term_;
};

/// Throws NegativeRateError if the injected term drives R_ABC below zero.
InjectedInterferometer inject_violation(const core::InterferometerConfig& config, double strength);

CountRecord simulate_combination(const InjectedInterferometer& source, core::PathSet paths,
                                 const core::DetectorModel& detector, double duration,
                                 std::uint64_t seed, const SourceStatistics& statistics = {},
                                 const SimulationLimits& limits = {});

CountRecord simulate_combination(const core::InterferometerConfig& config, core::PathSet paths,
                                 const core::DetectorModel& detector, double duration,
                                 std::uint64_t seed, const SourceStatistics& statistics = {},
                                 const SimulationLimits& limits = {});

}  // namespace tripath::sim
