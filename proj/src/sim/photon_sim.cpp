#include <cmath>
#include <limits>

#include <fmt/format.h>

#include <tripath/error.hpp>
#include <tripath/sim/photon_sim.hpp>
#include <tripath/sim/random.hpp>

namespace tripath::sim {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

/// Arrival times of the photon stream, generated one at a time.
class PhotonStream {
 public:
  PhotonStream(double rate, const SourceStatistics& stats, Rng& rng) : rng_(rng), rate_(rate) {
    if (stats.mode == SourceMode::regular_emitter) {
      period_ = stats.period;
      const double p = rate * period_;
      if (p > 1.0 + 1e-12)
        throw InvalidConfigError(fmt::format(
            "regular emitter: rate {} cps exceeds one photon per pulse (period {} s)", rate, period_));
      pulse_probability_ = std::min(p, 1.0);
      pulse_time_ = rng_.uniform() * period_;  // phase of the pulse train
      regular_ = true;
    }
    next_ = first();
  }

  double peek() const { return next_; }
  void advance() { next_ = following(); }

 private:
  double first() {
    if (rate_ <= 0.0) return kNever;
    if (!regular_) return rng_.exponential(rate_);
    pulse_time_ += static_cast<double>(pulses_skipped()) * period_;
    return pulse_time_;
  }

  double following() {
    if (rate_ <= 0.0) return kNever;
    if (!regular_) return next_ + rng_.exponential(rate_);
    pulse_time_ += static_cast<double>(1 + pulses_skipped()) * period_;
    return pulse_time_;
  }

  // Number of empty pulses before the next occupied one: Geometric(p) on {0,1,...}.
  std::uint64_t pulses_skipped() {
    if (pulse_probability_ >= 1.0) return 0;
    const double u = 1.0 - rng_.uniform();  // (0, 1]
    const double k = std::floor(std::log(u) / std::log1p(-pulse_probability_));
    return k > 1e18 ? std::uint64_t{1} << 60 : static_cast<std::uint64_t>(k);
  }

  Rng& rng_;
  double rate_;
  bool regular_ = false;
  double period_ = 0.0;
  double pulse_probability_ = 0.0;
  double pulse_time_ = 0.0;
  double next_ = kNever;
};

}  // namespace

std::string_view to_string(SourceMode mode) {
  return mode == SourceMode::poissonian ? "poissonian" : "regular_emitter";
}

SourceMode parse_source_mode(std::string_view text) {
  if (text == "poissonian") return SourceMode::poissonian;
  if (text == "regular_emitter" || text == "regular") return SourceMode::regular_emitter;
  throw ParseError(fmt::format("unknown source mode '{}'", text));
}

CountRecord simulate_stream(const SimulationRun& run, const DetectionSink& sink,
                            const SimulationLimits& limits) {
  run.detector.validate();
  if (!(run.duration > 0.0) || !std::isfinite(run.duration))
    throw InvalidConfigError(fmt::format("duration must be > 0, got {}", run.duration));
  if (!std::isfinite(run.incident_rate) || run.incident_rate < 0.0)
    throw InvalidConfigError(fmt::format("incident rate must be finite and >= 0, got {}", run.incident_rate));
  const bool regular = run.statistics.mode == SourceMode::regular_emitter;
  if (regular && !(run.statistics.period > 0.0))
    throw InvalidConfigError("regular emitter requires a period > 0");

  const double photon_rate = run.detector.efficiency * run.incident_rate;
  double expected_events = (photon_rate + run.detector.dark_rate) * run.duration;
  if (expected_events > limits.max_expected_events)
    throw ResourceLimitError(fmt::format("expected {:.3g} events exceeds the cap of {:.3g}",
                                         expected_events, limits.max_expected_events));

  Rng photon_rng(derive_seed(run.seed, {0}));
  Rng dark_rng(derive_seed(run.seed, {1}));
  PhotonStream photons(photon_rate, run.statistics, photon_rng);
  const double dark_rate = run.detector.dark_rate;
  double next_dark = dark_rate > 0.0 ? dark_rng.exponential(dark_rate) : kNever;

  const double tau = run.detector.dead_time;
  double live_from = 0.0;
  std::uint64_t count = 0;
  for (;;) {
    const double t_photon = photons.peek();
    const double t = std::min(t_photon, next_dark);
    if (!(t < run.duration)) break;
    if (t >= live_from) {
      ++count;
      live_from = t + tau;
      if (sink) sink(t);
    }
    if (t_photon <= next_dark)
      photons.advance();
    else
      next_dark += dark_rng.exponential(dark_rate);
  }
  return CountRecord{core::PathSet::none(), count, run.duration, run.seed};
}

InjectedInterferometer::InjectedInterferometer(const core::InterferometerConfig& config,
                                               double strength)
    : config_(config), strength_(strength) {
  config_.validate();
  if (!std::isfinite(strength)) throw InvalidConfigError("violation strength must be finite");
  term_ = strength * std::cbrt(config.rate_a * config.rate_b * config.rate_c) *
          std::cos(config.phase.phi_a) * std::cos(config.phase.phi_c);
  const double abc = core::incident_rate(config_, core::PathSet::all_open()) + term_;
  if (abc < 0.0)
    throw NegativeRateError(fmt::format(
        "violation strength {} drives the three-path rate to {} < 0", strength, abc));
}

double InjectedInterferometer::rate(core::PathSet paths) const {
  const double base = core::incident_rate(config_, paths);
  return paths == core::PathSet::all_open() ? base + term_ : base;
}

core::SumRuleInputs InjectedInterferometer::rates() const {
  std::array<double, 8> r{};
  for (core::PathSet s : core::PathSet::all()) r[s.index()] = rate(s);
  return core::SumRuleInputs(r);
}

InjectedInterferometer inject_violation(const core::InterferometerConfig& config, double strength) {
  return InjectedInterferometer(config, strength);
}

CountRecord simulate_combination(const InjectedInterferometer& source, core::PathSet paths,
                                 const core::DetectorModel& detector, double duration,
                                 std::uint64_t seed, const SourceStatistics& statistics,
                                 const SimulationLimits& limits) {
  SimulationRun run{source.rate(paths), detector, duration, seed, statistics};
  CountRecord rec = simulate_stream(run, {}, limits);
  rec.path_set = paths;
  return rec;
}

CountRecord simulate_combination(const core::InterferometerConfig& config, core::PathSet paths,
                                 const core::DetectorModel& detector, double duration,
                                 std::uint64_t seed, const SourceStatistics& statistics,
                                 const SimulationLimits& limits) {
  return simulate_combination(InjectedInterferometer(config), paths, detector, duration, seed,
                              statistics, limits);
}

}  // namespace tripath::sim
