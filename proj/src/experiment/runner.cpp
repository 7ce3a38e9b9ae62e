#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include <tripath/error.hpp>
#include <tripath/experiment/parallel.hpp>
#include <tripath/experiment/runner.hpp>
#include <tripath/sim/random.hpp>

namespace tripath::experiment {

namespace {

using core::PathSet;
using core::PhasePoint;

constexpr std::uint64_t kOrderStream = 0x0de7;

struct RunResult {
  double epsilon = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
};

KappaEstimate summarize(const std::vector<RunResult>& runs, PhasePoint phase) {
  const double n = static_cast<double>(runs.size());
  KappaEstimate est;
  est.n_runs = static_cast<int>(runs.size());
  est.phase = phase;
  for (const auto& r : runs) {
    est.kappa_mean += r.kappa;
    est.epsilon_mean += r.epsilon;
    est.delta_mean += r.delta;
  }
  est.kappa_mean /= n;
  est.epsilon_mean /= n;
  est.delta_mean /= n;
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.kappa - est.kappa_mean) * (r.kappa - est.kappa_mean);
    est.kappa_stderr = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

void validate_options(const MeasureOptions& o) {
  if (o.n_runs < 1) throw InvalidConfigError(fmt::format("n_runs must be >= 1, got {}", o.n_runs));
  if (!(o.leg_duration > 0.0))
    throw InvalidConfigError(fmt::format("leg duration must be > 0, got {}", o.leg_duration));
}

PhasePoint effective_phase(const ScanSpec& spec, double phi_a, double phi_c) {
  return {phi_a - spec.phase_origin.phi_a, phi_c - spec.phase_origin.phi_c};
}

double expected_r_abc_det(const Experiment& e, PhasePoint phase) {
  const auto src = sim::inject_violation(e.config.at(phase), e.violation_strength);
  return core::detector_forward(src.rate(PathSet::all_open()), e.detector);
}

/// Maximizes f on [lo, hi] by golden-section search.
template <class F>
double golden_max(F&& f, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 80 && hi - lo > 1e-12; ++i) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

void check_saturation(const core::SumRuleInputs& rates, const core::DetectorModel& d) {
  if (d.dead_time <= 0.0) return;
  for (double r : rates.rates())
    if (r * d.dead_time >= 1.0)
      throw SaturationError(fmt::format("predicted detected rate {} cps reaches 1/tau", r));
}

SweepRow sweep_row(const Experiment& e, double scale, PhasePoint phase, const MeasureOptions& options,
                   std::size_t row) {
  SweepRow out;
  out.scale = scale;
  const Experiment at = [&] {
    Experiment x = e;
    x.config = e.config.at(phase);
    return x;
  }();
  const SingleRates singles = expected_single_rates(at.config, at.detector);
  const auto predicted = predict_detected_rates(singles, at.detector, phase);
  check_saturation(predicted, at.detector);
  out.r_abc_det = expected_r_abc_det(at, phase);
  out.kappa_det = core::kappa(predicted);
  if (options.n_runs > 0) {
    MeasureOptions o = options;
    o.seed = sim::derive_seed(options.seed, {row});
    const auto est = measure_kappa(at, phase, o);
    out.kappa_exp = est.kappa_mean;
    out.kappa_stderr = est.kappa_stderr;
    out.n_runs = est.n_runs;
  }
  return out;
}

}  // namespace

std::array<PathSet, 8> combination_order(std::uint64_t seed, int run_index, bool randomize) {
  auto order = PathSet::all();
  if (!randomize) return order;
  sim::Rng rng(sim::derive_seed(seed, {static_cast<std::uint64_t>(run_index), kOrderStream}));
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  return order;
}

KappaEstimate measure_kappa(const Experiment& experiment, PhasePoint phase,
                            const MeasureOptions& options, std::vector<LegRecord>* audit) {
  validate_options(options);
  experiment.detector.validate();
  const auto source = sim::inject_violation(experiment.config.at(phase), experiment.violation_strength);
  std::array<double, 8> incident{};
  for (PathSet s : PathSet::all()) incident[s.index()] = source.rate(s);
  if (experiment.intensity_drift != 0.0 && 1.0 + 7.0 * experiment.intensity_drift < 0.0)
    throw InvalidConfigError("intensity drift drives a leg rate below zero");

  const auto n = static_cast<std::size_t>(options.n_runs);
  std::vector<RunResult> runs(n);
  std::vector<std::array<LegRecord, 8>> legs(audit ? n : 0);

  parallel_for(n, options.threads, [&](std::size_t run) {
    const auto order = combination_order(options.seed, static_cast<int>(run), options.randomize_order);
    std::array<double, 8> detected{};
    for (int pos = 0; pos < 8; ++pos) {
      const PathSet s = order[static_cast<std::size_t>(pos)];
      const std::uint64_t leg_seed = sim::derive_seed(options.seed, {run, s.mask()});
      const double drift = 1.0 + experiment.intensity_drift * pos;
      const sim::SimulationRun sr{incident[s.index()] * drift, experiment.detector,
                                  options.leg_duration, leg_seed, experiment.source};
      const auto rec = sim::simulate_stream(sr, {}, options.limits);
      detected[s.index()] = rec.rate();
      if (audit)
        legs[run][static_cast<std::size_t>(pos)] =
            LegRecord{static_cast<int>(run), s, pos, rec.detected_count, rec.duration, leg_seed};
    }
    const core::SumRuleInputs rates(detected);
    const double d = core::delta(rates);
    if (!(d > 0.0))
      throw DegenerateNormalizationError(
          fmt::format("run {} at phase ({}, {}) has delta = 0", run, phase.phi_a, phase.phi_c));
    const double e = core::epsilon(rates);
    runs[run] = {e, d, e / d};
  });

  if (audit)
    for (const auto& run : legs) audit->insert(audit->end(), run.begin(), run.end());
  return summarize(runs, phase);
}

SingleRates expected_single_rates(const core::InterferometerConfig& config,
                                  const core::DetectorModel& detector) {
  return {core::detector_forward(config.rate_a, detector),
          core::detector_forward(config.rate_b, detector),
          core::detector_forward(config.rate_c, detector)};
}

core::InterferometerConfig config_from_single_rates(const SingleRates& singles,
                                                    const core::DetectorModel& detector,
                                                    PhasePoint phase) {
  core::InterferometerConfig c;
  c.rate_a = core::detector_inverse(singles.a, detector);
  c.rate_b = core::detector_inverse(singles.b, detector);
  c.rate_c = core::detector_inverse(singles.c, detector);
  c.phase = phase;
  return c;
}

core::SumRuleInputs predict_detected_rates(const SingleRates& measured,
                                           const core::DetectorModel& detector, PhasePoint phase) {
  const auto config = config_from_single_rates(measured, detector, phase);
  return core::detected_rates(core::incident_rates(config), detector);
}

double predict_kappa_det(const SingleRates& measured, const core::DetectorModel& detector,
                         PhasePoint phase) {
  return core::kappa(predict_detected_rates(measured, detector, phase));
}

SingleRates reconstruct_single_rates(const SingleRates& ratios, double target_r_abc_det,
                                     const core::DetectorModel& detector, PhasePoint phase) {
  detector.validate();
  if (!(ratios.a > 0.0 && ratios.b > 0.0 && ratios.c > 0.0))
    throw InvalidConfigError("single-path ratios must all be > 0");
  if (!(target_r_abc_det > 0.0) || !std::isfinite(target_r_abc_det))
    throw InvalidConfigError(fmt::format("target rate must be > 0, got {}", target_r_abc_det));

  const double largest = std::max({ratios.a, ratios.b, ratios.c});
  const double smallest = std::min({ratios.a, ratios.b, ratios.c});
  const double floor = core::detector_forward(0.0, detector);
  double lo = floor / smallest;
  double hi = detector.dead_time > 0.0 ? (1.0 - 1e-9) / (detector.dead_time * largest)
                                       : 2.0 * target_r_abc_det / largest + lo;
  auto excess = [&](double s) {
    return predict_detected_rates(ratios.scaled(s), detector, phase)[PathSet::all_open()] -
           target_r_abc_det;
  };
  if (detector.dead_time <= 0.0)
    while (excess(hi) < 0.0 && hi < 1e30) hi *= 2.0;
  if (excess(lo) > 0.0 || excess(hi) < 0.0)
    throw OutOfRangeError(fmt::format(
        "target R_ABC^det = {} cps is not reachable with these ratios below saturation",
        target_r_abc_det));

  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      excess, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  return ratios.scaled(0.5 * (a + b));
}

void ScanSpec::validate() const {
  auto check_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw InvalidConfigError(fmt::format("{} must be nonempty", name));
    for (double x : g)
      if (!std::isfinite(x)) throw InvalidConfigError(fmt::format("{} has a non-finite value", name));
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1]))
        throw InvalidConfigError(fmt::format("{} must be strictly increasing", name));
  };
  check_grid(grid_a, "grid_A");
  check_grid(grid_c, "grid_C");
  if (runs_per_point < 1)
    throw InvalidConfigError(fmt::format("runs_per_point must be >= 1, got {}", runs_per_point));
  if (!(leg_duration > 0.0))
    throw InvalidConfigError(fmt::format("leg duration must be > 0, got {}", leg_duration));
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw InvalidConfigError("linspace needs n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

ScanResult scan_phase_space(const ScanSpec& spec, const Experiment& experiment) {
  spec.validate();
  experiment.config.validate();
  experiment.detector.validate();

  ScanResult out;
  out.n_a = spec.grid_a.size();
  out.n_c = spec.grid_c.size();
  out.points.resize(out.n_a * out.n_c);

  auto evaluate = [&](std::size_t idx) {
    ScanPoint& p = out.points[idx];
    p.phi_a = spec.grid_a[idx / out.n_c];
    p.phi_c = spec.grid_c[idx % out.n_c];
    const PhasePoint phase = effective_phase(spec, p.phi_a, p.phi_c);
    p.r_abc_det = expected_r_abc_det(experiment, phase);
    try {
      p.kappa_det = predict_kappa_det(expected_single_rates(experiment.config, experiment.detector),
                                      experiment.detector, phase);
    } catch (const DegenerateNormalizationError&) {
      p.kappa_det.reset();
    }
    if (spec.simulate) {
      MeasureOptions o;
      o.n_runs = spec.runs_per_point;
      o.leg_duration = spec.leg_duration;
      o.seed = sim::derive_seed(spec.base_seed, {idx});
      try {
        p.measured = measure_kappa(experiment, phase, o);
      } catch (const DegenerateNormalizationError&) {
        p.measured.reset();
      }
    }
  };
  // parallel over grid points; runs within a point stay serial
  parallel_for(out.points.size(), spec.threads, evaluate);

  const auto best = std::max_element(out.points.begin(), out.points.end(),
                                     [](const auto& x, const auto& y) { return x.r_abc_det < y.r_abc_det; });
  out.argmax = static_cast<std::size_t>(best - out.points.begin());

  // refine the maximum within one cell on each side
  const std::size_t ia = out.argmax / out.n_c, ic = out.argmax % out.n_c;
  auto span = [](const std::vector<double>& g, std::size_t i) {
    return std::pair{g[i > 0 ? i - 1 : i], g[i + 1 < g.size() ? i + 1 : i]};
  };
  double phi_a = best->phi_a, phi_c = best->phi_c;
  auto surface = [&](double a, double c) {
    return expected_r_abc_det(experiment, effective_phase(spec, a, c));
  };
  // alternate golden-section passes; the surface couples the two axes
  const auto [a_lo, a_hi] = span(spec.grid_a, ia);
  const auto [c_lo, c_hi] = span(spec.grid_c, ic);
  for (int pass = 0; pass < 100; ++pass) {
    const double prev_a = phi_a, prev_c = phi_c;
    if (a_hi > a_lo) phi_a = golden_max([&](double a) { return surface(a, phi_c); }, a_lo, a_hi);
    if (c_hi > c_lo) phi_c = golden_max([&](double c) { return surface(phi_a, c); }, c_lo, c_hi);
    if (std::abs(phi_a - prev_a) < 1e-10 && std::abs(phi_c - prev_c) < 1e-10) break;
  }
  out.refined_max = {phi_a, phi_c};
  return out;
}

std::vector<SweepRow> intensity_sweep(const Experiment& base, const std::vector<double>& scale_factors,
                                      PhasePoint phase, const MeasureOptions& options) {
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < scale_factors.size(); ++k) {
    const double s = scale_factors[k];
    if (!(s > 0.0) || !std::isfinite(s))
      throw InvalidConfigError(fmt::format("scale factors must be > 0, got {}", s));
    Experiment e = base;
    e.config = base.config.scaled(s);
    rows.push_back(sweep_row(e, s, phase, options, k));
  }
  return rows;
}

std::vector<SweepRow> intensity_sweep_to_targets(const Experiment& base, const SingleRates& ratios,
                                                 const std::vector<double>& targets_r_abc_det,
                                                 PhasePoint phase, const MeasureOptions& options) {
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < targets_r_abc_det.size(); ++k) {
    const SingleRates singles =
        reconstruct_single_rates(ratios, targets_r_abc_det[k], base.detector, phase);
    Experiment e = base;
    const auto rebuilt = config_from_single_rates(singles, base.detector, phase);
    e.config.rate_a = rebuilt.rate_a;
    e.config.rate_b = rebuilt.rate_b;
    e.config.rate_c = rebuilt.rate_c;
    rows.push_back(sweep_row(e, singles.a / ratios.a, phase, options, k));
  }
  return rows;
}

}  // namespace tripath::experiment
