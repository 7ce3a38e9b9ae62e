#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include <tripath/calib/calibration.hpp>
#include <tripath/core/model.hpp>
#include <tripath/error.hpp>
#include <tripath/sim/photon_sim.hpp>
#include <tripath/sim/random.hpp>

namespace tripath::calib {

namespace {

using core::DarkFloor;
using core::DetectorModel;

double inverse(double detected, double tau, double r0) {
  return core::detector_inverse(detected, DetectorModel{tau, r0, 1.0}, DarkFloor::extend);
}

/// d fbar / d tau at fixed R0; fbar(D) = D / (1 - D tau) - R0.
double inverse_dtau(double detected, double tau) {
  const double live = 1.0 - detected * tau;
  return detected * detected / (live * live);
}

/// d fbar / d D
double inverse_slope(double detected, double tau) {
  const double live = 1.0 - detected * tau;
  return 1.0 / (live * live);
}

/// Poisson variance of a rate measured over `duration`, floored at one count.
double rate_variance(double rate, double duration) {
  return std::max(rate * duration, 1.0) / (duration * duration);
}

double max_rate(const std::vector<QuadrupleMeasurement>& data) {
  double m = 0.0;
  for (const auto& q : data) m = std::max({m, q.dark_rate, q.rate_a, q.rate_b, q.rate_ab});
  return m;
}

/// Whitening factors for one quadruple at a given tau.
struct Weights {
  double defect_sd;
  double dark_sd;
};

Weights weights_at(const QuadrupleMeasurement& q, double tau, double duration_override) {
  const double t = duration_override > 0.0 ? duration_override : q.duration;
  double var = 0.0;
  for (double d : {q.dark_rate, q.rate_a, q.rate_b, q.rate_ab}) {
    const double s = inverse_slope(d, tau);
    var += s * s * rate_variance(d, t);
  }
  const double s_dark = inverse_slope(q.dark_rate, tau);
  return {std::sqrt(var), s_dark * std::sqrt(rate_variance(q.dark_rate, t))};
}

struct Fit {
  double tau;
  double r0;
  double chi_square;
  int iterations;
};

double chi_square(const std::vector<QuadrupleMeasurement>& data, const std::vector<Weights>& w,
                  double tau, double r0) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = nonlinearity_defect(data[i], tau, r0) / w[i].defect_sd;
    const double k = dark_residual(data[i], tau, r0) / w[i].dark_sd;
    s += d * d + k * k;
  }
  return s;
}

/// Levenberg-Marquardt on (tau, r0) with the weights held fixed.
Fit solve_fixed_weights(const std::vector<QuadrupleMeasurement>& data,
                        const std::vector<Weights>& w, double tau, double r0,
                        const EstimateOptions& opt, double tau_ceiling) {
  double lambda = 1e-3;
  double chi = chi_square(data, w, tau, r0);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    // normal equations J^T J and J^T r
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& q = data[i];
      const double rd = nonlinearity_defect(q, tau, r0) / w[i].defect_sd;
      const double jd = (inverse_dtau(q.rate_ab, tau) - inverse_dtau(q.rate_a, tau) -
                         inverse_dtau(q.rate_b, tau) + inverse_dtau(q.dark_rate, tau)) /
                        w[i].defect_sd;
      a11 += jd * jd;
      b1 += jd * rd;

      const double rk = dark_residual(q, tau, r0) / w[i].dark_sd;
      const double jk_tau = inverse_dtau(q.dark_rate, tau) / w[i].dark_sd;
      const double jk_r0 = -1.0 / w[i].dark_sd;
      a11 += jk_tau * jk_tau;
      a12 += jk_tau * jk_r0;
      a22 += jk_r0 * jk_r0;
      b1 += jk_tau * rk;
      b2 += jk_r0 * rk;
    }

    // (tau, r0) are only jointly identifiable if some quadruple carries a
    // dead-time signal beyond the dark legs
    if (!(a11 * a22 - a12 * a12 > 1e-12 * a11 * a22))
      throw NonConvergenceError(fmt::format(
          "singular normal equations at tau={} s, r0={} cps: data carry no dead-time signal", tau,
          r0));

    for (int attempt = 0; attempt < 60; ++attempt) {
      const double m11 = a11 * (1.0 + lambda), m22 = a22 * (1.0 + lambda);
      const double det = m11 * m22 - a12 * a12;
      const double step_tau = -(m22 * b1 - a12 * b2) / det;
      const double step_r0 = -(m11 * b2 - a12 * b1) / det;

      double new_tau = std::clamp(tau + step_tau, 0.0, tau_ceiling);
      const double new_r0 = r0 + step_r0;
      const double new_chi = chi_square(data, w, new_tau, new_r0);
      if (std::isfinite(new_chi) && new_chi <= chi) {
        const bool small_step =
            std::abs(new_tau - tau) <= opt.relative_tolerance * std::max(std::abs(tau), 1e-15) &&
            std::abs(new_r0 - r0) <= opt.relative_tolerance * std::max(std::abs(r0), 1e-6);
        tau = new_tau;
        r0 = new_r0;
        chi = new_chi;
        lambda = std::max(lambda * 0.1, 1e-12);
        if (small_step || chi == 0.0) return {tau, r0, chi, it};
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) return {tau, r0, chi, it};  // no descent direction left
    }
  }
  throw NonConvergenceError(fmt::format(
      "calibration fit did not converge in {} iterations (tau={} s, r0={} cps, chi2={})",
      opt.max_iterations, tau, r0, chi));
}

double rate_span(const std::vector<QuadrupleMeasurement>& data) {
  auto [lo, hi] = std::minmax_element(data.begin(), data.end(), [](const auto& x, const auto& y) {
    return x.rate_ab < y.rate_ab;
  });
  return lo->rate_ab > 0.0 ? hi->rate_ab / lo->rate_ab : std::numeric_limits<double>::infinity();
}

Fit fit_impl(const std::vector<QuadrupleMeasurement>& data, const EstimateOptions& opt,
             double tau_start, double r0_start) {
  const double ceiling = 0.999 / max_rate(data);
  double tau = std::min(tau_start, ceiling);
  double r0 = r0_start;
  std::vector<Weights> w(data.size());
  int total_iterations = 0;
  // reweighting loop: weights depend on tau through fbar'
  for (int round = 0; round < 50; ++round) {
    for (std::size_t i = 0; i < data.size(); ++i) w[i] = weights_at(data[i], tau, opt.counting_duration);
    const Fit f = solve_fixed_weights(data, w, tau, r0, opt, ceiling);
    total_iterations += f.iterations;
    const bool settled =
        std::abs(f.tau - tau) <= opt.relative_tolerance * std::max(std::abs(f.tau), 1e-15) &&
        std::abs(f.r0 - r0) <= opt.relative_tolerance * std::max(std::abs(f.r0), 1e-6);
    tau = f.tau;
    r0 = f.r0;
    if (settled || f.chi_square == 0.0) return {tau, r0, f.chi_square, total_iterations};
  }
  throw NonConvergenceError(
      fmt::format("calibration reweighting did not settle (tau={} s, r0={} cps)", tau, r0));
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void QuadrupleMeasurement::validate() const {
  for (double r : {dark_rate, rate_a, rate_b, rate_ab})
    if (!std::isfinite(r) || r < 0.0)
      throw InvalidConfigError(fmt::format("quadruple rates must be finite and >= 0, got {}", r));
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InvalidConfigError(fmt::format("quadruple leg duration must be > 0, got {}", duration));
}

double nonlinearity_defect(const QuadrupleMeasurement& q, double tau, double r0) {
  return inverse(q.rate_ab, tau, r0) - inverse(q.rate_a, tau, r0) - inverse(q.rate_b, tau, r0) +
         inverse(q.dark_rate, tau, r0);
}

double dark_residual(const QuadrupleMeasurement& q, double tau, double r0) {
  return inverse(q.dark_rate, tau, r0);
}

double objective(const std::vector<QuadrupleMeasurement>& data, double tau, double r0,
                 double counting_duration) {
  std::vector<Weights> w;
  w.reserve(data.size());
  for (const auto& q : data) w.push_back(weights_at(q, tau, counting_duration));
  return chi_square(data, w, tau, r0);
}

CalibrationResult fit_parameters(const std::vector<QuadrupleMeasurement>& data,
                                 const EstimateOptions& options) {
  if (data.size() < 3)
    throw InvalidConfigError(fmt::format("calibration needs >= 3 quadruples, got {}", data.size()));
  double dark_mean = 0.0;
  for (const auto& q : data) {
    q.validate();
    dark_mean += q.dark_rate;
  }
  dark_mean /= static_cast<double>(data.size());

  const Fit f = fit_impl(data, options, 0.0, dark_mean);
  CalibrationResult out;
  out.tau_hat = f.tau;
  out.r0_hat = f.r0;
  out.chi_square = f.chi_square;
  out.iterations = f.iterations;
  out.n_quadruples = static_cast<int>(data.size());
  for (const auto& q : data) out.residuals.push_back(nonlinearity_defect(q, f.tau, f.r0));
  if (rate_span(data) < 10.0)
    out.warnings.push_back(fmt::format(
        "ill-conditioned: rate_ab spans only a factor {:.3g} (< 10); tau may be poorly determined",
        rate_span(data)));
  return out;
}

CalibrationResult estimate_parameters(const std::vector<QuadrupleMeasurement>& data,
                                      const EstimateOptions& options) {
  CalibrationResult out = fit_parameters(data, options);
  if (options.bootstrap_resamples <= 0) return out;

  std::vector<double> taus, r0s;
  taus.reserve(static_cast<std::size_t>(options.bootstrap_resamples));
  r0s.reserve(taus.capacity());
  std::vector<QuadrupleMeasurement> resample(data.size());
  for (int b = 0; b < options.bootstrap_resamples; ++b) {
    sim::Rng rng(sim::derive_seed(options.seed, {static_cast<std::uint64_t>(b)}));
    for (auto& q : resample) q = data[rng.below(data.size())];
    try {
      const Fit f = fit_impl(resample, options, out.tau_hat, out.r0_hat);
      taus.push_back(f.tau);
      r0s.push_back(f.r0);
    } catch (const NonConvergenceError&) {
      // degenerate resample, e.g. every draw the same dark-only quadruple
    }
  }
  out.bootstrap_used = static_cast<int>(taus.size());
  if (out.bootstrap_used < options.bootstrap_resamples)
    out.warnings.push_back(fmt::format("{} of {} bootstrap resamples failed to fit",
                                       options.bootstrap_resamples - out.bootstrap_used,
                                       options.bootstrap_resamples));
  out.tau_stderr = sample_sd(taus);
  out.r0_stderr = sample_sd(r0s);
  return out;
}

DriftReport drift_check(const QuadrupleMeasurement& first, const QuadrupleMeasurement& repeat,
                        double threshold_sigma) {
  DriftReport rep;
  const std::array<std::pair<double, double>, 4> legs{{{first.dark_rate, repeat.dark_rate},
                                                       {first.rate_a, repeat.rate_a},
                                                       {first.rate_b, repeat.rate_b},
                                                       {first.rate_ab, repeat.rate_ab}}};
  for (auto [x, y] : legs) {
    const double sd =
        std::sqrt(rate_variance(x, first.duration) + rate_variance(y, repeat.duration));
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(x - y) / sd);
  }
  rep.drifted = rep.max_abs_z > threshold_sigma;
  return rep;
}

QuadrupleMeasurement expected_quadruple(double incident_a, double incident_b,
                                        const core::DetectorModel& detector, double duration) {
  return {core::detector_forward(0.0, detector), core::detector_forward(incident_a, detector),
          core::detector_forward(incident_b, detector),
          core::detector_forward(incident_a + incident_b, detector), duration};
}

QuadrupleMeasurement simulate_quadruple(double incident_a, double incident_b,
                                        const core::DetectorModel& detector, double duration,
                                        std::uint64_t seed) {
  auto leg = [&](double rate, std::uint64_t k) {
    sim::SimulationRun run{rate, detector, duration, sim::derive_seed(seed, {k})};
    return sim::simulate_stream(run).rate();
  };
  return {leg(0.0, 0), leg(incident_a, 1), leg(incident_b, 2), leg(incident_a + incident_b, 3),
          duration};
}

}  // namespace tripath::calib
