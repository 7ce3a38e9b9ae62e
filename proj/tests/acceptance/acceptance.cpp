// One PASS/FAIL line per acceptance criterion. Exit status is non-zero if any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include <cli.hpp>
#include <tripath/calib/calibration.hpp>
#include <tripath/core/model.hpp>
#include <tripath/error.hpp>
#include <tripath/experiment/runner.hpp>
#include <tripath/sim/photon_sim.hpp>
#include <tripath/sim/random.hpp>

using namespace tripath;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

const core::DetectorModel kReferenceDetector{47e-9, 284.0, 1.0};
const experiment::SingleRates kRatios{2080.0, 5760.0, 1990.0};
const double kTargets[] = {35925.0, 111288.0, 260934.0, 451121.0};
const double kReferenceKappaDet[] = {-0.0011, -0.0033, -0.0077, -0.0134};
const double kReferenceDeltaKappa[] = {0.0029, 0.0018, 0.0019, 0.0010};

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
  bool pass;
  std::string detail;
};

experiment::Experiment table_experiment(double target, const core::DetectorModel& detector) {
  const auto singles = experiment::reconstruct_single_rates(kRatios, target, kReferenceDetector, {});
  experiment::Experiment e;
  e.detector = detector;
  e.config = experiment::config_from_single_rates(singles, kReferenceDetector);
  return e;
}

Outcome table_prediction() {
  double worst = 0.0;
  std::string values;
  for (int i = 0; i < 4; ++i) {
    const auto singles = experiment::reconstruct_single_rates(kRatios, kTargets[i], kReferenceDetector, {});
    const double k = experiment::predict_kappa_det(singles, kReferenceDetector, {});
    worst = std::max(worst, std::abs(k - kReferenceKappaDet[i]));
    values += fmt::format("{}{:.4f}", i ? ", " : "", k);
  }
  return {worst <= 0.001, fmt::format("kappa_det = {{{}}}, max |dev| = {:.5f}", values, worst)};
}

Outcome simulated_consistency() {
  bool consistent = true, magnitude = true;
  std::string rows;
  for (int i = 0; i < 4; ++i) {
    const auto e = table_experiment(kTargets[i], kReferenceDetector);
    experiment::MeasureOptions o;
    o.n_runs = 1000;
    o.leg_duration = 1.0;
    o.seed = sim::derive_seed(0x7ab1e1, {std::uint64_t(i)});
    o.threads = threads();
    const auto est = experiment::measure_kappa(e, {}, o);
    const auto singles = experiment::expected_single_rates(e.config, e.detector);
    const double kd = experiment::predict_kappa_det(singles, e.detector, {});
    const double z = (est.kappa_mean - kd) / est.kappa_stderr;
    const double ratio = est.kappa_stderr / kReferenceDeltaKappa[i];
    consistent = consistent && std::abs(z) < 3.0;
    magnitude = magnitude && ratio >= 1.0 / 3.0 && ratio <= 3.0;
    rows += fmt::format("; {:.0f} cps: kappa {:.5f} +- {:.5f} vs kappa_det {:.5f} (z {:+.2f}), "
                        "stderr/reference {:.2f}",
                        kTargets[i], est.kappa_mean, est.kappa_stderr, kd, z, ratio);
  }
  return {consistent && magnitude,
          fmt::format("|z| < 3 at all rows: {}; stderr within x3 of reference: {}{}", consistent ? "yes" : "no",
                      magnitude ? "yes" : "no", rows)};
}

core::InterferometerConfig random_config(sim::Rng& rng) {
  core::InterferometerConfig c;
  c.rate_a = 1e3 + 4e4 * rng.uniform();
  c.rate_b = 1e3 + 4e4 * rng.uniform();
  c.rate_c = 1e3 + 4e4 * rng.uniform();
  c.phase = {2 * pi * rng.uniform(), 2 * pi * rng.uniform()};
  for (;;) {  // visibilities of a realizable (positive semidefinite) coherence matrix
    c.visibility_ab = rng.uniform();
    c.visibility_ac = rng.uniform();
    c.visibility_bc = rng.uniform();
    const double det = 1 + 2 * c.visibility_ab * c.visibility_ac * c.visibility_bc -
                       c.visibility_ab * c.visibility_ab - c.visibility_ac * c.visibility_ac -
                       c.visibility_bc * c.visibility_bc;
    if (det >= 0.0) return c;
  }
}

Outcome born_null() {
  sim::Rng rng(0xb0a7);
  int analytic_ok = 0, stochastic_ok = 0, degenerate = 0;
  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto c = random_config(rng);
    const core::DetectorModel linear{0.0, 500.0 * rng.uniform(), 1.0};
    const auto rates = core::incident_rates(c);
    double scale = 0.0;
    for (double r : rates.rates()) scale += r;
    const double rel = std::abs(core::epsilon(rates)) / scale;
    worst_rel = std::max(worst_rel, rel);
    if (rel <= 1e-10) ++analytic_ok;

    experiment::Experiment e{c, linear, {}, 0.0, 0.0};
    experiment::MeasureOptions o;
    // protocol integration time; shorter legs inflate the ratio bias of mean(eps/delta)
    o.n_runs = 50;
    o.leg_duration = 1.0;
    o.seed = sim::derive_seed(0xb0a7, {std::uint64_t(i)});
    o.threads = threads();
    try {
      const auto est = experiment::measure_kappa(e, c.phase, o);
      if (std::abs(est.kappa_mean) < 3.0 * est.kappa_stderr) ++stochastic_ok;
    } catch (const DegenerateNormalizationError&) {
      ++degenerate;
    }
  }
  return {analytic_ok == 100 && stochastic_ok >= 99,
          fmt::format("analytic |eps|/sum <= 1e-10: {}/100 (worst {:.1e}); |kappa| < 3 stderr: {}/100; "
                      "degenerate: {}",
                      analytic_ok, worst_rel, stochastic_ok, degenerate)};
}

Outcome dead_time_oracle() {
  bool ok = true;
  std::string rows;
  int r_index = 0;
  for (double rate : {1e3, 1e4, 1e5, 1e6, 5e6}) {
    constexpr int kSeeds = 20;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
      sim::SimulationRun run{rate, kReferenceDetector, 1.0, sim::derive_seed(0xdead, {std::uint64_t(r_index), std::uint64_t(s)})};
      const double d = sim::simulate_stream(run).rate();
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / kSeeds;
    const double se = std::sqrt((sum2 - kSeeds * mean * mean) / (kSeeds - 1) / kSeeds);
    const double f = core::detector_forward(rate, kReferenceDetector);
    const double z = (mean - f) / se;
    ok = ok && std::abs(z) < 3.0;
    rows += fmt::format("{}{:.0e}: z {:+.2f}", r_index ? ", " : "", rate, z);
    ++r_index;
  }
  return {ok, rows};
}

Outcome calibration_loop() {
  std::vector<calib::QuadrupleMeasurement> data;
  for (int k = 0; k < 10; ++k) {
    const double a = 1e4 * std::pow(100.0, k / 9.0);
    data.push_back(calib::simulate_quadruple(a, 0.7 * a, kReferenceDetector, 1.0, sim::derive_seed(0xca1, {std::uint64_t(k)})));
  }
  calib::EstimateOptions o;
  o.bootstrap_resamples = 1000;
  o.seed = 0xca1b;
  const auto r = calib::estimate_parameters(data, o);
  const double z = (r.tau_hat - 47e-9) / r.tau_stderr;
  const bool scale = r.tau_stderr >= 0.4e-9 && r.tau_stderr <= 10e-9;
  return {std::abs(z) < 3.0 && scale,
          fmt::format("tau = {:.2f} +- {:.2f} ns (z {:+.2f}), stderr in [0.4, 10] ns: {}; 10 quadruples, "
                      "1 s legs, 1e4-1e6 cps",
                      r.tau_hat * 1e9, r.tau_stderr * 1e9, z, scale ? "yes" : "no")};
}

Outcome violation_sensitivity() {
  const core::DetectorModel linear{0.0, 284.0, 1.0};
  auto e = table_experiment(kTargets[0], linear);
  const auto base = core::incident_rates(e.config);
  const double unit = sim::InjectedInterferometer(e.config, 1.0).injected_term();
  e.violation_strength = 0.005 * core::delta(base) / unit;
  const double analytic = core::kappa(sim::inject_violation(e.config, e.violation_strength).rates());
  experiment::MeasureOptions o;
  o.n_runs = 1000;
  o.leg_duration = 1.0;
  o.seed = 0x5e45;
  o.threads = threads();
  const auto est = experiment::measure_kappa(e, {}, o);
  const double significance = est.kappa_mean / est.kappa_stderr;
  return {significance > 3.0, fmt::format("analytic kappa {:.4f}, measured {:.5f} +- {:.5f} ({:.1f} sigma) at "
                                          "{:.0f} cps, 1000 runs",
                                          analytic, est.kappa_mean, est.kappa_stderr, significance, kTargets[0])};
}

Outcome regular_emitter_null() {
  const core::DetectorModel detector{47e-9, 0.0, 1.0};
  const core::PhasePoint phases[] = {{0.0, 0.0}, {0.5 * pi, 1.2 * pi}, {1.3 * pi, 0.4 * pi}};
  int ok = 0, total = 0;
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    auto e = table_experiment(kTargets[i], detector);
    e.source = sim::SourceStatistics::regular(100e-9);
    for (int p = 0; p < 3; ++p) {
      experiment::MeasureOptions o;
      o.n_runs = 200;
      o.leg_duration = 0.2;
      o.seed = sim::derive_seed(0x5e9, {std::uint64_t(i), std::uint64_t(p)});
      o.threads = threads();
      const auto est = experiment::measure_kappa(e, phases[p], o);
      const double z = est.kappa_mean / est.kappa_stderr;
      worst = std::max(worst, std::abs(z));
      if (std::abs(z) < 3.0) ++ok;
      ++total;
    }
  }
  return {ok == total, fmt::format("period 100 ns, tau 47 ns: {}/{} intensity x phase points within 3 stderr "
                                   "(max |z| {:.2f})",
                                   ok, total, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "tripath-acceptance-determinism";
  fs::remove_all(root);
  const std::vector<std::string> common = {"--seed", "424242", "--tau-ns", "47", "--dark-cps", "284",
                                           "--rate-kind", "detected", "--rate-a-cps", "2080",
                                           "--rate-b-cps", "5760", "--rate-c-cps", "1990", "--leg-s", "0.05"};
  const std::vector<std::vector<std::string>> commands = {
      {"scan", "--steps", "9", "--runs-per-point", "4"},
      {"kappa", "--runs", "100", "--audit"},
      {"sweep", "--targets", "35925,451121", "--runs", "20"},
      {"calibrate", "--simulate", "6", "--bootstrap", "200"},
      {"simulate", "--paths", "AC"},
  };
  const std::vector<std::pair<std::string, std::string>> variants = {{"serial-1", "1"}, {"serial-2", "1"},
                                                                     {"parallel", "4"}};
  for (const auto& [name, n] : variants) {
    for (auto cmd : commands) {
      cmd.insert(cmd.end(), common.begin(), common.end());
      cmd.insert(cmd.end(), {"--threads", n, "--out", (root / name).string()});
      std::ostringstream out, err;
      if (cli::run(cmd, out, err) != 0) return {false, fmt::format("'{}' failed: {}", cmd.front(), err.str())};
    }
  }
  const char* expected[] = {"grid.csv", "audit.csv", "kappa.csv", "table.csv",
                            "quadruples.csv", "calibration.csv", "count.csv"};
  int identical = 0;
  for (const char* name : expected) {
    const auto a = slurp(root / "serial-1" / name);
    if (!a.empty() && a == slurp(root / "serial-2" / name) && a == slurp(root / "parallel" / name)) ++identical;
  }
  fs::remove_all(root);
  return {identical == std::size(expected),
          fmt::format("{}/{} CSVs byte-identical across two serial runs and a 4-thread run", identical,
                      std::size(expected))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 kappa_det at four reference intensities", table_prediction},
      {"2 simulated kappa vs kappa_det, 1000 runs x 1 s", simulated_consistency},
      {"3 Born-rule null, 100 random configs", born_null},
      {"4 dead-time Monte Carlo vs transfer function", dead_time_oracle},
      {"5 calibration closed loop", calibration_loop},
      {"6 injected violation detected", violation_sensitivity},
      {"7 regular-emitter null", regular_emitter_null},
      {"8 determinism serial vs parallel", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (name.front() == '1' && s >= 1.0) {
      o.pass = false;
      o.detail += " (runtime over 1 s)";
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("{} [{}] {} ({:.2f} s) | {}\n", o.pass ? "PASS" : "FAIL", name.substr(0, 1),
                             name.substr(2), s, o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
