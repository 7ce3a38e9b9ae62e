#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <doctest.h>

#include <tripath/error.hpp>
#include <tripath/experiment/runner.hpp>

using namespace tripath;
using namespace tripath::experiment;
using core::DetectorModel;
using core::PathSet;
using core::PhasePoint;
using std::numbers::pi;

namespace {

const DetectorModel kReferenceDetector{47e-9, 284.0, 1.0};
const DetectorModel kLinear{0.0, 0.0, 1.0};
const SingleRates kReferenceRatios{2080.0, 5760.0, 1990.0};

}  // namespace

TEST_CASE("combination order is a seeded permutation") {
  for (int run = 0; run < 50; ++run) {
    const auto order = combination_order(9, run, true);
    std::set<unsigned> masks;
    for (PathSet s : order) masks.insert(s.mask());
    CHECK(masks.size() == 8);
    CHECK(order == combination_order(9, run, true));
  }
  CHECK(combination_order(9, 0, false) == PathSet::all());
  int differing = 0;
  for (int run = 0; run < 20; ++run)
    if (combination_order(9, run, true) != combination_order(9, run + 1, true)) ++differing;
  CHECK(differing >= 18);
}

TEST_CASE("predict_kappa_det") {
  SUBCASE("linear detector keeps the null") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> rate(10.0, 1e6), phase(0.0, 2 * pi);
    for (int i = 0; i < 200; ++i) {
      const SingleRates s{rate(gen), rate(gen), rate(gen)};
      CHECK(std::abs(predict_kappa_det(s, kLinear, {phase(gen), phase(gen)})) < 1e-9);
    }
  }
  SUBCASE("reference kappa_det column") {
    // targets (cps) and reference kappa_det
    const std::array<std::pair<double, double>, 4> rows{
        {{35925, -0.0011}, {111288, -0.0033}, {260934, -0.0077}, {451121, -0.0134}}};
    for (auto [target, reference] : rows) {
      const auto singles = reconstruct_single_rates(kReferenceRatios, target, kReferenceDetector, {});
      const double got = predict_kappa_det(singles, kReferenceDetector, {});
      const double predicted_abc = predict_detected_rates(singles, kReferenceDetector, {})[PathSet::all_open()];
      CHECK(predicted_abc == doctest::Approx(target).epsilon(1e-9));
      CHECK(singles.b / singles.a == doctest::Approx(5760.0 / 2080.0).epsilon(1e-12));
      INFO("target=" << target << " kappa_det=" << got);
      CHECK(std::abs(got - reference) <= 0.0005);
    }
  }
  SUBCASE("propagates inverse range errors") {
    CHECK_THROWS_AS(predict_kappa_det({1e3, 1e3, 1.0 / 47e-9}, kReferenceDetector, {}), OutOfRangeError);
    CHECK_THROWS_AS(predict_kappa_det({100.0, 1e3, 1e3}, kReferenceDetector, {}), OutOfRangeError);
  }
}

TEST_CASE("reconstruct_single_rates rejects unreachable targets") {
  CHECK_THROWS_AS(reconstruct_single_rates(kReferenceRatios, 1e9, kReferenceDetector, {}), OutOfRangeError);
  CHECK_THROWS_AS(reconstruct_single_rates({1.0, 0.0, 1.0}, 1e4, kReferenceDetector, {}), InvalidConfigError);
  const auto s = reconstruct_single_rates(kReferenceRatios, 5e4, kLinear, {});
  CHECK(predict_detected_rates(s, kLinear, {})[PathSet::all_open()] == doctest::Approx(5e4));
}

TEST_CASE("measure_kappa") {
  Experiment e;
  e.config = {2e4, 5e4, 2e4};

  SUBCASE("linear detector is consistent with zero") {
    e.detector = kLinear;
    MeasureOptions o;
    o.n_runs = 300;
    o.leg_duration = 0.05;
    o.seed = 4;
    const auto est = measure_kappa(e, {0.4, 1.1}, o);
    CHECK(est.n_runs == 300);
    CHECK(est.kappa_stderr > 0.0);
    CHECK(std::abs(est.kappa_mean) < 3.0 * est.kappa_stderr);
  }
  SUBCASE("dead-time bias matches the prediction") {
    e.detector = kReferenceDetector;
    e.config = config_from_single_rates(
        reconstruct_single_rates(kReferenceRatios, 451121.0, kReferenceDetector, {}), kReferenceDetector);
    MeasureOptions o;
    o.n_runs = 200;
    o.leg_duration = 0.2;
    o.seed = 8;
    const auto est = measure_kappa(e, {}, o);
    const double predicted = predict_kappa_det(expected_single_rates(e.config, e.detector), e.detector, {});
    INFO("kappa=" << est.kappa_mean << " +- " << est.kappa_stderr << " predicted=" << predicted);
    CHECK(std::abs(est.kappa_mean - predicted) < 3.0 * est.kappa_stderr);
    CHECK(est.kappa_mean < 0.0);
  }
  SUBCASE("deterministic across thread counts") {
    e.detector = kReferenceDetector;
    MeasureOptions o;
    o.n_runs = 40;
    o.leg_duration = 0.01;
    o.seed = 77;
    std::vector<LegRecord> serial_audit, parallel_audit;
    const auto a = measure_kappa(e, {1.0, 2.0}, o, &serial_audit);
    o.threads = 4;
    const auto b = measure_kappa(e, {1.0, 2.0}, o, &parallel_audit);
    CHECK(a.kappa_mean == b.kappa_mean);
    CHECK(a.kappa_stderr == b.kappa_stderr);
    REQUIRE(serial_audit.size() == 320);
    REQUIRE(parallel_audit.size() == 320);
    for (std::size_t i = 0; i < serial_audit.size(); ++i) {
      CHECK(serial_audit[i].count == parallel_audit[i].count);
      CHECK(serial_audit[i].combination == parallel_audit[i].combination);
      CHECK(serial_audit[i].order_position == static_cast<int>(i % 8));
    }
  }
  SUBCASE("degenerate delta is an error") {
    e.detector = kLinear;
    e.config = {0.0, 0.0, 0.0};
    MeasureOptions o;
    o.n_runs = 2;
    o.leg_duration = 0.01;
    CHECK_THROWS_AS(measure_kappa(e, {}, o), DegenerateNormalizationError);
  }
  SUBCASE("option checks") {
    MeasureOptions o;
    o.n_runs = 0;
    CHECK_THROWS_AS(measure_kappa(e, {}, o), InvalidConfigError);
  }
}

TEST_CASE("injected violation is recovered with a linear detector") {
  Experiment e;
  e.detector = kLinear;
  e.config = {2e4, 5e4, 2e4};
  const double target_kappa = 0.02;
  const auto plain = core::incident_rates(e.config);
  const double strength = target_kappa * core::delta(plain) / std::cbrt(2e4 * 5e4 * 2e4);
  e.violation_strength = strength;
  const auto injected = sim::inject_violation(e.config, strength);
  const double analytic = core::kappa(injected.rates());
  CHECK(analytic == doctest::Approx(target_kappa).epsilon(1e-9));

  MeasureOptions o;
  o.n_runs = 200;
  o.leg_duration = 0.05;
  o.seed = 12;
  const auto est = measure_kappa(e, {}, o);
  CHECK(std::abs(est.kappa_mean - analytic) < 3.0 * est.kappa_stderr);
  CHECK(est.kappa_mean > 3.0 * est.kappa_stderr);
}

TEST_CASE("shuffle invariance without drift, bias with drift") {
  Experiment e;
  e.detector = kLinear;
  e.config = {2e4, 5e4, 2e4};
  MeasureOptions o;
  o.n_runs = 400;
  o.leg_duration = 0.02;
  o.seed = 31;

  const auto shuffled = measure_kappa(e, {}, o);
  o.randomize_order = false;
  const auto fixed = measure_kappa(e, {}, o);
  const double se = std::hypot(shuffled.kappa_stderr, fixed.kappa_stderr);
  CHECK(std::abs(shuffled.kappa_mean - fixed.kappa_mean) < 3.0 * se);

  // linear drift over the run biases the fixed order and averages out when shuffled
  e.intensity_drift = 0.01;
  const auto drift_fixed = measure_kappa(e, {}, o);
  o.randomize_order = true;
  const auto drift_shuffled = measure_kappa(e, {}, o);
  CHECK(std::abs(drift_fixed.kappa_mean) > 5.0 * drift_fixed.kappa_stderr);
  CHECK(std::abs(drift_shuffled.kappa_mean) < 3.0 * drift_shuffled.kappa_stderr);
}

TEST_CASE("regular emitter shows no dead-time bias") {
  Experiment e;
  e.detector = DetectorModel{47e-9, 0.0, 1.0};
  e.source = sim::SourceStatistics::regular(100e-9);
  e.config = config_from_single_rates(reconstruct_single_rates(kReferenceRatios, 451121.0, kLinear, {}), kLinear);
  MeasureOptions o;
  o.n_runs = 200;
  o.leg_duration = 0.1;
  o.seed = 3;
  const auto est = measure_kappa(e, {}, o);
  CHECK(std::abs(est.kappa_mean) < 3.0 * est.kappa_stderr);
}

TEST_CASE("scan_phase_space") {
  Experiment e;
  e.detector = kReferenceDetector;
  e.config = config_from_single_rates(kReferenceRatios, kReferenceDetector);

  ScanSpec spec;
  spec.grid_a = linspace(0.0, 2 * pi, 41);
  spec.grid_c = linspace(0.0, 2 * pi, 41);
  spec.phase_origin = {1.7 * pi, 0.19 * pi};
  spec.simulate = false;

  SUBCASE("argmax sits at the plate origin") {
    const auto res = scan_phase_space(spec, e);
    REQUIRE(res.points.size() == 41 * 41);
    const double cell = 2 * pi / 40;
    const auto& best = res.points[res.argmax];
    CHECK(std::abs(best.phi_a - 1.7 * pi) <= cell / 2 + 1e-12);
    CHECK(std::abs(best.phi_c - 0.19 * pi) <= cell / 2 + 1e-12);
    CHECK(res.refined_max.phi_a == doctest::Approx(1.7 * pi).epsilon(1e-6));
    CHECK(res.refined_max.phi_c == doctest::Approx(0.19 * pi).epsilon(1e-6));
    for (const auto& p : res.points) CHECK_FALSE(p.measured.has_value());
  }
  SUBCASE("kappa_det surface vanishes for a linear detector") {
    e.detector = kLinear;
    const auto res = scan_phase_space(spec, e);
    for (const auto& p : res.points)
      if (p.kappa_det) CHECK(std::abs(*p.kappa_det) < 1e-9);
  }
  SUBCASE("surface is periodic") {
    ScanSpec shifted = spec;
    for (double& x : shifted.grid_a) x += 2 * pi;
    for (double& x : shifted.grid_c) x -= 2 * pi;
    const auto a = scan_phase_space(spec, e);
    const auto b = scan_phase_space(shifted, e);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].r_abc_det == doctest::Approx(b.points[i].r_abc_det).epsilon(1e-10));
      if (a.points[i].kappa_det && b.points[i].kappa_det)
        CHECK(*a.points[i].kappa_det == doctest::Approx(*b.points[i].kappa_det).epsilon(1e-6).scale(1e-3));
    }
  }
  SUBCASE("simulated points carry estimates and are thread-count independent") {
    spec.grid_a = linspace(0.0, pi, 3);
    spec.grid_c = linspace(0.0, pi, 2);
    spec.simulate = true;
    spec.runs_per_point = 5;
    spec.leg_duration = 0.01;
    spec.base_seed = 9;
    const auto serial = scan_phase_space(spec, e);
    spec.threads = 3;
    const auto parallel = scan_phase_space(spec, e);
    for (std::size_t i = 0; i < serial.points.size(); ++i) {
      REQUIRE(serial.points[i].measured.has_value());
      CHECK(serial.points[i].measured->kappa_mean == parallel.points[i].measured->kappa_mean);
    }
  }
  SUBCASE("grid validation") {
    spec.grid_a = {0.0, 0.0};
    CHECK_THROWS_AS(scan_phase_space(spec, e), InvalidConfigError);
    spec.grid_a = {};
    CHECK_THROWS_AS(scan_phase_space(spec, e), InvalidConfigError);
  }
}

TEST_CASE("intensity sweep") {
  Experiment e;
  e.detector = kReferenceDetector;
  e.config = config_from_single_rates(kReferenceRatios, kReferenceDetector);
  MeasureOptions analytic;
  analytic.n_runs = 0;

  SUBCASE("kappa_det decreases with intensity and vanishes in the linear limit") {
    std::vector<double> scales;
    for (double s = 0.001; s < 30.0; s *= 1.5) scales.push_back(s);
    const auto rows = intensity_sweep(e, scales, {}, analytic);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].r_abc_det > rows[i - 1].r_abc_det);
      CHECK(rows[i].kappa_det < rows[i - 1].kappa_det);
    }
    CHECK(std::abs(rows.front().kappa_det) < 1e-5);
    CHECK(std::isnan(rows.front().kappa_exp));
  }
  SUBCASE("first-order scaling over the table range") {
    const auto rows = intensity_sweep_to_targets(e, kReferenceRatios, {35925, 111288, 260934, 451121}, {}, analytic);
    const double slope_ref = rows.front().kappa_det / rows.front().r_abc_det;
    for (const auto& r : rows) CHECK(r.kappa_det / r.r_abc_det == doctest::Approx(slope_ref).epsilon(0.05));
  }
  SUBCASE("rejects non-positive scales") {
    CHECK_THROWS_AS(intensity_sweep(e, {1.0, 0.0}, {}, analytic), InvalidConfigError);
  }
}
