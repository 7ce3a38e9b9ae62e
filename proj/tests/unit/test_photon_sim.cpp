#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include <tripath/core/model.hpp>
#include <tripath/error.hpp>
#include <tripath/sim/photon_sim.hpp>
#include <tripath/sim/random.hpp>

using namespace tripath;
using namespace tripath::sim;
using core::DetectorModel;
using core::PathSet;

namespace {

struct Summary {
  double mean;
  double stderr_;
};

Summary summarize(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<double> rates_over_seeds(SimulationRun run, int seeds, std::uint64_t base) {
  std::vector<double> out;
  for (int i = 0; i < seeds; ++i) {
    run.seed = derive_seed(base, {static_cast<std::uint64_t>(i)});
    out.push_back(simulate_stream(run).rate());
  }
  return out;
}

const DetectorModel kReferenceDetector{47e-9, 284.0, 1.0};

}  // namespace

TEST_CASE("seed derivation is deterministic and spreads indices") {
  static_assert(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {0}) != derive_seed(2, {0}));
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("unfiltered Poisson counts") {
  // tau = 0, R0 = 0: count ~ Poisson(1e5) per 10 s window
  const auto rates = rates_over_seeds({1e4, DetectorModel{}, 10.0, 0}, 30, 7);
  const auto s = summarize(rates);
  CHECK(std::abs(s.mean - 1e4) < 4.0 * std::sqrt(1e5) / 10.0 / std::sqrt(30.0));
  // spread matches Poisson: sd of the rate is sqrt(1e5)/10
  CHECK(s.stderr_ * std::sqrt(30.0) == doctest::Approx(std::sqrt(1e5) / 10.0).epsilon(0.4));
}

TEST_CASE("Monte Carlo matches the analytic transfer function") {
  for (double rate : {1e3, 1e4, 1e5, 1e6, 5e6}) {
    const double duration = rate < 1e5 ? 2.0 : 0.2;
    const auto s = summarize(rates_over_seeds({rate, kReferenceDetector, duration, 0}, 20, 1000));
    const double expected = core::detector_forward(rate, kReferenceDetector);
    INFO("rate=" << rate << " mean=" << s.mean << " expected=" << expected << " se=" << s.stderr_);
    CHECK(std::abs(s.mean - expected) < 3.0 * s.stderr_);
  }
}

TEST_CASE("dead-time filtering keeps detections at least tau apart") {
  const DetectorModel d{200e-9, 5e4, 1.0};
  std::vector<double> stamps;
  const auto rec =
      simulate_stream({3e6, d, 0.05, 99}, [&](double t) { stamps.push_back(t); });
  REQUIRE(stamps.size() == rec.detected_count);
  REQUIRE(stamps.size() > 1000);
  for (std::size_t i = 1; i < stamps.size(); ++i) CHECK(stamps[i] - stamps[i - 1] >= d.dead_time);
  CHECK(stamps.front() >= 0.0);
  CHECK(stamps.back() < 0.05);
  CHECK(rec.detected_count <= static_cast<std::uint64_t>(std::ceil(0.05 / d.dead_time)) + 1);
}

TEST_CASE("saturated detector respects the count bound") {
  const DetectorModel d{1e-6, 0.0, 1.0};
  const auto rec = simulate_stream({1e9, d, 0.01, 5});
  CHECK(rec.detected_count <= 10001);
  CHECK(rec.detected_count > 9900);
}

TEST_CASE("identical runs are bit-identical") {
  const SimulationRun run{2e5, kReferenceDetector, 0.5, 1234};
  std::vector<double> a, b;
  simulate_stream(run, [&](double t) { a.push_back(t); });
  simulate_stream(run, [&](double t) { b.push_back(t); });
  CHECK(a == b);
  SimulationRun other = run;
  other.seed = 1235;
  CHECK(simulate_stream(other).detected_count != simulate_stream(run).detected_count);
}

TEST_CASE("merging dark and photon streams adds rates") {
  const auto photon_only = summarize(rates_over_seeds({3e4, DetectorModel{}, 1.0, 0}, 30, 1));
  const auto dark_only = summarize(rates_over_seeds({0.0, DetectorModel{0.0, 2e4, 1.0}, 1.0, 0}, 30, 2));
  const auto merged = summarize(rates_over_seeds({3e4, DetectorModel{0.0, 2e4, 1.0}, 1.0, 0}, 30, 3));
  const double se = std::sqrt(merged.stderr_ * merged.stderr_ + photon_only.stderr_ * photon_only.stderr_ +
                              dark_only.stderr_ * dark_only.stderr_);
  CHECK(std::abs(merged.mean - (photon_only.mean + dark_only.mean)) < 4.0 * se);
}

TEST_CASE("regular emitter above the dead time loses nothing") {
  const DetectorModel d{47e-9, 0.0, 1.0};
  const double period = 100e-9;
  const double duration = 0.1;
  const auto rec = simulate_stream({1.0 / period, d, duration, 3, SourceStatistics::regular(period)});
  const double pulses = std::floor(duration / period);
  CHECK(static_cast<double>(rec.detected_count) >= pulses - 1.0);
  CHECK(static_cast<double>(rec.detected_count) <= pulses + 1.0);

  SUBCASE("thinned pulse train keeps the mean rate") {
    const auto s = summarize(rates_over_seeds({2e6, d, 0.1, 0, SourceStatistics::regular(period)}, 20, 8));
    CHECK(std::abs(s.mean - 2e6) < 4.0 * s.stderr_ + 1.0);
  }
  SUBCASE("rate above one photon per pulse is rejected") {
    CHECK_THROWS_AS(simulate_stream({2.0 / period, d, 0.01, 0, SourceStatistics::regular(period)}),
                    InvalidConfigError);
  }
}

TEST_CASE("resource and input guards") {
  CHECK_THROWS_AS(simulate_stream({1e9, DetectorModel{}, 10.0, 0}), ResourceLimitError);
  CHECK_THROWS_AS(simulate_stream({1e3, DetectorModel{}, 1.0, 0}, {}, SimulationLimits{100.0}),
                  ResourceLimitError);
  CHECK_THROWS_AS(simulate_stream({1e3, DetectorModel{}, 0.0, 0}), InvalidConfigError);
  CHECK_THROWS_AS(simulate_stream({-1.0, DetectorModel{}, 1.0, 0}), InvalidConfigError);
}

TEST_CASE("simulate_combination") {
  const core::InterferometerConfig config{3e4, 5e4, 2e4, {0.0, 0.0}};

  SUBCASE("background configuration sees dark counts only") {
    std::vector<double> r;
    for (std::uint64_t s = 0; s < 20; ++s)
      r.push_back(simulate_combination(config, PathSet::none(), kReferenceDetector, 2.0, s).rate());
    const auto sm = summarize(r);
    CHECK(std::abs(sm.mean - core::detector_forward(0.0, kReferenceDetector)) < 3.5 * sm.stderr_);
  }
  SUBCASE("single path with linear detector") {
    const DetectorModel d{0.0, 284.0, 1.0};
    std::vector<double> r;
    for (std::uint64_t s = 0; s < 20; ++s)
      r.push_back(simulate_combination(config, PathSet::parse("A"), d, 1.0, s).rate());
    const auto sm = summarize(r);
    CHECK(std::abs(sm.mean - (3e4 + 284.0)) < 3.5 * sm.stderr_);
  }
  SUBCASE("three paths at the constructive point follow f(R_ABC)") {
    std::vector<double> r;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto rec = simulate_combination(config, PathSet::all_open(), kReferenceDetector, 0.5, s);
      CHECK(rec.path_set == PathSet::all_open());
      r.push_back(rec.rate());
    }
    const auto sm = summarize(r);
    const double expected =
        core::detector_forward(core::incident_rate(config, PathSet::all_open()), kReferenceDetector);
    CHECK(std::abs(sm.mean - expected) < 3.5 * sm.stderr_);
  }
}

TEST_CASE("inject_violation") {
  const core::InterferometerConfig config{2e3, 6e3, 2e3, {0.0, 0.0}};

  SUBCASE("zero strength is the plain interferometer") {
    const auto inj = inject_violation(config.at({0.4, 1.3}), 0.0);
    for (PathSet s : PathSet::all())
      CHECK(inj.rate(s) == core::incident_rate(config.at({0.4, 1.3}), s));
  }
  SUBCASE("epsilon equals the injected term") {
    const double s = 0.05;
    const auto inj = inject_violation(config, s);
    const double term = s * std::cbrt(2e3 * 6e3 * 2e3);
    CHECK(inj.injected_term() == doctest::Approx(term).epsilon(1e-14));
    CHECK(core::epsilon(inj.rates()) == doctest::Approx(term).epsilon(1e-9));
    CHECK(core::kappa(inj.rates()) != 0.0);
  }
  SUBCASE("only the three-path rate changes") {
    const auto inj = inject_violation(config.at({0.2, 0.3}), 0.1);
    for (PathSet s : PathSet::all())
      if (s != PathSet::all_open()) CHECK(inj.rate(s) == core::incident_rate(config.at({0.2, 0.3}), s));
  }
  SUBCASE("negative rates are rejected") {
    // dark fringe of all three paths: R_ABC = 0, and a negative strength pushes it below
    const core::InterferometerConfig dark{1.0, 1.0, 1.0, {2.0 * M_PI / 3.0, -2.0 * M_PI / 3.0}};
    CHECK(core::incident_rate(dark, PathSet::all_open()) == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(inject_violation(dark, -1.0), NegativeRateError);
    CHECK_NOTHROW(inject_violation(dark, 1.0));
  }
}
