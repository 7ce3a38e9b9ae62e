#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cli.hpp>
#include <tripath/calib/calibration.hpp>
#include <tripath/core/model.hpp>
#include <tripath/error.hpp>
#include <tripath/experiment/runner.hpp>
#include <tripath/sim/photon_sim.hpp>

namespace py = pybind11;
using namespace tripath;

namespace {

core::SumRuleInputs to_inputs(const std::vector<double>& rates) {
  if (rates.size() != 8) throw InvalidConfigError("expected 8 rates in mask order 0, A, B, AB, C, AC, BC, ABC");
  std::array<double, 8> a{};
  std::copy(rates.begin(), rates.end(), a.begin());
  return core::SumRuleInputs(a);
}

std::vector<double> to_list(const core::SumRuleInputs& r) { return {r.rates().begin(), r.rates().end()}; }

py::dict to_dict(const calib::CalibrationResult& r) {
  py::dict d;
  d["tau_hat"] = r.tau_hat;
  d["tau_stderr"] = r.tau_stderr;
  d["r0_hat"] = r.r0_hat;
  d["r0_stderr"] = r.r0_stderr;
  d["residuals"] = r.residuals;
  d["n_quadruples"] = r.n_quadruples;
  d["chi_square"] = r.chi_square;
  d["bootstrap_used"] = r.bootstrap_used;
  d["warnings"] = r.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Three-path interference with a dead-time detector";

  // registered first so the more specific translators below take precedence
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidConfigError>(m, "InvalidConfigError", base);
  py::register_exception<OutOfRangeError>(m, "OutOfRangeError", base);
  py::register_exception<DegenerateNormalizationError>(m, "DegenerateNormalizationError", base);
  py::register_exception<TotalInternalReflectionError>(m, "TotalInternalReflectionError", base);
  py::register_exception<ResourceLimitError>(m, "ResourceLimitError", base);
  py::register_exception<NegativeRateError>(m, "NegativeRateError", base);
  py::register_exception<NonConvergenceError>(m, "NonConvergenceError", base);
  py::register_exception<SaturationError>(m, "SaturationError", base);
  py::register_exception<ParseError>(m, "ParseError", base);

  py::class_<core::PhasePoint>(m, "PhasePoint")
      .def(py::init<double, double>(), py::arg("phi_a") = 0.0, py::arg("phi_c") = 0.0)
      .def_readwrite("phi_a", &core::PhasePoint::phi_a)
      .def_readwrite("phi_c", &core::PhasePoint::phi_c)
      .def("__repr__", [](const core::PhasePoint& p) {
        return "PhasePoint(phi_a=" + std::to_string(p.phi_a) + ", phi_c=" + std::to_string(p.phi_c) + ")";
      });

  py::class_<core::DetectorModel>(m, "DetectorModel")
      .def(py::init([](double dead_time, double dark_rate, double efficiency) {
             core::DetectorModel d{dead_time, dark_rate, efficiency};
             d.validate();
             return d;
           }),
           py::arg("dead_time") = 0.0, py::arg("dark_rate") = 0.0, py::arg("efficiency") = 1.0)
      .def_readwrite("dead_time", &core::DetectorModel::dead_time)
      .def_readwrite("dark_rate", &core::DetectorModel::dark_rate)
      .def_readwrite("efficiency", &core::DetectorModel::efficiency);

  py::class_<core::InterferometerConfig>(m, "InterferometerConfig")
      .def(py::init([](double a, double b, double c, core::PhasePoint phase, double vab, double vac, double vbc) {
             core::InterferometerConfig cfg{a, b, c, phase, vab, vac, vbc};
             cfg.validate();
             return cfg;
           }),
           py::arg("rate_a"), py::arg("rate_b"), py::arg("rate_c"), py::arg("phase") = core::PhasePoint{},
           py::arg("visibility_ab") = 1.0, py::arg("visibility_ac") = 1.0, py::arg("visibility_bc") = 1.0)
      .def_readwrite("rate_a", &core::InterferometerConfig::rate_a)
      .def_readwrite("rate_b", &core::InterferometerConfig::rate_b)
      .def_readwrite("rate_c", &core::InterferometerConfig::rate_c)
      .def_readwrite("phase", &core::InterferometerConfig::phase);

  m.def("incident_rates", [](const core::InterferometerConfig& c) { return to_list(core::incident_rates(c)); },
        "Rates of the eight combinations in mask order 0, A, B, AB, C, AC, BC, ABC.");
  m.def("detector_forward", &core::detector_forward, py::arg("incident_rate"), py::arg("detector"));
  m.def("detector_inverse",
        [](double d, const core::DetectorModel& model) { return core::detector_inverse(d, model); },
        py::arg("detected_rate"), py::arg("detector"));
  m.def("epsilon", [](const std::vector<double>& r) { return core::epsilon(to_inputs(r)); });
  m.def("delta", [](const std::vector<double>& r) { return core::delta(to_inputs(r)); });
  m.def("kappa", [](const std::vector<double>& r) { return core::kappa(to_inputs(r)); });

  m.def(
      "predict_kappa_det",
      [](std::array<double, 3> singles, const core::DetectorModel& d, core::PhasePoint phase) {
        return experiment::predict_kappa_det({singles[0], singles[1], singles[2]}, d, phase);
      },
      py::arg("detected_singles"), py::arg("detector"), py::arg("phase") = core::PhasePoint{});
  m.def(
      "reconstruct_single_rates",
      [](std::array<double, 3> ratios, double target, const core::DetectorModel& d, core::PhasePoint phase) {
        const auto s = experiment::reconstruct_single_rates({ratios[0], ratios[1], ratios[2]}, target, d, phase);
        return std::array<double, 3>{s.a, s.b, s.c};
      },
      py::arg("ratios"), py::arg("target_r_abc_det"), py::arg("detector"), py::arg("phase") = core::PhasePoint{});

  m.def(
      "simulate_combination",
      [](const core::InterferometerConfig& c, const std::string& paths, const core::DetectorModel& d,
         double duration, std::uint64_t seed) {
        py::gil_scoped_release release;
        return sim::simulate_combination(c, core::PathSet::parse(paths), d, duration, seed).detected_count;
      },
      py::arg("config"), py::arg("paths"), py::arg("detector"), py::arg("duration") = 1.0, py::arg("seed") = 0,
      "Detected count for one path combination, e.g. paths='AB'.");

  m.def(
      "measure_kappa",
      [](const core::InterferometerConfig& c, const core::DetectorModel& d, int n_runs, double leg_duration,
         std::uint64_t seed, int threads, double violation_strength) {
        experiment::Experiment e{c, d, {}, violation_strength, 0.0};
        experiment::MeasureOptions o;
        o.n_runs = n_runs;
        o.leg_duration = leg_duration;
        o.seed = seed;
        o.threads = threads;
        experiment::KappaEstimate est;
        {
          py::gil_scoped_release release;
          est = experiment::measure_kappa(e, c.phase, o);
        }
        py::dict out;
        out["kappa_mean"] = est.kappa_mean;
        out["kappa_stderr"] = est.kappa_stderr;
        out["epsilon_mean"] = est.epsilon_mean;
        out["delta_mean"] = est.delta_mean;
        out["n_runs"] = est.n_runs;
        return out;
      },
      py::arg("config"), py::arg("detector"), py::arg("n_runs") = 1000, py::arg("leg_duration") = 1.0,
      py::arg("seed") = 0, py::arg("threads") = 1, py::arg("violation_strength") = 0.0);

  m.def(
      "estimate_parameters",
      [](const std::vector<std::array<double, 5>>& rows, int bootstrap, std::uint64_t seed) {
        std::vector<calib::QuadrupleMeasurement> data;
        for (const auto& r : rows) data.push_back({r[0], r[1], r[2], r[3], r[4]});
        calib::EstimateOptions o;
        o.bootstrap_resamples = bootstrap;
        o.seed = seed;
        return to_dict(calib::estimate_parameters(data, o));
      },
      py::arg("quadruples"), py::arg("bootstrap_resamples") = 1000, py::arg("seed") = 0x5eed,
      "Quadruples are (dark_cps, a_cps, b_cps, ab_cps, duration_s).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
