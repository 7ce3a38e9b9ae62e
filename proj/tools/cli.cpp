#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <tripath/calib/calibration.hpp>
#include <tripath/error.hpp>
#include <tripath/experiment/runner.hpp>
#include <tripath/io/csv.hpp>
#include <tripath/io/run_config.hpp>
#include <tripath/io/svg.hpp>
#include <tripath/sim/random.hpp>

namespace tripath::cli {

namespace {

namespace fs = std::filesystem;
using std::numbers::pi;

/// Command-line values that replace config-file entries when given.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  int verbose = 0;
  std::optional<double> tau_ns, dark_cps, efficiency;
  std::optional<double> rate_a, rate_b, rate_c, phi_a_pi, phi_c_pi;
  std::optional<double> vis_ab, vis_ac, vis_bc;
  std::optional<std::string> rate_kind, source;
  std::optional<double> period_ns;
  std::optional<int> runs;
  std::optional<double> leg_s, violation, drift;
  bool fixed_order = false;

  io::RunConfig resolve() const {
    io::RunConfig c = config_path.empty() ? io::RunConfig{} : io::load_run_config(config_path);
    auto set = [](auto& target, const auto& value) {
      if (value) target = *value;
    };
    set(c.seed, seed);
    set(c.output_dir, out);
    set(c.threads, threads);
    if (verbose > 0) c.verbosity = verbose;
    set(c.dead_time_ns, tau_ns);
    set(c.dark_rate_cps, dark_cps);
    set(c.efficiency, efficiency);
    set(c.rate_a_cps, rate_a);
    set(c.rate_b_cps, rate_b);
    set(c.rate_c_cps, rate_c);
    set(c.phi_a_pi, phi_a_pi);
    set(c.phi_c_pi, phi_c_pi);
    set(c.visibility_ab, vis_ab);
    set(c.visibility_ac, vis_ac);
    set(c.visibility_bc, vis_bc);
    if (rate_kind) c.rate_kind = *rate_kind == "detected" ? io::RateKind::detected : io::RateKind::incident;
    if (source) c.source_mode = sim::parse_source_mode(*source);
    set(c.period_ns, period_ns);
    set(c.runs, runs);
    set(c.leg_duration_s, leg_s);
    set(c.violation_strength, violation);
    set(c.intensity_drift, drift);
    if (fixed_order) c.randomize_order = false;
    c.validate();
    return c;
  }
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "Run configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Base seed (u64)");
  cmd.add_option("--out", o.out, "Output directory");
  cmd.add_option("--threads", o.threads, "Worker threads");
  cmd.add_flag("-v,--verbose", o.verbose, "More progress output on stderr");
  cmd.add_option("--tau-ns", o.tau_ns, "Detector dead time (ns)");
  cmd.add_option("--dark-cps", o.dark_cps, "Dark-count rate (counts/s)");
  cmd.add_option("--efficiency", o.efficiency, "Detection efficiency");
  cmd.add_option("--rate-a-cps", o.rate_a, "Path A single rate (counts/s)");
  cmd.add_option("--rate-b-cps", o.rate_b, "Path B single rate (counts/s)");
  cmd.add_option("--rate-c-cps", o.rate_c, "Path C single rate (counts/s)");
  cmd.add_option("--rate-kind", o.rate_kind, "Single rates are 'incident' or 'detected'")
      ->check(CLI::IsMember({"incident", "detected"}));
  cmd.add_option("--phi-a-pi", o.phi_a_pi, "Phase of path A (units of pi)");
  cmd.add_option("--phi-c-pi", o.phi_c_pi, "Phase of path C (units of pi)");
  cmd.add_option("--visibility-ab", o.vis_ab);
  cmd.add_option("--visibility-ac", o.vis_ac);
  cmd.add_option("--visibility-bc", o.vis_bc);
  cmd.add_option("--source", o.source, "poissonian or regular_emitter")
      ->check(CLI::IsMember({"poissonian", "regular_emitter"}));
  cmd.add_option("--period-ns", o.period_ns, "Regular-emitter pulse period (ns)");
  cmd.add_option("--runs", o.runs, "Runs per kappa measurement");
  cmd.add_option("--leg-s", o.leg_s, "Integration time per combination (s)");
  cmd.add_option("--violation", o.violation, "Injected three-path term strength");
  cmd.add_option("--drift", o.drift, "Relative intensity change per leg");
  cmd.add_flag("--fixed-order", o.fixed_order, "Visit combinations in mask order");
}

/// Creates the output directory and proves it writable before any work.
fs::path prepare_output(const io::RunConfig& c) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  const auto probe = dir / ".tripath-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw Error(fmt::format("output directory '{}' is not writable", dir.string()));
  }
  fs::remove(probe, ec);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
  return f;
}

std::string pi_units(double radians) { return fmt::format("{:.4f}pi", radians / pi); }

double tidy(double kappa) { return std::abs(kappa) < 5e-13 ? 0.0 : kappa; }

experiment::SingleRates detected_singles(const io::RunConfig& c) {
  if (c.rate_kind == io::RateKind::detected) return {c.rate_a_cps, c.rate_b_cps, c.rate_c_cps};
  return experiment::expected_single_rates(c.interferometer(), c.detector());
}

int cmd_simulate(const Overrides& o, const std::string& paths, std::optional<double> duration,
                 const std::string& dump, std::ostream& out) {
  const auto c = o.resolve();
  const auto dir = prepare_output(c);
  const auto set = core::PathSet::parse(paths);
  const auto source = sim::inject_violation(c.interferometer(), c.violation_strength);
  const double seconds = duration.value_or(c.leg_duration_s);
  sim::CountRecord rec;
  if (dump.empty()) {
    rec = sim::simulate_combination(source, set, c.detector(), seconds, c.seed, c.source());
  } else {
    sim::SimulationRun run{source.rate(set), c.detector(), seconds, c.seed, c.source()};
    auto f = open_out(dump);
    rec = sim::simulate_stream(run, [&](double t) { f << io::format_number(t) << '\n'; });
    rec.path_set = set;
  }
  auto csv = open_out(dir / "count.csv");
  csv << "path_set,detected_count,duration_s,seed,rate_cps\n"
      << set.mask() << ',' << rec.detected_count << ',' << io::format_number(rec.duration) << ','
      << rec.seed << ',' << io::format_number(rec.rate()) << '\n';
  out << fmt::format("path_set = {}\ndetected_count = {}\nduration_s = {}\nseed = {}\nrate_cps = {}\n",
                     set.label(), rec.detected_count, io::format_number(rec.duration), rec.seed,
                     io::format_number(rec.rate()));
  return 0;
}

int cmd_calibrate(const Overrides& o, const std::string& input, int simulate_n, int bootstrap,
                  std::ostream& out, std::ostream& err) {
  const auto c = o.resolve();
  const auto dir = prepare_output(c);
  std::vector<calib::QuadrupleMeasurement> data;
  if (simulate_n > 0) {
    // log-spaced incident singles over two decades, path B at 70% of A
    for (int k = 0; k < simulate_n; ++k) {
      const double a = 1e4 * std::pow(100.0, simulate_n > 1 ? double(k) / (simulate_n - 1) : 0.0);
      data.push_back(calib::simulate_quadruple(a, 0.7 * a, c.detector(), c.leg_duration_s,
                                               sim::derive_seed(c.seed, {std::uint64_t(k)})));
    }
    auto f = open_out(dir / "quadruples.csv");
    io::write_quadruples_csv(f, data);
  } else {
    std::ifstream in(input);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", input));
    data = io::read_quadruples_csv(in);
  }
  calib::EstimateOptions opts;
  opts.bootstrap_resamples = bootstrap;
  opts.seed = c.seed;
  const auto result = calib::estimate_parameters(data, opts);
  auto report = open_out(dir / "calibration.txt");
  io::write_calibration_report(report, result);
  auto csv = open_out(dir / "calibration.csv");
  io::write_calibration_csv(csv, result);
  io::write_calibration_report(out, result);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  return 0;
}

int cmd_scan(const Overrides& o, std::optional<int> steps, std::optional<int> runs_per_point,
             std::ostream& out, std::ostream& err) {
  auto c = o.resolve();
  if (steps) c.scan_phi_a_steps = c.scan_phi_c_steps = *steps;
  if (runs_per_point) c.scan_runs_per_point = *runs_per_point;
  c.validate();
  const auto dir = prepare_output(c);
  const auto spec = c.scan_spec();
  if (c.verbosity > 0)
    err << fmt::format("scanning {} x {} points, {} runs each\n", spec.grid_a.size(), spec.grid_c.size(),
                       spec.simulate ? spec.runs_per_point : 0);
  const auto scan = experiment::scan_phase_space(spec, c.experiment());
  {
    auto f = open_out(dir / "grid.csv");
    io::write_grid_csv(f, scan);
  }
  const auto grid = (dir / "grid.csv").string();
  io::render_contour(grid, "r_abc_det_cps", (dir / "intensity.svg").string());
  io::render_contour(grid, "kappa_det_pred", (dir / "kappa_det.svg").string());
  if (spec.simulate) io::render_contour(grid, "kappa_mean", (dir / "kappa_mean.svg").string());
  const auto& peak = scan.points[scan.argmax];
  out << fmt::format("grid_points = {}\nargmax_phi_a = {}\nargmax_phi_c = {}\nrefined_phi_a = {}\n"
                     "refined_phi_c = {}\nmax_r_abc_det_cps = {}\n",
                     scan.points.size(), pi_units(peak.phi_a), pi_units(peak.phi_c),
                     pi_units(scan.refined_max.phi_a), pi_units(scan.refined_max.phi_c),
                     io::format_number(peak.r_abc_det));
  return 0;
}

int cmd_sweep(const Overrides& o, const std::vector<double>& scales, const std::vector<double>& targets,
              bool analytic, std::ostream& out) {
  auto c = o.resolve();
  if (!scales.empty()) c.sweep_scale_factors = scales;
  if (!targets.empty()) c.sweep_target_r_abc_det_cps = targets;
  c.validate();
  const auto dir = prepare_output(c);
  auto opts = c.measure_options();
  if (analytic) opts.n_runs = 0;
  std::vector<experiment::SweepRow> rows;
  if (!c.sweep_target_r_abc_det_cps.empty()) {
    // the configured single rates only fix the detected ratios here
    experiment::Experiment base = c.experiment();
    rows = experiment::intensity_sweep_to_targets(base, detected_singles(c), c.sweep_target_r_abc_det_cps,
                                                  c.phase(), opts);
  } else {
    if (c.sweep_scale_factors.empty()) throw InvalidConfigError("sweep needs scale_factors or targets");
    rows = experiment::intensity_sweep(c.experiment(), c.sweep_scale_factors, c.phase(), opts);
  }
  {
    auto f = open_out(dir / "table.csv");
    io::write_table_csv(f, rows);
  }
  auto svg = open_out(dir / "kappa_vs_intensity.svg");
  svg << io::render_sweep_svg(rows);
  io::write_table_csv(out, rows);
  return 0;
}

int cmd_kappa(const Overrides& o, bool audit, std::ostream& out) {
  const auto c = o.resolve();
  const auto dir = prepare_output(c);
  std::vector<experiment::LegRecord> legs;
  const auto est = experiment::measure_kappa(c.experiment(), c.phase(), c.measure_options(),
                                             audit ? &legs : nullptr);
  if (audit) {
    auto f = open_out(dir / "audit.csv");
    io::write_audit_csv(f, legs);
  }
  const double kd = experiment::predict_kappa_det(detected_singles(c), c.detector(), c.phase());
  auto f = open_out(dir / "kappa.csv");
  f << "phi_A,phi_C,kappa_mean,kappa_stderr,kappa_det_pred,n_runs\n"
    << io::format_number(est.phase.phi_a) << ',' << io::format_number(est.phase.phi_c) << ','
    << io::format_number(est.kappa_mean) << ',' << io::format_number(est.kappa_stderr) << ','
    << io::format_number(kd) << ',' << est.n_runs << '\n';
  out << fmt::format("kappa = {:.6f} +- {:.6f}\nkappa_det = {:.6f}\nn_runs = {}\n", est.kappa_mean,
                     est.kappa_stderr, tidy(kd), est.n_runs);
  return 0;
}

int cmd_predict(const Overrides& o, std::ostream& out) {
  const auto c = o.resolve();
  const auto singles = detected_singles(c);
  const auto rates = experiment::predict_detected_rates(singles, c.detector(), c.phase());
  out << fmt::format("kappa_det = {:.6f}\nr_abc_det_cps = {:.6g}\n", tidy(core::kappa(rates)),
                     rates[core::PathSet::all_open()]);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-path interference simulator with detector nonlinearity", "tripath"};
  app.require_subcommand(1);

  Overrides o;
  auto* simulate = app.add_subcommand("simulate", "Count one path combination");
  add_common(*simulate, o);
  std::string paths = "ABC", dump;
  std::optional<double> duration;
  simulate->add_option("--paths", paths, "Open paths, e.g. AB or 0")->capture_default_str();
  simulate->add_option("--duration-s", duration, "Integration time (s), default leg_duration_s");
  simulate->add_option("--dump-events", dump, "Write detection timestamps to this file");

  auto* calibrate = app.add_subcommand("calibrate", "Fit dead time and dark rate to quadruples");
  add_common(*calibrate, o);
  std::string input;
  int simulate_n = 0, bootstrap = 1000;
  auto* input_opt = calibrate->add_option("--input", input, "Quadruple CSV")->check(CLI::ExistingFile);
  calibrate->add_option("--simulate", simulate_n, "Simulate N quadruples from the configured detector")
      ->excludes(input_opt)
      ->check(CLI::Range(3, 100000));
  calibrate->add_option("--bootstrap", bootstrap, "Bootstrap resamples")->capture_default_str()->check(
      CLI::NonNegativeNumber);

  auto* scan = app.add_subcommand("scan", "Raster phase space");
  add_common(*scan, o);
  std::optional<int> steps, runs_per_point;
  scan->add_option("--steps", steps, "Grid points per axis");
  scan->add_option("--runs-per-point", runs_per_point, "Kappa runs per grid point (0: analytic)");

  auto* sweep = app.add_subcommand("sweep", "Kappa against intensity");
  add_common(*sweep, o);
  std::vector<double> scales, targets;
  bool analytic = false;
  sweep->add_option("--scales", scales, "Intensity scale factors")->delimiter(',');
  sweep->add_option("--targets", targets, "Target detected R_ABC (counts/s)")->delimiter(',');
  sweep->add_flag("--analytic", analytic, "Predict only, no simulation");

  auto* kappa = app.add_subcommand("kappa", "Measure kappa at one phase point");
  add_common(*kappa, o);
  bool audit = false;
  kappa->add_flag("--audit", audit, "Write every leg to audit.csv");

  auto* predict = app.add_subcommand("predict", "Predict kappa_det without simulating");
  add_common(*predict, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n'
        << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o, paths, duration, dump, out);
    if (calibrate->parsed()) {
      if (input.empty() && simulate_n == 0) {
        err << "error: calibrate needs --input or --simulate\n" << calibrate->help();
        return 1;
      }
      return cmd_calibrate(o, input, simulate_n, bootstrap, out, err);
    }
    if (scan->parsed()) return cmd_scan(o, steps, runs_per_point, out, err);
    if (sweep->parsed()) return cmd_sweep(o, scales, targets, analytic, out);
    if (kappa->parsed()) return cmd_kappa(o, audit, out);
    if (predict->parsed()) return cmd_predict(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace tripath::cli
