#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include <tripath/calib/calibration.hpp>
#include <tripath/experiment/runner.hpp>

namespace tripath::io {

/// Header plus numeric rows. "nan" marks a missing value.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name; throws ParseError if absent.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated, header row required, every row as wide as the header.
/// Throws ParseError naming the offending line otherwise.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Shortest representation that parses back to the same double.
std::string format_number(double x);

// grid: phi_A,phi_C,r_abc_det_cps,kappa_mean,kappa_stderr,kappa_det_pred
void write_grid_csv(std::ostream& out, const experiment::ScanResult& scan);
// table: r_abc_det_cps,kappa_det,kappa_exp,kappa_stderr
void write_table_csv(std::ostream& out, const std::vector<experiment::SweepRow>& rows);
// audit: run_index,combination,order_position,count,duration_s,seed
void write_audit_csv(std::ostream& out, const std::vector<experiment::LegRecord>& legs);

std::vector<experiment::SweepRow> read_table_csv(std::istream& in);
std::vector<experiment::LegRecord> read_audit_csv(std::istream& in);

/// Quadruple dataset: dark_cps,a_cps,b_cps,ab_cps,duration_s
std::vector<calib::QuadrupleMeasurement> read_quadruples_csv(std::istream& in);
void write_quadruples_csv(std::ostream& out, const std::vector<calib::QuadrupleMeasurement>& data);

/// Flat "key = value" report, one entry per line.
void write_calibration_report(std::ostream& out, const calib::CalibrationResult& result);
/// One-row CSV: tau_hat_s,tau_stderr_s,r0_hat_cps,r0_stderr_cps,n_quadruples,chi_square,bootstrap_used
void write_calibration_csv(std::ostream& out, const calib::CalibrationResult& result);
calib::CalibrationResult read_calibration_csv(std::istream& in);

}  // namespace tripath::io
