#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

#include <tripath/error.hpp>
#include <tripath/io/csv.hpp>

namespace tripath::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  if (field == "nan" || field == "NaN" || field.empty()) return std::nan("");
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, field));
  return value;
}

void require_columns(const CsvTable& t, std::initializer_list<const char*> names) {
  for (const char* n : names) t.column(n);
}

std::string opt_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string("nan");
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError(fmt::format("missing CSV column '{}'", name));
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);  // UTF-8 BOM
    if (view.empty()) continue;
    const auto fields = split(view);
    if (t.header.empty()) {
      for (auto f : fields) t.header.emplace_back(f);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                   t.header.size(), fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(parse_number(f, line_no));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ParseError("CSV input has no header row");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path));
  return read_csv(in);
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{}", x);
}

void write_grid_csv(std::ostream& out, const experiment::ScanResult& scan) {
  out << "phi_A,phi_C,r_abc_det_cps,kappa_mean,kappa_stderr,kappa_det_pred\n";
  for (const auto& p : scan.points) {
    out << format_number(p.phi_a) << ',' << format_number(p.phi_c) << ','
        << format_number(p.r_abc_det) << ','
        << opt_number(p.measured ? std::optional(p.measured->kappa_mean) : std::nullopt) << ','
        << opt_number(p.measured ? std::optional(p.measured->kappa_stderr) : std::nullopt) << ','
        << opt_number(p.kappa_det) << '\n';
  }
}

void write_table_csv(std::ostream& out, const std::vector<experiment::SweepRow>& rows) {
  out << "r_abc_det_cps,kappa_det,kappa_exp,kappa_stderr\n";
  for (const auto& r : rows)
    out << format_number(r.r_abc_det) << ',' << format_number(r.kappa_det) << ','
        << format_number(r.kappa_exp) << ',' << format_number(r.kappa_stderr) << '\n';
}

void write_audit_csv(std::ostream& out, const std::vector<experiment::LegRecord>& legs) {
  out << "run_index,combination,order_position,count,duration_s,seed\n";
  // combination is written as its mask (0..7; bit 1 = A, 2 = B, 4 = C)
  for (const auto& l : legs)
    out << l.run_index << ',' << l.combination.mask() << ',' << l.order_position << ',' << l.count
        << ',' << format_number(l.duration) << ',' << l.seed << '\n';
}

std::vector<experiment::SweepRow> read_table_csv(std::istream& in) {
  const auto t = read_csv(in);
  require_columns(t, {"r_abc_det_cps", "kappa_det", "kappa_exp", "kappa_stderr"});
  std::vector<experiment::SweepRow> rows;
  for (const auto& r : t.rows) {
    experiment::SweepRow row;
    row.r_abc_det = r[t.column("r_abc_det_cps")];
    row.kappa_det = r[t.column("kappa_det")];
    row.kappa_exp = r[t.column("kappa_exp")];
    row.kappa_stderr = r[t.column("kappa_stderr")];
    rows.push_back(row);
  }
  return rows;
}

std::vector<experiment::LegRecord> read_audit_csv(std::istream& in) {
  // seeds are full 64-bit integers and would lose precision as doubles
  std::vector<experiment::LegRecord> legs;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto f = split(view);
    if (header) {
      if (f.size() != 6 || f[0] != "run_index" || f[5] != "seed")
        throw ParseError(fmt::format("line {}: not an audit CSV header", line_no));
      header = false;
      continue;
    }
    if (f.size() != 6) throw ParseError(fmt::format("line {}: expected 6 fields", line_no));
    auto to_u64 = [&](std::string_view s) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(fmt::format("line {}: '{}' is not an unsigned integer", line_no, s));
      return v;
    };
    experiment::LegRecord l;
    l.run_index = static_cast<int>(to_u64(f[0]));
    l.combination = core::PathSet::from_mask(static_cast<unsigned>(to_u64(f[1])));
    l.order_position = static_cast<int>(to_u64(f[2]));
    l.count = to_u64(f[3]);
    l.duration = parse_number(f[4], line_no);
    l.seed = to_u64(f[5]);
    legs.push_back(l);
  }
  return legs;
}

std::vector<calib::QuadrupleMeasurement> read_quadruples_csv(std::istream& in) {
  const auto t = read_csv(in);
  require_columns(t, {"dark_cps", "a_cps", "b_cps", "ab_cps", "duration_s"});
  std::vector<calib::QuadrupleMeasurement> out;
  std::size_t row_no = 1;
  for (const auto& r : t.rows) {
    ++row_no;
    calib::QuadrupleMeasurement q{r[t.column("dark_cps")], r[t.column("a_cps")], r[t.column("b_cps")],
                                  r[t.column("ab_cps")], r[t.column("duration_s")]};
    try {
      q.validate();
    } catch (const Error& e) {
      throw ParseError(fmt::format("data row {}: {}", row_no - 1, e.what()));
    }
    out.push_back(q);
  }
  return out;
}

void write_quadruples_csv(std::ostream& out, const std::vector<calib::QuadrupleMeasurement>& data) {
  out << "dark_cps,a_cps,b_cps,ab_cps,duration_s\n";
  for (const auto& q : data)
    out << format_number(q.dark_rate) << ',' << format_number(q.rate_a) << ','
        << format_number(q.rate_b) << ',' << format_number(q.rate_ab) << ','
        << format_number(q.duration) << '\n';
}

void write_calibration_report(std::ostream& out, const calib::CalibrationResult& r) {
  out << "tau_hat_ns = " << format_number(r.tau_hat * 1e9) << '\n'
      << "tau_stderr_ns = " << format_number(r.tau_stderr * 1e9) << '\n'
      << "r0_hat_cps = " << format_number(r.r0_hat) << '\n'
      << "r0_stderr_cps = " << format_number(r.r0_stderr) << '\n'
      << "n_quadruples = " << r.n_quadruples << '\n'
      << "bootstrap_resamples = " << r.bootstrap_used << '\n'
      << "chi_square = " << format_number(r.chi_square) << '\n'
      << "iterations = " << r.iterations << '\n';
  for (std::size_t i = 0; i < r.residuals.size(); ++i)
    out << "defect_cps." << i << " = " << format_number(r.residuals[i]) << '\n';
  for (const auto& w : r.warnings) out << "warning = " << w << '\n';
}

void write_calibration_csv(std::ostream& out, const calib::CalibrationResult& r) {
  out << "tau_hat_s,tau_stderr_s,r0_hat_cps,r0_stderr_cps,n_quadruples,chi_square,bootstrap_used\n"
      << format_number(r.tau_hat) << ',' << format_number(r.tau_stderr) << ','
      << format_number(r.r0_hat) << ',' << format_number(r.r0_stderr) << ',' << r.n_quadruples
      << ',' << format_number(r.chi_square) << ',' << r.bootstrap_used << '\n';
}

calib::CalibrationResult read_calibration_csv(std::istream& in) {
  const auto t = read_csv(in);
  if (t.rows.size() != 1) throw ParseError("calibration CSV must have exactly one data row");
  const auto& row = t.rows.front();
  calib::CalibrationResult r;
  r.tau_hat = row[t.column("tau_hat_s")];
  r.tau_stderr = row[t.column("tau_stderr_s")];
  r.r0_hat = row[t.column("r0_hat_cps")];
  r.r0_stderr = row[t.column("r0_stderr_cps")];
  r.n_quadruples = static_cast<int>(row[t.column("n_quadruples")]);
  r.chi_square = row[t.column("chi_square")];
  r.bootstrap_used = static_cast<int>(row[t.column("bootstrap_used")]);
  return r;
}

}  // namespace tripath::io
