#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include <tripath/error.hpp>
#include <tripath/io/svg.hpp>

namespace tripath::io {

namespace {

constexpr double kPi = std::numbers::pi;

// plot frame in SVG user units
constexpr double kWidth = 640, kHeight = 560;
constexpr double kLeft = 80, kRight = 520, kTop = 40, kBottom = 480;

struct Rgb {
  double r, g, b;
};

// anchors of a perceptually ordered dark-blue to yellow map
constexpr std::array<Rgb, 5> kMap = {{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};

std::string colour(double t) {
  if (!std::isfinite(t)) return "#bbbbbb";
  t = std::clamp(t, 0.0, 1.0) * (kMap.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), kMap.size() - 2);
  const double f = t - i;
  auto mix = [&](double a, double b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
  return fmt::format("#{:02x}{:02x}{:02x}", mix(kMap[i].r, kMap[i + 1].r), mix(kMap[i].g, kMap[i + 1].g),
                     mix(kMap[i].b, kMap[i + 1].b));
}

std::string pi_label(double multiple) {
  if (std::abs(multiple) < 1e-9) return "0";
  if (std::abs(multiple - 1.0) < 1e-9) return "&#960;";
  return fmt::format("{:g}&#960;", std::round(multiple * 1000) / 1000);
}

/// Round tick positions covering [lo, hi], about `target` of them.
std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + step * 1e-9; t += step)
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

std::pair<double, double> finite_range(const std::vector<double>& v) {
  double lo = INFINITY, hi = -INFINITY;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return {lo, hi};
}

bool constant_range(double lo, double hi) {
  return !(hi > lo) || hi - lo <= 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
}

/// Cell boundaries around each node: midpoints inside, half a spacing outside.
std::vector<double> node_edges(const std::vector<double>& nodes) {
  std::vector<double> e(nodes.size() + 1);
  if (nodes.size() == 1) {
    e[0] = nodes[0] - 0.5;
    e[1] = nodes[0] + 0.5;
    return e;
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) e[i] = 0.5 * (nodes[i - 1] + nodes[i]);
  e.front() = nodes.front() - (e[1] - nodes.front());
  e.back() = nodes.back() + (nodes.back() - e[nodes.size() - 1]);
  return e;
}

}  // namespace

GridField grid_field(const CsvTable& grid, const std::string& field) {
  const std::size_t ia_col = grid.column("phi_A");
  const std::size_t ic_col = grid.column("phi_C");
  const std::size_t v_col = grid.column(field);
  if (grid.rows.empty()) throw ParseError("grid CSV has no data rows");

  GridField g;
  const double a0 = grid.rows.front()[ia_col];
  for (const auto& row : grid.rows) {
    if (row[ia_col] != a0) break;
    g.phi_c.push_back(row[ic_col]);
  }
  const std::size_t n_c = g.phi_c.size();
  for (std::size_t k = 0; k < grid.rows.size(); ++k) {
    const auto& row = grid.rows[k];
    const std::size_t ia = k / n_c, ic = k % n_c;
    if (ic == 0) {
      if (!std::isfinite(row[ia_col]) || (ia > 0 && !(row[ia_col] > g.phi_a.back())))
        throw ParseError(fmt::format("grid row {}: phi_A must increase between lattice rows", k + 1));
      g.phi_a.push_back(row[ia_col]);
    }
    if (row[ia_col] != g.phi_a[ia] || row[ic_col] != g.phi_c[ic])
      throw ParseError(fmt::format("grid row {}: ({}, {}) breaks the {}-column lattice", k + 1,
                                   row[ia_col], row[ic_col], n_c));
    g.values.push_back(row[v_col]);
  }
  if (grid.rows.size() % n_c != 0)
    throw ParseError(fmt::format("grid row {}: lattice row is incomplete", grid.rows.size()));
  for (std::size_t ic = 1; ic < n_c; ++ic)
    if (!(g.phi_c[ic] > g.phi_c[ic - 1]))
      throw ParseError(fmt::format("grid row {}: phi_C must increase within a lattice row", ic + 1));

  const bool has_intensity =
      std::find(grid.header.begin(), grid.header.end(), "r_abc_det_cps") != grid.header.end();
  const std::size_t m_col = has_intensity ? grid.column("r_abc_det_cps") : v_col;
  double best = -INFINITY;
  for (std::size_t k = 0; k < grid.rows.size(); ++k) {
    const double v = grid.rows[k][m_col];
    if (std::isfinite(v) && v > best) {
      best = v;
      g.argmax = k;
    }
  }
  return g;
}

std::vector<double> contour_levels(const GridField& field, int count) {
  const auto [lo, hi] = finite_range(field.values);
  if (count < 1 || constant_range(lo, hi)) return {};
  std::vector<double> levels;
  for (int i = 1; i <= count; ++i) levels.push_back(lo + (hi - lo) * i / (count + 1));
  return levels;
}

std::vector<ContourSegment> contour_segments(const GridField& f, double level) {
  std::vector<ContourSegment> out;
  const std::size_t n_a = f.phi_a.size(), n_c = f.phi_c.size();
  if (n_a < 2 || n_c < 2) return out;
  for (std::size_t ia = 0; ia + 1 < n_a; ++ia) {
    for (std::size_t ic = 0; ic + 1 < n_c; ++ic) {
      // corners counter-clockwise from (ic, ia); edge k joins corner k and k+1
      const std::array<double, 4> v = {f.at(ia, ic), f.at(ia, ic + 1), f.at(ia + 1, ic + 1), f.at(ia + 1, ic)};
      const std::array<double, 4> x = {f.phi_c[ic], f.phi_c[ic + 1], f.phi_c[ic + 1], f.phi_c[ic]};
      const std::array<double, 4> y = {f.phi_a[ia], f.phi_a[ia], f.phi_a[ia + 1], f.phi_a[ia + 1]};
      if (std::any_of(v.begin(), v.end(), [](double z) { return !std::isfinite(z); })) continue;

      std::array<bool, 4> above{};
      for (int k = 0; k < 4; ++k) above[k] = v[k] >= level;
      std::array<std::array<double, 2>, 4> cross{};
      std::array<bool, 4> cut{};
      int n_cut = 0;
      for (int k = 0; k < 4; ++k) {
        const int j = (k + 1) % 4;
        if (above[k] == above[j]) continue;
        const double t = (level - v[k]) / (v[j] - v[k]);
        cross[k] = {x[k] + t * (x[j] - x[k]), y[k] + t * (y[j] - y[k])};
        cut[k] = true;
        ++n_cut;
      }
      auto emit = [&](int e0, int e1) {
        out.push_back({cross[e0][0], cross[e0][1], cross[e1][0], cross[e1][1]});
      };
      if (n_cut == 2) {
        int e[2], n = 0;
        for (int k = 0; k < 4; ++k)
          if (cut[k]) e[n++] = k;
        emit(e[0], e[1]);
      } else if (n_cut == 4) {
        // saddle: corners on the other side of the cell mean are cut off alone
        const bool centre = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= level;
        for (int k = 0; k < 4; ++k)
          if (above[k] != centre) emit((k + 3) % 4, k);
      }
    }
  }
  return out;
}

ContourPlot render_contour_svg(const CsvTable& grid, const std::string& field) {
  const GridField g = grid_field(grid, field);
  const auto [lo, hi] = finite_range(g.values);
  const bool flat = constant_range(lo, hi);
  const auto ex = node_edges(g.phi_c);
  const auto ey = node_edges(g.phi_a);
  const double x0 = ex.front(), x1 = ex.back(), y0 = ey.front(), y1 = ey.back();
  auto px = [&](double c) { return kLeft + (c - x0) / (x1 - x0) * (kRight - kLeft); };
  auto py = [&](double a) { return kBottom - (a - y0) / (y1 - y0) * (kBottom - kTop); };
  auto norm = [&](double v) { return flat ? (std::isfinite(v) ? 0.5 : NAN) : (v - lo) / (hi - lo); };

  ContourPlot plot;
  plot.marker = g.argmax;
  std::string s;
  s += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"13\">\n",
      kWidth, kHeight, kWidth, kHeight);
  s += fmt::format("<title>{}</title>\n<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", field, kWidth,
                   kHeight);

  s += "<g class=\"cells\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t ia = 0; ia < g.phi_a.size(); ++ia)
    for (std::size_t ic = 0; ic < g.phi_c.size(); ++ic) {
      const double l = px(ex[ic]), r = px(ex[ic + 1]), t = py(ey[ia + 1]), b = py(ey[ia]);
      s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", l,
                       t, r - l, b - t, colour(norm(g.at(ia, ic))));
    }
  s += "</g>\n";

  s += "<g class=\"contours\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\">\n";
  for (double level : contour_levels(g)) {
    const auto segs = contour_segments(g, level);
    if (segs.empty()) continue;
    plot.levels.push_back(level);
    std::string d;
    for (const auto& sg : segs)
      d += fmt::format("M{:.2f} {:.2f}L{:.2f} {:.2f}", px(sg.phi_c0), py(sg.phi_a0), px(sg.phi_c1),
                       py(sg.phi_a1));
    s += fmt::format("<path class=\"contour\" data-level=\"{}\" d=\"{}\"/>\n", format_number(level), d);
  }
  s += "</g>\n";

  // cross at the intensity maximum
  const double mx = px(g.phi_c[g.argmax % g.phi_c.size()]);
  const double my = py(g.phi_a[g.argmax / g.phi_c.size()]);
  s += fmt::format(
      "<g class=\"marker\" stroke=\"red\" stroke-width=\"2.5\"><line x1=\"{:.2f}\" y1=\"{:.2f}\" "
      "x2=\"{:.2f}\" y2=\"{:.2f}\"/><line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/></g>\n",
      mx - 8, my - 8, mx + 8, my + 8, mx - 8, my + 8, mx + 8, my - 8);

  // frame and axes in units of pi
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   kLeft, kTop, kRight - kLeft, kBottom - kTop);
  s += "<g class=\"axes\">\n";
  for (double t : nice_ticks(x0 / kPi, x1 / kPi, 8)) {
    const double x = px(t * kPi);
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>"
                     "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4}</text>\n",
                     x, kBottom, kBottom + 5, kBottom + 20, pi_label(t));
  }
  for (double t : nice_ticks(y0 / kPi, y1 / kPi, 8)) {
    const double y = py(t * kPi);
    s += fmt::format("<line x1=\"{1}\" y1=\"{0:.2f}\" x2=\"{2}\" y2=\"{0:.2f}\" stroke=\"black\"/>"
                     "<text x=\"{3}\" y=\"{0:.2f}\" text-anchor=\"end\" dominant-baseline=\"middle\">{4}</text>\n",
                     y, kLeft - 5, kLeft, kLeft - 8, pi_label(t));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">&#966;<tspan baseline-shift=\"sub\" font-size=\"10\">C</tspan></text>\n", (kLeft + kRight) / 2,
                   kBottom + 45);
  s += fmt::format("<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">"
                   "&#966;<tspan baseline-shift=\"sub\" font-size=\"10\">A</tspan></text>\n",
                   (kTop + kBottom) / 2);
  s += "</g>\n";

  // colour bar
  s += "<g class=\"colourbar\" shape-rendering=\"crispEdges\">\n";
  constexpr int kSteps = 64;
  const double bar_h = (kBottom - kTop) / kSteps;
  for (int i = 0; i < kSteps; ++i)
    s += fmt::format("<rect x=\"545\" y=\"{:.2f}\" width=\"18\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                     kBottom - (i + 1) * bar_h, bar_h + 0.5, colour(flat ? 0.5 : (i + 0.5) / kSteps));
  if (std::isfinite(lo)) {
    s += fmt::format("<text x=\"568\" y=\"{}\" font-size=\"11\">{:.4g}</text>\n", kBottom, lo);
    s += fmt::format("<text x=\"568\" y=\"{}\" font-size=\"11\">{:.4g}</text>\n", kTop + 10, hi);
  }
  s += fmt::format("<text x=\"{}\" y=\"25\" text-anchor=\"middle\">{}</text>\n", (kLeft + kRight) / 2, field);
  s += "</g>\n</svg>\n";
  plot.svg = std::move(s);
  return plot;
}

ContourPlot render_contour(const std::string& grid_path, const std::string& field,
                           const std::string& out_path) {
  auto plot = render_contour_svg(read_csv_file(grid_path), field);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", out_path));
  out << plot.svg;
  return plot;
}

std::string render_sweep_svg(const std::vector<experiment::SweepRow>& rows) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r.r_abc_det);
    ys.push_back(r.kappa_det);
    if (std::isfinite(r.kappa_exp)) {
      const double e = std::isfinite(r.kappa_stderr) ? r.kappa_stderr : 0.0;
      ys.push_back(r.kappa_exp - e);
      ys.push_back(r.kappa_exp + e);
    }
  }
  auto [xlo, xhi] = finite_range(xs);
  auto [ylo, yhi] = finite_range(ys);
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1;
  if (!std::isfinite(ylo)) ylo = -1, yhi = 1;
  xlo = std::min(xlo, 0.0);
  ylo = std::min(ylo, 0.0);
  yhi = std::max(yhi, 0.0);
  if (constant_range(xlo, xhi)) xhi = xlo + 1;
  if (constant_range(ylo, yhi)) yhi = ylo + 1;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  auto px = [&](double v) { return kLeft + (v - xlo) / (xhi - xlo) * (kRight - kLeft); };
  auto py = [&](double v) { return kBottom - (v - ylo) / (yhi - ylo) * (kBottom - kTop); };

  std::string s = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"13\">\n"
      "<title>kappa vs intensity</title>\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      kWidth, kHeight);
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   kLeft, kTop, kRight - kLeft, kBottom - kTop);
  s += fmt::format("<line x1=\"{0}\" y1=\"{2:.2f}\" x2=\"{1}\" y2=\"{2:.2f}\" stroke=\"#888\" "
                   "stroke-dasharray=\"4 3\"/>\n",
                   kLeft, kRight, py(0.0));
  for (double t : nice_ticks(xlo, xhi, 6))
    s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", px(t), kBottom + 20, t);
  for (double t : nice_ticks(ylo, yhi, 8))
    s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\" dominant-baseline=\"middle\">{:g}</text>\n",
                     kLeft - 8, py(t), t);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">detected R<tspan baseline-shift=\"sub\" font-size=\"10\">ABC</tspan> (counts/s)</text>\n",
                   (kLeft + kRight) / 2, kBottom + 45);
  s += fmt::format("<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">"
                   "&#954;</text>\n",
                   (kTop + kBottom) / 2);

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].r_abc_det < rows[b].r_abc_det; });
  std::string pts;
  for (auto i : order)
    if (std::isfinite(rows[i].r_abc_det) && std::isfinite(rows[i].kappa_det))
      pts += fmt::format("{:.2f},{:.2f} ", px(rows[i].r_abc_det), py(rows[i].kappa_det));
  s += fmt::format("<polyline class=\"kappa-det\" fill=\"none\" stroke=\"#3b528b\" stroke-width=\"2\" "
                   "points=\"{}\"/>\n",
                   pts);
  for (const auto& r : rows) {
    if (!std::isfinite(r.kappa_exp)) continue;
    const double x = px(r.r_abc_det);
    if (std::isfinite(r.kappa_stderr))
      s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#b22\"/>\n",
                       x, py(r.kappa_exp - r.kappa_stderr), py(r.kappa_exp + r.kappa_stderr));
    s += fmt::format("<circle class=\"kappa-exp\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"#b22\"/>\n", x,
                     py(r.kappa_exp));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace tripath::io
