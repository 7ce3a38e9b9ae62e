#pragma once
#include <string>
#include <vector>

#include <tripath/experiment/runner.hpp>
#include <tripath/io/csv.hpp>

namespace tripath::io {

/// One column of a grid CSV arranged on its (phi_A, phi_C) lattice.
struct GridField {
  std::vector<double> phi_a;   ///< radians, one per row of the lattice
  std::vector<double> phi_c;   ///< radians, one per column
  std::vector<double> values;  ///< index = ia * phi_c.size() + ic; NaN = missing
  std::size_t argmax = 0;      ///< largest r_abc_det_cps if present, else largest value

  double at(std::size_t ia, std::size_t ic) const { return values[ia * phi_c.size() + ic]; }
};

/// Rows must enumerate the lattice with phi_C varying fastest, as
/// write_grid_csv emits them. Throws ParseError naming the first row that
/// breaks the pattern.
GridField grid_field(const CsvTable& grid, const std::string& field);

/// `count` levels evenly spaced strictly inside the finite value range;
/// none when the field is constant.
std::vector<double> contour_levels(const GridField& field, int count = 10);

struct ContourSegment {
  double phi_c0, phi_a0, phi_c1, phi_a1;
};

/// Marching squares at one level. Saddle cells are resolved by the cell mean;
/// cells with a missing corner are skipped.
std::vector<ContourSegment> contour_segments(const GridField& field, double level);

struct ContourPlot {
  std::vector<double> levels;  ///< levels that produced at least one segment
  std::size_t marker = 0;      ///< grid index of the cross
  std::string svg;
};

/// Colour map of `field` over (phi_C, phi_A) with contour lines, a cross at
/// the intensity maximum and axes in units of pi.
ContourPlot render_contour_svg(const CsvTable& grid, const std::string& field);

/// Reads the grid CSV at `grid_path` and writes the SVG to `out_path`.
ContourPlot render_contour(const std::string& grid_path, const std::string& field,
                           const std::string& out_path);

/// kappa against detected three-path rate: predicted kappa_det as a line,
/// measured kappa with one-sigma bars where present.
std::string render_sweep_svg(const std::vector<experiment::SweepRow>& rows);

}  // namespace tripath::io
