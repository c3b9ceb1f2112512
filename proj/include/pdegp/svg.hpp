#pragma once

#include <string>
#include <vector>

#include "pdegp/types.hpp"

namespace pdegp {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with a legend. Non-positive values are dropped on a log axis.
std::string svg_lines(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series,
                      bool log_y = false);

/// Shaded density on a lattice (z(i, j) at x(i), y(j)) with iso-lines at
/// fractions of the maximum.
std::string svg_heatmap(const std::string& title, const Vec& x, const Vec& y, const Mat& z,
                        int levels = 6);

}  // namespace pdegp
