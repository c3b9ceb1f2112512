#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pdegp/types.hpp"

namespace pdegp {

/// n equally spaced nodes on [lo, hi], endpoints included.
Vec uniform_axis(double lo, double hi, int n);

/// Density tabulated on a rectangular lattice of one or two axes. Values are
/// stored with the first axis slowest: index = i0 * n1 + i1.
struct GridDensity {
  std::vector<Vec> axes;
  Vec values;
  bool normalized = false;

  int dim() const { return static_cast<int>(axes.size()); }
  Eigen::Index size() const { return values.size(); }
  Vec point(Eigen::Index index) const;

  /// Trapezoid rule over the lattice.
  double integral() const;
  void normalize();

  /// Tabulates exp(log_fn) shifted by its maximum, then normalizes.
  static GridDensity from_log(std::vector<Vec> axes, const std::function<double(const Vec&)>& log_fn);

  /// Marginal on one axis (trapezoid over the other); identity in 1D.
  GridDensity marginal(int axis) const;
  double mean(int axis) const;
  double stddev(int axis) const;
  Vec argmax() const;

  /// Header "theta1[,theta2],density" then one row per node.
  std::string to_csv() const;
};

/// Trapezoid weights for a (possibly non-uniform) axis.
Vec trapezoid_weights(const Vec& axis);

}  // namespace pdegp
