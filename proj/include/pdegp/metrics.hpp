#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pdegp/emulator.hpp"
#include "pdegp/grid.hpp"
#include "pdegp/mcmc.hpp"

namespace pdegp {

/// sqrt(1/2 * integral (sqrt p - sqrt q)^2) by the trapezoid rule on a shared grid.
double hellinger(const GridDensity& p, const GridDensity& q);

/// Mean over the points of trace(K_N(theta, theta)) / d_out.
double avg_emulator_variance(const ConditionedGP& gp, const std::vector<Vec>& thetas);
/// Every lattice node of the axes (one or two).
std::vector<Vec> lattice_points(const std::vector<Vec>& axes);

struct Histogram {
  Vec edges;    // bins + 1
  Vec density;  // bins, integrates to 1
  Vec centers() const;
  std::string to_csv() const;
};

/// Normalized histogram of one coordinate on [lo, hi]. Samples outside the
/// range are counted in the nearest edge bin.
Histogram marginal_hist(const Chain& c, int coord, int bins, double lo, double hi);

/// Root-mean-square of predict_mean(theta_ref) - oracle(theta_ref).
double emulator_rmse(const ConditionedGP& gp, const VecRef& theta_ref,
                     const std::function<Vec(const Vec&)>& oracle);

struct MetricRow {
  std::string experiment;
  std::string metric;
  double value;
};

std::string metric_rows_to_csv(const std::vector<MetricRow>& rows);

}  // namespace pdegp
