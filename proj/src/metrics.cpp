#include "pdegp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdegp/errors.hpp"

namespace pdegp {

double hellinger(const GridDensity& p, const GridDensity& q) {
  if (p.axes.size() != q.axes.size()) throw InputError("Hellinger needs identical grids");
  for (std::size_t a = 0; a < p.axes.size(); ++a) {
    if (p.axes[a].size() != q.axes[a].size() || p.axes[a] != q.axes[a]) {
      throw InputError("Hellinger needs identical grids");
    }
  }
  if (!p.normalized || !q.normalized) throw InputError("Hellinger needs normalized densities");
  GridDensity diff = p;
  diff.values = (p.values.cwiseMax(0.0).cwiseSqrt() - q.values.cwiseMax(0.0).cwiseSqrt()).cwiseAbs2();
  const double h2 = 0.5 * diff.integral();
  return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

std::vector<Vec> lattice_points(const std::vector<Vec>& axes) {
  GridDensity g;
  g.axes = axes;
  Eigen::Index n = 1;
  for (const auto& a : axes) n *= a.size();
  std::vector<Vec> out;
  out.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(g.point(i));
  return out;
}

double avg_emulator_variance(const ConditionedGP& gp, const std::vector<Vec>& thetas) {
  if (thetas.empty()) throw InputError("variance grid is empty");
  double acc = 0.0;
  for (const auto& t : thetas) acc += gp.predict_cov(t, t).trace() / gp.d_out();
  return acc / static_cast<double>(thetas.size());
}

Vec Histogram::centers() const {
  return 0.5 * (edges.head(edges.size() - 1) + edges.tail(edges.size() - 1));
}

std::string Histogram::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "left,right,density\n";
  for (Eigen::Index i = 0; i < density.size(); ++i) {
    os << edges(i) << "," << edges(i + 1) << "," << density(i) << "\n";
  }
  return os.str();
}

Histogram marginal_hist(const Chain& c, int coord, int bins, double lo, double hi) {
  if (bins < 10) throw InputError("histograms need at least 10 bins");
  if (coord < 0 || coord >= c.samples.cols()) throw InputError("coordinate out of range");
  if (!(hi > lo)) throw InputError("histogram range must satisfy hi > lo");
  if (c.samples.rows() == 0) throw InputError("chain has no samples");
  Histogram h;
  h.edges = Vec::LinSpaced(bins + 1, lo, hi);
  h.density = Vec::Zero(bins);
  const double w = (hi - lo) / bins;
  for (Eigen::Index i = 0; i < c.samples.rows(); ++i) {
    const int b = std::clamp(static_cast<int>(std::floor((c.samples(i, coord) - lo) / w)), 0,
                             bins - 1);
    h.density(b) += 1.0;
  }
  h.density /= static_cast<double>(c.samples.rows()) * w;
  return h;
}

double emulator_rmse(const ConditionedGP& gp, const VecRef& theta_ref,
                     const std::function<Vec(const Vec&)>& oracle) {
  const Vec t = theta_ref;
  const Vec diff = gp.predict_mean(t) - oracle(t);
  return std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
}

std::string metric_rows_to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "experiment,metric,value\n";
  for (const auto& r : rows) os << r.experiment << "," << r.metric << "," << r.value << "\n";
  return os.str();
}

}  // namespace pdegp
