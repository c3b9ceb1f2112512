#include "pdegp/grid.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pdegp/errors.hpp"

namespace pdegp {

Vec uniform_axis(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw InputError("axis needs n >= 2 and hi > lo");
  return Vec::LinSpaced(n, lo, hi);
}

Vec trapezoid_weights(const Vec& axis) {
  const auto n = axis.size();
  Vec w = Vec::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = axis(i + 1) - axis(i);
    w(i) += 0.5 * h;
    w(i + 1) += 0.5 * h;
  }
  return w;
}

namespace {

Vec lattice_weights(const std::vector<Vec>& axes) {
  if (axes.size() == 1) return trapezoid_weights(axes[0]);
  if (axes.size() != 2) throw CapabilityError("grid densities support one or two axes");
  const Vec w0 = trapezoid_weights(axes[0]), w1 = trapezoid_weights(axes[1]);
  Vec w(w0.size() * w1.size());
  for (Eigen::Index i = 0; i < w0.size(); ++i) w.segment(i * w1.size(), w1.size()) = w0(i) * w1;
  return w;
}

}  // namespace

Vec GridDensity::point(Eigen::Index index) const {
  if (dim() == 1) return Vec::Constant(1, axes[0](index));
  const auto n1 = axes[1].size();
  Vec p(2);
  p << axes[0](index / n1), axes[1](index % n1);
  return p;
}

double GridDensity::integral() const { return lattice_weights(axes).dot(values); }

void GridDensity::normalize() {
  const double z = integral();
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("density cannot be normalized");
  values /= z;
  normalized = true;
}

GridDensity GridDensity::from_log(std::vector<Vec> axes,
                                  const std::function<double(const Vec&)>& log_fn) {
  GridDensity g;
  g.axes = std::move(axes);
  Eigen::Index n = 1;
  for (const auto& a : g.axes) n *= a.size();
  Vec lv(n);
  for (Eigen::Index i = 0; i < n; ++i) lv(i) = log_fn(g.point(i));
  const double mx = lv.maxCoeff();
  if (!std::isfinite(mx)) throw NumericalError("log density is not finite on the grid");
  g.values = (lv.array() - mx).exp();
  g.normalize();
  return g;
}

GridDensity GridDensity::marginal(int axis) const {
  if (dim() == 1) return *this;
  GridDensity m;
  m.axes = {axes[axis]};
  const auto n0 = axes[0].size(), n1 = axes[1].size();
  const Vec w0 = trapezoid_weights(axes[0]), w1 = trapezoid_weights(axes[1]);
  m.values = Vec::Zero(axes[axis].size());
  for (Eigen::Index i = 0; i < n0; ++i) {
    for (Eigen::Index j = 0; j < n1; ++j) {
      const double v = values(i * n1 + j);
      if (axis == 0) {
        m.values(i) += w1(j) * v;
      } else {
        m.values(j) += w0(i) * v;
      }
    }
  }
  m.normalized = normalized;
  return m;
}

double GridDensity::mean(int axis) const {
  const GridDensity m = marginal(axis);
  const Vec w = trapezoid_weights(m.axes[0]);
  return (w.array() * m.values.array() * m.axes[0].array()).sum() / w.dot(m.values);
}

double GridDensity::stddev(int axis) const {
  const GridDensity m = marginal(axis);
  const Vec w = trapezoid_weights(m.axes[0]);
  const double z = w.dot(m.values);
  const double mu = (w.array() * m.values.array() * m.axes[0].array()).sum() / z;
  const double var =
      (w.array() * m.values.array() * (m.axes[0].array() - mu).square()).sum() / z;
  return std::sqrt(var);
}

Vec GridDensity::argmax() const {
  Eigen::Index best = 0;
  values.maxCoeff(&best);
  return point(best);
}

std::string GridDensity::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  for (int a = 0; a < dim(); ++a) os << "theta" << (a + 1) << ",";
  os << "density\n";
  for (Eigen::Index i = 0; i < size(); ++i) {
    const Vec p = point(i);
    for (Eigen::Index a = 0; a < p.size(); ++a) os << p(a) << ",";
    os << values(i) << "\n";
  }
  return os.str();
}

}  // namespace pdegp
