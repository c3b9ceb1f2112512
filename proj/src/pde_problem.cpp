#include <algorithm>
#include <cmath>
#include <limits>

#include "pdegp/errors.hpp"
#include "pdegp/pde.hpp"
#include "pdegp/quadrature.hpp"

namespace pdegp {

// ---------------------------------------------------------------------------
// ThetaBox

bool ThetaBox::contains(const VecRef& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta(i) >= lower(i) && theta(i) <= upper(i))) return false;
  }
  return true;
}

Vec ThetaBox::project(const VecRef& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

Vec ThetaBox::from_unit(const VecRef& unit) const {
  return lower + (upper - lower).cwiseProduct(unit);
}

void ThetaBox::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw InputError("theta box bounds must be nonempty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i))) {
      throw InputError("theta box must be bounded with lower < upper in every coordinate");
    }
  }
}

// ---------------------------------------------------------------------------
// DiffusionField

DiffusionField DiffusionField::constant() {
  DiffusionField d;
  d.kind_ = Kind::Constant;
  d.dim_theta_ = 1;
  return d;
}

DiffusionField DiffusionField::piecewise(std::vector<double> breakpoints, std::vector<Cell> cells) {
  if (breakpoints.size() < 2 || cells.size() + 1 != breakpoints.size()) {
    throw InputError("piecewise diffusion needs one more breakpoint than cells");
  }
  if (std::abs(breakpoints.front()) > 1e-14 || std::abs(breakpoints.back() - 1.0) > 1e-14) {
    throw InputError("piecewise diffusion cells must partition [0, 1]");
  }
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()) ||
      std::adjacent_find(breakpoints.begin(), breakpoints.end()) != breakpoints.end()) {
    throw InputError("piecewise breakpoints must be strictly increasing");
  }
  int max_index = -1;
  for (const auto& c : cells) {
    if (!c.fixed && c.theta_index < 0) {
      throw InputError("piecewise cell must either be fixed or reference a theta entry");
    }
    if (!c.fixed) max_index = std::max(max_index, c.theta_index);
  }
  if (max_index < 0) throw InputError("piecewise diffusion has no unknown cells");
  DiffusionField d;
  d.kind_ = Kind::PiecewiseConstant;
  d.breakpoints_ = std::move(breakpoints);
  d.cells_ = std::move(cells);
  d.dim_theta_ = max_index + 1;
  return d;
}

DiffusionField DiffusionField::expansion(int n_terms) {
  if (n_terms < 1) throw InputError("expansion needs at least one term");
  DiffusionField d;
  d.kind_ = Kind::ParametricExpansion;
  d.dim_theta_ = n_terms;
  // Positive roots of (w^2 - 16) sin w - 8 w cos w = 0, i.e. tan w = 8w/(w^2-16).
  auto h = [](double w) { return (w * w - 16.0) * std::sin(w) - 8.0 * w * std::cos(w); };
  double lo = 1e-3;
  double h_lo = h(lo);
  const double step = 1e-3;
  while (static_cast<int>(d.omega_.size()) < n_terms) {
    const double hi = lo + step;
    const double h_hi = h(hi);
    if (h_lo == 0.0 || (h_lo < 0.0) != (h_hi < 0.0)) {
      double a = lo;
      double b = hi;
      double fa = h_lo;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = h(m);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      d.omega_.push_back(0.5 * (a + b));
    }
    lo = hi;
    h_lo = h_hi;
  }
  const auto rule = gauss_legendre(40, 0.0, 1.0);
  for (int n = 0; n < n_terms; ++n) {
    const double w = d.omega_[n];
    d.a_.push_back(8.0 / (w * w + 16.0));
    double sq = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double x = rule.nodes[q];
      const double v = std::sin(w * x) + 0.25 * w * std::cos(w * x);
      sq += rule.weights[q] * v * v;
    }
    d.norm_.push_back(1.0 / std::sqrt(sq));
  }
  return d;
}

int DiffusionField::cell_index(double x1) const {
  const auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, x1);
  return static_cast<int>(it - (breakpoints_.begin() + 1));
}

double DiffusionField::eigenfunction(int n, double x) const {
  const double w = omega_.at(n);
  return norm_[n] * (std::sin(w * x) + 0.25 * w * std::cos(w * x));
}

double DiffusionField::kappa(double x1, const VecRef& theta) const {
  if (theta.size() < dim_theta_) throw InputError("theta has too few entries for diffusion field");
  switch (kind_) {
    case Kind::Constant:
      return theta(0);
    case Kind::PiecewiseConstant: {
      const Cell& c = cells_[cell_index(x1)];
      return c.fixed ? *c.fixed : theta(c.theta_index);
    }
    case Kind::ParametricExpansion: {
      double s = 0.0;
      for (int n = 0; n < dim_theta_; ++n) s += std::sqrt(a_[n]) * theta(n) * eigenfunction(n, x1);
      return s;
    }
  }
  return 0.0;
}

double DiffusionField::dkappa_dx(double x1, const VecRef& theta) const {
  if (kind_ != Kind::ParametricExpansion) return 0.0;
  double s = 0.0;
  for (int n = 0; n < dim_theta_; ++n) {
    const double w = omega_[n];
    const double db = norm_[n] * (w * std::cos(w * x1) - 0.25 * w * w * std::sin(w * x1));
    s += std::sqrt(a_[n]) * theta(n) * db;
  }
  return s;
}

double DiffusionField::coefficient(double x1, const VecRef& theta) const {
  return std::exp(kappa(x1, theta));
}

std::vector<double> DiffusionField::interfaces() const {
  if (kind_ != Kind::PiecewiseConstant) return {};
  return {breakpoints_.begin() + 1, breakpoints_.end() - 1};
}

double DiffusionField::distance_to_interface(double x1) const {
  double best = std::numeric_limits<double>::infinity();
  for (double b : interfaces()) best = std::min(best, std::abs(x1 - b));
  return best;
}

// ---------------------------------------------------------------------------
// Source and boundary

double Source::operator()(const VecRef& x) const {
  double v = constant;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(gradient.size(), x.size()); ++i) {
    v += gradient(i) * x(i);
  }
  return v;
}

std::string to_string(Segment s) {
  switch (s) {
    case Segment::Left:
      return "left";
    case Segment::Right:
      return "right";
    case Segment::Bottom:
      return "bottom";
    case Segment::Top:
      return "top";
  }
  return "?";
}

Segment segment_from_string(const std::string& s) {
  if (s == "left") return Segment::Left;
  if (s == "right") return Segment::Right;
  if (s == "bottom") return Segment::Bottom;
  if (s == "top") return Segment::Top;
  throw InputError("unknown boundary segment '" + s + "'");
}

std::string to_string(BoundaryKind k) {
  return k == BoundaryKind::Dirichlet ? "dirichlet" : "neumann";
}

BoundaryKind boundary_kind_from_string(const std::string& s) {
  if (s == "dirichlet") return BoundaryKind::Dirichlet;
  if (s == "neumann") return BoundaryKind::Neumann;
  throw InputError("unknown boundary kind '" + s + "'");
}

void PdeProblem::validate() const {
  if (spatial_dim != 1 && spatial_dim != 2) throw InputError("spatial_dim must be 1 or 2");
  theta_box.validate();
  if (theta_box.dim() != diffusion.dim_theta()) {
    throw InputError("theta box dimension " + std::to_string(theta_box.dim()) +
                     " does not match diffusion parameter count " +
                     std::to_string(diffusion.dim_theta()));
  }
  std::vector<Segment> required = {Segment::Left, Segment::Right};
  if (spatial_dim == 2) {
    required.push_back(Segment::Bottom);
    required.push_back(Segment::Top);
  }
  for (Segment s : required) {
    const auto n = std::count_if(boundary.begin(), boundary.end(),
                                 [s](const BoundaryCondition& c) { return c.segment == s; });
    if (n != 1) {
      throw InputError("boundary segment '" + to_string(s) +
                       "' must carry exactly one condition");
    }
  }
  if (boundary.size() != required.size()) throw InputError("boundary lists unknown segments");
  const bool any_dirichlet = std::any_of(boundary.begin(), boundary.end(), [](const auto& c) {
    return c.kind == BoundaryKind::Dirichlet;
  });
  if (!any_dirichlet) throw InputError("pure Neumann problems are singular");
}

const BoundaryCondition& PdeProblem::condition(Segment s) const {
  for (const auto& c : boundary) {
    if (c.segment == s) return c;
  }
  throw InputError("no boundary condition on segment '" + to_string(s) + "'");
}

bool PdeProblem::on_boundary(const VecRef& x) const {
  constexpr double tol = 1e-12;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) < tol || std::abs(x(i) - 1.0) < tol) return true;
  }
  return false;
}

const BoundaryCondition& PdeProblem::condition_at(const VecRef& x) const {
  constexpr double tol = 1e-12;
  if (x.size() != spatial_dim) throw InputError("boundary point has wrong dimension");
  std::vector<Segment> touching;
  if (std::abs(x(0)) < tol) touching.push_back(Segment::Left);
  if (std::abs(x(0) - 1.0) < tol) touching.push_back(Segment::Right);
  if (spatial_dim == 2) {
    if (std::abs(x(1)) < tol) touching.push_back(Segment::Bottom);
    if (std::abs(x(1) - 1.0) < tol) touching.push_back(Segment::Top);
  }
  if (touching.empty()) throw InputError("point is not on the domain boundary");
  for (Segment s : touching) {
    const auto& c = condition(s);
    if (c.kind == BoundaryKind::Dirichlet) return c;
  }
  return condition(touching.front());
}

namespace problems {

namespace {
ThetaBox unit_box(int d) { return ThetaBox{Vec::Constant(d, -1.0), Vec::Constant(d, 1.0)}; }
}  // namespace

PdeProblem constant_diffusion_1d() {
  PdeProblem p;
  p.spatial_dim = 1;
  p.diffusion = DiffusionField::constant();
  p.source = Source{1.0, Vec::Zero(1)};
  p.boundary = {{Segment::Left, BoundaryKind::Dirichlet, 0.0},
                {Segment::Right, BoundaryKind::Dirichlet, 0.0}};
  p.theta_box = unit_box(1);
  return p;
}

PdeProblem piecewise_diffusion_1d() {
  PdeProblem p;
  p.spatial_dim = 1;
  using Cell = DiffusionField::Cell;
  p.diffusion = DiffusionField::piecewise({0.0, 0.25, 0.5, 0.75, 1.0},
                                          {Cell{0.0, -1}, Cell{std::nullopt, 0},
                                           Cell{std::nullopt, 1}, Cell{1.0, -1}});
  p.source = Source{0.0, Vec::Constant(1, 4.0)};
  p.boundary = {{Segment::Left, BoundaryKind::Dirichlet, 0.0},
                {Segment::Right, BoundaryKind::Dirichlet, 2.0}};
  p.theta_box = unit_box(2);
  return p;
}

PdeProblem expansion_diffusion_1d(int n_terms) {
  PdeProblem p = piecewise_diffusion_1d();
  p.diffusion = DiffusionField::expansion(n_terms);
  p.theta_box = unit_box(n_terms);
  return p;
}

PdeProblem piecewise10_diffusion_1d() {
  PdeProblem p = piecewise_diffusion_1d();
  using Cell = DiffusionField::Cell;
  std::vector<double> bp;
  for (int k = 0; k <= 12; ++k) bp.push_back(k / 12.0);
  bp.back() = 1.0;
  std::vector<Cell> cells;
  cells.push_back(Cell{0.0, -1});
  for (int k = 0; k < 10; ++k) cells.push_back(Cell{std::nullopt, k});
  cells.push_back(Cell{1.0, -1});
  p.diffusion = DiffusionField::piecewise(bp, cells);
  p.theta_box = unit_box(10);
  return p;
}

PdeProblem flow_cell_2d() {
  PdeProblem p;
  p.spatial_dim = 2;
  using Cell = DiffusionField::Cell;
  p.diffusion = DiffusionField::piecewise({0.0, 0.25, 0.5, 0.75, 1.0},
                                          {Cell{0.0, -1}, Cell{std::nullopt, 0},
                                           Cell{std::nullopt, 1}, Cell{1.0, -1}});
  p.source = Source{0.0, Vec::Zero(2)};
  p.boundary = {{Segment::Left, BoundaryKind::Dirichlet, 1.0},
                {Segment::Right, BoundaryKind::Dirichlet, 0.0},
                {Segment::Bottom, BoundaryKind::Neumann, 0.0},
                {Segment::Top, BoundaryKind::Neumann, 0.0}};
  p.theta_box = unit_box(2);
  return p;
}

}  // namespace problems

// ---------------------------------------------------------------------------
// Observation operators

ObservationOperator ObservationOperator::pointwise(Mat points) {
  if (points.cols() == 0 || points.rows() < 1 || points.rows() > 2) {
    throw InputError("pointwise observations need at least one 1D or 2D point");
  }
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (!(points(i, j) >= 0.0 && points(i, j) <= 1.0)) {
        throw InputError("observation point outside the closed unit domain");
      }
    }
  }
  ObservationOperator o;
  o.kind_ = Kind::Pointwise;
  o.points_ = std::move(points);
  for (Eigen::Index j = 0; j < o.points_.cols(); ++j) {
    o.functionals_.push_back({QuadraturePoint{o.points_.col(j), 1.0}});
  }
  return o;
}

ObservationOperator ObservationOperator::local_average(
    std::vector<std::pair<double, double>> intervals) {
  if (intervals.empty()) throw InputError("local-average observations need an interval");
  auto sorted = intervals;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    const auto [a, b] = sorted[j];
    if (!(a >= 0.0 && b <= 1.0 && a < b)) throw InputError("interval must satisfy 0 <= a < b <= 1");
    if (j > 0 && a < sorted[j - 1].second) throw InputError("observation intervals overlap");
  }
  ObservationOperator o;
  o.kind_ = Kind::LocalAverage;
  o.intervals_ = std::move(intervals);
  o.points_.resize(1, static_cast<Eigen::Index>(o.intervals_.size()));
  for (std::size_t j = 0; j < o.intervals_.size(); ++j) {
    const auto [a, b] = o.intervals_[j];
    o.points_(0, static_cast<Eigen::Index>(j)) = 0.5 * (a + b);
    const auto rule = composite_gauss_legendre(6, 2, a, b);
    std::vector<QuadraturePoint> f;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      f.push_back(QuadraturePoint{Vec::Constant(1, rule.nodes[q]), rule.weights[q]});
    }
    o.functionals_.push_back(std::move(f));
  }
  return o;
}

int ObservationOperator::d_y() const { return static_cast<int>(functionals_.size()); }

int ObservationOperator::spatial_dim() const {
  return kind_ == Kind::LocalAverage ? 1 : static_cast<int>(points_.rows());
}

Mat equally_spaced_points_1d(int d_y) {
  if (d_y < 1) throw InputError("need at least one observation point");
  Mat pts(1, d_y);
  for (int j = 0; j < d_y; ++j) pts(0, j) = (j + 1.0) / (d_y + 1.0);
  return pts;
}

std::vector<std::pair<double, double>> equal_intervals(int d_y) {
  if (d_y < 1) throw InputError("need at least one observation interval");
  std::vector<std::pair<double, double>> out;
  for (int j = 0; j < d_y; ++j) out.emplace_back(double(j) / d_y, double(j + 1) / d_y);
  return out;
}

}  // namespace pdegp
