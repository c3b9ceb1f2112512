#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdegp/kernels.hpp"
#include "pdegp/types.hpp"

namespace pdegp {

/// Axis-aligned parameter domain T = [lower, upper].
struct ThetaBox {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const VecRef& theta) const;
  Vec project(const VecRef& theta) const;
  /// Affine map from the unit cube onto the box.
  Vec from_unit(const VecRef& unit) const;
  void validate() const;
};

/// Log-diffusion field kappa(x, theta); the PDE coefficient is exp(kappa).
/// kappa only depends on the first spatial coordinate.
class DiffusionField {
 public:
  enum class Kind { Constant, PiecewiseConstant, ParametricExpansion };

  /// A piecewise cell either pins a fixed value or reads theta[index].
  struct Cell {
    std::optional<double> fixed;
    int theta_index = -1;
  };

  /// kappa(x, theta) = theta[0] everywhere.
  static DiffusionField constant();
  /// Cells [b_k, b_{k+1}); the last cell is closed on the right.
  static DiffusionField piecewise(std::vector<double> breakpoints, std::vector<Cell> cells);
  /// kappa(x, theta) = sum_n sqrt(a_n) theta_n b_n(x) with the eigenpairs of the
  /// exponential covariance exp(-4|x - x'|) on [0, 1].
  static DiffusionField expansion(int n_terms);

  Kind kind() const { return kind_; }
  int dim_theta() const { return dim_theta_; }

  double kappa(double x1, const VecRef& theta) const;
  double dkappa_dx(double x1, const VecRef& theta) const;
  double coefficient(double x1, const VecRef& theta) const;  // exp(kappa)

  /// Interior discontinuities of kappa (empty unless piecewise).
  std::vector<double> interfaces() const;
  double distance_to_interface(double x1) const;

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<double>& frequencies() const { return omega_; }
  const std::vector<double>& eigenvalues() const { return a_; }
  double eigenfunction(int n, double x) const;

 private:
  int cell_index(double x1) const;

  Kind kind_ = Kind::Constant;
  int dim_theta_ = 1;
  std::vector<double> breakpoints_;
  std::vector<Cell> cells_;
  std::vector<double> omega_;
  std::vector<double> a_;
  std::vector<double> norm_;
};

/// Source term f(x) = constant + gradient . x (no theta dependence).
struct Source {
  double constant = 0.0;
  Vec gradient;
  double operator()(const VecRef& x) const;
};

enum class Segment { Left, Right, Bottom, Top };
enum class BoundaryKind { Dirichlet, Neumann };

std::string to_string(Segment s);
Segment segment_from_string(const std::string& s);
std::string to_string(BoundaryKind k);
BoundaryKind boundary_kind_from_string(const std::string& s);

/// Dirichlet: u = value. Neumann: du/dx_axis = value where axis is the
/// coordinate normal to the segment.
struct BoundaryCondition {
  Segment segment = Segment::Left;
  BoundaryKind kind = BoundaryKind::Dirichlet;
  double value = 0.0;
};

/// -div(exp(kappa(x, theta)) grad u) = f on (0,1)^d with boundary conditions.
struct PdeProblem {
  int spatial_dim = 1;
  DiffusionField diffusion = DiffusionField::constant();
  Source source;
  std::vector<BoundaryCondition> boundary;
  ThetaBox theta_box;

  int dim_theta() const { return theta_box.dim(); }
  void validate() const;
  const BoundaryCondition& condition(Segment s) const;
  /// Segment owning a boundary point; Dirichlet wins at corners.
  const BoundaryCondition& condition_at(const VecRef& x) const;
  bool on_boundary(const VecRef& x) const;
};

namespace problems {
/// -(e^theta u')' = 1, u(0) = u(1) = 0, theta in [-1, 1].
PdeProblem constant_diffusion_1d();
/// -(e^kappa u')' = 4x, u(0) = 0, u(1) = 2, kappa = (0, t1, t2, 1) on quarters.
PdeProblem piecewise_diffusion_1d();
/// Same equation with kappa given by a truncated expansion.
PdeProblem expansion_diffusion_1d(int n_terms = 2);
/// Twelve equal cells, kappa pinned to 0 and 1 on the end cells, ten unknowns.
PdeProblem piecewise10_diffusion_1d();
/// Unit-square flow cell: u = 1 at x1 = 0, u = 0 at x1 = 1, no flux top/bottom.
PdeProblem flow_cell_2d();
}  // namespace problems

/// Observation functional u -> y_j. Each functional is a weighted sum of point
/// evaluations (one point for pointwise data, a Gauss rule for averages).
class ObservationOperator {
 public:
  enum class Kind { Pointwise, LocalAverage };

  struct QuadraturePoint {
    Vec x;
    double weight;
  };

  static ObservationOperator pointwise(Mat points);
  static ObservationOperator local_average(std::vector<std::pair<double, double>> intervals);

  Kind kind() const { return kind_; }
  int d_y() const;
  int spatial_dim() const;
  const Mat& points() const { return points_; }
  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  const std::vector<QuadraturePoint>& functional(int j) const { return functionals_[j]; }

 private:
  Kind kind_ = Kind::Pointwise;
  Mat points_;
  std::vector<std::pair<double, double>> intervals_;
  std::vector<std::vector<QuadraturePoint>> functionals_;
};

/// d_y points j / (d_y + 1), j = 1..d_y.
Mat equally_spaced_points_1d(int d_y);
/// [0, 1] cut into d_y equal intervals.
std::vector<std::pair<double, double>> equal_intervals(int d_y);

/// Discrete solution. 1D: P1 nodal values on `nodes`; 2D: nodal values on a
/// uniform (n+1) x (n+1) grid, x1-fastest.
struct DiscreteSolution {
  int spatial_dim = 1;
  Vec nodes;
  int n = 0;
  Vec values;

  double value_at(const VecRef& x) const;
  /// Exact integral of the piecewise-linear interpolant over [a, b] (1D).
  double integral(double a, double b) const;
  /// Net x1-direction flux -exp(kappa) du/dx1 through the line x1 = 0 or 1 (2D).
  double flux_x1(const PdeProblem& p, const VecRef& theta, bool right_side) const;
  std::string to_csv() const;
};

DiscreteSolution solve_reference(const PdeProblem& p, const VecRef& theta, int mesh_n);
Vec forward_map(const PdeProblem& p, const ObservationOperator& obs, const VecRef& theta,
                int mesh_n);
/// Same as forward_map without the theta_box check; for likelihood
/// evaluation outside the box under the smoothed prior.
Vec forward_map_unchecked(const PdeProblem& p, const ObservationOperator& obs,
                          const VecRef& theta, int mesh_n);

struct SyntheticData {
  Vec y;
  Vec theta_dagger;
  double noise_var = 0.0;
  std::uint64_t seed = 0;
  int mesh_n = 0;
  Vec clean;  // G_X(theta_dagger)
};

SyntheticData make_data(const PdeProblem& p, const ObservationOperator& obs,
                        const VecRef& theta_dagger, double noise_var, std::uint64_t seed,
                        int mesh_n);

/// One term coef * d^order of a linear differential operator.
struct OperatorTerm {
  double coef;
  MultiIndex order;
};
using LinearOperator = std::vector<OperatorTerm>;

LinearOperator identity_operator(int spatial_dim);
/// B at a boundary point: identity for Dirichlet, d/dx_normal for Neumann.
LinearOperator boundary_operator(const PdeProblem& p, const VecRef& x_b);
/// L^theta at an interior point. Throws InputError on a kappa interface.
LinearOperator pde_operator(const PdeProblem& p, const VecRef& x, const VecRef& theta);

/// sum_ij c_i c_j d^{alpha_i}_x d^{beta_j}_x' k(x, x').
double apply_pair(const Kernel& k_s, const LinearOperator& left, const VecRef& x,
                  const LinearOperator& right, const VecRef& x_prime);

enum class OperatorPair { LRight, LLeft, LL, BRight, BLeft, BB, BL, LB };

/// Operator-applied spatial kernel. `theta` parameterizes an operator acting on
/// the first argument, `theta_prime` one acting on the second.
double apply_operator_to_kernel(const PdeProblem& p, const Kernel& k_s, OperatorPair which,
                                const VecRef& x, const VecRef& x_prime, const VecRef& theta,
                                const VecRef& theta_prime);

}  // namespace pdegp
