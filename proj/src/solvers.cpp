#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pdegp/errors.hpp"
#include "pdegp/pde.hpp"
#include "pdegp/quadrature.hpp"

namespace pdegp {

namespace {

// Thomas algorithm for a symmetric tridiagonal system.
Vec solve_tridiagonal(const Vec& diag, const Vec& off, Vec rhs) {
  const Eigen::Index n = diag.size();
  Vec d = diag;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (d(i - 1) == 0.0) throw NumericalError("singular tridiagonal system");
    const double m = off(i - 1) / d(i - 1);
    d(i) -= m * off(i - 1);
    rhs(i) -= m * rhs(i - 1);
  }
  Vec x(n);
  if (d(n - 1) == 0.0) throw NumericalError("singular tridiagonal system");
  x(n - 1) = rhs(n - 1) / d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = (rhs(i) - off(i) * x(i + 1)) / d(i);
  return x;
}

double element_coefficient(const DiffusionField& field, double x0, double x1, const VecRef& theta) {
  if (field.kind() != DiffusionField::Kind::ParametricExpansion) {
    return field.coefficient(0.5 * (x0 + x1), theta);
  }
  static const QuadratureRule rule = gauss_legendre(3, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    s += rule.weights[q] * field.coefficient(x0 + (x1 - x0) * rule.nodes[q], theta);
  }
  return s;
}

DiscreteSolution solve_1d(const PdeProblem& p, const VecRef& theta, int mesh_n) {
  std::vector<double> nodes;
  nodes.reserve(mesh_n + 16);
  for (int i = 0; i <= mesh_n; ++i) nodes.push_back(double(i) / mesh_n);
  for (double b : p.diffusion.interfaces()) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  std::vector<double> merged;
  for (double x : nodes) {
    if (merged.empty() || x - merged.back() > 1e-12) merged.push_back(x);
  }
  merged.back() = 1.0;
  const Eigen::Index n_nodes = static_cast<Eigen::Index>(merged.size());

  Vec diag = Vec::Zero(n_nodes);
  Vec off = Vec::Zero(n_nodes - 1);
  Vec rhs = Vec::Zero(n_nodes);
  for (Eigen::Index e = 0; e + 1 < n_nodes; ++e) {
    const double x0 = merged[e];
    const double x1 = merged[e + 1];
    const double h = x1 - x0;
    const double a = element_coefficient(p.diffusion, x0, x1, theta);
    if (!(a > 0.0) || !std::isfinite(a)) throw NumericalError("degenerate diffusion coefficient");
    diag(e) += a / h;
    diag(e + 1) += a / h;
    off(e) -= a / h;
    const double f0 = p.source(Vec::Constant(1, x0));
    const double f1 = p.source(Vec::Constant(1, x1));
    rhs(e) += h * (2.0 * f0 + f1) / 6.0;
    rhs(e + 1) += h * (f0 + 2.0 * f1) / 6.0;
  }

  const auto& left = p.condition(Segment::Left);
  const auto& right = p.condition(Segment::Right);
  // Natural boundary terms: the weak form picks up a(1) u'(1) v(1) - a(0) u'(0) v(0).
  if (left.kind == BoundaryKind::Neumann) {
    rhs(0) -= p.diffusion.coefficient(0.0, theta) * left.value;
  }
  if (right.kind == BoundaryKind::Neumann) {
    rhs(n_nodes - 1) += p.diffusion.coefficient(1.0, theta) * right.value;
  }

  Eigen::Index first = 0;
  Eigen::Index last = n_nodes - 1;
  Vec u = Vec::Zero(n_nodes);
  if (left.kind == BoundaryKind::Dirichlet) {
    u(0) = left.value;
    rhs(1) -= off(0) * left.value;
    first = 1;
  }
  if (right.kind == BoundaryKind::Dirichlet) {
    u(n_nodes - 1) = right.value;
    rhs(n_nodes - 2) -= off(n_nodes - 2) * right.value;
    last = n_nodes - 2;
  }
  const Eigen::Index m = last - first + 1;
  if (m > 0) {
    const Vec sol = solve_tridiagonal(diag.segment(first, m),
                                      m > 1 ? Vec(off.segment(first, m - 1)) : Vec(Vec::Zero(1)),
                                      rhs.segment(first, m));
    u.segment(first, m) = sol;
  }

  DiscreteSolution out;
  out.spatial_dim = 1;
  out.nodes = Eigen::Map<const Vec>(merged.data(), n_nodes);
  out.values = std::move(u);
  return out;
}

// Face coefficient: harmonic mean of the two half-segment values, which is
// exact for a coefficient that jumps at a node or at the face midpoint.
double face_coefficient(const PdeProblem& p, const VecRef& theta, double x_a, double x_b) {
  const double q1 = p.diffusion.coefficient(x_a + 0.25 * (x_b - x_a), theta);
  const double q2 = p.diffusion.coefficient(x_a + 0.75 * (x_b - x_a), theta);
  return 2.0 * q1 * q2 / (q1 + q2);
}

DiscreteSolution solve_2d(const PdeProblem& p, const VecRef& theta, int n) {
  const double h = 1.0 / n;
  const int nn = n + 1;
  auto id = [nn](int i, int j) { return j * nn + i; };
  auto coord = [h](int i) { return i * h; };

  // Dirichlet status per node.
  std::vector<char> fixed(nn * nn, 0);
  Vec u = Vec::Zero(nn * nn);
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) {
      if (i != 0 && i != n && j != 0 && j != n) continue;
      const Vec x = (Vec(2) << coord(i), coord(j)).finished();
      const auto& bc = p.condition_at(x);
      if (bc.kind == BoundaryKind::Dirichlet) {
        fixed[id(i, j)] = 1;
        u(id(i, j)) = bc.value;
      }
    }
  }
  std::vector<int> unknown(nn * nn, -1);
  int n_unknown = 0;
  for (int k = 0; k < nn * nn; ++k) {
    if (!fixed[k]) unknown[k] = n_unknown++;
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n_unknown);
  Vec rhs = Vec::Zero(n_unknown);

  auto add_face = [&](int ka, int kb, double conductance) {
    const int ua = unknown[ka];
    const int ub = unknown[kb];
    if (ua >= 0) {
      trip.emplace_back(ua, ua, conductance);
      if (ub >= 0) {
        trip.emplace_back(ua, ub, -conductance);
      } else {
        rhs(ua) += conductance * u(kb);
      }
    }
    if (ub >= 0) {
      trip.emplace_back(ub, ub, conductance);
      if (ua >= 0) {
        trip.emplace_back(ub, ua, -conductance);
      } else {
        rhs(ub) += conductance * u(ka);
      }
    }
  };

  auto half_len = [n, h](int idx) { return (idx == 0 || idx == n) ? 0.5 * h : h; };

  // x1-direction faces
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = face_coefficient(p, theta, coord(i), coord(i + 1));
      add_face(id(i, j), id(i + 1, j), a * half_len(j) / h);
    }
  }
  // x2-direction faces; kappa depends on x1 only
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < nn; ++i) {
      const double a = p.diffusion.coefficient(coord(i), theta);
      add_face(id(i, j), id(i, j + 1), a * half_len(i) / h);
    }
  }
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) {
      const int k = unknown[id(i, j)];
      if (k < 0) continue;
      const Vec x = (Vec(2) << coord(i), coord(j)).finished();
      rhs(k) += p.source(x) * half_len(i) * half_len(j);
      // Neumann data: outward flux a * du/dn with du/dn = -g on min sides.
      const double a = p.diffusion.coefficient(coord(i), theta);
      auto neumann = [&](Segment s, double sign, double len) {
        const auto& bc = p.condition(s);
        if (bc.kind == BoundaryKind::Neumann) rhs(k) += a * sign * bc.value * len;
      };
      if (j == 0) neumann(Segment::Bottom, -1.0, half_len(i));
      if (j == n) neumann(Segment::Top, 1.0, half_len(i));
      if (i == 0) neumann(Segment::Left, -1.0, half_len(j));
      if (i == n) neumann(Segment::Right, 1.0, half_len(j));
    }
  }

  Eigen::SparseMatrix<double> A(n_unknown, n_unknown);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("2D diffusion system is singular");
  const Vec sol = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !sol.allFinite()) {
    throw NumericalError("2D diffusion solve failed");
  }
  for (int k = 0; k < nn * nn; ++k) {
    if (unknown[k] >= 0) u(k) = sol(unknown[k]);
  }

  DiscreteSolution out;
  out.spatial_dim = 2;
  out.n = n;
  out.values = std::move(u);
  return out;
}

void check_theta(const PdeProblem& p, const VecRef& theta) {
  if (theta.size() != p.dim_theta()) {
    throw InputError("theta has dimension " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(p.dim_theta()));
  }
  if (!theta.allFinite()) throw InputError("theta is not finite");
}

DiscreteSolution solve_any(const PdeProblem& p, const VecRef& theta, int mesh_n) {
  if (mesh_n < 8) throw InputError("mesh_n must be at least 8");
  return p.spatial_dim == 1 ? solve_1d(p, theta, mesh_n) : solve_2d(p, theta, mesh_n);
}

}  // namespace

double DiscreteSolution::value_at(const VecRef& x) const {
  if (x.size() != spatial_dim) throw InputError("evaluation point has wrong dimension");
  if (spatial_dim == 1) {
    const double t = std::clamp(x(0), 0.0, 1.0);
    const auto* begin = nodes.data();
    const auto* end = nodes.data() + nodes.size();
    auto it = std::upper_bound(begin, end, t);
    Eigen::Index k = std::clamp<Eigen::Index>((it - begin) - 1, 0, nodes.size() - 2);
    const double w = (t - nodes(k)) / (nodes(k + 1) - nodes(k));
    return (1.0 - w) * values(k) + w * values(k + 1);
  }
  const double h = 1.0 / n;
  const double s = std::clamp(x(0), 0.0, 1.0) / h;
  const double t = std::clamp(x(1), 0.0, 1.0) / h;
  const int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
  const int j = std::clamp(static_cast<int>(std::floor(t)), 0, n - 1);
  const double ws = s - i;
  const double wt = t - j;
  auto v = [this](int a, int b) { return values(b * (n + 1) + a); };
  return (1 - ws) * (1 - wt) * v(i, j) + ws * (1 - wt) * v(i + 1, j) + (1 - ws) * wt * v(i, j + 1) +
         ws * wt * v(i + 1, j + 1);
}

double DiscreteSolution::integral(double a, double b) const {
  if (spatial_dim != 1) throw CapabilityError("interval integrals are only defined in 1D");
  double total = 0.0;
  for (Eigen::Index k = 0; k + 1 < nodes.size(); ++k) {
    const double lo = std::max(a, nodes(k));
    const double hi = std::min(b, nodes(k + 1));
    if (hi <= lo) continue;
    const double vlo = value_at(Vec::Constant(1, lo));
    const double vhi = value_at(Vec::Constant(1, hi));
    total += 0.5 * (hi - lo) * (vlo + vhi);
  }
  return total;
}

double DiscreteSolution::flux_x1(const PdeProblem& p, const VecRef& theta, bool right_side) const {
  if (spatial_dim != 2) throw CapabilityError("flux_x1 is defined for 2D solutions");
  const double h = 1.0 / n;
  const int i0 = right_side ? n - 1 : 0;
  const double a = face_coefficient(p, theta, i0 * h, (i0 + 1) * h);
  double total = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double len = (j == 0 || j == n) ? 0.5 * h : h;
    const double du = values(j * (n + 1) + i0 + 1) - values(j * (n + 1) + i0);
    total += -a * du / h * len;
  }
  return total;
}

std::string DiscreteSolution::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  if (spatial_dim == 1) {
    os << "x,u\n";
    for (Eigen::Index k = 0; k < nodes.size(); ++k) os << nodes(k) << ',' << values(k) << '\n';
  } else {
    os << "x1,x2,u\n";
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        os << double(i) / n << ',' << double(j) / n << ',' << values(j * (n + 1) + i) << '\n';
      }
    }
  }
  return os.str();
}

DiscreteSolution solve_reference(const PdeProblem& p, const VecRef& theta, int mesh_n) {
  check_theta(p, theta);
  if (!p.theta_box.contains(theta)) throw InputError("theta lies outside the parameter box");
  return solve_any(p, theta, mesh_n);
}

Vec forward_map_unchecked(const PdeProblem& p, const ObservationOperator& obs,
                          const VecRef& theta, int mesh_n) {
  check_theta(p, theta);
  if (obs.spatial_dim() != p.spatial_dim) {
    throw InputError("observation operator dimension does not match the problem");
  }
  const DiscreteSolution sol = solve_any(p, theta, mesh_n);
  Vec out(obs.d_y());
  for (int j = 0; j < obs.d_y(); ++j) {
    if (obs.kind() == ObservationOperator::Kind::Pointwise) {
      out(j) = sol.value_at(obs.points().col(j));
    } else {
      const auto [a, b] = obs.intervals()[j];
      out(j) = sol.integral(a, b);
    }
  }
  return out;
}

Vec forward_map(const PdeProblem& p, const ObservationOperator& obs, const VecRef& theta,
                int mesh_n) {
  check_theta(p, theta);
  if (!p.theta_box.contains(theta)) throw InputError("theta lies outside the parameter box");
  return forward_map_unchecked(p, obs, theta, mesh_n);
}

SyntheticData make_data(const PdeProblem& p, const ObservationOperator& obs,
                        const VecRef& theta_dagger, double noise_var, std::uint64_t seed,
                        int mesh_n) {
  if (!(noise_var >= 0.0)) throw InputError("noise variance must be non-negative");
  SyntheticData d;
  d.theta_dagger = theta_dagger;
  d.noise_var = noise_var;
  d.seed = seed;
  d.mesh_n = mesh_n;
  d.clean = forward_map(p, obs, theta_dagger, mesh_n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  d.y = d.clean;
  const double sd = std::sqrt(noise_var);
  for (Eigen::Index j = 0; j < d.y.size(); ++j) d.y(j) += sd * normal(rng);
  return d;
}

}  // namespace pdegp
