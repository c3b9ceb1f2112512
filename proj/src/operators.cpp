#include <cmath>

#include "pdegp/errors.hpp"
#include "pdegp/pde.hpp"

namespace pdegp {

namespace {

MultiIndex unit_index(int dim, int axis, int order) {
  MultiIndex m(dim, 0);
  m[axis] = order;
  return m;
}

int normal_axis(Segment s) { return (s == Segment::Left || s == Segment::Right) ? 0 : 1; }

}  // namespace

LinearOperator identity_operator(int spatial_dim) {
  return {OperatorTerm{1.0, MultiIndex(spatial_dim, 0)}};
}

LinearOperator boundary_operator(const PdeProblem& p, const VecRef& x_b) {
  const auto& bc = p.condition_at(x_b);
  if (bc.kind == BoundaryKind::Dirichlet) return identity_operator(p.spatial_dim);
  return {OperatorTerm{1.0, unit_index(p.spatial_dim, normal_axis(bc.segment), 1)}};
}

LinearOperator pde_operator(const PdeProblem& p, const VecRef& x, const VecRef& theta) {
  if (x.size() != p.spatial_dim) throw InputError("operator point has wrong dimension");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) > 0.0 && x(i) < 1.0)) throw InputError("PDE operator point must be interior");
  }
  if (p.diffusion.distance_to_interface(x(0)) < 1e-12) {
    throw InputError("PDE operator point lies on a diffusion interface");
  }
  // L u = -exp(kappa) (laplace u + dkappa/dx1 du/dx1)
  const double a = p.diffusion.coefficient(x(0), theta);
  const double dk = p.diffusion.dkappa_dx(x(0), theta);
  LinearOperator op;
  for (int i = 0; i < p.spatial_dim; ++i) op.push_back({-a, unit_index(p.spatial_dim, i, 2)});
  op.push_back({-a * dk, unit_index(p.spatial_dim, 0, 1)});
  return op;
}

double apply_pair(const Kernel& k_s, const LinearOperator& left, const VecRef& x,
                  const LinearOperator& right, const VecRef& x_prime) {
  double total = 0.0;
  for (const auto& l : left) {
    for (const auto& r : right) {
      if (l.coef == 0.0 || r.coef == 0.0) continue;
      total += l.coef * r.coef * k_s.deriv_mixed(x, x_prime, l.order, r.order);
    }
  }
  return total;
}

double apply_operator_to_kernel(const PdeProblem& p, const Kernel& k_s, OperatorPair which,
                                const VecRef& x, const VecRef& x_prime, const VecRef& theta,
                                const VecRef& theta_prime) {
  const auto id = identity_operator(p.spatial_dim);
  switch (which) {
    case OperatorPair::LRight:
      return apply_pair(k_s, id, x, pde_operator(p, x_prime, theta_prime), x_prime);
    case OperatorPair::LLeft:
      return apply_pair(k_s, pde_operator(p, x, theta), x, id, x_prime);
    case OperatorPair::LL:
      return apply_pair(k_s, pde_operator(p, x, theta), x, pde_operator(p, x_prime, theta_prime),
                        x_prime);
    case OperatorPair::BRight:
      return apply_pair(k_s, id, x, boundary_operator(p, x_prime), x_prime);
    case OperatorPair::BLeft:
      return apply_pair(k_s, boundary_operator(p, x), x, id, x_prime);
    case OperatorPair::BB:
      return apply_pair(k_s, boundary_operator(p, x), x, boundary_operator(p, x_prime), x_prime);
    case OperatorPair::BL:
      return apply_pair(k_s, boundary_operator(p, x), x, pde_operator(p, x_prime, theta_prime),
                        x_prime);
    case OperatorPair::LB:
      return apply_pair(k_s, pde_operator(p, x, theta), x, boundary_operator(p, x_prime), x_prime);
  }
  throw InputError("unknown operator pair");
}

}  // namespace pdegp
