#pragma once

#include <vector>

namespace pdegp {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Composite Gauss-Legendre: `panels` equal panels of `n` points each.
QuadratureRule composite_gauss_legendre(int n, int panels, double a, double b);

}  // namespace pdegp
