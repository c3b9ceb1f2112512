#include "pdegp/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "pdegp/errors.hpp"

namespace pdegp {

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InputError("Gauss-Legendre rule needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = mid - half * z;
    rule.nodes[n - 1 - i] = mid + half * z;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(int n, int panels, double a, double b) {
  if (panels < 1) throw InputError("composite rule needs at least one panel");
  QuadratureRule out;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const auto r = gauss_legendre(n, a + p * h, a + (p + 1) * h);
    out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
    out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
  }
  return out;
}

}  // namespace pdegp
