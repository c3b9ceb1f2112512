#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pdegp/types.hpp"

namespace pdegp {

enum class KernelFamily { SquaredExponential, Matern52 };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

struct KernelHyper {
  double variance = 1.0;     // output scale sigma^2
  double lengthscale = 1.0;  // isotropic input scale l
};

/// Multi-index of partial derivative orders, one entry per coordinate.
using MultiIndex = std::vector<int>;

/// Isotropic stationary covariance function k(a, b) = f(|a - b|).
///
/// Derivatives are closed form. Writing d = a - b and r = |d|, every partial
/// derivative of a radial profile f is a sum over partial pairings of the
/// differentiated coordinates, weighted by the auxiliary radial functions
/// F_1 = f'(r)/r, F_{n+1} = F_n'(r)/r. Both families have finite F_1, F_2 at
/// r = 0, which covers the order-(2,2) mixed derivative at coincident points.
class Kernel {
 public:
  Kernel() = default;
  Kernel(KernelFamily family, KernelHyper hyper, int input_dim);

  KernelFamily family() const { return family_; }
  const KernelHyper& hyper() const { return hyper_; }
  int input_dim() const { return input_dim_; }

  double eval(const VecRef& a, const VecRef& b) const;

  /// Gradient with respect to the first argument.
  Vec grad_a(const VecRef& a, const VecRef& b) const;
  /// Scalar c with grad_a(a, b) = c * (a - b).
  double grad_factor(const VecRef& a, const VecRef& b) const;

  /// Mixed partial d^{order_a}_a d^{order_b}_b k(a, b). Each multi-index must
  /// have `input_dim` entries and total order at most 2.
  double deriv_mixed(const VecRef& a, const VecRef& b, const MultiIndex& order_a,
                     const MultiIndex& order_b) const;

  /// Gram matrix K(A, B) for points stored as matrix columns.
  Mat gram(const Mat& a_cols, const Mat& b_cols) const;

 private:
  void check_dims(const VecRef& a, const VecRef& b) const;
  // F_n(r) for n = 0..4; F_0 is the profile itself.
  double radial(int n, double r) const;
  double radial_at_zero(int n) const;
  // d^n k / dd_{i1} ... dd_{in} for the listed coordinates (n <= 4).
  double derivative_in_d(const Vec& d, const std::vector<int>& coords) const;

  KernelFamily family_ = KernelFamily::SquaredExponential;
  KernelHyper hyper_{};
  int input_dim_ = 1;
};

}  // namespace pdegp
