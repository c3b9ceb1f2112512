#include "pdegp/kernels.hpp"

#include <array>
#include <cmath>

#include "pdegp/errors.hpp"

namespace pdegp {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;

// Enumerates partial pairings of positions [0, n): each position is either
// matched with a later one or left single. Calls visit(n_pairs, singles).
template <typename Visit>
void for_each_pairing(std::vector<int>& free_pos, std::vector<int>& singles, int pairs,
                      Visit&& visit) {
  if (free_pos.empty()) {
    visit(pairs, singles);
    return;
  }
  const int first = free_pos.front();
  std::vector<int> rest(free_pos.begin() + 1, free_pos.end());

  singles.push_back(first);
  for_each_pairing(rest, singles, pairs, visit);
  singles.pop_back();

  for (std::size_t j = 0; j < rest.size(); ++j) {
    std::vector<int> remaining;
    remaining.reserve(rest.size() - 1);
    for (std::size_t m = 0; m < rest.size(); ++m) {
      if (m != j) remaining.push_back(rest[m]);
    }
    // record pair as two entries tagged negative so the caller can check deltas
    singles.push_back(-1 - first);
    singles.push_back(-1 - rest[j]);
    for_each_pairing(remaining, singles, pairs + 1, visit);
    singles.pop_back();
    singles.pop_back();
  }
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "squared_exponential";
    case KernelFamily::Matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "squared_exponential" || name == "se") return KernelFamily::SquaredExponential;
  if (name == "matern52") return KernelFamily::Matern52;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

Kernel::Kernel(KernelFamily family, KernelHyper hyper, int input_dim)
    : family_(family), hyper_(hyper), input_dim_(input_dim) {
  if (!(hyper.variance > 0.0) || !(hyper.lengthscale > 0.0)) {
    throw InputError("kernel variance and lengthscale must be positive");
  }
  if (input_dim < 1) throw InputError("kernel input dimension must be positive");
}

void Kernel::check_dims(const VecRef& a, const VecRef& b) const {
  if (a.size() != input_dim_ || b.size() != input_dim_) {
    throw InputError("kernel expects points of dimension " + std::to_string(input_dim_) +
                     ", got " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
}

namespace {

double ipow(double x, int n) {
  double out = 1.0;
  for (int i = 0; i < n; ++i) out *= x;
  return out;
}

}  // namespace

double Kernel::radial(int n, double r) const {
  const double s2 = hyper_.variance;
  const double l = hyper_.lengthscale;
  if (family_ == KernelFamily::SquaredExponential) {
    const double e = std::exp(-0.5 * r * r / (l * l));
    return s2 * ipow(-1.0 / (l * l), n) * e;
  }
  const double c = kSqrt5 / l;
  const double e = std::exp(-c * r);
  switch (n) {
    case 0:
      return s2 * (1.0 + c * r + c * c * r * r / 3.0) * e;
    case 1:
      return -s2 * c * c / 3.0 * (1.0 + c * r) * e;
    case 2:
      return s2 * ipow(c, 4) / 3.0 * e;
    case 3:
      return -s2 * ipow(c, 5) / 3.0 * e / r;
    case 4:
      return s2 * ipow(c, 5) / 3.0 * (1.0 + c * r) * e / (r * r * r);
    default:
      break;
  }
  throw CapabilityError("radial derivative order above 4");
}

double Kernel::radial_at_zero(int n) const {
  const double s2 = hyper_.variance;
  const double l = hyper_.lengthscale;
  if (family_ == KernelFamily::SquaredExponential) return s2 * ipow(-1.0 / (l * l), n);
  const double c = kSqrt5 / l;
  switch (n) {
    case 0:
      return s2;
    case 1:
      return -s2 * c * c / 3.0;
    case 2:
      return s2 * ipow(c, 4) / 3.0;
    default:
      break;
  }
  throw CapabilityError("Matern52 radial term F_" + std::to_string(n) + " is singular at r = 0");
}

double Kernel::derivative_in_d(const Vec& d, const std::vector<int>& coords) const {
  const int n = static_cast<int>(coords.size());
  if (n > 4) throw CapabilityError("kernel derivatives above total order 4");
  const double r = d.norm();
  // Below this radius the Matern52 F_3, F_4 terms are replaced by their r -> 0
  // limit (every surviving term contains a positive power of r).
  const bool coincident = r < 1e-12 * hyper_.lengthscale;

  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) positions[i] = i;
  std::vector<int> tags;
  double total = 0.0;
  for_each_pairing(positions, tags, 0, [&](int pairs, const std::vector<int>& t) {
    double term = 1.0;
    int n_single = 0;
    for (std::size_t m = 0; m < t.size(); ++m) {
      if (t[m] >= 0) {
        term *= d(coords[t[m]]);
        ++n_single;
      } else {
        const int p = -1 - t[m];
        const int q = -1 - t[m + 1];
        if (coords[p] != coords[q]) return;
        ++m;
      }
    }
    const int order = n - pairs;
    if (coincident) {
      if (n_single > 0) return;
      total += radial_at_zero(order);
    } else {
      total += term * radial(order, r);
    }
  });
  return total;
}

double Kernel::eval(const VecRef& a, const VecRef& b) const {
  check_dims(a, b);
  return radial(0, (a - b).norm());
}

Vec Kernel::grad_a(const VecRef& a, const VecRef& b) const {
  return grad_factor(a, b) * (a - b);
}

double Kernel::grad_factor(const VecRef& a, const VecRef& b) const {
  check_dims(a, b);
  const double r = (a - b).norm();
  return r < 1e-12 * hyper_.lengthscale ? radial_at_zero(1) : radial(1, r);
}

double Kernel::deriv_mixed(const VecRef& a, const VecRef& b, const MultiIndex& order_a,
                           const MultiIndex& order_b) const {
  check_dims(a, b);
  if (static_cast<int>(order_a.size()) != input_dim_ ||
      static_cast<int>(order_b.size()) != input_dim_) {
    throw InputError("derivative multi-index length must equal the kernel input dimension");
  }
  std::vector<int> coords;
  int total_a = 0;
  int total_b = 0;
  for (int i = 0; i < input_dim_; ++i) {
    if (order_a[i] < 0 || order_b[i] < 0) throw InputError("negative derivative order");
    total_a += order_a[i];
    total_b += order_b[i];
    for (int m = 0; m < order_a[i] + order_b[i]; ++m) coords.push_back(i);
  }
  if (total_a > 2 || total_b > 2) {
    throw CapabilityError("kernel derivatives are supported up to total order 2 per argument");
  }
  // d/db = -d/dd
  const double sign = (total_b % 2 == 0) ? 1.0 : -1.0;
  return sign * derivative_in_d(a - b, coords);
}

Mat Kernel::gram(const Mat& a_cols, const Mat& b_cols) const {
  Mat out(a_cols.cols(), b_cols.cols());
  for (Eigen::Index i = 0; i < a_cols.cols(); ++i) {
    for (Eigen::Index j = 0; j < b_cols.cols(); ++j) {
      out(i, j) = eval(a_cols.col(i), b_cols.col(j));
    }
  }
  return out;
}

}  // namespace pdegp
