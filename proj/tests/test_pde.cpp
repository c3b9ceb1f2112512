#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "pdegp/errors.hpp"
#include "pdegp/pde.hpp"

using namespace pdegp;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double closed_form_u(double x, double theta) { return (x - x * x) / (2.0 * std::exp(theta)); }

}  // namespace

TEST_CASE("constant diffusion matches the closed form") {
  const auto p = problems::constant_diffusion_1d();
  auto sol = solve_reference(p, v1(0.0), 512);
  CHECK(std::abs(sol.value_at(v1(0.5)) - 0.125) <= 1e-6);
  sol = solve_reference(p, v1(0.314), 512);
  CHECK(sol.value_at(v1(0.5)) == doctest::Approx(0.125 * std::exp(-0.314)).epsilon(1e-6));
}

TEST_CASE("forward map pointwise and integral observations") {
  const auto p = problems::constant_diffusion_1d();
  Mat pts(1, 3);
  pts << 0.25, 0.5, 0.75;
  const Vec g = forward_map(p, ObservationOperator::pointwise(pts), v1(0.0), 512);
  CHECK(g(0) == doctest::Approx(0.09375).epsilon(1e-6));
  CHECK(g(1) == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(g(2) == doctest::Approx(0.09375).epsilon(1e-6));

  const Vec avg = forward_map(p, ObservationOperator::local_average({{0.0, 1.0}}), v1(0.0), 512);
  CHECK(avg(0) == doctest::Approx(1.0 / 12.0).epsilon(1e-5));

  const auto pw = problems::piecewise_diffusion_1d();
  Mat ends(1, 2);
  ends << 0.0, 1.0;
  const Vec b = forward_map(pw, ObservationOperator::pointwise(ends), v2(0.3, -0.2), 64);
  CHECK(b(0) == 0.0);
  CHECK(b(1) == 2.0);
}

TEST_CASE("second-order convergence in the max norm") {
  const auto p = problems::constant_diffusion_1d();
  const double theta = 0.4;
  std::vector<double> err;
  for (int n : {32, 64, 128, 256}) {
    auto sol = solve_reference(p, v1(theta), n);
    double e = 0.0;
    // off-node samples so the interpolation error is measured too
    for (int i = 0; i <= 997; ++i) {
      const double x = i / 997.0;
      e = std::max(e, std::abs(sol.value_at(v1(x)) - closed_form_u(x, theta)));
    }
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i) {
    CHECK(err[i] < err[i - 1]);
    CHECK(std::log2(err[i - 1] / err[i]) > 1.8);
  }
}

TEST_CASE("piecewise solver honours interfaces and flux continuity") {
  const auto p = problems::piecewise_diffusion_1d();
  const Vec theta = v2(0.5, -0.7);
  auto sol = solve_reference(p, theta, 256);
  // flux a u' is continuous; compare one-sided slopes across x = 0.5
  const double h = 1.0 / 256;
  const double left = std::exp(0.5) * (sol.value_at(v1(0.5)) - sol.value_at(v1(0.5 - h))) / h;
  const double right = std::exp(-0.7) * (sol.value_at(v1(0.5 + h)) - sol.value_at(v1(0.5))) / h;
  CHECK(left == doctest::Approx(right).epsilon(2e-2));
  CHECK_THROWS_AS(solve_reference(p, v2(1.5, 0.0), 64), InputError);
  CHECK_THROWS_AS(solve_reference(p, theta, 4), InputError);
}

TEST_CASE("flow cell with constant diffusion is linear") {
  auto p = problems::flow_cell_2d();
  auto sol = solve_reference(p, v2(0.0, 0.0), 32);
  // kappa = (0, 0, 0, 1): not constant. Use a uniform field instead.
  p.diffusion = DiffusionField::piecewise({0.0, 1.0}, {DiffusionField::Cell{std::nullopt, 0}});
  p.theta_box = ThetaBox{v1(-1.0), v1(1.0)};
  sol = solve_reference(p, v1(0.0), 32);
  double e = 0.0;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) {
      const Vec x = v2(i / 10.0, j / 10.0);
      e = std::max(e, std::abs(sol.value_at(x) - (1.0 - x(0))));
    }
  CHECK(e < 1e-10);
}

TEST_CASE("flow cell conserves flux") {
  const auto p = problems::flow_cell_2d();
  const Vec theta = v2(0.6, -0.4);
  auto sol = solve_reference(p, theta, 64);
  const double in = sol.flux_x1(p, theta, false);
  const double out = sol.flux_x1(p, theta, true);
  CHECK(in > 0.0);
  CHECK(std::abs(in - out) < 1e-8);
}

TEST_CASE("forward map is continuous in theta") {
  const auto p = problems::piecewise_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(6));
  const Vec a = forward_map(p, obs, v2(0.1, 0.2), 256);
  const Vec b = forward_map(p, obs, v2(0.1 + 1e-6, 0.2 - 1e-6), 256);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("synthetic data") {
  const auto p = problems::constant_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(5));
  const auto clean = make_data(p, obs, v1(0.314), 0.0, 1, 256);
  CHECK((clean.y - forward_map(p, obs, v1(0.314), 256)).norm() == 0.0);
  const auto d1 = make_data(p, obs, v1(0.314), 1e-4, 42, 256);
  const auto d2 = make_data(p, obs, v1(0.314), 1e-4, 42, 256);
  CHECK((d1.y - d2.y).norm() == 0.0);
  CHECK_THROWS_AS(make_data(p, obs, v1(0.314), -1.0, 1, 256), InputError);

  // sample variance of the noise across many seeds
  double s = 0.0, s2 = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto d = make_data(p, obs, v1(0.314), 1e-4, seed, 16);
    const Vec eta = d.y - d.clean;
    s += eta.sum();
    s2 += eta.squaredNorm();
    count += static_cast<int>(eta.size());
  }
  const double mean = s / count;
  const double var = s2 / count - mean * mean;
  CHECK(var == doctest::Approx(1e-4).epsilon(0.05));
}

TEST_CASE("observation operators validate input") {
  CHECK_THROWS_AS(ObservationOperator::local_average({{0.0, 0.6}, {0.5, 1.0}}), InputError);
  Mat bad(1, 1);
  bad << 1.5;
  CHECK_THROWS_AS(ObservationOperator::pointwise(bad), InputError);
  const auto avg = ObservationOperator::local_average(equal_intervals(4));
  CHECK(avg.d_y() == 4);
  double w = 0.0;
  for (const auto& q : avg.functional(2)) w += q.weight;
  CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("expansion eigenpairs") {
  const auto f = DiffusionField::expansion(4);
  const auto& w = f.frequencies();
  for (std::size_t n = 0; n < w.size(); ++n) {
    // tan w = 8w / (w^2 - 16)
    CHECK(std::tan(w[n]) == doctest::Approx(8 * w[n] / (w[n] * w[n] - 16)).epsilon(1e-8));
    CHECK(f.eigenvalues()[n] == doctest::Approx(8.0 / (w[n] * w[n] + 16.0)));
    if (n > 0) CHECK(w[n] > w[n - 1]);
    double norm2 = 0.0;
    const int m = 4000;
    for (int i = 0; i <= m; ++i) {
      const double b = f.eigenfunction(static_cast<int>(n), double(i) / m);
      norm2 += (i == 0 || i == m ? 0.5 : 1.0) * b * b / m;
    }
    CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("operator-applied kernels") {
  const auto p = problems::constant_diffusion_1d();
  Kernel k(KernelFamily::SquaredExponential, {1.0, 1.0}, 1);
  const Vec x = v1(0.5), t0 = v1(0.0);
  CHECK(apply_operator_to_kernel(p, k, OperatorPair::LRight, x, x, t0, t0) ==
        doctest::Approx(1.0));
  CHECK(apply_operator_to_kernel(p, k, OperatorPair::LL, x, x, t0, t0) == doctest::Approx(3.0));
  const Vec b0 = v1(0.0), b1 = v1(1.0);
  CHECK(apply_operator_to_kernel(p, k, OperatorPair::BB, b0, b1, t0, t0) == k.eval(b0, b1));

  const auto pw = problems::piecewise_diffusion_1d();
  CHECK_THROWS_AS(
      apply_operator_to_kernel(pw, k, OperatorPair::LRight, x, v1(0.5), v2(0, 0), v2(0, 0)),
      InputError);

  // joint [u; f] Gram is symmetric PSD
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.02, 0.98), th(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Kernel ks(KernelFamily::SquaredExponential, {1.0, 0.3}, 1);
    const double theta = th(rng);
    std::vector<double> xu(4), xf(4);
    for (auto& v : xu) v = u(rng);
    for (auto& v : xf) v = u(rng);
    Mat g(8, 8);
    const Vec t = v1(theta);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        g(i, j) = ks.eval(v1(xu[i]), v1(xu[j]));
        g(i, 4 + j) = apply_operator_to_kernel(p, ks, OperatorPair::LRight, v1(xu[i]), v1(xf[j]), t, t);
        g(4 + i, j) = apply_operator_to_kernel(p, ks, OperatorPair::LLeft, v1(xf[i]), v1(xu[j]), t, t);
        g(4 + i, 4 + j) = apply_operator_to_kernel(p, ks, OperatorPair::LL, v1(xf[i]), v1(xf[j]), t, t);
      }
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * g.diagonal().maxCoeff());
  }
}

TEST_CASE("pde operator on an expansion field includes the drift term") {
  const auto p = problems::expansion_diffusion_1d(2);
  Kernel k(KernelFamily::SquaredExponential, {1.0, 0.4}, 1);
  const Vec theta = v2(0.3, -0.5);
  const Vec x = v1(0.37), xp = v1(0.61);
  // L u = -(a u')' applied in x' to k(x, .), checked by finite differences of the flux
  const double h = 1e-4;
  auto flux = [&](double s) {
    const double dk = (k.eval(x, v1(s + h)) - k.eval(x, v1(s - h))) / (2 * h);
    return p.diffusion.coefficient(s, theta) * dk;
  };
  const double fd = -(flux(xp(0) + h) - flux(xp(0) - h)) / (2 * h);
  const double an = apply_operator_to_kernel(p, k, OperatorPair::LRight, x, xp, theta, theta);
  CHECK(an == doctest::Approx(fd).epsilon(1e-5));
}
