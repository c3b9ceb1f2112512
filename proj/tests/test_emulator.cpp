#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "doctest.h"
#include "pdegp/emulator.hpp"
#include "pdegp/errors.hpp"

using namespace pdegp;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Vec v1(double a) { return Vec::Constant(1, a); }

struct Setup {
  PdeProblem p;
  ObservationOperator obs;
  TrainingSet ts;
};

Setup constant_setup(int n, int d_y, int n_bar = 0, int d_f = 0) {
  Setup s{problems::constant_diffusion_1d(),
          ObservationOperator::pointwise(equally_spaced_points_1d(d_y)), {}};
  DesignSpec spec;
  spec.n = n;
  spec.n_bar = n_bar;
  spec.d_f = d_f;
  spec.d_g = n_bar > 0 ? 2 : 0;
  spec.mesh_n = 256;
  s.ts = build_training(s.p, s.obs, spec);
  return s;
}

Setup piecewise_setup(int n, int n_bar, int d_f) {
  Setup s{problems::piecewise_diffusion_1d(),
          ObservationOperator::pointwise(equally_spaced_points_1d(6)), {}};
  DesignSpec spec;
  spec.n = n;
  spec.n_bar = n_bar;
  spec.d_f = d_f;
  spec.d_g = 2;
  spec.mesh_n = 256;
  s.ts = build_training(s.p, s.obs, spec);
  return s;
}

EmulatorModel model(EmulatorFamily fam, int dim_theta, double lp = 0.8, double ls = 0.4) {
  EmulatorModel m;
  m.family = fam;
  m.k_p = Kernel(KernelFamily::SquaredExponential, {0.05, lp}, dim_theta);
  if (fam == EmulatorFamily::SpatiallyCorrelated || fam == EmulatorFamily::PdeConstrained) {
    m.k_s = Kernel(KernelFamily::Matern52, {1.0, ls}, 1);
  }
  m.jitter = 1e-12;
  return m;
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-3, b.cwiseAbs().maxCoeff());
}

// Central finite differences of the mean and of K_N(theta, theta).
void check_gradients(const ConditionedGP& gp, const Vec& theta, double tol) {
  const double h = 1e-6;
  const Prediction pr = gp.predict(theta, true);
  CHECK(rel_err(pr.mean_grad, gp.predict_mean_grad(theta)) == 0.0);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vec tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    const Vec dm = (gp.predict_mean(tp) - gp.predict_mean(tm)) / (2 * h);
    const Mat dk = (gp.predict_cov(tp, tp) - gp.predict_cov(tm, tm)) / (2 * h);
    CHECK(rel_err(pr.mean_grad.col(i), dm) < tol);
    CHECK(rel_err(pr.cov_grad[i], dk) < tol);
  }
}

}  // namespace

TEST_CASE("baseline interpolates at a single training point") {
  auto s = constant_setup(1, 5);
  auto gp = ConditionedGP::condition(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs);
  const Vec th = s.ts.theta.col(0);
  CHECK((gp.predict_mean(th) - s.ts.gx.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(gp.predict_cov(th, th).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("interpolation holds for every family") {
  auto s = piecewise_setup(4, 10, 5);
  for (auto fam : {EmulatorFamily::Baseline, EmulatorFamily::SpatiallyCorrelated,
                   EmulatorFamily::PdeConstrained}) {
    auto gp = ConditionedGP::condition(model(fam, 2), s.ts, s.p, s.obs);
    for (int i = 0; i < s.ts.n(); ++i) {
      const Vec th = s.ts.theta.col(i);
      CHECK((gp.predict_mean(th) - s.ts.gx.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(gp.predict_cov(th, th).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  const Vec y = Vec::Constant(6, 0.3);
  auto pot = potential_training(s.ts, y, 1e-3);
  EmulatorModel pm = model(EmulatorFamily::Potential, 2);
  pm.k_p = Kernel(KernelFamily::SquaredExponential, {1e4, 0.8}, 2);
  auto gp = ConditionedGP::condition(pm, pot, s.p, s.obs);
  for (int i = 0; i < pot.n(); ++i) {
    const Vec th = pot.theta.col(i);
    CHECK(std::abs(gp.predict_mean(th)(0) - pot.gx(i, 0)) < 1e-10 * (1 + pot.gx(i, 0)));
  }
}

TEST_CASE("separable prior reproduces baseline mean and factorizes covariance") {
  auto s = constant_setup(4, 5);
  auto base = ConditionedGP::condition(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs);
  auto sc = ConditionedGP::condition(model(EmulatorFamily::SpatiallyCorrelated, 1), s.ts, s.p,
                                     s.obs);
  Kernel ks(KernelFamily::Matern52, {1.0, 0.4}, 1);
  const Mat kxx = ks.gram(s.obs.points(), s.obs.points());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 50; ++t) {
    const Vec th = v1(u(rng));
    CHECK((base.predict_mean(th) - sc.predict_mean(th)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((base.predict_mean_grad(th) - sc.predict_mean_grad(th)).cwiseAbs().maxCoeff() < 1e-8);
    const Mat ratio = sc.predict_cov(th, th).cwiseQuotient(kxx);
    CHECK(ratio.maxCoeff() - ratio.minCoeff() < 1e-8);
    CHECK(ratio(0, 0) == doctest::Approx(base.predict_cov(th, th)(0, 0)).epsilon(1e-8));
  }
}

TEST_CASE("empty training set gives the prior") {
  auto s = constant_setup(1, 3);
  TrainingSet empty = s.ts;
  empty.theta.resize(1, 0);
  empty.gx.resize(0, 3);
  for (auto fam : {EmulatorFamily::Baseline, EmulatorFamily::SpatiallyCorrelated}) {
    auto gp = ConditionedGP::condition(model(fam, 1), empty, s.p, s.obs);
    const Vec a = v1(0.2), b = v1(-0.5);
    CHECK(gp.predict_mean(a).norm() == 0.0);
    const double kp = model(fam, 1).k_p.eval(a, b);
    Mat prior = kp * Mat::Identity(3, 3);
    if (fam == EmulatorFamily::SpatiallyCorrelated) {
      prior = kp * Kernel(KernelFamily::Matern52, {1.0, 0.4}, 1)
                       .gram(s.obs.points(), s.obs.points());
    }
    CHECK((gp.predict_cov(a, b) - prior).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("far from the design the mean returns to zero") {
  auto s = constant_setup(4, 5);
  auto gp = ConditionedGP::condition(model(EmulatorFamily::Baseline, 1, 0.2), s.ts, s.p, s.obs);
  const Vec far = v1(30.0);
  CHECK(gp.predict_mean(far).cwiseAbs().maxCoeff() < 1e-3 * std::sqrt(0.05));
}

TEST_CASE("gradients match finite differences for every family") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  auto s = piecewise_setup(4, 10, 5);
  const Vec y = Vec::Constant(6, 0.3);
  auto pot = potential_training(s.ts, y, 1e-2);
  for (auto fam : {EmulatorFamily::Baseline, EmulatorFamily::SpatiallyCorrelated,
                   EmulatorFamily::PdeConstrained, EmulatorFamily::Potential}) {
    CAPTURE(to_string(fam));
    EmulatorModel m = model(fam, 2);
    if (fam == EmulatorFamily::Potential) m.k_p = Kernel(KernelFamily::Matern52, {50.0, 0.9}, 2);
    auto gp = ConditionedGP::condition(m, fam == EmulatorFamily::Potential ? pot : s.ts, s.p,
                                       s.obs);
    for (int t = 0; t < 20; ++t) {
      Vec th(2);
      th << u(rng), u(rng);
      check_gradients(gp, th, 1e-5);
    }
    // also at a design point
    check_gradients(gp, s.ts.theta.col(1), 1e-4);
  }
}

TEST_CASE("stationary parameter kernel: covariance gradient has the negative sign") {
  auto s = constant_setup(3, 4);
  auto gp = ConditionedGP::condition(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs);
  const Vec th = v1(0.37);
  const Kernel& kp = gp.model().k_p;
  Mat kk(3, 3);
  Vec k(3), g(3);
  for (int i = 0; i < 3; ++i) {
    k(i) = kp.eval(th, s.ts.theta.col(i));
    g(i) = kp.grad_a(th, s.ts.theta.col(i))(0);
    for (int j = 0; j < 3; ++j) kk(i, j) = kp.eval(s.ts.theta.col(i), s.ts.theta.col(j));
  }
  const double expected = -2.0 * g.dot(kk.ldlt().solve(k));
  CHECK(gp.predict_cov_grad(th)[0](0, 0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("log marginal likelihood") {
  auto s = constant_setup(1, 1);
  TrainingSet one = s.ts;
  one.gx(0, 0) = 0.0;
  EmulatorModel m = model(EmulatorFamily::Baseline, 1);
  m.k_p = Kernel(KernelFamily::SquaredExponential, {1.0, 1.0}, 1);
  auto gp = ConditionedGP::condition(m, one, s.p, s.obs);
  CHECK(gp.log_marginal_likelihood() == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-10));

  // dense oracle for the separable family
  auto s4 = constant_setup(4, 3);
  auto sc = ConditionedGP::condition(model(EmulatorFamily::SpatiallyCorrelated, 1), s4.ts, s4.p,
                                     s4.obs);
  Kernel kp(KernelFamily::SquaredExponential, {0.05, 0.8}, 1);
  Kernel ks(KernelFamily::Matern52, {1.0, 0.4}, 1);
  const Mat kpp = kp.gram(s4.ts.theta, s4.ts.theta);
  const Mat kss = ks.gram(s4.obs.points(), s4.obs.points());
  const int n = 4, d = 3;
  Mat dense(n * d, n * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dense.block(i * d, j * d, d, d) = kpp(i, j) * kss;
  Vec g(n * d);
  for (int i = 0; i < n; ++i) g.segment(i * d, d) = s4.ts.gx.row(i).transpose();
  Eigen::LLT<Mat> llt(dense);
  const Mat l = llt.matrixL();
  const double oracle = -0.5 * g.dot(llt.solve(g)) - l.diagonal().array().log().sum() -
                        0.5 * n * d * kLog2Pi;
  CHECK(sc.log_marginal_likelihood() == doctest::Approx(oracle).epsilon(1e-8));

  // corrupting one value by 10 prior standard deviations lowers the evidence
  TrainingSet bad = s4.ts;
  bad.gx(2, 1) += 10.0 * std::sqrt(0.05);
  auto sc_bad =
      ConditionedGP::condition(model(EmulatorFamily::SpatiallyCorrelated, 1), bad, s4.p, s4.obs);
  CHECK(sc_bad.log_marginal_likelihood() < sc.log_marginal_likelihood());

  // joint family against a dense computation on its own Gram
  auto sp = piecewise_setup(2, 3, 3);
  auto pde = ConditionedGP::condition(model(EmulatorFamily::PdeConstrained, 2), sp.ts, sp.p,
                                      sp.obs);
  CHECK(std::isfinite(pde.log_marginal_likelihood()));
}

TEST_CASE("pde-constrained emulator beats baseline at equal N") {
  auto s = constant_setup(2, 5, 10, 5);
  const Vec th = v1(0.314);
  Vec truth(5);
  for (int j = 0; j < 5; ++j) {
    const double x = s.obs.points()(0, j);
    truth(j) = (x - x * x) / (2 * std::exp(0.314));
  }
  auto base = ConditionedGP::condition(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs);
  auto pde =
      ConditionedGP::condition(model(EmulatorFamily::PdeConstrained, 1), s.ts, s.p, s.obs);
  const double e_base = (base.predict_mean(th) - truth).cwiseAbs().maxCoeff();
  const double e_pde = (pde.predict_mean(th) - truth).cwiseAbs().maxCoeff();
  CHECK(e_pde < e_base);
}

TEST_CASE("pde-constrained mean satisfies the equation at the source design") {
  auto s = piecewise_setup(2, 6, 12);
  EmulatorModel m = model(EmulatorFamily::PdeConstrained, 2, 0.8);
  m.k_s = Kernel(KernelFamily::SquaredExponential, {1.0, 0.2}, 1);
  m.jitter = 1e-8;
  auto gp = ConditionedGP::condition(m, s.ts, s.p, s.obs);
  const double h = 1e-3;
  for (int k = 0; k < s.ts.n_bar(); ++k) {
    const Vec th = s.ts.theta_bar.col(k);
    for (int m = 0; m < s.ts.d_f(); ++m) {
      const double x = s.ts.xf(0, m);
      Mat pts(1, 3);
      pts << x - h, x, x + h;
      const Vec u = gp.predict_field_mean(th, pts);
      // kappa is constant near x, so L u = -exp(kappa) u''
      const double lu = -s.p.diffusion.coefficient(x, th) * (u(0) - 2 * u(1) + u(2)) / (h * h);
      CHECK(lu == doctest::Approx(s.ts.f_vals(k, m)).epsilon(0.05).scale(1.0));
    }
  }
}

TEST_CASE("average variance shrinks with more data") {
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-1.0 + i / 20.0);
  auto avg = [&](const ConditionedGP& gp) {
    double acc = 0.0;
    for (double t : grid) acc += gp.predict_cov(v1(t), v1(t)).trace() / gp.d_out();
    return acc / grid.size();
  };
  double prev = 1e300;
  for (int n : {1, 2, 4, 8}) {
    auto s = constant_setup(n, 5);
    const double v =
        avg(ConditionedGP::condition(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs));
    CHECK(v <= prev);
    prev = v;
  }
  // smooth spatial kernel: the source data pin the solution down quickly
  EmulatorModel m = model(EmulatorFamily::PdeConstrained, 1, 1.0);
  m.k_s = Kernel(KernelFamily::SquaredExponential, {1.0, 0.15}, 1);
  m.jitter = 1e-8;
  std::vector<double> by_df;
  for (int d_f : {2, 5, 10, 20}) {
    auto s = constant_setup(2, 5, 10, d_f);
    by_df.push_back(avg(ConditionedGP::condition(m, s.ts, s.p, s.obs)));
  }
  for (std::size_t i = 1; i < by_df.size(); ++i) CHECK(by_df[i] < by_df[i - 1]);
  CHECK(by_df.back() < 1e-2 * by_df.front());
}

TEST_CASE("cached factor reproduces predictions") {
  auto s = piecewise_setup(3, 4, 4);
  auto m = model(EmulatorFamily::PdeConstrained, 2);
  auto gp = ConditionedGP::condition(m, s.ts, s.p, s.obs);
  auto cached = ConditionedGP::condition_cached(
      m, s.ts, s.p, s.obs, nlohmann::json::parse(gp.cache_json().dump()));
  Vec th(2);
  th << 0.1, -0.3;
  CHECK((gp.predict_mean(th) - cached.predict_mean(th)).norm() == 0.0);
  nlohmann::json stale = gp.cache_json();
  stale["key"] = "0";
  auto fresh = ConditionedGP::condition_cached(m, s.ts, s.p, s.obs, stale);
  CHECK((gp.predict_mean(th) - fresh.predict_mean(th)).norm() == 0.0);
}

TEST_CASE("model validation") {
  auto s = constant_setup(2, 3);
  EmulatorModel m = model(EmulatorFamily::SpatiallyCorrelated, 1);
  m.k_s.reset();
  CHECK_THROWS_AS(ConditionedGP::condition(m, s.ts, s.p, s.obs), InputError);
  CHECK_THROWS_AS(ConditionedGP::condition(model(EmulatorFamily::Baseline, 2), s.ts, s.p, s.obs),
                  InputError);
  CHECK(emulator_family_from_string("pde_constrained") == EmulatorFamily::PdeConstrained);
}

TEST_CASE("marginal likelihood grid search picks a finite model") {
  auto s = constant_setup(6, 4);
  auto best = select_by_marginal_likelihood(model(EmulatorFamily::Baseline, 1), s.ts, s.p, s.obs,
                                            {0.05, 0.5, 2.0}, {});
  const double l = best.k_p.hyper().lengthscale;
  CHECK((l == 0.05 || l == 0.5 || l == 2.0));
  auto lml = [&](double ls) {
    auto m = model(EmulatorFamily::Baseline, 1, ls);
    return ConditionedGP::condition(m, s.ts, s.p, s.obs).log_marginal_likelihood();
  };
  CHECK(lml(l) >= lml(0.05));
  CHECK(lml(l) >= lml(2.0));
}
