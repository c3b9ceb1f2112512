#include <cmath>
#include <random>

#include "doctest.h"
#include "pdegp/errors.hpp"
#include "pdegp/posterior.hpp"

using namespace pdegp;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Case {
  PdeProblem p;
  ObservationOperator obs;
  TrainingSet ts;
  SyntheticData data;
};

Case piecewise_case(int n, Mat points) {
  Case c{problems::piecewise_diffusion_1d(), ObservationOperator::pointwise(std::move(points)),
         {}, {}};
  DesignSpec spec;
  spec.n = n;
  spec.n_bar = 10;
  spec.d_f = 8;
  spec.d_g = 2;
  spec.mesh_n = 256;
  c.ts = build_training(c.p, c.obs, spec);
  c.data = make_data(c.p, c.obs, v2(0.098, 0.430), 1e-3, 4, 256);
  return c;
}

EmulatorModel forward_model(EmulatorFamily fam) {
  EmulatorModel m;
  m.family = fam;
  m.k_p = Kernel(KernelFamily::SquaredExponential, {0.1, 0.8}, 2);
  if (fam != EmulatorFamily::Baseline) m.k_s = Kernel(KernelFamily::Matern52, {1.0, 0.3}, 1);
  m.jitter = 1e-12;
  return m;
}

SmoothedUniformPrior unit_prior(int d) {
  return SmoothedUniformPrior{ThetaBox{Vec::Constant(d, -1.0), Vec::Constant(d, 1.0)}, 1e-3};
}

std::vector<ApproxPosterior> all_posteriors(const Case& c) {
  std::vector<ApproxPosterior> out;
  for (auto fam : {EmulatorFamily::Baseline, EmulatorFamily::SpatiallyCorrelated,
                   EmulatorFamily::PdeConstrained}) {
    auto gp = std::make_shared<const ConditionedGP>(
        ConditionedGP::condition(forward_model(fam), c.ts, c.p, c.obs));
    for (auto k : {PosteriorKind::MeanForward, PosteriorKind::MarginalForward}) {
      out.push_back(ApproxPosterior::emulated(k, gp, c.data, unit_prior(2)));
    }
  }
  EmulatorModel pm;
  pm.family = EmulatorFamily::Potential;
  pm.k_p = Kernel(KernelFamily::SquaredExponential, {100.0, 0.6}, 2);
  auto pgp = std::make_shared<const ConditionedGP>(ConditionedGP::condition(
      pm, potential_training(c.ts, c.data.y, c.data.noise_var), c.p, c.obs));
  for (auto k : {PosteriorKind::MeanPotential, PosteriorKind::MarginalPotential}) {
    out.push_back(ApproxPosterior::emulated(k, pgp, c.data, unit_prior(2)));
  }
  return out;
}

}  // namespace

TEST_CASE("smoothed uniform prior") {
  const auto prior = unit_prior(2);
  CHECK(prior.log_density(v2(0.3, -0.9)) == 0.0);
  CHECK(prior.grad_log_density(v2(0.3, -0.9)).norm() == 0.0);
  CHECK(prior.log_density(v2(1.1, 0.0)) == doctest::Approx(-0.01 / 2e-3));
  CHECK(prior.grad_log_density(v2(1.1, 0.0))(0) == doctest::Approx(-100.0));
  // gradient is continuous across the boundary
  CHECK(prior.grad_log_density(v2(1.0 + 1e-12, 0.0)).norm() < 1e-8);
}

TEST_CASE("gradients match finite differences for every posterior") {
  const auto c = piecewise_case(4, equally_spaced_points_1d(6));
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  for (const auto& post : all_posteriors(c)) {
    CAPTURE(to_string(post.kind()));
    CAPTURE(to_string(post.emulator()->model().family));
    for (int t = 0; t < 20; ++t) {
      const Vec th = v2(u(rng), u(rng));
      const Vec g = post.grad_log_density(th);
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6;
        Vec tp = th, tm = th;
        tp(i) += h;
        tm(i) -= h;
        const double fd = (post.log_density(tp) - post.log_density(tm)) / (2 * h);
        CHECK(g(i) == doctest::Approx(fd).epsilon(1e-5).scale(1e-2));
      }
    }
  }
}

TEST_CASE("marginal collapses to mean where the emulator is exact") {
  const auto c = piecewise_case(4, equally_spaced_points_1d(6));
  auto gp = std::make_shared<const ConditionedGP>(
      ConditionedGP::condition(forward_model(EmulatorFamily::Baseline), c.ts, c.p, c.obs));
  const auto mean = ApproxPosterior::emulated(PosteriorKind::MeanForward, gp, c.data, unit_prior(2));
  const auto marg =
      ApproxPosterior::emulated(PosteriorKind::MarginalForward, gp, c.data, unit_prior(2));
  for (int i = 0; i < c.ts.n(); ++i) {
    const Vec th = c.ts.theta.col(i);
    const double shift = -0.5 * 6 * std::log(c.data.noise_var);
    CHECK(marg.log_density(th) == doctest::Approx(mean.log_density(th) + shift).epsilon(1e-8));
  }
  // zero misfit leaves only the prior
  SyntheticData exact = c.data;
  const Vec th = v2(0.2, 0.1);
  exact.y = gp->predict_mean(th);
  const auto zero = ApproxPosterior::emulated(PosteriorKind::MeanForward, gp, exact, unit_prior(2));
  CHECK(zero.log_density(th) == 0.0);
}

TEST_CASE("potential marginal inflates by half the emulator variance") {
  const auto c = piecewise_case(4, equally_spaced_points_1d(6));
  const auto posts = all_posteriors(c);
  const auto& mean = posts[6];
  const auto& marg = posts[7];
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 20; ++t) {
    const Vec th = v2(u(rng), u(rng));
    const double kn = marg.emulator()->predict_cov(th, th)(0, 0);
    CHECK(marg.log_density(th) - mean.log_density(th) == doctest::Approx(0.5 * kn));
    CHECK(kn >= -1e-10);
  }
}

TEST_CASE("likelihood vanishes far from the design") {
  const auto c = piecewise_case(4, equally_spaced_points_1d(6));
  EmulatorModel m = forward_model(EmulatorFamily::Baseline);
  m.k_p = Kernel(KernelFamily::SquaredExponential, {0.1, 0.1}, 2);
  auto gp = std::make_shared<const ConditionedGP>(ConditionedGP::condition(m, c.ts, c.p, c.obs));
  const auto post = ApproxPosterior::emulated(PosteriorKind::MeanForward, gp, c.data, unit_prior(2));
  const Vec th = v2(3.0, -2.5);
  const Vec g = post.grad_log_density(th);
  const Vec g0 = post.prior().grad_log_density(th);
  CHECK((g - g0).norm() < 1e-8 * g0.norm());
}

TEST_CASE("posterior is invariant to the order of observations") {
  Mat pts = equally_spaced_points_1d(6);
  const auto c = piecewise_case(4, pts);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Mat ppts(1, 6);
  for (int j = 0; j < 6; ++j) ppts(0, j) = pts(0, perm[j]);
  Case d = c;
  d.obs = ObservationOperator::pointwise(ppts);
  for (int j = 0; j < 6; ++j) {
    d.ts.gx.col(j) = c.ts.gx.col(perm[j]);
    d.data.y(j) = c.data.y(perm[j]);
  }
  for (auto fam : {EmulatorFamily::Baseline, EmulatorFamily::SpatiallyCorrelated,
                   EmulatorFamily::PdeConstrained}) {
    auto a = std::make_shared<const ConditionedGP>(
        ConditionedGP::condition(forward_model(fam), c.ts, c.p, c.obs));
    auto b = std::make_shared<const ConditionedGP>(
        ConditionedGP::condition(forward_model(fam), d.ts, d.p, d.obs));
    const auto pa = ApproxPosterior::emulated(PosteriorKind::MarginalForward, a, c.data, unit_prior(2));
    const auto pb = ApproxPosterior::emulated(PosteriorKind::MarginalForward, b, d.data, unit_prior(2));
    const Vec th = v2(0.4, -0.2);
    CHECK(pa.log_density(th) == doctest::Approx(pb.log_density(th)).epsilon(1e-9));
  }
}

TEST_CASE("closed-form posterior on the constant-diffusion problem") {
  const auto p = problems::constant_diffusion_1d();
  std::vector<double> sds;
  for (int d_y : {5, 20, 80}) {
    const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(d_y));
    const auto data = make_data(p, obs, v1(0.314), 1e-5, 17, 512);
    const auto grid = true_posterior_grid(p, obs, data, unit_prior(1), {uniform_axis(-1.2, 1.2, 4001)}, 512);
    CHECK(grid.integral() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(grid.argmax()(0) - 0.314) < 0.05);
    sds.push_back(grid.stddev(0));
  }
  CHECK(sds[1] < sds[0]);
  CHECK(sds[2] < sds[1]);

  // closed form agrees with the solver
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(5));
  const auto data = make_data(p, obs, v1(0.314), 1e-5, 17, 512);
  const auto cf = ApproxPosterior::closed_form(p, obs, data, unit_prior(1));
  const auto sv = ApproxPosterior::via_solver(p, obs, data, unit_prior(1), 512);
  for (double t : {-0.7, 0.0, 0.3, 0.9}) {
    CHECK(cf.closed_form_forward(t).isApprox(forward_map(p, obs, v1(t), 512), 1e-5));
    CHECK(cf.grad_log_density(v1(t))(0) ==
          doctest::Approx(sv.grad_log_density(v1(t))(0)).epsilon(1e-3));
  }
  // closed form with integral observations
  const auto avg = ObservationOperator::local_average(equal_intervals(4));
  const auto da = make_data(p, avg, v1(0.314), 1e-5, 3, 512);
  const auto cfa = ApproxPosterior::closed_form(p, avg, da, unit_prior(1));
  CHECK(cfa.closed_form_forward(0.2).isApprox(forward_map(p, avg, v1(0.2), 1024), 1e-6));
  CHECK_THROWS_AS(ApproxPosterior::closed_form(problems::piecewise_diffusion_1d(), obs, data,
                                               unit_prior(2)),
                  CapabilityError);
}

TEST_CASE("gradient vanishes at the grid mode") {
  const auto p = problems::constant_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(5));
  const auto data = make_data(p, obs, v1(0.314), 1e-4, 5, 512);
  const auto cf = ApproxPosterior::closed_form(p, obs, data, unit_prior(1));
  const auto grid = posterior_grid(cf, {uniform_axis(-1, 1, 20001)});
  const double mode = grid.argmax()(0);
  const double h = 1e-4;
  CHECK(cf.grad_log_density(v1(mode - h))(0) > 0.0);
  CHECK(cf.grad_log_density(v1(mode + h))(0) < 0.0);
  const double curvature =
      std::abs(cf.grad_log_density(v1(mode + h))(0) - cf.grad_log_density(v1(mode - h))(0)) /
      (2 * h);
  CHECK(std::abs(cf.grad_log_density(v1(mode))(0)) <= curvature * h);
}

TEST_CASE("grid densities are capped at two dimensions") {
  const auto p = problems::piecewise10_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(6));
  SyntheticData data;
  data.y = Vec::Zero(6);
  data.noise_var = 1e-4;
  CHECK_THROWS_AS(true_posterior_grid(p, obs, data, unit_prior(10), {}, 64), CapabilityError);
}

TEST_CASE("kind and family must agree") {
  const auto c = piecewise_case(2, equally_spaced_points_1d(6));
  auto gp = std::make_shared<const ConditionedGP>(
      ConditionedGP::condition(forward_model(EmulatorFamily::Baseline), c.ts, c.p, c.obs));
  CHECK_THROWS_AS(
      ApproxPosterior::emulated(PosteriorKind::MeanPotential, gp, c.data, unit_prior(2)),
      InputError);
  CHECK(posterior_kind_from_string("marginal") == PosteriorKind::MarginalForward);
}
