#include <set>

#include "doctest.h"
#include "pdegp/design.hpp"
#include "pdegp/errors.hpp"

using namespace pdegp;

TEST_CASE("halton radical inverses") {
  const Mat h = halton(4, 1, 1);
  CHECK(h(0, 0) == 0.5);
  CHECK(h(0, 1) == 0.25);
  CHECK(h(0, 2) == 0.75);
  CHECK(h(0, 3) == 0.125);
  const Mat h2 = halton(2, 2, 1);
  CHECK(h2(0, 0) == 0.5);
  CHECK(h2(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(h2(0, 1) == 0.25);
  CHECK(h2(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(halton(1, 3, 0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(halton(2, 21, 1), InputError);
}

TEST_CASE("training set layout") {
  const auto p = problems::constant_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(5));
  DesignSpec spec;
  spec.n = 1;
  spec.mesh_n = 128;
  auto ts = build_training(p, obs, spec);
  CHECK(ts.theta(0, 0) == 0.0);
  CHECK(ts.gx.rows() == 1);
  CHECK(ts.gx.cols() == 5);
  CHECK((ts.gx.row(0).transpose() - forward_map(p, obs, ts.theta.col(0), 128)).norm() == 0.0);

  const auto pw = problems::piecewise_diffusion_1d();
  spec.n = 4;
  spec.n_bar = 10;
  spec.d_f = 5;
  spec.d_g = 2;
  ts = build_training(pw, obs, spec);
  std::set<std::pair<double, double>> seen;
  for (int i = 0; i < 4; ++i) {
    CHECK(pw.theta_box.contains(ts.theta.col(i)));
    seen.insert({ts.theta(0, i), ts.theta(1, i)});
  }
  for (int i = 0; i < 10; ++i) seen.insert({ts.theta_bar(0, i), ts.theta_bar(1, i)});
  CHECK(seen.size() == 14);
  for (Eigen::Index m = 0; m < ts.xf.cols(); ++m) {
    CHECK(pw.diffusion.distance_to_interface(ts.xf(0, m)) >= 1e-3);
  }
  CHECK(ts.xg(0, 0) == 0.0);
  CHECK(ts.xg(0, 1) == 1.0);
  CHECK(ts.g_vals(3, 1) == 2.0);
  CHECK(ts.f_vals(0, 2) == doctest::Approx(4.0 * ts.xf(0, 2)));

  const auto again = build_training(pw, obs, spec);
  CHECK(to_json(again).dump() == to_json(ts).dump());
  const auto round = training_from_json(nlohmann::json::parse(to_json(ts).dump()));
  CHECK(to_json(round).dump() == to_json(ts).dump());

  spec.d_g = 3;
  CHECK_THROWS_AS(build_training(pw, obs, spec), ConfigError);
}

TEST_CASE("2D boundary points split over segments") {
  const auto p = problems::flow_cell_2d();
  const Mat xg = boundary_points(p, 8);
  CHECK(xg.cols() == 8);
  for (Eigen::Index i = 0; i < xg.cols(); ++i) CHECK(p.on_boundary(xg.col(i)));
  CHECK_THROWS_AS(boundary_points(p, 6), ConfigError);
  const Mat xf = interior_points(p, 20);
  for (Eigen::Index i = 0; i < xf.cols(); ++i) {
    CHECK(p.diffusion.distance_to_interface(xf(0, i)) >= 1e-3);
    CHECK(!p.on_boundary(xf.col(i)));
  }
}

TEST_CASE("potential training values") {
  const auto p = problems::constant_diffusion_1d();
  const auto obs = ObservationOperator::pointwise(equally_spaced_points_1d(3));
  DesignSpec spec;
  spec.n = 3;
  spec.mesh_n = 64;
  const auto ts = build_training(p, obs, spec);
  const Vec y = Vec::Constant(3, 0.1);
  const auto pot = potential_training(ts, y, 1e-2);
  CHECK(pot.gx.cols() == 1);
  const double phi = 0.5 * (ts.gx.row(1).transpose() - y).squaredNorm() / 1e-2;
  CHECK(pot.gx(1, 0) == doctest::Approx(phi));
}
