#include "pdegp/design.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pdegp/errors.hpp"

namespace pdegp {

namespace {

constexpr std::array<int, 20> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                         31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double radical_inverse(long long index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

nlohmann::json mat_to_json(const Mat& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j, Eigen::Index rows_if_empty) {
  if (j.empty()) return Mat(rows_if_empty, 0);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) {
      throw InputError("ragged matrix in training-set JSON");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

// Points stored as columns serialize as a list of points.
nlohmann::json points_to_json(const Mat& cols) { return mat_to_json(cols.transpose()); }

Mat points_from_json(const nlohmann::json& j, Eigen::Index dim) {
  if (j.empty()) return Mat(dim, 0);
  return mat_from_json(j, 0).transpose();
}

}  // namespace

Mat halton(int n, int dim, int skip) {
  if (dim < 1 || dim > static_cast<int>(kPrimes.size())) {
    throw InputError("Halton dimension must be between 1 and 20");
  }
  if (n < 0 || skip < 0) throw InputError("Halton count and skip must be non-negative");
  Mat out(dim, n);
  for (int k = 0; k < n; ++k) {
    for (int d = 0; d < dim; ++d) out(d, k) = radical_inverse(skip + k, kPrimes[d]);
  }
  return out;
}

Mat interior_points(const PdeProblem& p, int d_f) {
  if (d_f < 0) throw InputError("d_f must be non-negative");
  const auto ifaces = p.diffusion.interfaces();
  auto snap = [&](double x, double spacing) {
    const double gap = std::max(1e-3, 0.25 * spacing);
    for (double b : ifaces) {
      if (std::abs(x - b) < gap) x = (x >= b) ? b + gap : b - gap;
    }
    return x;
  };
  Mat pts(p.spatial_dim, d_f);
  if (p.spatial_dim == 1) {
    const double spacing = 1.0 / (d_f + 1.0);
    for (int i = 0; i < d_f; ++i) pts(0, i) = snap((i + 1.0) * spacing, spacing);
  } else {
    const Mat h = halton(d_f, 2, 1);
    const double spacing = 1.0 / std::sqrt(std::max(d_f, 1));
    for (int i = 0; i < d_f; ++i) {
      pts(0, i) = snap(h(0, i), spacing);
      pts(1, i) = h(1, i);
    }
  }
  return pts;
}

Mat boundary_points(const PdeProblem& p, int d_g) {
  if (d_g == 0) return Mat(p.spatial_dim, 0);
  if (p.spatial_dim == 1) {
    if (d_g != 2) throw ConfigError("/design/d_g", "a 1D domain has exactly 2 boundary points");
    Mat pts(1, 2);
    pts << 0.0, 1.0;
    return pts;
  }
  if (d_g % 4 != 0) {
    throw ConfigError("/design/d_g", "2D boundary points are split evenly over 4 segments");
  }
  const int m = d_g / 4;
  Mat pts(2, d_g);
  int c = 0;
  for (int k = 0; k < m; ++k) {
    const double t = (k + 1.0) / (m + 1.0);
    pts.col(c++) << 0.0, t;  // left
    pts.col(c++) << 1.0, t;  // right
    pts.col(c++) << t, 0.0;  // bottom
    pts.col(c++) << t, 1.0;  // top
  }
  return pts;
}

TrainingSet build_training(const PdeProblem& p, const ObservationOperator& obs,
                           const DesignSpec& spec) {
  p.validate();
  if (spec.n < 0 || spec.n_bar < 0) throw ConfigError("/design", "design sizes must be >= 0");
  const int dt = p.dim_theta();
  TrainingSet ts;
  const Mat unit = halton(spec.n + spec.n_bar, dt, 1);
  ts.theta.resize(dt, spec.n);
  for (int i = 0; i < spec.n; ++i) ts.theta.col(i) = p.theta_box.from_unit(unit.col(i));
  ts.theta_bar.resize(dt, spec.n_bar);
  for (int i = 0; i < spec.n_bar; ++i) {
    ts.theta_bar.col(i) = p.theta_box.from_unit(unit.col(spec.n + i));
  }
  ts.gx.resize(spec.n, obs.d_y());
  for (int i = 0; i < spec.n; ++i) {
    ts.gx.row(i) = forward_map(p, obs, ts.theta.col(i), spec.mesh_n).transpose();
  }
  ts.xf = spec.n_bar > 0 ? interior_points(p, spec.d_f) : Mat(p.spatial_dim, 0);
  ts.xg = spec.n_bar > 0 ? boundary_points(p, spec.d_g) : Mat(p.spatial_dim, 0);
  ts.f_vals.resize(spec.n_bar, ts.xf.cols());
  ts.g_vals.resize(spec.n_bar, ts.xg.cols());
  for (int i = 0; i < spec.n_bar; ++i) {
    for (Eigen::Index m = 0; m < ts.xf.cols(); ++m) ts.f_vals(i, m) = p.source(ts.xf.col(m));
    for (Eigen::Index m = 0; m < ts.xg.cols(); ++m) {
      ts.g_vals(i, m) = p.condition_at(ts.xg.col(m)).value;
    }
  }
  ts.provenance = {{"design", "halton"},   {"halton_skip", 1},     {"n", spec.n},
                   {"n_bar", spec.n_bar}, {"d_f", spec.d_f},      {"d_g", spec.d_g},
                   {"mesh_n", spec.mesh_n}, {"seed", spec.seed}};
  return ts;
}

TrainingSet potential_training(const TrainingSet& ts, const VecRef& y, double noise_var) {
  if (y.size() != ts.d_y()) throw InputError("data length does not match training outputs");
  if (!(noise_var > 0.0)) throw InputError("noise variance must be positive");
  TrainingSet out = ts;
  out.gx.resize(ts.n(), 1);
  for (int i = 0; i < ts.n(); ++i) {
    out.gx(i, 0) = 0.5 * (ts.gx.row(i).transpose() - y).squaredNorm() / noise_var;
  }
  out.theta_bar.resize(ts.theta.rows(), 0);
  out.f_vals.resize(0, 0);
  out.g_vals.resize(0, 0);
  out.provenance["potential"] = true;
  return out;
}

nlohmann::json to_json(const TrainingSet& ts) {
  return {{"theta", points_to_json(ts.theta)},
          {"gx", mat_to_json(ts.gx)},
          {"theta_bar", points_to_json(ts.theta_bar)},
          {"xf", points_to_json(ts.xf)},
          {"xg", points_to_json(ts.xg)},
          {"f_vals", mat_to_json(ts.f_vals)},
          {"g_vals", mat_to_json(ts.g_vals)},
          {"dims", {{"d_theta", ts.theta.rows()}, {"spatial_dim", ts.xf.rows()}}},
          {"provenance", ts.provenance}};
}

TrainingSet training_from_json(const nlohmann::json& j) {
  TrainingSet ts;
  const auto dt = j.at("dims").at("d_theta").get<Eigen::Index>();
  const auto sd = j.at("dims").at("spatial_dim").get<Eigen::Index>();
  ts.theta = points_from_json(j.at("theta"), dt);
  ts.theta_bar = points_from_json(j.at("theta_bar"), dt);
  ts.xf = points_from_json(j.at("xf"), sd);
  ts.xg = points_from_json(j.at("xg"), sd);
  ts.gx = mat_from_json(j.at("gx"), ts.theta.cols());
  ts.f_vals = mat_from_json(j.at("f_vals"), ts.theta_bar.cols());
  ts.g_vals = mat_from_json(j.at("g_vals"), ts.theta_bar.cols());
  ts.provenance = j.value("provenance", nlohmann::json::object());
  return ts;
}

}  // namespace pdegp
