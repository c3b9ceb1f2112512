#pragma once

#include <cstdint>

#include "json.hpp"
#include "pdegp/pde.hpp"
#include "pdegp/types.hpp"

namespace pdegp {

/// Halton points with radical-inverse bases 2, 3, 5, ... Returns a dim x n
/// matrix whose columns are sequence elements skip .. skip + n - 1.
Mat halton(int n, int dim, int skip = 1);

struct DesignSpec {
  int n = 1;       // forward-solve design points
  int n_bar = 0;   // source/boundary design points
  int d_f = 0;     // interior collocation points for f
  int d_g = 0;     // boundary points for g
  int mesh_n = 512;
  std::uint64_t seed = 0;
};

/// Columns of each matrix are points; value matrices are row-per-design-point.
struct TrainingSet {
  Mat theta;      // d_theta x N
  Mat gx;         // N x d_y
  Mat theta_bar;  // d_theta x N_bar  (Theta_f = Theta_g)
  Mat xf;         // spatial_dim x d_f
  Mat xg;         // spatial_dim x d_g
  Mat f_vals;     // N_bar x d_f
  Mat g_vals;     // N_bar x d_g
  nlohmann::json provenance = nlohmann::json::object();

  int n() const { return static_cast<int>(theta.cols()); }
  int n_bar() const { return static_cast<int>(theta_bar.cols()); }
  int d_y() const { return static_cast<int>(gx.cols()); }
  int d_f() const { return static_cast<int>(xf.cols()); }
  int d_g() const { return static_cast<int>(xg.cols()); }
  bool has_constraints() const { return n_bar() > 0 && (d_f() > 0 || d_g() > 0); }
};

/// d_f interior collocation points kept at least max(1e-3, spacing/4) away
/// from diffusion interfaces.
Mat interior_points(const PdeProblem& p, int d_f);
/// 1D: both endpoints (d_g must be 2). 2D: d_g/4 equally spaced points per side.
Mat boundary_points(const PdeProblem& p, int d_g);

TrainingSet build_training(const PdeProblem& p, const ObservationOperator& obs,
                           const DesignSpec& spec);

/// Replaces gx by the potential Phi(theta_i) = |G(theta_i) - y|^2 / (2 noise_var).
TrainingSet potential_training(const TrainingSet& ts, const VecRef& y, double noise_var);

nlohmann::json to_json(const TrainingSet& ts);
TrainingSet training_from_json(const nlohmann::json& j);

}  // namespace pdegp
