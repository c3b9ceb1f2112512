#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>

#include "json.hpp"
#include "pdegp/design.hpp"
#include "pdegp/kernels.hpp"
#include "pdegp/pde.hpp"
#include "pdegp/types.hpp"

namespace pdegp {

enum class EmulatorFamily { Baseline, SpatiallyCorrelated, PdeConstrained, Potential };

std::string_view to_string(EmulatorFamily f);
EmulatorFamily emulator_family_from_string(std::string_view name);

struct EmulatorModel {
  EmulatorFamily family = EmulatorFamily::Baseline;
  Kernel k_p;
  std::optional<Kernel> k_s;
  /// Initial relative jitter; the ladder escalates by 10x up to 1e-6 on failure.
  double jitter = 1e-10;

  void validate(int dim_theta, int spatial_dim) const;
  nlohmann::json to_json() const;
};

/// Everything the posterior needs at one theta.
struct Prediction {
  Vec mean;                   // d_out
  Mat cov;                    // d_out x d_out, K_N(theta, theta)
  Mat mean_grad;              // d_out x d_theta
  std::vector<Mat> cov_grad;  // d_theta entries of d_out x d_out
};

/// Zero-mean GP emulator conditioned on a training set. Immutable after
/// construction; all predict calls are const and thread-safe.
class ConditionedGP {
 public:
  static ConditionedGP condition(const EmulatorModel& model, const TrainingSet& training,
                                 const PdeProblem& problem, const ObservationOperator& obs);

  /// Reuses a stored Cholesky factor when its key matches this model and training set.
  static ConditionedGP condition_cached(const EmulatorModel& model, const TrainingSet& training,
                                        const PdeProblem& problem,
                                        const ObservationOperator& obs,
                                        const nlohmann::json& cache);

  const EmulatorModel& model() const { return model_; }
  const TrainingSet& training() const { return training_; }
  int d_out() const { return d_out_; }
  int dim_theta() const { return dim_theta_; }
  int gram_size() const { return static_cast<int>(chol_.rows()); }
  double jitter_used() const { return jitter_used_; }

  Vec predict_mean(const VecRef& theta) const;
  Mat predict_cov(const VecRef& theta, const VecRef& theta_prime) const;
  Mat predict_mean_grad(const VecRef& theta) const;
  /// Gradient of w . m_N(theta); avoids forming the full Jacobian.
  Vec grad_mean_dot(const VecRef& theta, const VecRef& w) const;
  std::vector<Mat> predict_cov_grad(const VecRef& theta) const;
  Prediction predict(const VecRef& theta, bool with_gradients) const;

  /// Predictive mean of the latent field u(theta, x) at arbitrary points
  /// (columns of x). Only for spatially structured families.
  Vec predict_field_mean(const VecRef& theta, const Mat& x) const;

  /// Prior covariance of the outputs at equal inputs: S = K_s(X, X), I or [1].
  const Mat& output_covariance() const { return s_uu_; }

  double log_marginal_likelihood() const;

  /// Key identifying (model, training); used for cache validation.
  std::string cache_key() const;
  nlohmann::json cache_json() const;

 private:
  struct Slot {
    int group;                                  // index into groups_
    std::vector<std::pair<int, double>> atoms;  // (atom, coefficient)
  };

  void build_structure(const PdeProblem& problem, const ObservationOperator& obs);
  void factorize(const Mat* cached_chol, double cached_jitter);
  Mat assemble_gram() const;
  Vec kp_row(const VecRef& theta) const;
  Mat kp_grad_rows(const VecRef& theta) const;
  Mat whitened(const Vec& k) const;

  EmulatorModel model_;
  TrainingSet training_;
  int d_out_ = 0;
  int dim_theta_ = 0;
  bool scalar_form_ = true;

  // Scalar form: Gram is k_p(Theta, Theta) (x) S, groups_ = Theta.
  // Joint form: Gram over slots, groups_ = [Theta, Theta_bar].
  Mat groups_;
  std::vector<Slot> slots_;
  std::vector<Vec> atom_points_;
  std::vector<MultiIndex> atom_orders_;
  Mat obs_atoms_;  // d_out x n_atoms, observation functionals over atoms
  Mat atom_cov_;   // n_atoms x n_atoms spatial covariance of atoms
  Mat s_uu_;

  Mat chol_;  // lower factor of the jittered Gram
  double jitter_used_ = 0.0;
  Mat alpha_;      // scalar: N x d_out; joint: M x 1
  Mat v_;          // d_out x T, mean weights per group
  Mat y_;          // joint: L^{-1} times the slot/test cross-covariance, M x (T d_out)
  Vec z_;          // joint training vector
};

/// Picks k_p (and k_s, if present) lengthscales from a grid by maximizing
/// the log marginal likelihood.
EmulatorModel select_by_marginal_likelihood(const EmulatorModel& base,
                                            const TrainingSet& training,
                                            const PdeProblem& problem,
                                            const ObservationOperator& obs,
                                            const std::vector<double>& kp_lengthscales,
                                            const std::vector<double>& ks_lengthscales);

/// Stable 64-bit FNV-1a digest as 16 hex characters.
std::string fnv1a_hex(std::string_view data);

}  // namespace pdegp
