#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <utility>

#include "pdegp/emulator.hpp"
#include "pdegp/grid.hpp"
#include "pdegp/pde.hpp"

namespace pdegp {

/// Moreau-Yoshida envelope of the uniform prior on a box:
/// log pi0 = -dist(theta, box)^2 / (2 lambda).
struct SmoothedUniformPrior {
  ThetaBox box;
  double lambda = 1e-3;

  double log_density(const VecRef& theta) const;
  Vec grad_log_density(const VecRef& theta) const;
};

enum class PosteriorKind {
  MeanForward,
  MarginalForward,
  MeanPotential,
  MarginalPotential,
  TrueClosedForm,
  TrueViaSolver
};

std::string_view to_string(PosteriorKind k);
PosteriorKind posterior_kind_from_string(std::string_view name);

/// Unnormalized log posterior with its gradient. Immutable and thread-safe.
class ApproxPosterior {
 public:
  /// Emulator-based kinds. Forward kinds need a forward-map emulator, potential
  /// kinds a potential emulator trained against the same data.
  static ApproxPosterior emulated(PosteriorKind kind, std::shared_ptr<const ConditionedGP> gp,
                                  SyntheticData data, SmoothedUniformPrior prior);
  /// Exact likelihood for constant diffusion in 1D with Dirichlet data and a
  /// linear source, where u is a cubic polynomial in x.
  static ApproxPosterior closed_form(const PdeProblem& p, const ObservationOperator& obs,
                                     SyntheticData data, SmoothedUniformPrior prior);
  /// Exact likelihood through the reference solver; gradient by central differences.
  static ApproxPosterior via_solver(const PdeProblem& p, const ObservationOperator& obs,
                                    SyntheticData data, SmoothedUniformPrior prior, int mesh_n);

  PosteriorKind kind() const { return kind_; }
  int dim() const { return prior_.box.dim(); }
  const SyntheticData& data() const { return data_; }
  const SmoothedUniformPrior& prior() const { return prior_; }
  const ConditionedGP* emulator() const { return gp_.get(); }

  double log_density(const VecRef& theta) const;
  Vec grad_log_density(const VecRef& theta) const;
  /// Log density and, when requested, its gradient from one emulator call.
  std::pair<double, Vec> evaluate(const VecRef& theta, bool with_gradient) const;

  /// Closed-form forward map (TrueClosedForm only) and its theta-derivative.
  Vec closed_form_forward(double theta, Vec* d_theta = nullptr) const;

 private:
  PosteriorKind kind_ = PosteriorKind::MeanForward;
  std::shared_ptr<const ConditionedGP> gp_;
  SyntheticData data_;
  SmoothedUniformPrior prior_;
  std::optional<PdeProblem> problem_;
  std::optional<ObservationOperator> obs_;
  int mesh_n_ = 0;
};

/// Normalized posterior density over a lattice (d_theta <= 2).
GridDensity posterior_grid(const ApproxPosterior& post, std::vector<Vec> axes);

/// Ground-truth density table: closed form when the problem admits one,
/// otherwise the reference solver.
GridDensity true_posterior_grid(const PdeProblem& p, const ObservationOperator& obs,
                                const SyntheticData& data, const SmoothedUniformPrior& prior,
                                std::vector<Vec> axes, int mesh_n);

/// True when closed_form() accepts the problem.
bool has_closed_form(const PdeProblem& p);

}  // namespace pdegp
