#include "pdegp/posterior.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pdegp/errors.hpp"

namespace pdegp {

double SmoothedUniformPrior::log_density(const VecRef& theta) const {
  return -(theta - box.project(theta)).squaredNorm() / (2.0 * lambda);
}

Vec SmoothedUniformPrior::grad_log_density(const VecRef& theta) const {
  return -(theta - box.project(theta)) / lambda;
}

std::string_view to_string(PosteriorKind k) {
  switch (k) {
    case PosteriorKind::MeanForward: return "mean";
    case PosteriorKind::MarginalForward: return "marginal";
    case PosteriorKind::MeanPotential: return "mean_potential";
    case PosteriorKind::MarginalPotential: return "marginal_potential";
    case PosteriorKind::TrueClosedForm: return "true_closed_form";
    case PosteriorKind::TrueViaSolver: return "true_solver";
  }
  return "?";
}

PosteriorKind posterior_kind_from_string(std::string_view name) {
  for (auto k : {PosteriorKind::MeanForward, PosteriorKind::MarginalForward,
                 PosteriorKind::MeanPotential, PosteriorKind::MarginalPotential,
                 PosteriorKind::TrueClosedForm, PosteriorKind::TrueViaSolver}) {
    if (name == to_string(k)) return k;
  }
  throw InputError("unknown posterior kind '" + std::string(name) + "'");
}

bool has_closed_form(const PdeProblem& p) {
  if (p.spatial_dim != 1 || p.diffusion.kind() != DiffusionField::Kind::Constant) return false;
  for (const auto& bc : p.boundary) {
    if (bc.kind != BoundaryKind::Dirichlet) return false;
  }
  return true;
}

ApproxPosterior ApproxPosterior::emulated(PosteriorKind kind,
                                          std::shared_ptr<const ConditionedGP> gp,
                                          SyntheticData data, SmoothedUniformPrior prior) {
  if (!gp) throw InputError("emulated posterior needs a conditioned emulator");
  const bool potential =
      kind == PosteriorKind::MeanPotential || kind == PosteriorKind::MarginalPotential;
  const bool forward = kind == PosteriorKind::MeanForward || kind == PosteriorKind::MarginalForward;
  if (!potential && !forward) throw InputError("exact kinds do not use an emulator");
  const bool gp_potential = gp->model().family == EmulatorFamily::Potential;
  if (potential != gp_potential) {
    throw InputError("posterior kind and emulator family disagree on the emulated quantity");
  }
  if (forward && gp->d_out() != data.y.size()) {
    throw InputError("emulator output size does not match the data");
  }
  if (!(data.noise_var > 0.0)) throw InputError("noise variance must be positive");
  if (gp->dim_theta() != prior.box.dim()) throw InputError("prior and emulator dimensions differ");
  ApproxPosterior ap;
  ap.kind_ = kind;
  ap.gp_ = std::move(gp);
  ap.data_ = std::move(data);
  ap.prior_ = std::move(prior);
  return ap;
}

ApproxPosterior ApproxPosterior::closed_form(const PdeProblem& p, const ObservationOperator& obs,
                                             SyntheticData data, SmoothedUniformPrior prior) {
  if (!has_closed_form(p)) {
    throw CapabilityError("closed form needs constant diffusion in 1D with Dirichlet data");
  }
  if (!(data.noise_var > 0.0)) throw InputError("noise variance must be positive");
  ApproxPosterior ap;
  ap.kind_ = PosteriorKind::TrueClosedForm;
  ap.data_ = std::move(data);
  ap.prior_ = std::move(prior);
  ap.problem_ = p;
  ap.obs_ = obs;
  return ap;
}

ApproxPosterior ApproxPosterior::via_solver(const PdeProblem& p, const ObservationOperator& obs,
                                            SyntheticData data, SmoothedUniformPrior prior,
                                            int mesh_n) {
  if (!(data.noise_var > 0.0)) throw InputError("noise variance must be positive");
  ApproxPosterior ap;
  ap.kind_ = PosteriorKind::TrueViaSolver;
  ap.data_ = std::move(data);
  ap.prior_ = std::move(prior);
  ap.problem_ = p;
  ap.obs_ = obs;
  ap.mesh_n_ = mesh_n;
  return ap;
}

Vec ApproxPosterior::closed_form_forward(double theta, Vec* d_theta) const {
  if (kind_ != PosteriorKind::TrueClosedForm) throw CapabilityError("no closed form available");
  const auto& p = *problem_;
  const double g0 = p.condition(Segment::Left).value;
  const double g1 = p.condition(Segment::Right).value;
  const double c0 = p.source.constant;
  const double c1 = p.source.gradient.size() > 0 ? p.source.gradient(0) : 0.0;
  // -(e^theta u')' = c0 + c1 x  =>  u = g0 + (g1 - g0) x + q(x) e^{-theta}
  auto q = [&](double x) {
    return -(c0 * x * x / 2.0 + c1 * x * x * x / 6.0) + (c0 / 2.0 + c1 / 6.0) * x;
  };
  const double e = std::exp(-theta);
  const int d = obs_->d_y();
  Vec g(d);
  if (d_theta) d_theta->resize(d);
  for (int j = 0; j < d; ++j) {
    double val = 0.0, dq = 0.0;
    for (const auto& qp : obs_->functional(j)) {
      const double x = qp.x(0);
      val += qp.weight * (g0 + (g1 - g0) * x + q(x) * e);
      dq += qp.weight * q(x);
    }
    g(j) = val;
    if (d_theta) (*d_theta)(j) = -dq * e;
  }
  return g;
}

std::pair<double, Vec> ApproxPosterior::evaluate(const VecRef& theta, bool with_gradient) const {
  if (theta.size() != dim()) throw InputError("theta has the wrong dimension");
  const double s2 = data_.noise_var;
  const Vec& y = data_.y;
  double lp = prior_.log_density(theta);
  Vec grad;
  if (with_gradient) grad = prior_.grad_log_density(theta);

  switch (kind_) {
    case PosteriorKind::MeanForward: {
      const Vec r = gp_->predict_mean(theta) - y;
      lp += -0.5 * r.squaredNorm() / s2;
      if (with_gradient) grad += gp_->grad_mean_dot(theta, -r / s2);
      break;
    }
    case PosteriorKind::MarginalForward: {
      const Prediction pr = gp_->predict(theta, with_gradient);
      const Vec r = pr.mean - y;
      Mat a = pr.cov;
      a.diagonal().array() += s2;
      Eigen::LLT<Mat> llt(a);
      if (llt.info() != Eigen::Success) {
        // Round-off can leave K_N slightly indefinite; use its PSD part.
        Eigen::SelfAdjointEigenSolver<Mat> es(pr.cov);
        a = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
            es.eigenvectors().transpose();
        a.diagonal().array() += s2;
        llt.compute(a);
      }
      if (llt.info() != Eigen::Success) {
        throw NumericalError("K_N + noise covariance is not positive definite");
      }
      const Vec ar = llt.solve(r);
      const Mat l = llt.matrixL();
      lp += -0.5 * r.dot(ar) - l.diagonal().array().log().sum();
      if (with_gradient) {
        const Mat ainv = llt.solve(Mat::Identity(a.rows(), a.cols()));
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          const Mat& dk = pr.cov_grad[i];
          grad(i) += -pr.mean_grad.col(i).dot(ar) + 0.5 * ar.dot(dk * ar) -
                     0.5 * (ainv.cwiseProduct(dk)).sum();
        }
      }
      break;
    }
    case PosteriorKind::MeanPotential: {
      lp += -gp_->predict_mean(theta)(0);
      if (with_gradient) grad -= gp_->grad_mean_dot(theta, Vec::Ones(1));
      break;
    }
    case PosteriorKind::MarginalPotential: {
      const Prediction pr = gp_->predict(theta, with_gradient);
      lp += -pr.mean(0) + 0.5 * pr.cov(0, 0);
      if (with_gradient) {
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          grad(i) += -pr.mean_grad(0, i) + 0.5 * pr.cov_grad[i](0, 0);
        }
      }
      break;
    }
    case PosteriorKind::TrueClosedForm: {
      Vec dg;
      const Vec r = closed_form_forward(theta(0), with_gradient ? &dg : nullptr) - y;
      lp += -0.5 * r.squaredNorm() / s2;
      if (with_gradient) grad(0) += -dg.dot(r) / s2;
      break;
    }
    case PosteriorKind::TrueViaSolver: {
      auto misfit = [&](const Vec& t) {
        const Vec r = forward_map_unchecked(*problem_, *obs_, t, mesh_n_) - y;
        return -0.5 * r.squaredNorm() / s2;
      };
      const Vec t0 = theta;
      lp += misfit(t0);
      if (with_gradient) {
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          Vec tp = t0, tm = t0;
          tp(i) += h;
          tm(i) -= h;
          grad(i) += (misfit(tp) - misfit(tm)) / (2 * h);
        }
      }
      break;
    }
  }
  return {lp, grad};
}

double ApproxPosterior::log_density(const VecRef& theta) const {
  return evaluate(theta, false).first;
}

Vec ApproxPosterior::grad_log_density(const VecRef& theta) const {
  return evaluate(theta, true).second;
}

GridDensity posterior_grid(const ApproxPosterior& post, std::vector<Vec> axes) {
  if (static_cast<int>(axes.size()) != post.dim()) {
    throw InputError("grid axes must match the parameter dimension");
  }
  if (post.dim() > 2) throw CapabilityError("grid densities are limited to d_theta <= 2");
  return GridDensity::from_log(std::move(axes),
                               [&](const Vec& t) { return post.log_density(t); });
}

GridDensity true_posterior_grid(const PdeProblem& p, const ObservationOperator& obs,
                                const SyntheticData& data, const SmoothedUniformPrior& prior,
                                std::vector<Vec> axes, int mesh_n) {
  if (p.dim_theta() > 2) throw CapabilityError("grid densities are limited to d_theta <= 2");
  const auto post = has_closed_form(p) ? ApproxPosterior::closed_form(p, obs, data, prior)
                                       : ApproxPosterior::via_solver(p, obs, data, prior, mesh_n);
  return posterior_grid(post, std::move(axes));
}

}  // namespace pdegp
