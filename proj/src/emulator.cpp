#include "pdegp/emulator.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pdegp/errors.hpp"

namespace pdegp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Cholesky with a relative diagonal jitter ladder. Returns the factor and the
// jitter actually used; throws ConditioningError when the last rung fails.
std::pair<Mat, double> jittered_cholesky(const Mat& a, double start) {
  std::vector<double> ladder{start};
  for (double j = 1e-12; j <= 1.0001e-6; j *= 10.0) {
    if (j > start * 1.0001) ladder.push_back(j);
  }
  const Vec d = a.diagonal().cwiseAbs();
  for (double j : ladder) {
    Mat b = a;
    b.diagonal() += j * d;
    Eigen::LLT<Mat> llt(b);
    if (llt.info() == Eigen::Success) {
      Mat l = llt.matrixL();
      if (l.allFinite() && (l.diagonal().array() > 0.0).all()) return {l, j};
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const double lmin = a.rows() > 0 ? es.eigenvalues().minCoeff() : 0.0;
  throw ConditioningError("training Gram is not positive definite after maximum jitter",
                          lmin);
}

Mat solve_chol(const Mat& l, const Mat& rhs) {
  Mat x = l.triangularView<Eigen::Lower>().solve(rhs);
  return l.transpose().triangularView<Eigen::Upper>().solve(x);
}

}  // namespace

std::string_view to_string(EmulatorFamily f) {
  switch (f) {
    case EmulatorFamily::Baseline: return "baseline";
    case EmulatorFamily::SpatiallyCorrelated: return "spatially_correlated";
    case EmulatorFamily::PdeConstrained: return "pde_constrained";
    case EmulatorFamily::Potential: return "potential";
  }
  return "?";
}

EmulatorFamily emulator_family_from_string(std::string_view name) {
  if (name == "baseline") return EmulatorFamily::Baseline;
  if (name == "spatially_correlated" || name == "spatial") {
    return EmulatorFamily::SpatiallyCorrelated;
  }
  if (name == "pde_constrained" || name == "pde") return EmulatorFamily::PdeConstrained;
  if (name == "potential") return EmulatorFamily::Potential;
  throw InputError("unknown emulator family '" + std::string(name) + "'");
}

void EmulatorModel::validate(int dim_theta, int spatial_dim) const {
  if (k_p.input_dim() != dim_theta) {
    throw InputError("parameter kernel dimension does not match theta");
  }
  const bool spatial = family == EmulatorFamily::SpatiallyCorrelated ||
                       family == EmulatorFamily::PdeConstrained;
  if (spatial) {
    if (!k_s) throw InputError("this emulator family needs a spatial kernel");
    if (k_s->input_dim() != spatial_dim) {
      throw InputError("spatial kernel dimension does not match the domain");
    }
  }
  if (!(jitter >= 0.0) || jitter > 1e-6) throw InputError("jitter must lie in [0, 1e-6]");
}

nlohmann::json EmulatorModel::to_json() const {
  auto kj = [](const Kernel& k) {
    return nlohmann::json{{"family", std::string(pdegp::to_string(k.family()))},
                          {"variance", k.hyper().variance},
                          {"lengthscale", k.hyper().lengthscale},
                          {"input_dim", k.input_dim()}};
  };
  nlohmann::json j{{"family", std::string(pdegp::to_string(family))},
                   {"k_p", kj(k_p)},
                   {"jitter", jitter}};
  if (k_s) j["k_s"] = kj(*k_s);
  return j;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

ConditionedGP ConditionedGP::condition(const EmulatorModel& model, const TrainingSet& training,
                                       const PdeProblem& problem,
                                       const ObservationOperator& obs) {
  ConditionedGP gp;
  gp.model_ = model;
  gp.training_ = training;
  gp.build_structure(problem, obs);
  gp.factorize(nullptr, 0.0);
  return gp;
}

ConditionedGP ConditionedGP::condition_cached(const EmulatorModel& model,
                                              const TrainingSet& training,
                                              const PdeProblem& problem,
                                              const ObservationOperator& obs,
                                              const nlohmann::json& cache) {
  ConditionedGP gp;
  gp.model_ = model;
  gp.training_ = training;
  gp.build_structure(problem, obs);
  if (cache.value("key", std::string()) != gp.cache_key()) {
    gp.factorize(nullptr, 0.0);
    return gp;
  }
  const auto& rows = cache.at("chol");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k <= i; ++k) l(i, k) = rows.at(i).at(k).get<double>();
  }
  gp.factorize(&l, cache.at("jitter").get<double>());
  return gp;
}

void ConditionedGP::build_structure(const PdeProblem& problem, const ObservationOperator& obs) {
  const auto fam = model_.family;
  dim_theta_ = problem.dim_theta();
  model_.validate(dim_theta_, problem.spatial_dim);
  if (training_.theta.rows() != dim_theta_ && training_.n() > 0) {
    throw InputError("training parameters do not match the problem dimension");
  }
  if (fam == EmulatorFamily::Potential) {
    if (training_.gx.cols() != 1) {
      throw InputError("potential emulator expects one scalar output per design point");
    }
  } else if (training_.n() > 0 && training_.d_y() != obs.d_y()) {
    throw InputError("training outputs do not match the observation operator");
  }
  d_out_ = fam == EmulatorFamily::Potential ? 1 : obs.d_y();
  scalar_form_ = fam != EmulatorFamily::PdeConstrained;

  if (fam == EmulatorFamily::Baseline || fam == EmulatorFamily::Potential) {
    s_uu_ = Mat::Identity(d_out_, d_out_);
    groups_ = training_.theta;
    return;
  }

  // Atom registry: distinct (point, derivative order) pairs.
  auto atom = [&](const Vec& x, const MultiIndex& order) {
    for (std::size_t a = 0; a < atom_points_.size(); ++a) {
      if (atom_orders_[a] == order && atom_points_[a] == x) return static_cast<int>(a);
    }
    atom_points_.push_back(x);
    atom_orders_.push_back(order);
    return static_cast<int>(atom_points_.size() - 1);
  };
  const MultiIndex zero(problem.spatial_dim, 0);
  std::vector<std::vector<std::pair<int, double>>> obs_fun(d_out_);
  for (int j = 0; j < d_out_; ++j) {
    for (const auto& q : obs.functional(j)) obs_fun[j].emplace_back(atom(q.x, zero), q.weight);
  }

  if (fam == EmulatorFamily::PdeConstrained) {
    const int n = training_.n(), nb = training_.n_bar();
    groups_.resize(dim_theta_, n + nb);
    if (n > 0) groups_.leftCols(n) = training_.theta;
    if (nb > 0) groups_.rightCols(nb) = training_.theta_bar;
    std::vector<double> z;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d_out_; ++j) {
        slots_.push_back(Slot{i, obs_fun[j]});
        z.push_back(training_.gx(i, j));
      }
    }
    auto op_atoms = [&](const LinearOperator& op, const Vec& x) {
      std::vector<std::pair<int, double>> out;
      for (const auto& t : op) out.emplace_back(atom(x, t.order), t.coef);
      return out;
    };
    for (int k = 0; k < nb; ++k) {
      const Vec th = training_.theta_bar.col(k);
      for (int m = 0; m < training_.d_g(); ++m) {
        const Vec x = training_.xg.col(m);
        slots_.push_back(Slot{n + k, op_atoms(boundary_operator(problem, x), x)});
        z.push_back(training_.g_vals(k, m));
      }
      for (int m = 0; m < training_.d_f(); ++m) {
        const Vec x = training_.xf.col(m);
        slots_.push_back(Slot{n + k, op_atoms(pde_operator(problem, x, th), x)});
        z.push_back(training_.f_vals(k, m));
      }
    }
    z_ = Eigen::Map<Vec>(z.data(), static_cast<Eigen::Index>(z.size()));
  } else {
    groups_ = training_.theta;
  }

  const auto na = static_cast<Eigen::Index>(atom_points_.size());
  atom_cov_.resize(na, na);
  const Kernel& ks = *model_.k_s;
  for (Eigen::Index a = 0; a < na; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v =
          ks.deriv_mixed(atom_points_[a], atom_points_[b], atom_orders_[a], atom_orders_[b]);
      atom_cov_(a, b) = v;
      atom_cov_(b, a) = v;
    }
  }
  obs_atoms_ = Mat::Zero(d_out_, na);
  for (int j = 0; j < d_out_; ++j) {
    for (const auto& [a, c] : obs_fun[j]) obs_atoms_(j, a) += c;
  }
  s_uu_ = obs_atoms_ * atom_cov_ * obs_atoms_.transpose();
  s_uu_ = 0.5 * (s_uu_ + s_uu_.transpose()).eval();
}

Mat ConditionedGP::assemble_gram() const {
  const auto t = groups_.cols();
  Mat kp(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      kp(i, j) = kp(j, i) = model_.k_p.eval(groups_.col(i), groups_.col(j));
    }
  }
  if (scalar_form_) return kp;
  const auto m = static_cast<Eigen::Index>(slots_.size());
  Mat a = Mat::Zero(m, static_cast<Eigen::Index>(atom_points_.size()));
  for (Eigen::Index s = 0; s < m; ++s) {
    for (const auto& [at, c] : slots_[s].atoms) a(s, at) += c;
  }
  Mat g = a * atom_cov_ * a.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) g(i, j) *= kp(slots_[i].group, slots_[j].group);
  }
  return 0.5 * (g + g.transpose());
}

void ConditionedGP::factorize(const Mat* cached_chol, double cached_jitter) {
  const Mat gram = assemble_gram();
  if (cached_chol && cached_chol->rows() == gram.rows()) {
    chol_ = *cached_chol;
    jitter_used_ = cached_jitter;
  } else if (gram.rows() > 0) {
    std::tie(chol_, jitter_used_) = jittered_cholesky(gram, model_.jitter);
  } else {
    chol_.resize(0, 0);
    jitter_used_ = 0.0;
  }
  const auto t = groups_.cols();
  if (scalar_form_) {
    if (t == 0) {
      alpha_.resize(0, d_out_);
      v_.resize(d_out_, 0);
      return;
    }
    alpha_ = solve_chol(chol_, training_.gx);
    v_ = alpha_.transpose();
    return;
  }
  const auto m = static_cast<Eigen::Index>(slots_.size());
  if (m == 0) {
    alpha_.resize(0, 1);
    v_ = Mat::Zero(d_out_, t);
    y_ = Mat::Zero(0, t * d_out_);
    return;
  }
  alpha_ = solve_chol(chol_, z_);
  // Cross-covariance between test observations and each slot, without k_p.
  Mat a = Mat::Zero(m, static_cast<Eigen::Index>(atom_points_.size()));
  for (Eigen::Index s = 0; s < m; ++s) {
    for (const auto& [at, c] : slots_[s].atoms) a(s, at) += c;
  }
  const Mat cross = obs_atoms_ * atom_cov_ * a.transpose();  // d_out x M
  v_ = Mat::Zero(d_out_, t);
  Mat zb = Mat::Zero(m, t * d_out_);
  for (Eigen::Index s = 0; s < m; ++s) {
    const int g = slots_[s].group;
    v_.col(g) += cross.col(s) * alpha_(s, 0);
    zb.block(s, g * d_out_, 1, d_out_) = cross.col(s).transpose();
  }
  y_ = chol_.triangularView<Eigen::Lower>().solve(zb);
}

// Whitened cross-covariance L^{-1} k(Theta, theta). Covariances are formed as
// k S - q^T q rather than through an explicit inverse: with near-singular
// Grams the inverse route loses the small posterior variances to roundoff.
Mat ConditionedGP::whitened(const Vec& k) const {
  if (scalar_form_) return chol_.triangularView<Eigen::Lower>().solve(k);
  const int d = d_out_;
  Mat q = Mat::Zero(y_.rows(), d);
  for (Eigen::Index t = 0; t < k.size(); ++t) q.noalias() += k(t) * y_.middleCols(t * d, d);
  return q;
}

Vec ConditionedGP::kp_row(const VecRef& theta) const {
  if (theta.size() != dim_theta_) throw InputError("theta has the wrong dimension");
  Vec k(groups_.cols());
  for (Eigen::Index t = 0; t < groups_.cols(); ++t) k(t) = model_.k_p.eval(theta, groups_.col(t));
  return k;
}

Mat ConditionedGP::kp_grad_rows(const VecRef& theta) const {
  Mat g(groups_.cols(), dim_theta_);
  for (Eigen::Index t = 0; t < groups_.cols(); ++t) {
    const double c = model_.k_p.grad_factor(theta, groups_.col(t));
    for (int i = 0; i < dim_theta_; ++i) g(t, i) = c * (theta(i) - groups_(i, t));
  }
  return g;
}

Prediction ConditionedGP::predict(const VecRef& theta, bool with_gradients) const {
  Prediction out;
  const Vec k = kp_row(theta);
  const double kpp = model_.k_p.eval(theta, theta);
  out.mean = v_ * k;
  const Mat q = whitened(k);
  if (scalar_form_) {
    out.cov = (kpp - q.col(0).squaredNorm()) * s_uu_;
  } else {
    out.cov = kpp * s_uu_;
    out.cov.noalias() -= q.transpose() * q;
  }
  if (!with_gradients) return out;

  const Mat gk = kp_grad_rows(theta);  // T x d_theta
  out.mean_grad = v_ * gk;
  out.cov_grad.resize(dim_theta_);
  Vec wk;
  if (scalar_form_) {
    wk = chol_.transpose().triangularView<Eigen::Upper>().solve(q.col(0));
  }
  for (int i = 0; i < dim_theta_; ++i) {
    if (scalar_form_) {
      out.cov_grad[i] = (-2.0 * gk.col(i).dot(wk)) * s_uu_;
    } else {
      const Mat a = whitened(gk.col(i)).transpose() * q;
      out.cov_grad[i] = -(a + a.transpose());
    }
  }
  return out;
}

Vec ConditionedGP::predict_mean(const VecRef& theta) const { return v_ * kp_row(theta); }

Mat ConditionedGP::predict_cov(const VecRef& theta, const VecRef& theta_prime) const {
  const Vec k = kp_row(theta);
  const Vec k2 = kp_row(theta_prime);
  const double kpp = model_.k_p.eval(theta, theta_prime);
  const Mat q = whitened(k), q2 = whitened(k2);
  if (scalar_form_) return (kpp - q.col(0).dot(q2.col(0))) * s_uu_;
  return kpp * s_uu_ - q.transpose() * q2;
}

Mat ConditionedGP::predict_mean_grad(const VecRef& theta) const {
  return v_ * kp_grad_rows(theta);
}

Vec ConditionedGP::grad_mean_dot(const VecRef& theta, const VecRef& w) const {
  if (w.size() != d_out_) throw InputError("weight vector has the wrong length");
  return kp_grad_rows(theta).transpose() * (v_.transpose() * w);
}

std::vector<Mat> ConditionedGP::predict_cov_grad(const VecRef& theta) const {
  return predict(theta, true).cov_grad;
}

Vec ConditionedGP::predict_field_mean(const VecRef& theta, const Mat& x) const {
  if (scalar_form_) {
    throw CapabilityError("field predictions need the PDE-constrained emulator");
  }
  const Vec k = kp_row(theta);
  const Kernel& ks = *model_.k_s;
  const MultiIndex zero(x.rows(), 0);
  Vec out = Vec::Zero(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Vec da(atom_points_.size());
    for (std::size_t a = 0; a < atom_points_.size(); ++a) {
      da(a) = ks.deriv_mixed(x.col(c), atom_points_[a], zero, atom_orders_[a]);
    }
    double acc = 0.0;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      double row = 0.0;
      for (const auto& [a, coef] : slots_[s].atoms) row += coef * da(a);
      acc += k(slots_[s].group) * row * alpha_(s, 0);
    }
    out(c) = acc;
  }
  return out;
}

double ConditionedGP::log_marginal_likelihood() const {
  const double logdet_k = 2.0 * chol_.diagonal().array().log().sum();
  if (!scalar_form_) {
    const auto m = static_cast<double>(z_.size());
    return -0.5 * z_.dot(alpha_.col(0)) - 0.5 * logdet_k - 0.5 * m * kLog2Pi;
  }
  const auto n = static_cast<double>(training_.n());
  if (training_.n() == 0) return 0.0;
  const double d = d_out_;
  const Mat q = training_.gx.transpose() * alpha_;  // G^T K^{-1} G
  if (model_.family != EmulatorFamily::SpatiallyCorrelated) {
    return -0.5 * q.trace() - 0.5 * d * logdet_k - 0.5 * n * d * kLog2Pi;
  }
  const auto [ls, js] = jittered_cholesky(s_uu_, model_.jitter);
  (void)js;
  const double logdet_s = 2.0 * ls.diagonal().array().log().sum();
  return -0.5 * solve_chol(ls, q).trace() - 0.5 * d * logdet_k - 0.5 * n * logdet_s -
         0.5 * n * d * kLog2Pi;
}

std::string ConditionedGP::cache_key() const {
  return fnv1a_hex(model_.to_json().dump() + "|" + to_json(training_).dump() + "|" +
                   std::to_string(slots_.size()) + "|" + std::to_string(atom_points_.size()));
}

nlohmann::json ConditionedGP::cache_json() const {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < chol_.rows(); ++i) {
    auto r = nlohmann::json::array();
    for (Eigen::Index k = 0; k <= i; ++k) r.push_back(chol_(i, k));
    rows.push_back(std::move(r));
  }
  return {{"key", cache_key()}, {"jitter", jitter_used_}, {"chol", std::move(rows)}};
}

EmulatorModel select_by_marginal_likelihood(const EmulatorModel& base,
                                            const TrainingSet& training,
                                            const PdeProblem& problem,
                                            const ObservationOperator& obs,
                                            const std::vector<double>& kp_lengthscales,
                                            const std::vector<double>& ks_lengthscales) {
  EmulatorModel best = base;
  double best_lml = -std::numeric_limits<double>::infinity();
  std::vector<double> ks_grid = ks_lengthscales;
  if (!base.k_s || ks_grid.empty()) ks_grid = {base.k_s ? base.k_s->hyper().lengthscale : 1.0};
  std::vector<double> kp_grid = kp_lengthscales;
  if (kp_grid.empty()) kp_grid = {base.k_p.hyper().lengthscale};
  for (double lp : kp_grid) {
    for (double lsp : ks_grid) {
      EmulatorModel m = base;
      m.k_p = Kernel(base.k_p.family(), {base.k_p.hyper().variance, lp}, base.k_p.input_dim());
      if (base.k_s) {
        m.k_s = Kernel(base.k_s->family(), {base.k_s->hyper().variance, lsp},
                       base.k_s->input_dim());
      }
      try {
        const double lml =
            ConditionedGP::condition(m, training, problem, obs).log_marginal_likelihood();
        if (std::isfinite(lml) && lml > best_lml) {
          best_lml = lml;
          best = m;
        }
      } catch (const NumericalError&) {
        // skip grid points whose Gram cannot be factorized
      }
    }
  }
  return best;
}

}  // namespace pdegp
