#include "pdegp/mcmc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "pdegp/emulator.hpp"
#include "pdegp/errors.hpp"

namespace pdegp {

void MalaConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("MALA step must be positive");
  if (burn_in < 0 || n_samples <= burn_in) {
    throw InputError("MALA needs n_samples > burn_in >= 0");
  }
  if (init.size() == 0 || !init.allFinite()) throw InputError("MALA needs a finite initial state");
}

std::string MalaConfig::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << "mala|" << step << "|" << n_samples << "|" << burn_in << "|" << seed;
  for (Eigen::Index i = 0; i < init.size(); ++i) os << "|" << init(i);
  return fnv1a_hex(os.str());
}

namespace {

bool finite_eval(const std::pair<double, Vec>& e) {
  return std::isfinite(e.first) && e.second.allFinite();
}

}  // namespace

Chain mala_run(const LogTarget& target, const MalaConfig& cfg) {
  cfg.validate();
  const auto d = cfg.init.size();
  Vec theta = cfg.init;
  auto cur = target(theta);
  if (!finite_eval(cur)) throw InputError("log density or gradient not finite at the initial state");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double gamma = cfg.step;
  const double noise = std::sqrt(2.0 * gamma);

  Chain c;
  c.samples.resize(cfg.n_samples - cfg.burn_in, d);
  c.provenance = cfg.hash();
  const auto t0 = std::chrono::steady_clock::now();
  Vec xi(d);
  for (int n = 0; n < cfg.n_samples; ++n) {
    for (Eigen::Index i = 0; i < d; ++i) xi(i) = normal(rng);
    const Vec prop = theta + gamma * cur.second + noise * xi;
    const double r = uniform(rng);
    ++c.proposed;

    std::pair<double, Vec> next;
    bool ok = true;
    try {
      next = target(prop);
      ok = finite_eval(next);
    } catch (const NumericalError&) {
      ok = false;
    }
    if (!ok) {
      ++c.non_finite;
      if (c.proposed >= 100 && 2 * c.non_finite > c.proposed) {
        throw NumericalError("more than half of the MALA proposals had non-finite gradients (" +
                             std::to_string(c.non_finite) + " of " +
                             std::to_string(c.proposed) + "); reduce the step size");
      }
    } else {
      // log q(a | b) = -|a - b - gamma grad(b)|^2 / (4 gamma)
      const double log_q_back = -(theta - prop - gamma * next.second).squaredNorm() / (4 * gamma);
      const double log_q_fwd = -(prop - theta - gamma * cur.second).squaredNorm() / (4 * gamma);
      const double log_alpha = next.first + log_q_back - cur.first - log_q_fwd;
      if (std::log(r) <= log_alpha) {
        theta = prop;
        cur = std::move(next);
        ++c.accepted;
      }
    }
    if (n >= cfg.burn_in) c.samples.row(n - cfg.burn_in) = theta.transpose();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (2 * c.non_finite > c.proposed) {
    throw NumericalError("more than half of the MALA proposals had non-finite gradients");
  }
  c.acceptance_rate = static_cast<double>(c.accepted) / static_cast<double>(c.proposed);
  c.per_sample_seconds = secs / cfg.n_samples;
  return c;
}

Chain mala_run(const ApproxPosterior& posterior, const MalaConfig& cfg) {
  if (cfg.init.size() != posterior.dim()) throw InputError("initial state has the wrong dimension");
  return mala_run([&](const Vec& t) { return posterior.evaluate(t, true); }, cfg);
}

StepTuning tune_step(const LogTarget& target, const Vec& init, double step0, std::uint64_t seed,
                     double target_acceptance, int rounds, int pilot) {
  if (!(step0 > 0.0) || rounds < 1 || pilot < 10) throw InputError("invalid step tuning settings");
  StepTuning t;
  t.step = step0;
  t.state = init;
  for (int r = 0; r < rounds; ++r) {
    MalaConfig cfg;
    cfg.step = t.step;
    cfg.n_samples = pilot;
    cfg.burn_in = 0;
    cfg.seed = seed + static_cast<std::uint64_t>(r);
    cfg.init = t.state;
    const Chain c = mala_run(target, cfg);
    t.acceptance.push_back(c.acceptance_rate);
    t.state = c.samples.row(c.samples.rows() - 1).transpose();
    t.step *= std::exp(2.0 * (c.acceptance_rate - target_acceptance));
  }
  return t;
}

std::vector<CoordinateSummary> diagnostics(const Chain& c) {
  const auto n = c.samples.rows();
  if (n < 100) throw InputError("diagnostics need at least 100 samples");
  std::vector<CoordinateSummary> out;
  for (Eigen::Index j = 0; j < c.samples.cols(); ++j) {
    CoordinateSummary s;
    const Vec x = c.samples.col(j);
    s.mean = x.mean();
    const Vec dx = x.array() - s.mean;
    const double c0 = dx.squaredNorm() / n;
    s.stddev = std::sqrt(c0 * n / (n - 1.0));
    if (!(c0 > 1e-300) || x.maxCoeff() == x.minCoeff()) {
      s.constant = true;
      s.autocorr_time = static_cast<double>(n);
      s.ess = 1.0;
      s.stddev = 0.0;
      out.push_back(s);
      continue;
    }
    auto rho = [&](Eigen::Index k) {
      return dx.head(n - k).dot(dx.tail(n - k)) / (n * c0);
    };
    // Geyer: sum pairs Gamma_m = rho_2m + rho_2m+1 while positive, kept monotone.
    double sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
      double g = rho(2 * m) + rho(2 * m + 1);
      if (g <= 0.0) break;
      g = std::min(g, prev);
      prev = g;
      sum += g;
    }
    s.autocorr_time = std::max(-1.0 + 2.0 * sum, 1.0 / n);
    s.ess = n / s.autocorr_time;
    out.push_back(s);
  }
  return out;
}

nlohmann::json diagnostics_json(const Chain& c) {
  auto coords = nlohmann::json::array();
  for (const auto& s : diagnostics(c)) {
    coords.push_back({{"mean", s.mean},
                      {"stddev", s.stddev},
                      {"autocorr_time", s.autocorr_time},
                      {"ess", s.ess},
                      {"constant", s.constant}});
  }
  return {{"n", c.samples.rows()},
          {"acceptance_rate", c.acceptance_rate},
          {"non_finite", c.non_finite},
          {"per_sample_seconds", c.per_sample_seconds},
          {"config", c.provenance},
          {"coordinates", coords}};
}

std::string chain_to_csv(const Chain& c) {
  std::ostringstream os;
  os.precision(17);
  os << "# d_theta=" << c.samples.cols() << " config=" << c.provenance
     << " acceptance=" << c.acceptance_rate << "\n";
  for (Eigen::Index j = 0; j < c.samples.cols(); ++j) {
    os << (j ? "," : "") << "theta" << (j + 1);
  }
  os << "\n";
  for (Eigen::Index i = 0; i < c.samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.samples.cols(); ++j) {
      os << (j ? "," : "") << c.samples(i, j);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pdegp
