#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdegp/posterior.hpp"
#include "pdegp/types.hpp"

namespace pdegp {

struct MalaConfig {
  double step = 1e-3;     // gamma
  int n_samples = 10000;  // total proposals, burn-in included
  int burn_in = 1000;
  std::uint64_t seed = 0;
  Vec init;

  void validate() const;
  std::string hash() const;
};

struct Chain {
  Mat samples;  // (n_samples - burn_in) x d_theta
  long long accepted = 0;
  long long proposed = 0;
  long long non_finite = 0;
  double acceptance_rate = 0.0;
  double per_sample_seconds = 0.0;
  std::string provenance;
};

/// Log density and gradient of the target.
using LogTarget = std::function<std::pair<double, Vec>(const Vec&)>;

Chain mala_run(const LogTarget& target, const MalaConfig& cfg);
Chain mala_run(const ApproxPosterior& posterior, const MalaConfig& cfg);

struct StepTuning {
  double step = 0.0;
  Vec state;  // last pilot state, a warm start for the main chain
  std::vector<double> acceptance;  // per pilot round
};

/// Pilot rounds that scale the step by exp(2 (acc - target)) each round.
/// Deterministic given the seed.
StepTuning tune_step(const LogTarget& target, const Vec& init, double step0, std::uint64_t seed,
                     double target_acceptance = 0.574, int rounds = 12, int pilot = 400);

struct CoordinateSummary {
  double mean = 0.0;
  double stddev = 0.0;
  double autocorr_time = 1.0;
  double ess = 0.0;
  bool constant = false;
};

/// Per-coordinate moments, integrated autocorrelation time from Geyer's
/// initial positive sequence, and ESS = n / tau. Needs at least 100 samples.
std::vector<CoordinateSummary> diagnostics(const Chain& c);
nlohmann::json diagnostics_json(const Chain& c);

/// "# d_theta=<d> config=<hash> acceptance=<rate>", column names, one row per sample.
std::string chain_to_csv(const Chain& c);

}  // namespace pdegp
