#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdegp/design.hpp"
#include "pdegp/emulator.hpp"
#include "pdegp/pde.hpp"
#include "pdegp/posterior.hpp"

namespace pdegp {

enum class StudyKind { Grid, Mcmc, EmulatorError };
std::string to_string(StudyKind s);

struct ProblemSpec {
  std::string preset;  // constant_diffusion_1d, piecewise_diffusion_1d, ...
  int terms = 2;       // expansion_diffusion_1d only
  PdeProblem build() const;
};

struct ObservationSpec {
  std::string kind = "pointwise";   // pointwise | local_average
  std::string placement = "equally_spaced";  // equally_spaced | halton (pointwise only)
  int d_y = 0;
  ObservationOperator build(int spatial_dim) const;
};

struct DataSpec {
  Vec theta_dagger;
  double noise_var = 0.0;
  std::uint64_t seed = 0;
};

/// One emulator and the posterior kinds built on it.
struct EmulatorSpec {
  std::string label;
  EmulatorModel model;
  DesignSpec design;  // mesh_n filled from the experiment
  std::vector<PosteriorKind> kinds;
  bool swept = true;  // follows the experiment sweep
};

struct SweepSpec {
  std::string parameter;  // n | n_bar | d_f
  std::vector<int> values;
};

struct TruthSpec {
  std::string mode = "exact";  // exact | emulator
  EmulatorSpec emulator;       // used when mode == emulator
};

struct McmcSpec {
  int n_samples = 100000;
  int burn_in = 10000;
  std::optional<double> step;  // empty: tuned by pilot runs
  double initial_step = 1e-3;
  std::uint64_t seed = 0;
  Vec init;
  int bins = 50;
  int thin = 1;  // stride for the written chain file; statistics use every sample
  int contour_points = 0;  // lattice per axis for d_theta = 2 density tables; 0 disables
};

struct ErrorSpec {
  Vec theta_ref;
  int oracle_mesh_n = 2048;
  std::vector<SweepSpec> sweeps;
};

struct TimingSpec {
  int reps = 200;
  int mala_samples = 2000;
};

struct ExperimentConfig {
  std::string name;
  StudyKind study = StudyKind::Grid;
  ProblemSpec problem;
  ObservationSpec observations;
  DataSpec data;
  int mesh_n = 256;
  double prior_lambda = 1e-3;
  std::vector<EmulatorSpec> emulators;
  std::optional<SweepSpec> sweep;
  std::vector<int> grid_points;  // per axis
  TruthSpec truth;
  McmcSpec mcmc;
  ErrorSpec error;
  TimingSpec timings;

  nlohmann::json resolved;          // every field, defaults filled in
  std::vector<std::string> defaulted;  // JSON pointers of defaulted fields

  std::string hash() const;
};

/// Validates a config tree. Missing required top-level fields are reported
/// together; other violations throw ConfigError with the field's JSON pointer.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> mesh_n;
  std::optional<int> samples;
};

/// Applies command-line overrides and refreshes `resolved`.
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

}  // namespace pdegp
