#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pdegp/config.hpp"
#include "pdegp/metrics.hpp"

namespace pdegp {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::string out_dir = "runs";
  std::string cache_dir;  // empty: $PDEGP_CACHE_DIR, then <out_dir>/cache
  bool svg = true;
  int threads = 0;     // 0: hardware concurrency
  bool write = true;   // false keeps everything in memory
};

struct ExperimentResult {
  std::string name;
  std::string dir;  // empty when nothing was written
  std::vector<MetricRow> metrics;
  nlohmann::json manifest;
  bool has_metric(const std::string& metric) const;
  double metric(const std::string& metric) const;
};

/// Variant label: emulator label, then the sweep value when swept, then the kind.
std::string variant_label(const EmulatorSpec& e, const std::string& parameter, int value,
                          PosteriorKind kind);

/// Solve, design, condition, evaluate (grid or MALA), score. Writes
/// <out_dir>/<name>/ with metrics.csv, manifest.json, provenance.json and the
/// density, chain and histogram tables, then the report bundle.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

struct TimingRow {
  std::string quantity;  // reference_solve | offline_alpha | predict_mean | mala_sample
  std::string label;
  double seconds = 0.0;  // per call
  long long reps = 0;
};

struct TimingTable {
  std::vector<TimingRow> rows;
  double seconds(const std::string& quantity, const std::string& label) const;
  std::string to_csv() const;
};

/// Per-call averages over at least cfg.timings.reps calls.
TimingTable run_timings(const ExperimentConfig& cfg, const RunOptions& opt);

/// Emits figures/ under a finished run directory; returns the written paths
/// relative to it. Byte-identical on repeated calls.
std::vector<std::string> make_report(const std::string& run_dir, bool svg);

std::string resolve_cache_dir(const RunOptions& opt);

/// Training data from <cache_dir>/training-<key>.json, computed and stored on
/// a miss. Writes go through a temporary file and a rename.
TrainingSet cached_training(const PdeProblem& p, const ObservationOperator& obs,
                            const DesignSpec& spec, const nlohmann::json& key_material,
                            const std::string& cache_dir, bool* hit = nullptr);

void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace pdegp
