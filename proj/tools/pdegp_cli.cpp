// pdegp: run, time and report the bundled inversion experiments.
//
//   pdegp run configs/exp_4_1_1_baseline.json --out runs
//   pdegp timings configs/exp_4_4_timings.json
//   pdegp report runs/exp_4_1_1_baseline
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error,
// 3 missing or malformed input artifacts.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pdegp/config.hpp"
#include "pdegp/errors.hpp"
#include "pdegp/experiment.hpp"

namespace {

int fail(int code, const std::string& msg) {
  std::cerr << "pdegp: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inversion of linear PDE parameters with Gaussian-process emulators"};
  app.set_version_flag("--version", std::string(pdegp::kVersion));
  app.require_subcommand(1);

  std::string config_path, run_dir;
  std::string out_dir = "runs", cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> mesh_n, samples;
  bool no_svg = false;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON, comments allowed)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output root; results go to <out>/<name>")
        ->capture_default_str();
    sub->add_option("--cache-dir", cache_dir,
                    "training-set cache (default: $PDEGP_CACHE_DIR, then <out>/cache)");
    sub->add_option("--seed", seed, "overrides the data and sampler seeds");
    sub->add_option("--mesh-n", mesh_n, "reference solver mesh size")->check(CLI::PositiveNumber);
    sub->add_option("--samples", samples, "MALA chain length")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "worker threads, 0 for all cores")
        ->check(CLI::NonNegativeNumber);
  };

  auto* run = app.add_subcommand("run", "run an experiment and write its report");
  add_common(run);
  run->add_flag("--no-svg", no_svg, "write figure CSVs only");

  auto* timings = app.add_subcommand("timings", "per-call timing table for an experiment setup");
  add_common(timings);

  auto* report = app.add_subcommand("report", "regenerate figures/ for a finished run");
  report->add_option("dir", run_dir, "run directory")->required();
  report->add_flag("--no-svg", no_svg, "write figure CSVs only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    pdegp::RunOptions opt;
    opt.out_dir = out_dir;
    opt.cache_dir = cache_dir;
    opt.svg = !no_svg;
    opt.threads = threads;

    if (*report) {
      for (const auto& f : pdegp::make_report(run_dir, opt.svg)) std::cout << f << "\n";
      return 0;
    }

    auto cfg = pdegp::load_config(config_path);
    pdegp::apply_overrides(cfg, {seed, mesh_n, samples});

    if (*run) {
      const auto res = pdegp::run_experiment(cfg, opt);
      std::cout << "wrote " << res.dir << " (" << res.metrics.size() << " metrics)\n";
      return 0;
    }
    const auto table = pdegp::run_timings(cfg, opt);
    std::cout << table.to_csv();
    return 0;
  } catch (const pdegp::ConfigError& e) {
    return fail(2, std::string("config error: ") + e.what());
  } catch (const pdegp::InputError& e) {
    return fail(3, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
