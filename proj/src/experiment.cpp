#include "pdegp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "pdegp/errors.hpp"
#include "pdegp/mcmc.hpp"

namespace pdegp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCacheFormat = 1;

// Timed results land here so the calls cannot be optimized away.
volatile double g_sink = 0.0;
void keep(double v) { g_sink = v; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

[[noreturn]] void rethrow_with_context(std::exception_ptr ep, const std::string& ctx) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConditioningError& e) {
    throw ConditioningError(ctx + ": " + e.what(), e.min_eigenvalue());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + ": " + e.what());
  } catch (const CapabilityError& e) {
    throw CapabilityError(ctx + ": " + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw InputError(ctx + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ctx + ": " + e.what());
  }
}

/// Runs tasks 0..n-1 on a small pool. The first failure (lowest index) is
/// rethrown with the task's context.
void parallel_for(int n, int threads, const std::function<void(int)>& fn,
                  const std::function<std::string(int)>& context) {
  if (n <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i) {
    if (errors[i]) rethrow_with_context(errors[i], context(i));
  }
}

std::uint64_t label_seed(std::uint64_t base, const std::string& label) {
  return base ^ std::stoull(fnv1a_hex(label), nullptr, 16);
}

std::vector<Vec> box_axes(const ThetaBox& box, const std::vector<int>& points) {
  std::vector<Vec> axes;
  for (int i = 0; i < box.dim(); ++i) {
    axes.push_back(uniform_axis(box.lower(i), box.upper(i), points[i]));
  }
  return axes;
}

struct Unit {
  const EmulatorSpec* spec;
  std::string parameter;  // empty when not swept
  int value = 0;
  DesignSpec design;
  std::string tag;  // label plus sweep value
};

std::vector<Unit> expand_units(const ExperimentConfig& cfg) {
  std::vector<Unit> out;
  for (const auto& e : cfg.emulators) {
    if (cfg.sweep && e.swept) {
      for (int v : cfg.sweep->values) {
        Unit u{&e, cfg.sweep->parameter, v, e.design, ""};
        if (u.parameter == "n") u.design.n = v;
        if (u.parameter == "n_bar") u.design.n_bar = v;
        if (u.parameter == "d_f") u.design.d_f = v;
        u.tag = e.label + "_" + u.parameter + std::to_string(v);
        out.push_back(u);
      }
    } else {
      out.push_back(Unit{&e, "", 0, e.design, e.label});
    }
  }
  for (auto& u : out) u.design.mesh_n = cfg.mesh_n;
  return out;
}

struct Context {
  const ExperimentConfig& cfg;
  PdeProblem problem;
  ObservationOperator obs;
  SyntheticData data;
  SmoothedUniformPrior prior;
  std::string cache_dir;

  explicit Context(const ExperimentConfig& c, const std::string& cache)
      : cfg(c),
        problem(c.problem.build()),
        obs(c.observations.build(problem.spatial_dim)),
        data(make_data(problem, obs, c.data.theta_dagger, c.data.noise_var, c.data.seed,
                       c.mesh_n)),
        prior{problem.theta_box, c.prior_lambda},
        cache_dir(cache) {}

  json key_material(const DesignSpec& d) const {
    return {{"problem", cfg.resolved.at("problem")},
            {"observations", cfg.resolved.at("observations")},
            {"mesh_n", cfg.mesh_n},
            {"design", {{"n", d.n}, {"n_bar", d.n_bar}, {"d_f", d.d_f}, {"d_g", d.d_g}}}};
  }

  std::shared_ptr<const ConditionedGP> condition(const EmulatorModel& model,
                                                 const DesignSpec& d) const {
    TrainingSet ts = cache_dir.empty()
                         ? build_training(problem, obs, d)
                         : cached_training(problem, obs, d, key_material(d), cache_dir);
    if (model.family == EmulatorFamily::Potential) {
      ts = potential_training(ts, data.y, data.noise_var);
    }
    return std::make_shared<const ConditionedGP>(
        ConditionedGP::condition(model, ts, problem, obs));
  }

  ApproxPosterior exact_posterior() const {
    if (has_closed_form(problem)) return ApproxPosterior::closed_form(problem, obs, data, prior);
    return ApproxPosterior::via_solver(problem, obs, data, prior, cfg.mesh_n);
  }
};

class Outputs {
 public:
  Outputs(std::string dir, bool enabled) : dir_(std::move(dir)), enabled_(enabled) {}
  const std::string& dir() const { return dir_; }
  bool enabled() const { return enabled_; }
  void write(const std::string& rel, const std::string& content) const {
    if (enabled_) write_file_atomic((fs::path(dir_) / rel).string(), content);
  }

 private:
  std::string dir_;
  bool enabled_;
};

// ---------------------------------------------------------------------------
// grid study

struct GridVariant {
  std::string label, emulator, family, kind, parameter;
  int value = 0;
  GridDensity density;
  double hellinger = -1.0;
};

void run_grid(const Context& ctx, const Outputs& out, const RunOptions& opt,
              std::vector<MetricRow>& metrics, json& manifest) {
  const auto& cfg = ctx.cfg;
  const auto axes = box_axes(ctx.problem.theta_box, cfg.grid_points);
  // Average variance on a lattice of at most 129 nodes per axis.
  std::vector<int> vpts = cfg.grid_points;
  for (auto& v : vpts) v = std::min(v, 129);
  const auto var_points = lattice_points(box_axes(ctx.problem.theta_box, vpts));

  std::optional<GridDensity> truth;
  if (cfg.truth.mode == "exact") {
    truth = true_posterior_grid(ctx.problem, ctx.obs, ctx.data, ctx.prior, axes, cfg.mesh_n);
  } else if (cfg.truth.mode == "emulator") {
    const auto& te = cfg.truth.emulator;
    DesignSpec d = te.design;
    d.mesh_n = cfg.mesh_n;
    const auto gp = ctx.condition(te.model, d);
    truth = posterior_grid(ApproxPosterior::emulated(te.kinds[0], gp, ctx.data, ctx.prior), axes);
  }
  if (truth) out.write("densities/truth.csv", truth->to_csv());

  const auto units = expand_units(cfg);
  std::vector<std::vector<GridVariant>> results(units.size());
  std::vector<double> variances(units.size());
  parallel_for(
      static_cast<int>(units.size()), opt.threads,
      [&](int i) {
        const Unit& u = units[i];
        const auto gp = ctx.condition(u.spec->model, u.design);
        variances[i] = avg_emulator_variance(*gp, var_points);
        for (auto kind : u.spec->kinds) {
          GridVariant v;
          v.label = variant_label(*u.spec, u.parameter, u.value, kind);
          v.emulator = u.spec->label;
          v.family = std::string(to_string(u.spec->model.family));
          v.kind = std::string(to_string(kind));
          v.parameter = u.parameter;
          v.value = u.value;
          v.density = posterior_grid(ApproxPosterior::emulated(kind, gp, ctx.data, ctx.prior), axes);
          if (truth) v.hellinger = hellinger(v.density, *truth);
          results[i].push_back(std::move(v));
        }
      },
      [&](int i) { return cfg.name + "/" + units[i].tag; });

  json variants = json::array();
  for (std::size_t i = 0; i < units.size(); ++i) {
    metrics.push_back({cfg.name, "avg_variance/" + units[i].tag, variances[i]});
    for (const auto& v : results[i]) {
      if (truth) metrics.push_back({cfg.name, "hellinger/" + v.label, v.hellinger});
      for (int a = 0; a < v.density.dim(); ++a) {
        const std::string c = "theta" + std::to_string(a + 1);
        metrics.push_back({cfg.name, "mean_" + c + "/" + v.label, v.density.mean(a)});
        metrics.push_back({cfg.name, "sd_" + c + "/" + v.label, v.density.stddev(a)});
      }
      const std::string file = "densities/" + v.label + ".csv";
      out.write(file, v.density.to_csv());
      variants.push_back({{"label", v.label},
                          {"emulator", v.emulator},
                          {"family", v.family},
                          {"kind", v.kind},
                          {"parameter", v.parameter},
                          {"value", v.value},
                          {"unit", units[i].tag},
                          {"density", file}});
    }
  }
  if (truth) {
    for (int a = 0; a < truth->dim(); ++a) {
      const std::string c = "theta" + std::to_string(a + 1);
      metrics.push_back({cfg.name, "mean_" + c + "/truth", truth->mean(a)});
      metrics.push_back({cfg.name, "sd_" + c + "/truth", truth->stddev(a)});
    }
  }
  manifest["variants"] = variants;
  manifest["truth"] = truth ? json{{"mode", cfg.truth.mode}, {"density", "densities/truth.csv"}}
                            : json{{"mode", cfg.truth.mode}};
  json units_j = json::array();
  for (std::size_t i = 0; i < units.size(); ++i) {
    units_j.push_back({{"unit", units[i].tag},
                       {"emulator", units[i].spec->label},
                       {"parameter", units[i].parameter},
                       {"value", units[i].value}});
  }
  manifest["units"] = units_j;
}

// ---------------------------------------------------------------------------
// mcmc study

struct ChainTask {
  std::string label, emulator, family, kind, parameter, unit;
  int value = 0;
  int unit_index = -1;  // -1: reference posterior
  PosteriorKind pkind = PosteriorKind::MeanForward;
};

struct ChainOutcome {
  Chain chain;
  double step = 0.0;
  std::optional<GridDensity> density;
};

Chain thinned(const Chain& c, int thin) {
  if (thin <= 1) return c;
  Chain t = c;
  const Eigen::Index rows = (c.samples.rows() + thin - 1) / thin;
  t.samples.resize(rows, c.samples.cols());
  for (Eigen::Index r = 0; r < rows; ++r) t.samples.row(r) = c.samples.row(r * thin);
  return t;
}

void run_mcmc(const Context& ctx, const Outputs& out, const RunOptions& opt,
              std::vector<MetricRow>& metrics, json& manifest) {
  const auto& cfg = ctx.cfg;
  const auto units = expand_units(cfg);
  std::vector<std::shared_ptr<const ConditionedGP>> gps(units.size());
  std::shared_ptr<const ConditionedGP> truth_gp;

  const int n_units = static_cast<int>(units.size());
  const bool emu_truth = cfg.truth.mode == "emulator";
  parallel_for(
      n_units + (emu_truth ? 1 : 0), opt.threads,
      [&](int i) {
        if (i == n_units) {
          DesignSpec d = cfg.truth.emulator.design;
          d.mesh_n = cfg.mesh_n;
          truth_gp = ctx.condition(cfg.truth.emulator.model, d);
        } else {
          gps[i] = ctx.condition(units[i].spec->model, units[i].design);
        }
      },
      [&](int i) { return cfg.name + "/" + (i == n_units ? std::string("truth") : units[i].tag); });

  std::vector<ChainTask> tasks;
  if (cfg.truth.mode != "none") {
    ChainTask t;
    t.label = "truth";
    t.emulator = emu_truth ? cfg.truth.emulator.label : "exact";
    t.family = emu_truth ? std::string(to_string(cfg.truth.emulator.model.family)) : "exact";
    t.pkind = emu_truth ? cfg.truth.emulator.kinds[0]
                        : (has_closed_form(ctx.problem) ? PosteriorKind::TrueClosedForm
                                                        : PosteriorKind::TrueViaSolver);
    t.kind = std::string(to_string(t.pkind));
    tasks.push_back(t);
  }
  for (int i = 0; i < n_units; ++i) {
    for (auto kind : units[i].spec->kinds) {
      ChainTask t;
      t.label = variant_label(*units[i].spec, units[i].parameter, units[i].value, kind);
      t.emulator = units[i].spec->label;
      t.family = std::string(to_string(units[i].spec->model.family));
      t.kind = std::string(to_string(kind));
      t.parameter = units[i].parameter;
      t.value = units[i].value;
      t.unit = units[i].tag;
      t.unit_index = i;
      t.pkind = kind;
      tasks.push_back(t);
    }
  }

  const auto contour_axes =
      cfg.mcmc.contour_points > 0
          ? box_axes(ctx.problem.theta_box,
                     std::vector<int>(ctx.problem.dim_theta(), cfg.mcmc.contour_points))
          : std::vector<Vec>{};
  std::vector<ChainOutcome> outcomes(tasks.size());
  parallel_for(
      static_cast<int>(tasks.size()), opt.threads,
      [&](int i) {
        const ChainTask& t = tasks[i];
        const ApproxPosterior post =
            t.unit_index >= 0 ? ApproxPosterior::emulated(t.pkind, gps[t.unit_index], ctx.data, ctx.prior)
            : emu_truth       ? ApproxPosterior::emulated(t.pkind, truth_gp, ctx.data, ctx.prior)
                              : ctx.exact_posterior();
        const LogTarget target = [&post](const Vec& th) { return post.evaluate(th, true); };
        const std::uint64_t seed = label_seed(cfg.mcmc.seed, t.label);
        MalaConfig mc;
        mc.n_samples = cfg.mcmc.n_samples;
        mc.burn_in = cfg.mcmc.burn_in;
        mc.seed = seed;
        mc.init = cfg.mcmc.init;
        if (cfg.mcmc.step) {
          mc.step = *cfg.mcmc.step;
        } else {
          const auto tuning = tune_step(target, cfg.mcmc.init, cfg.mcmc.initial_step, seed + 1);
          mc.step = tuning.step;
          mc.init = tuning.state;
        }
        outcomes[i].step = mc.step;
        outcomes[i].chain = mala_run(target, mc);
        if (!contour_axes.empty()) outcomes[i].density = posterior_grid(post, contour_axes);
      },
      [&](int i) { return cfg.name + "/" + tasks[i].label; });

  const auto& box = ctx.problem.theta_box;
  std::optional<Vec> truth_mean;
  if (!tasks.empty() && tasks[0].label == "truth") {
    truth_mean = outcomes[0].chain.samples.colwise().mean().transpose();
  }
  json variants = json::array();
  json truth_j = {{"mode", cfg.truth.mode}};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const ChainTask& t = tasks[i];
    const Chain& c = outcomes[i].chain;
    const auto diag = diagnostics(c);
    Vec mean(c.samples.cols());
    double ess_min = 1e300;
    for (Eigen::Index a = 0; a < c.samples.cols(); ++a) {
      const std::string coord = "theta" + std::to_string(a + 1);
      mean(a) = diag[a].mean;
      ess_min = std::min(ess_min, diag[a].ess);
      metrics.push_back({cfg.name, "mean_" + coord + "/" + t.label, diag[a].mean});
      metrics.push_back({cfg.name, "sd_" + coord + "/" + t.label, diag[a].stddev});
    }
    metrics.push_back({cfg.name, "dist_to_dagger/" + t.label, (mean - ctx.data.theta_dagger).norm()});
    if (truth_mean && t.label != "truth") {
      metrics.push_back({cfg.name, "dist_to_truth_mean/" + t.label, (mean - *truth_mean).norm()});
    }
    metrics.push_back({cfg.name, "acceptance/" + t.label, c.acceptance_rate});
    metrics.push_back({cfg.name, "ess_min/" + t.label, ess_min});
    metrics.push_back({cfg.name, "step/" + t.label, outcomes[i].step});

    const std::string chain_file = "chains/" + t.label + ".csv";
    out.write(chain_file, chain_to_csv(thinned(c, cfg.mcmc.thin)));
    json diag_j = diagnostics_json(c);
    diag_j["step"] = outcomes[i].step;
    const std::string diag_file = "diagnostics/" + t.label + ".json";
    out.write(diag_file, diag_j.dump(2) + "\n");
    json hist_files = json::array();
    for (Eigen::Index a = 0; a < c.samples.cols(); ++a) {
      const auto h = marginal_hist(c, static_cast<int>(a), cfg.mcmc.bins, box.lower(a), box.upper(a));
      const std::string f = "marginals/" + t.label + "_theta" + std::to_string(a + 1) + ".csv";
      out.write(f, h.to_csv());
      hist_files.push_back(f);
    }
    json entry = {{"label", t.label},   {"emulator", t.emulator}, {"family", t.family},
                  {"kind", t.kind},     {"parameter", t.parameter}, {"value", t.value},
                  {"unit", t.unit},     {"chain", chain_file},    {"diagnostics", diag_file},
                  {"marginals", hist_files}};
    if (outcomes[i].density) {
      const std::string f = "densities/" + t.label + ".csv";
      out.write(f, outcomes[i].density->to_csv());
      entry["density"] = f;
    }
    if (t.label == "truth") {
      truth_j.update(entry);
    } else {
      variants.push_back(entry);
    }
  }
  manifest["variants"] = variants;
  manifest["truth"] = truth_j;
}

// ---------------------------------------------------------------------------
// emulator error study

void run_error(const Context& ctx, const Outputs& out, const RunOptions& opt,
               std::vector<MetricRow>& metrics, json& manifest) {
  const auto& cfg = ctx.cfg;
  const Vec oracle =
      forward_map(ctx.problem, ctx.obs, cfg.error.theta_ref, cfg.error.oracle_mesh_n);
  struct Task {
    const EmulatorSpec* spec;
    std::string parameter;
    int value;
  };
  std::vector<Task> tasks;
  for (const auto& sw : cfg.error.sweeps) {
    for (const auto& e : cfg.emulators) {
      for (int v : sw.values) tasks.push_back({&e, sw.parameter, v});
    }
  }
  std::vector<double> rmse(tasks.size());
  parallel_for(
      static_cast<int>(tasks.size()), opt.threads,
      [&](int i) {
        DesignSpec d = tasks[i].spec->design;
        d.mesh_n = cfg.mesh_n;
        if (tasks[i].parameter == "n") d.n = tasks[i].value;
        if (tasks[i].parameter == "n_bar") d.n_bar = tasks[i].value;
        if (tasks[i].parameter == "d_f") d.d_f = tasks[i].value;
        const auto gp = ctx.condition(tasks[i].spec->model, d);
        rmse[i] = emulator_rmse(*gp, cfg.error.theta_ref, [&](const Vec&) { return oracle; });
      },
      [&](int i) {
        return cfg.name + "/" + tasks[i].spec->label + "_" + tasks[i].parameter +
               std::to_string(tasks[i].value);
      });
  std::ostringstream csv;
  csv << "emulator,parameter,value,rmse\n";
  json rows = json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string tag =
        tasks[i].spec->label + "_" + tasks[i].parameter + std::to_string(tasks[i].value);
    metrics.push_back({cfg.name, "rmse/" + tag, rmse[i]});
    csv << tasks[i].spec->label << "," << tasks[i].parameter << "," << tasks[i].value << ","
        << fmt(rmse[i]) << "\n";
  }
  out.write("emulator_error.csv", csv.str());
  manifest["emulator_error"] = "emulator_error.csv";
  json sweeps = json::array();
  for (const auto& sw : cfg.error.sweeps) {
    sweeps.push_back({{"parameter", sw.parameter}, {"values", sw.values}});
  }
  manifest["sweeps"] = sweeps;
}

template <class F>
double time_per_call(F&& fn, long long min_reps, double min_seconds, long long* reps_out) {
  using clock = std::chrono::steady_clock;
  long long reps = 0;
  const auto t0 = clock::now();
  double elapsed = 0.0;
  while (reps < min_reps || elapsed < min_seconds) {
    fn(reps);
    ++reps;
    elapsed = std::chrono::duration<double>(clock::now() - t0).count();
  }
  *reps_out = reps;
  return elapsed / static_cast<double>(reps);
}

}  // namespace

std::string variant_label(const EmulatorSpec& e, const std::string& parameter, int value,
                          PosteriorKind kind) {
  std::string s = e.label;
  if (!parameter.empty()) s += "_" + parameter + std::to_string(value);
  return s + "_" + std::string(to_string(kind));
}

bool ExperimentResult::has_metric(const std::string& m) const {
  return std::any_of(metrics.begin(), metrics.end(), [&](const auto& r) { return r.metric == m; });
}

double ExperimentResult::metric(const std::string& m) const {
  for (const auto& r : metrics) {
    if (r.metric == m) return r.value;
  }
  throw InputError("no metric '" + m + "' in experiment " + name);
}

std::string resolve_cache_dir(const RunOptions& opt) {
  if (!opt.cache_dir.empty()) return opt.cache_dir;
  if (const char* env = std::getenv("PDEGP_CACHE_DIR"); env && *env) return env;
  return (fs::path(opt.out_dir) / "cache").string();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = p.string() + suffix.str();
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << content;
    if (!f) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("missing artifact: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

TrainingSet cached_training(const PdeProblem& p, const ObservationOperator& obs,
                            const DesignSpec& spec, const json& key_material,
                            const std::string& cache_dir, bool* hit) {
  const json key = {{"format", kCacheFormat}, {"material", key_material}};
  const fs::path file = fs::path(cache_dir) / ("training-" + fnv1a_hex(key.dump()) + ".json");
  if (fs::exists(file)) {
    try {
      const json j = json::parse(read_file(file.string()));
      if (j.at("key") == key) {
        if (hit) *hit = true;
        return training_from_json(j.at("training"));
      }
    } catch (const json::exception&) {
      // unreadable entry: recompute and overwrite
    }
  }
  if (hit) *hit = false;
  TrainingSet ts = build_training(p, obs, spec);
  write_file_atomic(file.string(), json{{"key", key}, {"training", to_json(ts)}}.dump());
  return ts;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  const std::string cache = opt.write || !opt.cache_dir.empty() ? resolve_cache_dir(opt) : "";
  const Context ctx(cfg, cache);
  ExperimentResult res;
  res.name = cfg.name;
  const std::string dir = (fs::path(opt.out_dir) / cfg.name).string();
  const Outputs out(dir, opt.write);
  if (opt.write) res.dir = dir;

  json manifest = {{"name", cfg.name},
                   {"study", to_string(cfg.study)},
                   {"dim_theta", ctx.problem.dim_theta()},
                   {"theta_box",
                    {{"lower", std::vector<double>(ctx.problem.theta_box.lower.data(),
                                                   ctx.problem.theta_box.lower.data() +
                                                       ctx.problem.dim_theta())},
                     {"upper", std::vector<double>(ctx.problem.theta_box.upper.data(),
                                                   ctx.problem.theta_box.upper.data() +
                                                       ctx.problem.dim_theta())}}},
                   {"theta_dagger", std::vector<double>(cfg.data.theta_dagger.data(),
                                                        cfg.data.theta_dagger.data() +
                                                            cfg.data.theta_dagger.size())},
                   {"metrics", "metrics.csv"}};
  if (cfg.sweep) {
    manifest["sweep"] = {{"parameter", cfg.sweep->parameter}, {"values", cfg.sweep->values}};
  }
  switch (cfg.study) {
    case StudyKind::Grid: run_grid(ctx, out, opt, res.metrics, manifest); break;
    case StudyKind::Mcmc: run_mcmc(ctx, out, opt, res.metrics, manifest); break;
    case StudyKind::EmulatorError: run_error(ctx, out, opt, res.metrics, manifest); break;
  }
  res.manifest = manifest;

  if (opt.write) {
    json prov = {{"config", cfg.resolved},
                 {"config_hash", cfg.hash()},
                 {"defaults_applied", cfg.defaulted},
                 {"code_version", kVersion},
                 {"seeds", {{"data", cfg.data.seed}, {"mcmc", cfg.mcmc.seed}}},
                 {"data",
                  {{"y", std::vector<double>(ctx.data.y.data(), ctx.data.y.data() + ctx.data.y.size())},
                   {"mesh_n", ctx.data.mesh_n}}}};
    out.write("provenance.json", prov.dump(2) + "\n");
    out.write("manifest.json", manifest.dump(2) + "\n");
    out.write("metrics.csv", metric_rows_to_csv(res.metrics));
    make_report(dir, opt.svg);
  }
  return res;
}

double TimingTable::seconds(const std::string& quantity, const std::string& label) const {
  for (const auto& r : rows) {
    if (r.quantity == quantity && r.label == label) return r.seconds;
  }
  throw InputError("no timing for " + quantity + "/" + label);
}

std::string TimingTable::to_csv() const {
  std::ostringstream os;
  os << "quantity,label,seconds_per_call,reps\n";
  for (const auto& r : rows) {
    os << r.quantity << "," << r.label << "," << fmt(r.seconds) << "," << r.reps << "\n";
  }
  return os.str();
}

TimingTable run_timings(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Context ctx(cfg, opt.write || !opt.cache_dir.empty() ? resolve_cache_dir(opt) : "");
  TimingTable table;
  const long long reps = cfg.timings.reps;
  const int dt = ctx.problem.dim_theta();
  const Mat thetas = halton(64, dt, 101);
  auto theta_at = [&](long long r) -> Vec {
    return ctx.problem.theta_box.from_unit(thetas.col(r % thetas.cols()));
  };
  long long n = 0;
  double t = time_per_call(
      [&](long long r) { keep(forward_map(ctx.problem, ctx.obs, theta_at(r), cfg.mesh_n)(0)); },
      reps, 0.0, &n);
  table.rows.push_back({"reference_solve", "G_X", t, n});

  struct Sampler {
    std::string label;
    ApproxPosterior post;
    std::uint64_t seed;
  };
  std::vector<Sampler> samplers;
  for (const auto& e : cfg.emulators) {
    DesignSpec d = e.design;
    d.mesh_n = cfg.mesh_n;
    const auto gp = ctx.condition(e.model, d);
    t = time_per_call(
        [&](long long) {
          keep(ConditionedGP::condition(e.model, gp->training(), ctx.problem, ctx.obs)
                   .jitter_used());
        },
        reps, 0.0, &n);
    table.rows.push_back({"offline_alpha", e.label, t, n});
    t = time_per_call([&](long long r) { keep(gp->predict_mean(theta_at(r))(0)); }, reps, 0.05,
                      &n);
    table.rows.push_back({"predict_mean", e.label, t, n});
    for (auto kind : e.kinds) {
      samplers.push_back({e.label + "_" + std::string(to_string(kind)),
                          ApproxPosterior::emulated(kind, gp, ctx.data, ctx.prior),
                          label_seed(cfg.mcmc.seed, e.label)});
    }
  }
  // Rounds interleave every posterior so drift in machine load hits all of
  // them alike; each keeps its fastest round.
  constexpr int kRounds = 5;
  std::vector<double> best(samplers.size(), std::numeric_limits<double>::infinity());
  for (int round = 0; round < kRounds; ++round) {
    for (std::size_t i = 0; i < samplers.size(); ++i) {
      MalaConfig mc;
      mc.step = cfg.mcmc.step.value_or(cfg.mcmc.initial_step);
      mc.n_samples = cfg.timings.mala_samples;
      mc.burn_in = 0;
      mc.seed = samplers[i].seed;
      mc.init = cfg.mcmc.init;
      best[i] = std::min(best[i], mala_run(samplers[i].post, mc).per_sample_seconds);
    }
  }
  for (std::size_t i = 0; i < samplers.size(); ++i) {
    table.rows.push_back({"mala_sample", samplers[i].label, best[i],
                          static_cast<long long>(kRounds) * cfg.timings.mala_samples});
  }
  if (opt.write) {
    write_file_atomic((fs::path(opt.out_dir) / cfg.name / "timings.csv").string(), table.to_csv());
  }
  return table;
}

}  // namespace pdegp
