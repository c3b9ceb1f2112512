#include "pdegp/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "pdegp/errors.hpp"

namespace pdegp {

using nlohmann::json;

std::string to_string(StudyKind s) {
  switch (s) {
    case StudyKind::Grid: return "grid";
    case StudyKind::Mcmc: return "mcmc";
    case StudyKind::EmulatorError: return "emulator_error";
  }
  return "grid";
}

PdeProblem ProblemSpec::build() const {
  if (preset == "constant_diffusion_1d") return problems::constant_diffusion_1d();
  if (preset == "piecewise_diffusion_1d") return problems::piecewise_diffusion_1d();
  if (preset == "expansion_diffusion_1d") return problems::expansion_diffusion_1d(terms);
  if (preset == "piecewise10_diffusion_1d") return problems::piecewise10_diffusion_1d();
  if (preset == "flow_cell_2d") return problems::flow_cell_2d();
  throw ConfigError("/problem/preset", "unknown preset '" + preset + "'");
}

ObservationOperator ObservationSpec::build(int spatial_dim) const {
  if (kind == "local_average") {
    if (spatial_dim != 1) throw ConfigError("/observations/kind", "local averages need a 1D problem");
    return ObservationOperator::local_average(equal_intervals(d_y));
  }
  if (placement == "halton") return ObservationOperator::pointwise(halton(d_y, spatial_dim));
  if (spatial_dim != 1) {
    throw ConfigError("/observations/placement", "equally spaced points need a 1D problem");
  }
  return ObservationOperator::pointwise(equally_spaced_points_1d(d_y));
}

namespace {

// Reads fields from a mutable copy of the tree, writing defaults back so the
// copy ends up fully resolved.
class Node {
 public:
  Node(json& j, std::string path, std::vector<std::string>* defaulted)
      : j_(j), path_(std::move(path)), defaulted_(defaulted) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  std::string path(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  Node child(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "required field missing");
    return Node(j_[key], path(key), defaulted_);
  }
  Node child_or_empty(const std::string& key) {
    if (!has(key)) {
      j_[key] = json::object();
      defaulted_->push_back(path(key));
    }
    return child(key);
  }
  json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "required field missing");
    return j_[key];
  }

  template <class T>
  T req(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "required field missing");
    return convert<T>(key);
  }
  template <class T>
  T opt(const std::string& key, T fallback) {
    if (!has(key)) {
      j_[key] = fallback;
      defaulted_->push_back(path(key));
    }
    return convert<T>(key);
  }

  void only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!allowed.count(k)) throw ConfigError(path(k), "unknown field");
    }
  }

 private:
  template <class T>
  T convert(const std::string& key) {
    try {
      return j_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key), "wrong type");
    }
  }

  json& j_;
  std::string path_;
  std::vector<std::string>* defaulted_;
};

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
}

void at_least(long long v, long long lo, const std::string& path) {
  if (v < lo) throw ConfigError(path, "must be at least " + std::to_string(lo));
}

Kernel parse_kernel(Node n, int input_dim) {
  n.only({"family", "variance", "lengthscale"});
  KernelFamily fam;
  try {
    fam = kernel_family_from_string(n.opt<std::string>("family", "squared_exponential"));
  } catch (const Error&) {
    throw ConfigError(n.path("family"), "unknown kernel family");
  }
  const double var = n.opt<double>("variance", 1.0);
  const double ls = n.req<double>("lengthscale");
  positive(var, n.path("variance"));
  positive(ls, n.path("lengthscale"));
  return Kernel(fam, {var, ls}, input_dim);
}

EmulatorSpec parse_emulator(Node n, int dim_theta, int spatial_dim, const std::string& dflt_label) {
  n.only({"label", "family", "k_p", "k_s", "jitter", "n", "n_bar", "d_f", "d_g", "kinds", "sweep"});
  EmulatorSpec e;
  try {
    e.model.family = emulator_family_from_string(n.req<std::string>("family"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error&) {
    throw ConfigError(n.path("family"), "unknown emulator family");
  }
  e.label = n.opt<std::string>("label", dflt_label);
  if (e.label.empty() || e.label.find_first_of("/\\ ,") != std::string::npos) {
    throw ConfigError(n.path("label"), "labels must be non-empty without '/', ',' or spaces");
  }
  e.model.k_p = parse_kernel(n.child("k_p"), dim_theta);
  const bool spatial = e.model.family == EmulatorFamily::SpatiallyCorrelated ||
                       e.model.family == EmulatorFamily::PdeConstrained;
  if (spatial) {
    e.model.k_s = parse_kernel(n.child("k_s"), spatial_dim);
  } else if (n.has("k_s")) {
    throw ConfigError(n.path("k_s"), "only spatially structured families take k_s");
  }
  e.model.jitter = n.opt<double>("jitter", 1e-10);
  positive(e.model.jitter, n.path("jitter"));
  e.design.n = n.req<int>("n");
  at_least(e.design.n, 1, n.path("n"));
  const bool pde = e.model.family == EmulatorFamily::PdeConstrained;
  e.design.n_bar = n.opt<int>("n_bar", pde ? 10 : 0);
  e.design.d_f = n.opt<int>("d_f", pde ? 20 : 0);
  e.design.d_g = n.opt<int>("d_g", pde ? (spatial_dim == 1 ? 2 : 8) : 0);
  at_least(e.design.n_bar, 0, n.path("n_bar"));
  at_least(e.design.d_f, 0, n.path("d_f"));
  at_least(e.design.d_g, 0, n.path("d_g"));
  if (!pde && (e.design.n_bar || e.design.d_f || e.design.d_g)) {
    throw ConfigError(n.path("n_bar"), "constraint data needs the pde_constrained family");
  }
  const bool potential = e.model.family == EmulatorFamily::Potential;
  const std::vector<std::string> dflt_kinds =
      potential ? std::vector<std::string>{"mean_potential", "marginal_potential"}
                : std::vector<std::string>{"mean", "marginal"};
  const auto kinds = n.opt<std::vector<std::string>>("kinds", dflt_kinds);
  if (kinds.empty()) throw ConfigError(n.path("kinds"), "needs at least one posterior kind");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const std::string p = n.path("kinds") + "/" + std::to_string(i);
    PosteriorKind k;
    try {
      k = posterior_kind_from_string(kinds[i]);
    } catch (const Error&) {
      throw ConfigError(p, "unknown posterior kind");
    }
    const bool pot_kind = k == PosteriorKind::MeanPotential || k == PosteriorKind::MarginalPotential;
    if (k == PosteriorKind::TrueClosedForm || k == PosteriorKind::TrueViaSolver) {
      throw ConfigError(p, "exact posteriors are configured under 'truth'");
    }
    if (pot_kind != potential) throw ConfigError(p, "kind does not match the emulator family");
    e.kinds.push_back(k);
  }
  e.swept = n.opt<bool>("sweep", true);
  return e;
}

SweepSpec parse_sweep(Node n) {
  n.only({"parameter", "values"});
  SweepSpec s;
  s.parameter = n.req<std::string>("parameter");
  if (s.parameter != "n" && s.parameter != "n_bar" && s.parameter != "d_f") {
    throw ConfigError(n.path("parameter"), "must be one of n, n_bar, d_f");
  }
  s.values = n.req<std::vector<int>>("values");
  if (s.values.empty()) throw ConfigError(n.path("values"), "must not be empty");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    at_least(s.values[i], s.parameter == "n" ? 1 : 0, n.path("values") + "/" + std::to_string(i));
  }
  return s;
}

}  // namespace

std::string ExperimentConfig::hash() const { return fnv1a_hex(resolved.dump()); }

ExperimentConfig parse_config(const json& input) {
  if (!input.is_object()) throw ConfigError("/", "config must be an object");
  static const std::vector<std::string> required{"name", "study", "problem", "observations",
                                                 "data", "emulators"};
  std::vector<std::string> missing;
  for (const auto& r : required) {
    if (!input.contains(r)) missing.push_back(r);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("/", "missing required fields: " + list);
  }

  ExperimentConfig cfg;
  json j = input;
  Node root(j, "", &cfg.defaulted);
  root.only({"name", "study", "description", "problem", "observations", "data", "mesh_n", "prior",
             "emulators", "sweep", "grid", "truth", "mcmc", "error", "timings"});
  cfg.name = root.req<std::string>("name");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\ ") != std::string::npos) {
    throw ConfigError("/name", "must be non-empty without '/' or spaces");
  }
  root.opt<std::string>("description", "");
  const auto study = root.req<std::string>("study");
  if (study == "grid") {
    cfg.study = StudyKind::Grid;
  } else if (study == "mcmc") {
    cfg.study = StudyKind::Mcmc;
  } else if (study == "emulator_error") {
    cfg.study = StudyKind::EmulatorError;
  } else {
    throw ConfigError("/study", "must be one of grid, mcmc, emulator_error");
  }

  {
    Node p = root.child("problem");
    p.only({"preset", "terms"});
    cfg.problem.preset = p.req<std::string>("preset");
    if (cfg.problem.preset == "expansion_diffusion_1d") {
      cfg.problem.terms = p.opt<int>("terms", 2);
      at_least(cfg.problem.terms, 1, p.path("terms"));
    }
  }
  const PdeProblem problem = cfg.problem.build();
  const int dt = problem.dim_theta();
  const int sd = problem.spatial_dim;

  {
    Node o = root.child("observations");
    o.only({"kind", "placement", "d_y"});
    cfg.observations.kind = o.opt<std::string>("kind", "pointwise");
    if (cfg.observations.kind != "pointwise" && cfg.observations.kind != "local_average") {
      throw ConfigError(o.path("kind"), "must be pointwise or local_average");
    }
    if (cfg.observations.kind == "pointwise") {
      cfg.observations.placement =
          o.opt<std::string>("placement", sd == 1 ? "equally_spaced" : "halton");
      if (cfg.observations.placement != "equally_spaced" &&
          cfg.observations.placement != "halton") {
        throw ConfigError(o.path("placement"), "must be equally_spaced or halton");
      }
    }
    cfg.observations.d_y = o.req<int>("d_y");
    at_least(cfg.observations.d_y, 1, o.path("d_y"));
  }

  {
    Node d = root.child("data");
    d.only({"theta_dagger", "noise_var", "seed"});
    const auto td = d.req<std::vector<double>>("theta_dagger");
    if (static_cast<int>(td.size()) != dt) {
      throw ConfigError(d.path("theta_dagger"), "needs " + std::to_string(dt) + " entries");
    }
    cfg.data.theta_dagger = to_vec(td);
    cfg.data.noise_var = d.req<double>("noise_var");
    positive(cfg.data.noise_var, d.path("noise_var"));
    cfg.data.seed = d.opt<std::uint64_t>("seed", 0);
  }

  cfg.mesh_n = root.opt<int>("mesh_n", sd == 1 ? 256 : 64);
  at_least(cfg.mesh_n, 8, "/mesh_n");
  {
    Node pr = root.child_or_empty("prior");
    pr.only({"lambda"});
    cfg.prior_lambda = pr.opt<double>("lambda", 1e-3);
    positive(cfg.prior_lambda, pr.path("lambda"));
  }

  {
    json& arr = root.raw("emulators");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("/emulators", "must be a non-empty array");
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "/emulators/" + std::to_string(i);
      auto e = parse_emulator(Node(arr[i], path, &cfg.defaulted), dt, sd,
                              "emulator" + std::to_string(i));
      if (!labels.insert(e.label).second) throw ConfigError(path + "/label", "duplicate label");
      e.model.validate(dt, sd);
      cfg.emulators.push_back(std::move(e));
    }
  }

  if (root.has("sweep")) cfg.sweep = parse_sweep(root.child("sweep"));

  {
    Node g = root.child_or_empty("grid");
    g.only({"points"});
    const int dflt = dt == 1 ? 2048 : 256;
    const int pts = g.opt<int>("points", dflt);
    at_least(pts, 16, g.path("points"));
    cfg.grid_points.assign(dt, pts);
    if (cfg.study == StudyKind::Grid && dt > 2) {
      throw ConfigError("/study", "grid studies need d_theta <= 2");
    }
  }

  {
    Node t = root.child_or_empty("truth");
    t.only({"mode", "emulator"});
    const char* dflt = cfg.study == StudyKind::Grid   ? "exact"
                       : cfg.study == StudyKind::Mcmc ? "emulator"
                                                      : "none";
    cfg.truth.mode = t.opt<std::string>("mode", dflt);
    if (cfg.truth.mode != "exact" && cfg.truth.mode != "emulator" && cfg.truth.mode != "none") {
      throw ConfigError(t.path("mode"), "must be exact, emulator or none");
    }
    if (cfg.truth.mode == "emulator") {
      if (!t.has("emulator")) {
        j["truth"]["emulator"] = {{"label", "truth"},
                                  {"family", "baseline"},
                                  {"n", 100},
                                  {"k_p", {{"family", "squared_exponential"},
                                           {"variance", 1.0},
                                           {"lengthscale", 0.5}}},
                                  {"kinds", {"mean"}}};
        cfg.defaulted.push_back("/truth/emulator");
      }
      Node te = t.child("emulator");
      cfg.truth.emulator = parse_emulator(te, dt, sd, "truth");
      cfg.truth.emulator.model.validate(dt, sd);
      if (cfg.truth.emulator.kinds.size() != 1) {
        throw ConfigError(te.path("kinds"), "the reference posterior takes exactly one kind");
      }
    }
  }

  {
    Node m = root.child_or_empty("mcmc");
    m.only({"n_samples", "burn_in", "step", "initial_step", "seed", "init", "bins", "thin",
            "contour_points"});
    cfg.mcmc.n_samples = m.opt<int>("n_samples", 100000);
    cfg.mcmc.burn_in = m.opt<int>("burn_in", cfg.mcmc.n_samples / 10);
    at_least(cfg.mcmc.burn_in, 0, m.path("burn_in"));
    if (cfg.mcmc.n_samples <= cfg.mcmc.burn_in + 100) {
      throw ConfigError(m.path("n_samples"), "must exceed burn_in by at least 100");
    }
    if (!m.has("step")) {
      j["mcmc"]["step"] = "auto";
      cfg.defaulted.push_back("/mcmc/step");
    }
    json& step = m.raw("step");
    if (step.is_string()) {
      if (step.get<std::string>() != "auto") {
        throw ConfigError(m.path("step"), "must be a positive number or \"auto\"");
      }
    } else if (step.is_number()) {
      cfg.mcmc.step = step.get<double>();
      positive(*cfg.mcmc.step, m.path("step"));
    } else {
      throw ConfigError(m.path("step"), "wrong type");
    }
    cfg.mcmc.initial_step = m.opt<double>("initial_step", 1e-3);
    positive(cfg.mcmc.initial_step, m.path("initial_step"));
    cfg.mcmc.seed = m.opt<std::uint64_t>("seed", 0);
    std::vector<double> center(dt);
    for (int i = 0; i < dt; ++i) {
      center[i] = 0.5 * (problem.theta_box.lower(i) + problem.theta_box.upper(i));
    }
    const auto init = m.opt<std::vector<double>>("init", center);
    if (static_cast<int>(init.size()) != dt) {
      throw ConfigError(m.path("init"), "needs " + std::to_string(dt) + " entries");
    }
    cfg.mcmc.init = to_vec(init);
    cfg.mcmc.bins = m.opt<int>("bins", 50);
    at_least(cfg.mcmc.bins, 10, m.path("bins"));
    cfg.mcmc.thin = m.opt<int>("thin", 1);
    at_least(cfg.mcmc.thin, 1, m.path("thin"));
    cfg.mcmc.contour_points = m.opt<int>("contour_points", dt == 2 ? 128 : 0);
    if (cfg.mcmc.contour_points != 0) at_least(cfg.mcmc.contour_points, 16, m.path("contour_points"));
    if (dt != 2 && cfg.mcmc.contour_points != 0) {
      throw ConfigError(m.path("contour_points"), "density tables need d_theta = 2");
    }
  }

  {
    Node e = root.child_or_empty("error");
    e.only({"theta_ref", "oracle_mesh_n", "sweeps"});
    std::vector<double> td(cfg.data.theta_dagger.data(),
                           cfg.data.theta_dagger.data() + cfg.data.theta_dagger.size());
    const auto ref = e.opt<std::vector<double>>("theta_ref", td);
    if (static_cast<int>(ref.size()) != dt) {
      throw ConfigError(e.path("theta_ref"), "needs " + std::to_string(dt) + " entries");
    }
    cfg.error.theta_ref = to_vec(ref);
    cfg.error.oracle_mesh_n = e.opt<int>("oracle_mesh_n", sd == 1 ? 2048 : 128);
    at_least(cfg.error.oracle_mesh_n, 8, e.path("oracle_mesh_n"));
    if (e.has("sweeps")) {
      json& arr = e.raw("sweeps");
      if (!arr.is_array()) throw ConfigError(e.path("sweeps"), "must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        cfg.error.sweeps.push_back(
            parse_sweep(Node(arr[i], e.path("sweeps") + "/" + std::to_string(i), &cfg.defaulted)));
      }
    } else if (cfg.study == StudyKind::EmulatorError) {
      throw ConfigError(e.path("sweeps"), "required field missing");
    }
  }

  {
    Node t = root.child_or_empty("timings");
    t.only({"reps", "mala_samples"});
    cfg.timings.reps = t.opt<int>("reps", 200);
    at_least(cfg.timings.reps, 100, t.path("reps"));
    cfg.timings.mala_samples = t.opt<int>("mala_samples", 2000);
    at_least(cfg.timings.mala_samples, 200, t.path("mala_samples"));
  }

  if (cfg.study == StudyKind::EmulatorError) {
    for (const auto& e : cfg.emulators) {
      if (e.model.family == EmulatorFamily::Potential) {
        throw ConfigError("/emulators", "emulator error studies need forward-map emulators");
      }
    }
  }
  cfg.resolved = std::move(j);
  std::sort(cfg.defaulted.begin(), cfg.defaulted.end());
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "cannot parse '" + path + "': " + e.what());
  }
  return parse_config(j);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  json j = cfg.resolved;
  if (o.seed) {
    j["data"]["seed"] = *o.seed;
    j["mcmc"]["seed"] = *o.seed;
  }
  if (o.mesh_n) j["mesh_n"] = *o.mesh_n;
  if (o.samples) {
    j["mcmc"]["n_samples"] = *o.samples;
    j["mcmc"]["burn_in"] = std::min(j["mcmc"]["burn_in"].get<int>(), *o.samples / 10);
  }
  auto defaulted = cfg.defaulted;
  cfg = parse_config(j);
  cfg.defaulted = std::move(defaulted);
}

}  // namespace pdegp
