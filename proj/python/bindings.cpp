// Python bindings: problems, emulators, posteriors, MALA and experiments.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>

#include "pdegp/config.hpp"
#include "pdegp/design.hpp"
#include "pdegp/emulator.hpp"
#include "pdegp/errors.hpp"
#include "pdegp/experiment.hpp"
#include "pdegp/mcmc.hpp"
#include "pdegp/metrics.hpp"
#include "pdegp/posterior.hpp"

namespace py = pybind11;
using namespace pdegp;

namespace {

PdeProblem problem_by_name(const std::string& name, int terms) {
  ProblemSpec s;
  s.preset = name;
  s.terms = terms;
  return s.build();
}

Kernel make_kernel(const std::string& family, double variance, double lengthscale, int dim) {
  return Kernel(kernel_family_from_string(family), {variance, lengthscale}, dim);
}

}  // namespace

PYBIND11_MODULE(_pdegp, m) {
  m.doc() = "Gaussian-process emulators for Bayesian inversion of linear PDE parameters";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConditioningError>(m, "ConditioningError", numerical.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<Kernel>(m, "Kernel")
      .def(py::init(&make_kernel), py::arg("family"), py::arg("variance"),
           py::arg("lengthscale"), py::arg("dim") = 1)
      .def_property_readonly("family", [](const Kernel& k) { return std::string(to_string(k.family())); })
      .def_property_readonly("variance", [](const Kernel& k) { return k.hyper().variance; })
      .def_property_readonly("lengthscale", [](const Kernel& k) { return k.hyper().lengthscale; })
      .def("__call__", [](const Kernel& k, const Vec& a, const Vec& b) { return k.eval(a, b); })
      .def("gram", &Kernel::gram, "Covariance between two sets of points stored as columns");

  py::class_<PdeProblem>(m, "PdeProblem")
      .def_readonly("spatial_dim", &PdeProblem::spatial_dim)
      .def_property_readonly("dim_theta", &PdeProblem::dim_theta)
      .def_property_readonly("theta_lower", [](const PdeProblem& p) { return p.theta_box.lower; })
      .def_property_readonly("theta_upper", [](const PdeProblem& p) { return p.theta_box.upper; });
  m.def("problem", &problem_by_name, py::arg("name"), py::arg("terms") = 2,
        "constant_diffusion_1d, piecewise_diffusion_1d, expansion_diffusion_1d, "
        "piecewise10_diffusion_1d or flow_cell_2d");

  py::class_<ObservationOperator>(m, "Observations")
      .def_static("pointwise", &ObservationOperator::pointwise, py::arg("points"))
      .def_static("local_average", &ObservationOperator::local_average, py::arg("intervals"))
      .def_property_readonly("d_y", &ObservationOperator::d_y)
      .def_property_readonly("points", &ObservationOperator::points);
  m.def("equally_spaced_points_1d", &equally_spaced_points_1d, py::arg("d_y"));
  m.def("forward_map", &forward_map, py::arg("problem"), py::arg("obs"), py::arg("theta"),
        py::arg("mesh_n") = 512, "Reference-solver observations G_X(theta)");

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("y", &SyntheticData::y)
      .def_readonly("clean", &SyntheticData::clean)
      .def_readonly("theta_dagger", &SyntheticData::theta_dagger)
      .def_readonly("noise_var", &SyntheticData::noise_var);
  m.def("make_data", &make_data, py::arg("problem"), py::arg("obs"), py::arg("theta_dagger"),
        py::arg("noise_var"), py::arg("seed") = 0, py::arg("mesh_n") = 512);

  py::class_<DesignSpec>(m, "Design")
      .def(py::init([](int n, int n_bar, int d_f, int d_g, int mesh_n, std::uint64_t seed) {
             return DesignSpec{n, n_bar, d_f, d_g, mesh_n, seed};
           }),
           py::arg("n"), py::arg("n_bar") = 0, py::arg("d_f") = 0, py::arg("d_g") = 0,
           py::arg("mesh_n") = 512, py::arg("seed") = 0)
      .def_readwrite("n", &DesignSpec::n)
      .def_readwrite("n_bar", &DesignSpec::n_bar)
      .def_readwrite("d_f", &DesignSpec::d_f)
      .def_readwrite("d_g", &DesignSpec::d_g)
      .def_readwrite("mesh_n", &DesignSpec::mesh_n);

  py::class_<TrainingSet>(m, "TrainingSet")
      .def_readonly("theta", &TrainingSet::theta)
      .def_readonly("gx", &TrainingSet::gx)
      .def_readonly("theta_bar", &TrainingSet::theta_bar)
      .def_readonly("xf", &TrainingSet::xf)
      .def_readonly("xg", &TrainingSet::xg);
  m.def("build_training", &build_training, py::arg("problem"), py::arg("obs"), py::arg("design"));
  m.def("potential_training", &potential_training, py::arg("training"), py::arg("y"),
        py::arg("noise_var"));

  py::class_<EmulatorModel>(m, "EmulatorModel")
      .def(py::init([](const std::string& family, const Kernel& k_p, std::optional<Kernel> k_s,
                       double jitter) {
             EmulatorModel e;
             e.family = emulator_family_from_string(family);
             e.k_p = k_p;
             e.k_s = std::move(k_s);
             e.jitter = jitter;
             return e;
           }),
           py::arg("family"), py::arg("k_p"), py::arg("k_s") = std::nullopt,
           py::arg("jitter") = 1e-10)
      .def_property_readonly("family",
                             [](const EmulatorModel& e) { return std::string(to_string(e.family)); });

  py::class_<ConditionedGP, std::shared_ptr<ConditionedGP>>(m, "ConditionedGP")
      .def(py::init([](const EmulatorModel& model, const TrainingSet& ts, const PdeProblem& p,
                       const ObservationOperator& obs) {
             return std::make_shared<ConditionedGP>(ConditionedGP::condition(model, ts, p, obs));
           }),
           py::arg("model"), py::arg("training"), py::arg("problem"), py::arg("obs"))
      .def_property_readonly("d_out", &ConditionedGP::d_out)
      .def_property_readonly("jitter_used", &ConditionedGP::jitter_used)
      .def_property_readonly("gram_size", &ConditionedGP::gram_size)
      .def("mean", &ConditionedGP::predict_mean, py::arg("theta"))
      .def("cov", &ConditionedGP::predict_cov, py::arg("theta"), py::arg("theta_prime"))
      .def("mean_grad", &ConditionedGP::predict_mean_grad, py::arg("theta"))
      .def("log_marginal_likelihood", &ConditionedGP::log_marginal_likelihood);

  py::class_<SmoothedUniformPrior>(m, "Prior")
      .def(py::init([](const PdeProblem& p, double lambda) {
             return SmoothedUniformPrior{p.theta_box, lambda};
           }),
           py::arg("problem"), py::arg("lam") = 1e-3)
      .def("log_density", &SmoothedUniformPrior::log_density)
      .def("grad_log_density", &SmoothedUniformPrior::grad_log_density);

  py::class_<ApproxPosterior>(m, "Posterior")
      .def_static(
          "emulated",
          [](const std::string& kind, std::shared_ptr<ConditionedGP> gp, const SyntheticData& d,
             const SmoothedUniformPrior& prior) {
            return ApproxPosterior::emulated(posterior_kind_from_string(kind), std::move(gp), d,
                                             prior);
          },
          py::arg("kind"), py::arg("gp"), py::arg("data"), py::arg("prior"),
          "kind: mean, marginal, mean_potential or marginal_potential")
      .def_static("closed_form", &ApproxPosterior::closed_form, py::arg("problem"),
                  py::arg("obs"), py::arg("data"), py::arg("prior"))
      .def_static("via_solver", &ApproxPosterior::via_solver, py::arg("problem"), py::arg("obs"),
                  py::arg("data"), py::arg("prior"), py::arg("mesh_n") = 512)
      .def_property_readonly("kind",
                             [](const ApproxPosterior& p) { return std::string(to_string(p.kind())); })
      .def("log_density", &ApproxPosterior::log_density, py::arg("theta"))
      .def("grad_log_density", &ApproxPosterior::grad_log_density, py::arg("theta"));

  py::class_<GridDensity>(m, "GridDensity")
      .def_readonly("axes", &GridDensity::axes)
      .def_readonly("values", &GridDensity::values)
      .def("integral", &GridDensity::integral)
      .def("mean", &GridDensity::mean, py::arg("axis") = 0)
      .def("stddev", &GridDensity::stddev, py::arg("axis") = 0)
      .def("marginal", &GridDensity::marginal, py::arg("axis"));
  m.def("posterior_grid", &posterior_grid, py::arg("posterior"), py::arg("axes"));
  m.def("true_posterior_grid", &true_posterior_grid, py::arg("problem"), py::arg("obs"),
        py::arg("data"), py::arg("prior"), py::arg("axes"), py::arg("mesh_n") = 512);
  m.def("grid_from_log", &GridDensity::from_log, py::arg("axes"), py::arg("log_fn"));
  m.def("hellinger", &hellinger, py::arg("p"), py::arg("q"));
  m.def("uniform_axis", &uniform_axis, py::arg("lo"), py::arg("hi"), py::arg("n"));

  py::class_<Chain>(m, "Chain")
      .def_readonly("samples", &Chain::samples)
      .def_readonly("acceptance_rate", &Chain::acceptance_rate)
      .def_readonly("per_sample_seconds", &Chain::per_sample_seconds);
  m.def(
      "mala",
      [](const ApproxPosterior& post, double step, int n_samples, int burn_in, std::uint64_t seed,
         std::optional<Vec> init) {
        MalaConfig c;
        c.step = step;
        c.n_samples = n_samples;
        c.burn_in = burn_in;
        c.seed = seed;
        const auto& box = post.prior().box;
        c.init = init ? *init : Vec(0.5 * (box.lower + box.upper));
        py::gil_scoped_release release;
        return mala_run(post, c);
      },
      py::arg("posterior"), py::arg("step"), py::arg("n_samples"), py::arg("burn_in") = 0,
      py::arg("seed") = 0, py::arg("init") = std::nullopt,
      "Starts at the centre of the prior box unless init is given");

  m.def(
      "run_experiment",
      [](const std::string& config, const std::string& out_dir, bool write, int threads) {
        const auto cfg = load_config(config);
        RunOptions opt;
        opt.out_dir = out_dir;
        opt.write = write;
        opt.threads = threads;
        py::gil_scoped_release release;
        const auto res = run_experiment(cfg, opt);
        std::map<std::string, double> metrics;
        for (const auto& r : res.metrics) metrics[r.metric] = r.value;
        return std::make_pair(res.dir, metrics);
      },
      py::arg("config"), py::arg("out_dir") = "runs", py::arg("write") = true,
      py::arg("threads") = 0, "Returns (run directory, {metric: value})");
  m.def("make_report", &make_report, py::arg("run_dir"), py::arg("svg") = true);
}
