#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cbo/analysis.hpp"
#include "cbo/baselines.hpp"
#include "cbo/cbo_engine.hpp"
#include "cbo/consensus.hpp"
#include "cbo/harness.hpp"
#include "cbo/hopping_prox.hpp"
#include "cbo/objectives.hpp"
#include "cbo/parallel.hpp"

namespace py = pybind11;
using namespace cbo;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

nlohmann::json record_json(const ResidualRecord& r) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  return {{"g1", vec(r.g1_norm)}, {"g2", vec(r.g2_norm)}, {"g3", vec(r.g3_norm)}, {"g", vec(r.g_norm)},
          {"reconstruction_residual", vec(r.reconstruction_residual)}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SchemeConfig>(m, "SchemeConfig")
      .def(py::init<>())
      .def_readwrite("dt", &SchemeConfig::dt)
      .def_readwrite("lambda_", &SchemeConfig::lambda)
      .def_readwrite("sigma", &SchemeConfig::sigma)
      .def_readwrite("alpha", &SchemeConfig::alpha)
      .def_readwrite("n_particles", &SchemeConfig::n_particles)
      .def_readwrite("n_steps", &SchemeConfig::n_steps)
      .def_readwrite("tau", &SchemeConfig::tau)
      .def_readwrite("sigma_tilde", &SchemeConfig::sigma_tilde)
      .def_readwrite("init_mean", &SchemeConfig::init_mean)
      .def_readwrite("init_std", &SchemeConfig::init_std)
      .def_readwrite("seed", &SchemeConfig::seed)
      .def_readwrite("couple_sigma_tilde", &SchemeConfig::couple_sigma_tilde)
      .def("set", [](SchemeConfig& c, const std::string& key, const std::string& value) {
        if (!apply_setting(c, key, value)) throw InvalidArgument("unknown setting '" + key + "'");
        resolve_coupling(c);
      })
      .def("issues", [](const SchemeConfig& c, std::optional<double> lam) {
        const ConfigIssues i = check_config(c, lam);
        return py::make_tuple(i.errors, i.warnings);
      }, py::arg("lambda_semiconvex") = py::none())
      .def("__repr__", &describe);

  py::class_<Objective>(m, "Objective")
      .def_property_readonly("name", &Objective::name)
      .def_property_readonly("dim", &Objective::dim)
      .def_property_readonly("minimizer", &Objective::minimizer)
      .def("__call__", [](const Objective& o, const Vector& x) { return o.eval(x); })
      .def("grad", [](const Objective& o, const Vector& x) { return o.grad(x); })
      .def("constants_json", [](const Objective& o) { return dump(to_json(o.constants())); })
      .def("parameters_json", [](const Objective& o) { return dump(o.parameters()); });

  m.def("make_objective", &make_objective);
  m.def("canyon_objective", &canyon_objective, py::arg("degree"), py::arg("amplitude") = kCanyonAmplitude,
        py::arg("frequency") = kCanyonFrequency);
  m.def("evaluate_rows", &evaluate_rows);
  m.def("validate_assumptions_json", [](const Objective& o, std::size_t samples, std::uint64_t seed) {
    return dump(to_json(validate_assumptions(o, o.box(), samples, seed)));
  });

  m.def("consensus_point", &consensus_point);
  m.def("consensus_weights", &consensus_weights);
  m.def("gibbs_free_energy", &gibbs_free_energy);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("scheme", &RunRecord::scheme)
      .def_readonly("iterates", &RunRecord::iterates)
      .def_readonly("objective_values", &RunRecord::objective_values)
      .def_readonly("diagnostics", &RunRecord::diagnostics)
      .def_readonly("config", &RunRecord::config);

  m.def("cbo_run", [](const Objective& o, const SchemeConfig& c) { return cbo_run(o, c); });
  m.def("ch_run", &ch_run);
  m.def("implicit_ch_run", &implicit_ch_run);
  m.def("mms_run", [](const Objective& o, const SchemeConfig& c, std::optional<Vector> x0) {
    return x0 ? mms_run(o, c, *x0) : mms_run(o, c);
  }, py::arg("objective"), py::arg("config"), py::arg("x0") = py::none());
  m.def("prox", [](const Objective& o, const Vector& anchor, double tau) {
    const ProxResult r = prox(o, anchor, tau);
    return py::make_tuple(r.point, r.residual);
  });
  m.def("gd_run", [](const Objective& o, const Vector& x0, double step, int n) { return gd_run(o, x0, step, n); });
  m.def("langevin_run", [](const Objective& o, const Vector& x0, double dt, int n, const std::string& kind,
                           double scale, std::uint64_t seed) {
    return langevin_run(o, x0, dt, n, AnnealSchedule::parse(kind, scale), seed);
  }, py::arg("objective"), py::arg("x0"), py::arg("dt"), py::arg("n_steps"), py::arg("schedule") = "log",
     py::arg("scale") = 0.02, py::arg("seed") = 0);

  m.def("decompose_json", [](const Objective& o, const SchemeConfig& c) {
    const CoupledTriple t = coupled_triple_run(o, c);
    return dump(record_json(decompose_residual(t, o, c.tau.value_or(0.0))));
  });
  m.def("scaling_sweep_json", [](const std::string& axis, const Objective& o, const SchemeConfig& base,
                                 const std::vector<double>& grid, int seeds) {
    return dump(to_json(scaling_sweep(axis, o, base, grid, seeds)));
  });

  m.def("validate_config_json", [](const std::string& raw) {
    const ConfigValidation v = validate_config(raw);
    return dump({{"ok", v.ok}, {"errors", v.errors}, {"warnings", v.warnings}});
  });
  m.def("run_experiment_json", [](const std::string& preset, const std::string& output_dir, int runs,
                                  std::uint64_t seed, const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentSpec s;
    s.preset = preset;
    s.output_dir = output_dir;
    s.runs = runs;
    s.base_seed = seed;
    s.overrides = overrides;
    const Manifest man = run_experiment(s);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : man.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return dump({{"summary", man.summary}, {"files", files}});
  });
  m.def("objective_export_json", [](const std::string& name) { return dump(objective_export(name)); });
  m.def("set_worker_threads", &set_worker_threads);
}
