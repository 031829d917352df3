// Python bindings: geometry, schedules, single runs and the experiment harness.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rrm/algorithms.hpp"
#include "rrm/diagnostics.hpp"
#include "rrm/errors.hpp"
#include "rrm/harness.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

rrm::ExperimentConfig parse(const std::string& config_json) { return rrm::parse_config(json::parse(config_json)); }

py::dict run_config(const std::string& config_json, const std::string& out_dir) {
  const auto cfg = parse(config_json);
  rrm::ExperimentResult res;
  {
    py::gil_scoped_release release;
    res = rrm::run_experiment(cfg);
    if (!out_dir.empty()) rrm::write_outputs(cfg, res, out_dir);
  }
  py::list reps;
  for (const auto& r : res.replications) {
    const auto& tr = r.trajectory;
    rrm::Mat states(static_cast<Eigen::Index>(tr.size()), tr.manifold.ambient_dim());
    for (std::size_t i = 0; i < tr.size(); ++i) states.row(static_cast<Eigen::Index>(i)) = tr.states[i].transpose();
    py::dict d;
    d["replication"] = r.replication;
    d["states"] = states;
    d["times"] = tr.times;
    d["steps"] = tr.steps;
    d["metric"] = r.verdict.metric;
    d["value"] = r.verdict.value;
    d["final_value"] = r.verdict.final_value;
    d["threshold"] = r.verdict.threshold;
    d["passed"] = r.verdict.passed;
    reps.append(d);
  }
  py::dict out;
  out["scenario"] = cfg.scenario;
  out["replications"] = reps;
  out["warnings"] = res.warnings;
  out["all_passed"] = res.all_passed();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Riemannian Robbins-Monro stochastic approximation";

  py::register_exception<rrm::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<rrm::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<rrm::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<rrm::IterateError>(m, "IterateError", PyExc_RuntimeError);

  py::class_<rrm::Manifold>(m, "Manifold")
      .def_static("euclidean", &rrm::Manifold::euclidean, py::arg("dim"))
      .def_static("sphere", &rrm::Manifold::sphere, py::arg("dim"))
      .def_static("hyperbolic", &rrm::Manifold::hyperbolic, py::arg("dim"))
      .def_static("product", &rrm::Manifold::product, py::arg("factors"))
      .def_property_readonly("id", &rrm::Manifold::id)
      .def_property_readonly("dim", &rrm::Manifold::dim)
      .def_property_readonly("ambient_dim", &rrm::Manifold::ambient_dim)
      .def_property_readonly("injectivity_radius", &rrm::Manifold::injectivity_radius)
      .def_property_readonly("curvature_lower", &rrm::Manifold::curvature_lower)
      .def_property_readonly("curvature_upper", &rrm::Manifold::curvature_upper)
      .def_property_readonly("is_hadamard", &rrm::Manifold::is_hadamard)
      .def("inner", &rrm::Manifold::inner)
      .def("norm", &rrm::Manifold::norm)
      .def("exp", &rrm::Manifold::exp)
      .def("log", &rrm::Manifold::log)
      .def("dist", &rrm::Manifold::dist)
      .def("transport", &rrm::Manifold::transport)
      .def("retract", &rrm::Manifold::retract)
      .def("project_tangent", &rrm::Manifold::project_tangent)
      .def("project_point", &rrm::Manifold::project_point)
      .def("origin", &rrm::Manifold::origin)
      .def("random_point",
           [](const rrm::Manifold& self, std::uint64_t seed, double radius) {
             rrm::SplitMix64 rng(seed);
             return self.random_point(rng, radius);
           },
           py::arg("seed"), py::arg("radius") = 1.0)
      .def("__repr__", [](const rrm::Manifold& self) { return "Manifold(" + self.id() + ")"; });

  m.def("comparison_f", py::overload_cast<double, double>(&rrm::comparison_f), py::arg("k_low"), py::arg("a"));

  py::class_<rrm::StepSchedule>(m, "StepSchedule")
      .def_static("window", &rrm::StepSchedule::window, py::arg("a"), py::arg("b"), py::arg("eps"),
                  py::arg("n0") = 2)
      .def_static("power_law", &rrm::StepSchedule::power_law, py::arg("c"), py::arg("rho"), py::arg("n0") = 1)
      .def("gamma", &rrm::StepSchedule::gamma)
      .def("step", &rrm::StepSchedule::step)
      .def("rm_valid", [](const rrm::StepSchedule& s) { return rrm::classify(s).rm_valid(); })
      .def("__repr__", &rrm::StepSchedule::describe);

  m.def("bump_h", &rrm::bump_h);
  m.def("ramp", &rrm::ramp, py::arg("radius"), py::arg("x"));
  m.def("ramp_prime", &rrm::ramp_prime, py::arg("radius"), py::arg("x"));
  m.def("ramp_second", &rrm::ramp_second, py::arg("radius"), py::arg("x"));

  m.def("list_scenarios", [] {
    py::list out;
    for (const auto& s : rrm::scenario_registry()) {
      py::dict d;
      d["name"] = s.name;
      d["description"] = s.description;
      d["verdict"] = s.verdict;
      out.append(d);
    }
    return out;
  });
  m.def("_scenario_template", [](const std::string& name) { return rrm::scenario_template(name).dump(); });
  m.def("_validate", [](const std::string& config_json) { (void)parse(config_json); });
  m.def("_run", &run_config, py::arg("config_json"), py::arg("out_dir") = "");
}
