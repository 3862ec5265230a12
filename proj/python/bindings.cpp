#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/errors.hpp"
#include "ltcalc/experiment.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/integrals.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/simulate.hpp"

namespace py = pybind11;

namespace {

// Integrands are given by name or as a Python callable f(x, s).
ltc::TimeSpaceFunction integrand(const py::object& f) {
  if (py::isinstance<py::str>(f)) return ltc::build_integrand(f.cast<std::string>());
  auto fn = f.cast<std::function<double(double, double)>>();
  return ltc::make_function("python", std::move(fn));
}

ltc::LocalTimeEstimator estimator(const std::string& name) {
  if (name == "crossing") return ltc::LocalTimeEstimator::Crossing;
  if (name == "occupation") return ltc::LocalTimeEstimator::Occupation;
  throw ltc::ConfigurationError("unknown local-time estimator '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Local-time calculus for one-dimensional diffusions";

  py::register_exception<ltc::ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<ltc::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ltc::ResourceCapError>(m, "ResourceCapError", PyExc_RuntimeError);
  py::register_exception<ltc::GridMismatchError>(m, "GridMismatchError", PyExc_ValueError);

  py::class_<ltc::DiffusionModel>(m, "Model")
      .def_readonly("name", &ltc::DiffusionModel::name)
      .def_readonly("x0", &ltc::DiffusionModel::x0)
      .def("drift", &ltc::DiffusionModel::drift, py::arg("t"), py::arg("x"))
      .def("dispersion", &ltc::DiffusionModel::dispersion, py::arg("t"), py::arg("x"));

  m.def("brownian_motion", &ltc::brownian_motion, py::arg("x0") = 0.0);
  m.def("ornstein_uhlenbeck", &ltc::ornstein_uhlenbeck, py::arg("theta"), py::arg("sigma"),
        py::arg("x0") = 0.0);

  py::class_<ltc::SamplePath>(m, "Path")
      .def_readonly("values", &ltc::SamplePath::values)
      .def_readonly("increments", &ltc::SamplePath::increments)
      .def_property_readonly("level", [](const ltc::SamplePath& p) { return p.partition.level(); })
      .def_property_readonly("times", [](const ltc::SamplePath& p) { return p.partition.times(); })
      .def("__len__", &ltc::SamplePath::size);

  m.def(
      "simulate",
      [](const ltc::DiffusionModel& model, int level, std::size_t n_paths, std::uint64_t seed,
         unsigned threads) {
        py::gil_scoped_release release;
        return ltc::simulate_ensemble(model, level, n_paths, seed, threads);
      },
      py::arg("model"), py::arg("level"), py::arg("n_paths"), py::arg("seed"),
      py::arg("threads") = 1);

  m.def(
      "forward_sum",
      [](const ltc::SamplePath& p, const py::object& f, double t) {
        return ltc::forward_riemann_sum(integrand(f), p, t).value;
      },
      py::arg("path"), py::arg("f"), py::arg("t") = 1.0);
  m.def(
      "backward_sum",
      [](const ltc::SamplePath& p, const py::object& f, double t) {
        return ltc::backward_riemann_sum(integrand(f), p, t).value;
      },
      py::arg("path"), py::arg("f"), py::arg("t") = 1.0);
  m.def(
      "covariation",
      [](const ltc::SamplePath& p, const py::object& f, double t) {
        return ltc::quadratic_covariation(integrand(f), p, t).value;
      },
      py::arg("path"), py::arg("f"), py::arg("t") = 1.0);

  py::class_<ltc::LocalTimeField>(m, "LocalTimeField")
      .def_property_readonly("xgrid", &ltc::LocalTimeField::xgrid)
      .def_property_readonly("tgrid", &ltc::LocalTimeField::tgrid)
      .def_property_readonly("dx", &ltc::LocalTimeField::dx)
      .def("value", &ltc::LocalTimeField::value, py::arg("x"), py::arg("t"),
           py::arg("interpolate") = false)
      .def(
          "integral",
          [](const ltc::LocalTimeField& field, const py::object& f, double t) {
            return ltc::timespace_integral(integrand(f), field, t);
          },
          py::arg("f"), py::arg("t") = 1.0);

  m.def(
      "local_time",
      [](const ltc::SamplePath& p, const ltc::DiffusionModel& model, const std::string& est,
         double x_min, double x_max, double dx, double epsilon) {
        ltc::LocalTimeSpec spec;
        spec.estimator = estimator(est);
        spec.grid = {x_min, x_max, dx};
        spec.epsilon = epsilon;
        return ltc::local_time_field(p, model, spec);
      },
      py::arg("path"), py::arg("model"), py::arg("estimator") = "crossing",
      py::arg("x_min") = -6.0, py::arg("x_max") = 6.0, py::arg("dx") = 0.01,
      py::arg("epsilon") = 0.05);

  m.def(
      "run_config",
      [](const std::string& config_json, unsigned threads) {
        nlohmann::ordered_json j;
        try {
          j = nlohmann::ordered_json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
          throw ltc::ConfigurationError(std::string("config is not valid JSON: ") + e.what());
        }
        const ltc::ExperimentConfig config = ltc::parse_config(j);
        ltc::RunOptions options;
        options.threads = threads;
        ltc::ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = ltc::run(config, options);
        }
        std::ostringstream out;
        ltc::write_report(report, out);
        return out.str();
      },
      py::arg("config_json"), py::arg("threads") = 1,
      "Runs an experiment config (JSON text) and returns the CSV report.");
}
