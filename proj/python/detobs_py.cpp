#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "detobs/config.hpp"
#include "detobs/gain.hpp"
#include "detobs/graph.hpp"
#include "detobs/observer.hpp"
#include "detobs/plant.hpp"
#include "detobs/sim.hpp"

namespace py = pybind11;
using namespace detobs;

namespace {

// Trace as a dict of 1-D/2-D arrays keyed like the CSV columns.
py::dict trace_to_dict(const SimulationTrace& tr) {
  const auto rows = static_cast<Eigen::Index>(tr.rows());
  const auto n = static_cast<Eigen::Index>(tr.state_dim);
  py::dict d;
  d["t"] = Vec(Eigen::Map<const Vec>(tr.t.data(), rows));
  Mat x0(rows, n);
  for (Eigen::Index r = 0; r < rows; ++r) x0.row(r) = tr.x0[static_cast<std::size_t>(r)].transpose();
  d["x0"] = x0;
  py::list x_hat, e1, ev;
  for (std::size_t i = 0; i < tr.agents; ++i) {
    Mat xh(rows, n);
    Vec e(rows), f(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto k = static_cast<std::size_t>(r);
      xh.row(r) = tr.x_hat[i][k].transpose();
      e(r) = tr.e1_norm[i][k];
      f(r) = tr.event[i][k];
    }
    x_hat.append(xh);
    e1.append(e);
    ev.append(f);
  }
  d["x_hat"] = x_hat;
  d["e1_norm"] = e1;
  d["event"] = ev;
  d["phase"] = tr.phase;
  return d;
}

}  // namespace

PYBIND11_MODULE(_detobs, m) {
  m.doc() = "Distributed event-triggered DNN observer core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);

  py::class_<SimConfig>(m, "SimConfig")
      .def_property("learning", [](const SimConfig& c) { return c.learning; },
                    [](SimConfig& c, bool v) { c.learning = v; })
      .def_property("seed", [](const SimConfig& c) { return c.seed; },
                    [](SimConfig& c, std::uint64_t v) { c.seed = v; })
      .def_property("t_final", [](const SimConfig& c) { return c.plant.t_final; },
                    [](SimConfig& c, double v) { c.plant.t_final = v; })
      .def_property("trace_stride", [](const SimConfig& c) { return c.output.trace_stride; },
                    [](SimConfig& c, std::size_t v) { c.output.trace_stride = v; })
      .def_property_readonly("agents", &SimConfig::agents)
      .def_property_readonly("state_dim", &SimConfig::state_dim)
      .def("validate", &SimConfig::validate)
      .def("echo", [](const SimConfig& c) { return echo_config(c); });

  m.def("reference_config", &reference_config);
  m.def("parse_config", &parse_config, py::arg("json_text"));
  m.def("load_config", &load_config, py::arg("path"));

  py::class_<GainCertificate>(m, "GainCertificate")
      .def_readonly("K1", &GainCertificate::K1)
      .def_readonly("k1", &GainCertificate::k1)
      .def_readonly("lmi_min_eig", &GainCertificate::lmi_min_eig)
      .def_readonly("feasible", &GainCertificate::feasible)
      .def_readonly("iterations", &GainCertificate::iterations);

  m.def("laplacian", [](const Mat& a) { return laplacian(CommGraph(a)); }, py::arg("adjacency"));
  m.def("is_connected", [](const Mat& a) { return is_connected(CommGraph(a)); }, py::arg("adjacency"));
  m.def("lmi_matrix", &lmi_matrix, py::arg("laplacian"), py::arg("c_stacked"), py::arg("K1"));
  m.def("min_eig_symmetric", &min_eig_symmetric, py::arg("m"));
  m.def("verify_gain", &verify_gain, py::arg("laplacian"), py::arg("c_stacked"), py::arg("K1"), py::arg("k1"));
  m.def(
      "synthesize_gain",
      [](const Mat& l, const Mat& c, double k1, int max_iterations) {
        SynthesisOptions o;
        o.max_iterations = max_iterations;
        return synthesize_gain(l, c, k1, o);
      },
      py::arg("laplacian"), py::arg("c_stacked"), py::arg("k1"), py::arg("max_iterations") = 500);

  m.def(
      "trigger_constants",
      [](double k2, double kappa, const Mat& l, const Mat& K1) {
        const TriggerConstants c = trigger_constants(k2, kappa, l, K1);
        return py::make_tuple(c.phi1, c.phi2);
      },
      py::arg("k2"), py::arg("kappa"), py::arg("laplacian"), py::arg("K1"));
  m.def("zeno_lower_bound", &zeno_lower_bound, py::arg("e2_max"), py::arg("epsilon"), py::arg("agents"),
        py::arg("phi1"));

  m.def("vanderpol_drift", &vanderpol_drift, py::arg("x"), py::arg("mu"));
  m.def("reference_disturbance", &reference_disturbance, py::arg("t"));

  m.def(
      "run",
      [](const SimConfig& cfg) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(cfg);
        }
        py::dict out;
        out["trace"] = trace_to_dict(r.trace);
        out["report_json"] = report_to_json(r.report);
        out["event_times"] = r.event_times;
        out["_trace"] = py::cast(std::move(r.trace));
        return out;
      },
      py::arg("config"));

  py::class_<SimulationTrace>(m, "SimulationTrace")
      .def_property_readonly("rows", &SimulationTrace::rows)
      .def_readonly("agents", &SimulationTrace::agents)
      .def("as_dict", &trace_to_dict);

  m.def("write_trace_csv", &write_trace_csv, py::arg("trace"), py::arg("path"));
  m.def("read_trace_csv", &read_trace_csv, py::arg("path"));
  m.def("trace_csv_header", &trace_csv_header, py::arg("agents"), py::arg("state_dim"));
  m.def("rmse", &rmse, py::arg("trace"), py::arg("agent"), py::arg("t_a"), py::arg("t_b"));
  m.def(
      "compare_runs",
      [](const std::string& a, const std::string& b) { return compare_runs(report_from_json(a), report_from_json(b)); },
      py::arg("baseline_json"), py::arg("learning_json"));
}
