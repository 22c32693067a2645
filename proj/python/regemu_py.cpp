// Python bindings: scenarios, single runs, trace checking, sweeps and
// exhaustive enumeration. Results come back as plain dicts and lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "regemu/report.hpp"
#include "regemu/scenario.hpp"
#include "regemu/sim.hpp"
#include "regemu/trace.hpp"
#include "regemu/verify.hpp"

namespace py = pybind11;
using namespace regemu;

namespace {

py::dict check_dict(const CheckOutcome& c) {
  py::dict d;
  d["name"] = c.name;
  d["verdict"] = std::string(to_string(c.verdict));
  d["witness"] = c.witness;
  d["metrics"] = c.metrics;
  return d;
}

py::list checks_list(const std::vector<CheckOutcome>& checks) {
  py::list out;
  for (const auto& c : checks) out.append(check_dict(c));
  return out;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["scenario"] = r.scenario;
  d["digest"] = r.digest;
  d["seed"] = r.seed;
  d["trace_hash"] = r.trace_hash;
  d["steps"] = r.steps;
  d["truncated"] = r.truncated;
  d["reason"] = r.truncation_reason;
  d["resource_consumption"] = r.resource;
  d["max_point_contention"] = r.max_pnt_cont;
  py::list pending;
  for (auto id : r.pending) pending.append(to_string(id));
  d["pending"] = pending;
  py::list cov;
  for (const auto& ep : r.epochs) cov.append(ep.cov_size);
  d["cov_trajectory"] = cov;
  py::dict diag;
  diag["guard_violations"] = r.diagnostics.guard_violations;
  diag["monotonic_violations"] = r.diagnostics.monotonic_violations;
  diag["ts_ties"] = r.diagnostics.ts_ties;
  d["diagnostics"] = diag;
  d["checks"] = checks_list(r.checks);
  d["exit_code"] = r.exit_code();
  return d;
}

py::dict run_scenario(const Scenario& sc, std::optional<std::uint64_t> seed, const std::vector<std::string>& checks) {
  RunResult res;
  RunReport rep;
  std::string trace;
  {
    py::gil_scoped_release nogil;
    res = run(sc, seed);
    rep = make_report(sc, res, checks);
    trace = write_trace(res.history);
  }
  py::dict d = report_dict(rep);
  d["trace"] = trace;
  return d;
}

py::list check_trace(const std::string& text, const std::vector<std::string>& checks) {
  std::vector<CheckOutcome> out;
  {
    py::gil_scoped_release nogil;
    History h = parse_trace(text);
    out = run_checks(h, checks.empty() ? default_checks(h) : checks);
  }
  return checks_list(out);
}

py::dict enumerate_scenario(const Scenario& sc, std::uint64_t state_cap, std::uint64_t depth, std::uint32_t crashes,
                            bool reduce) {
  EnumOptions opt;
  opt.state_cap = state_cap;
  opt.depth = depth;
  opt.max_crashes = crashes;
  opt.reduce = reduce;
  EnumResult r;
  {
    py::gil_scoped_release nogil;
    r = exhaustive_check(sc, opt);
  }
  py::dict d;
  d["verdict"] = std::string(to_string(r.verdict));
  d["witness"] = r.witness;
  d["interleavings"] = r.interleavings;
  d["states"] = r.states;
  d["terminals"] = r.terminals;
  d["outcomes"] = r.outcomes;
  d["max_depth"] = r.max_depth;
  d["violations"] = r.violations;
  d["capped"] = r.capped;
  d["depth_exceeded"] = r.depth_exceeded;
  d["unfair_excluded"] = r.unfair_excluded;
  return d;
}

py::dict sweep_scenario(const Scenario& sc, std::uint64_t first_seed, std::uint64_t last_seed,
                        const std::vector<std::uint32_t>& clients, unsigned parallel,
                        const std::vector<std::string>& checks) {
  if (last_seed < first_seed) throw py::value_error("last_seed precedes first_seed");
  SweepOptions opt;
  opt.first_seed = first_seed;
  opt.last_seed = last_seed;
  opt.parallel = parallel;
  opt.checks = checks;
  SweepSummary s;
  {
    py::gil_scoped_release nogil;
    s = sweep(sc, opt, clients);
  }
  py::dict d;
  d["scenario"] = s.scenario;
  d["algorithm"] = s.algorithm;
  d["f"] = s.f;
  d["failed"] = s.any_failed();
  py::list points;
  for (const auto& p : s.points) {
    py::dict pd;
    pd["k"] = p.k;
    pd["runs"] = p.runs;
    pd["truncated"] = p.truncated;
    pd["passed"] = p.passed;
    pd["failed"] = p.failed;
    pd["min_resource"] = p.min_resource;
    pd["max_resource"] = p.max_resource;
    pd["max_failed_by_pnt_cont"] = p.max_failed_by_pnt_cont;
    pd["min_cov_by_epoch"] = p.min_cov_by_epoch;
    pd["invariant_firings"] = p.diagnostics_dirty;
    pd["first_failures"] = p.first_failures;
    points.append(pd);
  }
  d["points"] = points;
  return d;
}

}  // namespace

PYBIND11_MODULE(regemu, m) {
  m.doc() = "Register emulations over crash-prone servers: simulation and verification";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Scenario>(m, "Scenario")
      .def_static("load", &load_scenario, py::arg("path"))
      .def_static("parse", &parse_scenario, py::arg("text"))
      .def_readwrite("name", &Scenario::name)
      .def_property_readonly("algorithm", [](const Scenario& s) { return std::string(to_string(s.algorithm)); })
      .def_readonly("n", &Scenario::n)
      .def_readonly("f", &Scenario::f)
      .def_readwrite("k", &Scenario::k)
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("step_budget", &Scenario::step_budget)
      .def_property_readonly("object_count", &Scenario::object_count)
      .def("validate", &Scenario::validate)
      .def("canonical", &Scenario::canonical)
      .def("digest", [](const Scenario& s) { return hex64(fnv1a(s.canonical())); })
      .def("__repr__", [](const Scenario& s) {
        return "<Scenario " + s.name + " " + std::string(to_string(s.algorithm)) + " n=" + std::to_string(s.n) +
               " f=" + std::to_string(s.f) + " k=" + std::to_string(s.k) + ">";
      });

  m.def("run", &run_scenario, py::arg("scenario"), py::arg("seed") = py::none(),
        py::arg("checks") = std::vector<std::string>{},
        "Execute one run; returns the report as a dict, with the serialized trace under 'trace'.");
  m.def("check_trace", &check_trace, py::arg("trace"), py::arg("checks") = std::vector<std::string>{},
        "Run checkers over a serialized trace.");
  m.def("enumerate", &enumerate_scenario, py::arg("scenario"), py::arg("state_cap") = EnumOptions{}.state_cap,
        py::arg("depth") = EnumOptions{}.depth, py::arg("crashes") = 0u, py::arg("reduce") = true,
        "Explore every schedule of a tiny scenario.");
  m.def("sweep", &sweep_scenario, py::arg("scenario"), py::arg("first_seed"), py::arg("last_seed"),
        py::arg("clients") = std::vector<std::uint32_t>{}, py::arg("parallel") = 1u,
        py::arg("checks") = std::vector<std::string>{});
  m.def("check_names", &all_check_names);
  m.def("obstruction_bound", &obstruction_bound, py::arg("pnt_cont"));
}
