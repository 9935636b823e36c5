#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "fkmc/runner.hpp"

namespace py = pybind11;

namespace {

py::dict report_dict(const fkmc::EstimatorReport& r) {
  py::dict d;
  d["kind"] = r.kind;
  d["estimate"] = r.estimate;
  d["std_error"] = r.std_error;
  d["n_paths_used"] = r.n_paths_used;
  d["n_paths_failed"] = r.n_paths_failed;
  py::dict tb;
  for (const auto& [name, val] : r.term_breakdown)
    tb[py::str(name)] = val;
  d["term_breakdown"] = tb;
  d["T"] = r.T;
  d["dt"] = r.dt;
  d["seed"] = r.seed;
  d["model"] = r.model_summary;
  d["schedule_k"] = r.schedule_k_id;
  d["schedule_l"] = r.schedule_l_id;
  if (r.checkpoint >= 0) d["checkpoint"] = r.checkpoint;
  if (r.has_oracle) {
    d["oracle_value"] = r.oracle_value;
    d["abs_error"] = r.abs_error;
    d["error_se_ratio"] = r.error_se_ratio;
  }
  return d;
}

py::tuple outcome_tuple(const fkmc::RunOutcome& out) {
  py::list reports;
  for (const auto& r : out.reports) reports.append(report_dict(r));
  return py::make_tuple(out.exit_code, reports, out.message);
}

fkmc::RunConfig parse_quiet(const std::string& text, bool for_sweep) {
  fkmc::RunConfig cfg = fkmc::parse_config(text, for_sweep);
  cfg.output_path = "/dev/null";  // in-process callers read the return value
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_fkmc, m) {
  m.doc() =
      "Monte Carlo estimators for Feynman-Kac semigroups and their "
      "derivatives on model manifolds";
  m.attr("__version__") = "0.1.0";

  py::register_exception<fkmc::ConfigError>(m, "ConfigError",
                                            PyExc_ValueError);

  m.def(
      "run_json",
      [](const std::string& config_text) {
        return outcome_tuple(fkmc::run(parse_quiet(config_text, false)));
      },
      py::arg("config_text"),
      "Run the configured estimators; returns (exit_code, reports, message).");

  m.def(
      "sweep_json",
      [](const std::string& config_text) {
        return outcome_tuple(fkmc::sweep(parse_quiet(config_text, true)));
      },
      py::arg("config_text"),
      "Run the estimators across the config's t_grid; returns (exit_code, "
      "reports, message).");

  m.def(
      "validate_json",
      [](const std::string& config_text, bool for_sweep) {
        return fkmc::parse_config(config_text, for_sweep).raw_json;
      },
      py::arg("config_text"), py::arg("for_sweep") = false,
      "Validate a config; returns the resolved config (defaults expanded) as "
      "JSON text.  Raises ConfigError on invalid input.");
}
