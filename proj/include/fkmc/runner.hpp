#pragma once

// Config-driven batch runner behind the CLI: JSON schema validation, worker
// fan-out, oracle comparison, and NDJSON/CSV report serialization.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fkmc/estimators.hpp"
#include "fkmc/oracles.hpp"
#include "fkmc/paths.hpp"

namespace fkmc {

// Process exit codes (also returned by run/sweep for in-process callers).
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigInvalid = 2,
  kExitPathFailures = 3,
  kExitOracleMissing = 4,
  kExitToleranceFailed = 5,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Ndjson, Csv };

// The file schema, resolved: defaults expanded, everything validated.
struct RunConfig {
  SimConfig sim;                     // model/fields/x0/v/w/T/dt/paths/seed/schedules
  std::vector<std::string> estimators;  // requested kinds, in request order
  bool oracle_compare = false;
  std::string output_path = "-";     // "-" = stdout
  OutputFormat output_format = OutputFormat::Ndjson;
  int workers = 0;                   // 0 = auto
  std::vector<double> t_grid;        // sweep only
  std::vector<double> checkpoints;   // martingale_drift only
  double max_failure_fraction = 0.0;  // path-failure budget (0 = none)
  std::string raw_json;              // resolved config echo, serialized
};

// Parses + validates a config document (JSON text).  Unknown fields are
// rejected.  `for_sweep` switches the t_grid/T requirements.  Throws
// ConfigError with a human-readable message.
RunConfig parse_config(const std::string& json_text, bool for_sweep = false);
RunConfig parse_config_file(const std::string& path, bool for_sweep = false);

// CLI-level overrides (applied after parsing, re-validated).
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<int> workers;
  std::optional<std::string> output;
};
void apply_overrides(RunConfig& cfg, const Overrides& ov);

// Resolves the worker count: config value, else the FKMC_WORKERS environment
// variable, else hardware concurrency.
int resolve_workers(const RunConfig& cfg);

struct RunOutcome {
  int exit_code = kExitOk;
  std::vector<EstimatorReport> reports;
  std::string message;  // failure summary for stderr, empty on success
};

// Executes every requested estimator and serializes reports to the configured
// output.  Exit code 0 iff everything completed, no path failed, and (when
// oracle_compare is set) every error/SE ratio is ≤ 3.
RunOutcome run(const RunConfig& cfg);

// Re-runs the configured estimators over cfg.t_grid horizons and writes CSV
// rows (t, kind, estimate, std_error, …).
RunOutcome sweep(const RunConfig& cfg);

// Serialization helpers (also used by the python bindings and tests).
std::string report_to_json(const EstimatorReport& rep, const RunConfig& cfg);
void write_reports_ndjson(std::ostream& os,
                          const std::vector<EstimatorReport>& reps,
                          const RunConfig& cfg);
void write_reports_csv(std::ostream& os,
                       const std::vector<EstimatorReport>& reps,
                       const RunConfig& cfg);

}  // namespace fkmc
