#include "fkmc/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace fkmc {

using nlohmann::json;

namespace {

const std::vector<std::string> kEstimatorKinds = {
    "semigroup", "gradient", "generator", "hessian", "martingale_drift"};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where + " must be a JSON object");
  for (const auto& item : obj.items())
    if (allowed.find(item.key()) == allowed.end())
      fail("unknown field '" + item.key() + "' in " + where);
}

double get_number(const json& obj, const std::string& where,
                  const std::string& key) {
  if (!obj.contains(key)) fail(where + " is missing '" + key + "'");
  if (!obj[key].is_number()) fail(where + "." + key + " must be a number");
  return obj[key].get<double>();
}

double get_number_or(const json& obj, const std::string& where,
                     const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(where + "." + key + " must be a number");
  return obj[key].get<double>();
}

Vec get_vector(const json& obj, const std::string& where,
               const std::string& key) {
  if (!obj.contains(key) || !obj[key].is_array())
    fail(where + "." + key + " must be an array of numbers");
  Vec out(obj[key].size());
  int i = 0;
  for (const auto& e : obj[key]) {
    if (!e.is_number()) fail(where + "." + key + " must be numeric");
    out[i++] = e.get<double>();
  }
  return out;
}

std::string get_string(const json& obj, const std::string& where,
                       const std::string& key) {
  if (!obj.contains(key) || !obj[key].is_string())
    fail(where + " is missing string '" + key + "'");
  return obj[key].get<std::string>();
}

// Conformal stereographic chart metric g = 4/(1 + c|u|²)² I; the only chart
// metric expressible from a config file.
ChartSpec stereographic_chart(int dim, double c) {
  ChartSpec spec;
  spec.dim = dim;
  spec.metric = [c, dim](const Vec& u, Mat& g) {
    const double q = 1.0 + c * u.squaredNorm();
    const double s = 4.0 / (q * q);
    g = s * Mat::Identity(dim, dim);
  };
  spec.validity_radius =
      c < 0 ? 0.99 / std::sqrt(-c) : std::numeric_limits<double>::infinity();
  return spec;
}

ManifoldModel parse_model(const json& j, json& echo) {
  require_keys(j, "model", {"kind", "dim", "curvature", "metric"});
  const std::string kind = get_string(j, "model", "kind");
  if (!j.contains("dim") || !j["dim"].is_number_integer())
    fail("model.dim must be an integer");
  const int dim = j["dim"].get<int>();
  const double curv = get_number_or(j, "model", "curvature",
                                    kind == "sphere"       ? 1.0
                                    : kind == "hyperbolic" ? -1.0
                                                           : 0.0);
  echo = {{"kind", kind}, {"dim", dim}, {"curvature", curv}};
  try {
    if (kind == "euclidean") {
      if (curv != 0.0) fail("model.curvature must be 0 on euclidean");
      if (j.contains("metric")) fail("model.metric is only valid for chart");
      return ManifoldModel::euclidean(dim);
    }
    if (kind == "sphere") {
      if (j.contains("metric")) fail("model.metric is only valid for chart");
      return ManifoldModel::sphere(dim, curv);
    }
    if (kind == "hyperbolic") {
      if (j.contains("metric")) fail("model.metric is only valid for chart");
      return ManifoldModel::hyperbolic(dim, curv);
    }
    if (kind == "chart") {
      const std::string metric =
          j.contains("metric") ? get_string(j, "model", "metric")
                               : "stereographic";
      if (metric != "stereographic")
        fail("unknown chart metric '" + metric + "'");
      echo["metric"] = metric;
      return ManifoldModel::make_chart(stereographic_chart(dim, curv));
    }
  } catch (const std::exception& e) {
    fail(std::string("invalid model: ") + e.what());
  }
  fail("unknown model.kind '" + kind + "'");
}

PotentialSpec parse_potential(const json& j, json& echo) {
  require_keys(j, "fields.potential", {"builtin", "c", "a"});
  const std::string b = get_string(j, "fields.potential", "builtin");
  if (b == "zero") {
    echo = {{"builtin", "zero"}};
    return PotentialSpec::zero();
  }
  if (b == "constant") {
    const double c = get_number(j, "fields.potential", "c");
    echo = {{"builtin", "constant"}, {"c", c}};
    return PotentialSpec::constant(c);
  }
  if (b == "quadratic") {
    const double a = get_number(j, "fields.potential", "a");
    echo = {{"builtin", "quadratic"}, {"a", a}};
    return PotentialSpec::quadratic(a);
  }
  fail("unknown potential builtin '" + b + "'");
}

DriftSpec parse_drift(const json& j, json& echo) {
  require_keys(j, "fields.drift", {"builtin", "lambda"});
  const std::string b = get_string(j, "fields.drift", "builtin");
  if (b == "zero") {
    echo = {{"builtin", "zero"}};
    return DriftSpec::zero();
  }
  if (b == "ou") {
    const double lambda = get_number(j, "fields.drift", "lambda");
    echo = {{"builtin", "ou"}, {"lambda", lambda}};
    return DriftSpec::ou(lambda);
  }
  fail("unknown drift builtin '" + b + "'");
}

PayoffSpec parse_payoff(const json& j, json& echo) {
  require_keys(j, "fields.payoff",
               {"builtin", "c", "index", "a", "b", "center", "width"});
  const std::string b = get_string(j, "fields.payoff", "builtin");
  if (b == "const") {
    const double c = get_number_or(j, "fields.payoff", "c", 1.0);
    echo = {{"builtin", "const"}, {"c", c}};
    return PayoffSpec::one(c);
  }
  if (b == "coordinate") {
    int idx = 0;
    if (j.contains("index")) {
      if (!j["index"].is_number_integer())
        fail("fields.payoff.index must be an integer");
      idx = j["index"].get<int>();
    }
    echo = {{"builtin", "coordinate"}, {"index", idx}};
    return PayoffSpec::coordinate(idx);
  }
  if (b == "linear") {
    Vec a = get_vector(j, "fields.payoff", "a");
    const double bb = get_number_or(j, "fields.payoff", "b", 0.0);
    echo = {{"builtin", "linear"},
            {"a", std::vector<double>(a.data(), a.data() + a.size())},
            {"b", bb}};
    return PayoffSpec::linear(std::move(a), bb);
  }
  if (b == "sin") {
    echo = {{"builtin", "sin"}};
    return PayoffSpec::sin_first();
  }
  if (b == "quadratic") {
    echo = {{"builtin", "quadratic"}};
    return PayoffSpec::quadratic();
  }
  if (b == "gauss_bump") {
    echo = {{"builtin", "gauss_bump"}};
    return PayoffSpec::gauss_bump();
  }
  if (b == "zonal_cos") {
    echo = {{"builtin", "zonal_cos"}};
    return PayoffSpec::zonal_cos();
  }
  if (b == "zonal_step") {
    const double center = get_number(j, "fields.payoff", "center");
    const double width = get_number(j, "fields.payoff", "width");
    if (!(width > 0)) fail("fields.payoff.width must be positive");
    echo = {{"builtin", "zonal_step"}, {"center", center}, {"width", width}};
    return PayoffSpec::zonal_step(center, width);
  }
  fail("unknown payoff builtin '" + b + "'");
}

Schedule parse_schedule(const json& j, const std::string& name,
                        Schedule::Role role, const Schedule& fallback,
                        json& echo) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "default")) {
    echo = {{"times", fallback.times()}, {"values", fallback.values()}};
    return fallback;
  }
  require_keys(j, "schedules." + name, {"times", "values"});
  const Vec times = get_vector(j, "schedules." + name, "times");
  const Vec values = get_vector(j, "schedules." + name, "values");
  try {
    Schedule s(std::vector<double>(times.data(), times.data() + times.size()),
               std::vector<double>(values.data(),
                                   values.data() + values.size()),
               role, "custom_" + name);
    echo = {{"times", s.times()}, {"values", s.values()}};
    return s;
  } catch (const std::exception& e) {
    fail("invalid schedules." + name + ": " + e.what());
  }
}

std::vector<double> json_doubles(const json& arr, const std::string& where) {
  if (!arr.is_array()) fail(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : arr) {
    if (!e.is_number()) fail(where + " must be numeric");
    out.push_back(e.get<double>());
  }
  return out;
}

OracleQuantity quantity_for(const std::string& kind) {
  if (kind == "semigroup") return OracleQuantity::Semigroup;
  if (kind == "gradient" || kind == "martingale_drift")
    return OracleQuantity::Gradient;
  if (kind == "generator") return OracleQuantity::Generator;
  return OracleQuantity::Hessian;
}

}  // namespace

RunConfig parse_config(const std::string& json_text, bool for_sweep) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j, "config",
               {"model", "fields", "x0", "v", "w", "T", "dt", "n_paths",
                "seed", "schedules", "estimators", "oracle_compare", "output",
                "workers", "t_grid", "checkpoints", "max_failure_fraction",
                "v_min"});

  RunConfig cfg;
  json echo;

  if (!j.contains("model")) fail("config is missing 'model'");
  cfg.sim.model = parse_model(j["model"], echo["model"]);

  PotentialSpec pot = PotentialSpec::zero();
  DriftSpec drift = DriftSpec::zero();
  PayoffSpec payoff = PayoffSpec::one();
  echo["fields"] = {{"potential", {{"builtin", "zero"}}},
                    {"drift", {{"builtin", "zero"}}},
                    {"payoff", {{"builtin", "const"}, {"c", 1.0}}}};
  if (j.contains("fields")) {
    require_keys(j["fields"], "fields", {"potential", "drift", "payoff"});
    if (j["fields"].contains("potential"))
      pot = parse_potential(j["fields"]["potential"],
                            echo["fields"]["potential"]);
    if (j["fields"].contains("drift"))
      drift = parse_drift(j["fields"]["drift"], echo["fields"]["drift"]);
    if (j["fields"].contains("payoff"))
      payoff = parse_payoff(j["fields"]["payoff"], echo["fields"]["payoff"]);
  }
  double v_min = get_number_or(j, "config", "v_min", 0.0);
  if (!j.contains("v_min") && pot.kind == PotentialKind::Constant)
    v_min = std::min(0.0, pot.c);
  echo["v_min"] = v_min;
  cfg.sim.fields = FieldSpec(pot, drift, payoff, v_min);

  cfg.sim.x0 = get_vector(j, "config", "x0");
  const int n = cfg.sim.model.dim;
  cfg.sim.v = Vec::Zero(n);
  cfg.sim.v[0] = 1.0;
  cfg.sim.w = cfg.sim.v;
  if (j.contains("v")) cfg.sim.v = get_vector(j, "config", "v");
  if (j.contains("w")) cfg.sim.w = get_vector(j, "config", "w");

  cfg.sim.T = get_number_or(j, "config", "T", 1.0);
  cfg.sim.dt = get_number_or(j, "config", "dt", 1e-3);
  if (j.contains("n_paths")) {
    if (!j["n_paths"].is_number_integer())
      fail("n_paths must be an integer");
    cfg.sim.n_paths = j["n_paths"].get<std::int64_t>();
  } else {
    cfg.sim.n_paths = 1000;
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      fail("seed must be a non-negative integer");
    const auto s = j["seed"].get<std::int64_t>();
    if (s < 0) fail("seed must be a non-negative integer");
    cfg.sim.seed = static_cast<std::uint64_t>(s);
  }

  if (!j.contains("estimators") || !j["estimators"].is_array() ||
      j["estimators"].empty())
    fail("estimators must be a non-empty array of estimator names");
  for (const auto& e : j["estimators"]) {
    if (!e.is_string()) fail("estimators entries must be strings");
    const std::string kind = e.get<std::string>();
    if (std::find(kEstimatorKinds.begin(), kEstimatorKinds.end(), kind) ==
        kEstimatorKinds.end())
      fail("unknown estimator '" + kind + "'");
    if (std::find(cfg.estimators.begin(), cfg.estimators.end(), kind) !=
        cfg.estimators.end())
      fail("estimator '" + kind + "' requested twice");
    cfg.estimators.push_back(kind);
  }
  auto requested = [&](const char* kind) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), kind) !=
           cfg.estimators.end();
  };
  cfg.sim.estimators.semigroup = requested("semigroup");
  cfg.sim.estimators.gradient =
      requested("gradient") || requested("martingale_drift");
  cfg.sim.estimators.generator = requested("generator");
  cfg.sim.estimators.hessian = requested("hessian");

  // Schedule defaults depend on which estimators run.
  const bool gen_shape =
      cfg.sim.estimators.generator || cfg.sim.estimators.hessian;
  const Schedule k_default = gen_shape
                                 ? Schedule::generator_k_default(cfg.sim.T)
                                 : Schedule::gradient_default(cfg.sim.T);
  const Schedule l_default = Schedule::generator_l_default(cfg.sim.T);
  json sched = j.contains("schedules") ? j["schedules"] : json::object();
  require_keys(sched, "schedules", {"k", "l"});
  cfg.sim.k = parse_schedule(sched.contains("k") ? sched["k"] : json(),
                             "k", Schedule::Role::K, k_default,
                             echo["schedules"]["k"]);
  cfg.sim.l = parse_schedule(sched.contains("l") ? sched["l"] : json(),
                             "l", Schedule::Role::L, l_default,
                             echo["schedules"]["l"]);

  if (j.contains("oracle_compare")) {
    if (!j["oracle_compare"].is_boolean())
      fail("oracle_compare must be a boolean");
    cfg.oracle_compare = j["oracle_compare"].get<bool>();
  }

  if (j.contains("output")) {
    require_keys(j["output"], "output", {"path", "format"});
    if (j["output"].contains("path"))
      cfg.output_path = get_string(j["output"], "output", "path");
    if (j["output"].contains("format")) {
      const std::string f = get_string(j["output"], "output", "format");
      if (f == "json" || f == "ndjson")
        cfg.output_format = OutputFormat::Ndjson;
      else if (f == "csv")
        cfg.output_format = OutputFormat::Csv;
      else
        fail("output.format must be json|ndjson|csv");
    }
  }

  if (j.contains("workers")) {
    if (j["workers"].is_string()) {
      if (j["workers"].get<std::string>() != "auto")
        fail("workers must be a positive integer or \"auto\"");
      cfg.workers = 0;
    } else if (j["workers"].is_number_integer()) {
      cfg.workers = j["workers"].get<int>();
      if (cfg.workers < 1)
        fail("workers must be a positive integer or \"auto\"");
    } else {
      fail("workers must be a positive integer or \"auto\"");
    }
  }

  if (j.contains("t_grid")) {
    if (!for_sweep) fail("t_grid is only valid for sweep configs");
    cfg.t_grid = json_doubles(j["t_grid"], "t_grid");
    if (cfg.t_grid.empty()) fail("t_grid must be non-empty");
    for (double t : cfg.t_grid)
      if (!(t > 0)) fail("t_grid entries must be positive");
  } else if (for_sweep) {
    fail("sweep configs need a non-empty t_grid");
  }

  if (j.contains("checkpoints")) {
    if (!requested("martingale_drift"))
      fail("checkpoints are only valid with the martingale_drift estimator");
    const auto cps = json_doubles(j["checkpoints"], "checkpoints");
    if (cps.empty()) fail("checkpoints must be non-empty");
    cfg.checkpoints = cps;
  } else if (requested("martingale_drift")) {
    cfg.checkpoints = {cfg.sim.T / 4.0, cfg.sim.T / 2.0,
                       3.0 * cfg.sim.T / 4.0};
  }

  cfg.max_failure_fraction =
      get_number_or(j, "config", "max_failure_fraction", 0.0);
  if (cfg.max_failure_fraction < 0 || cfg.max_failure_fraction > 1)
    fail("max_failure_fraction must lie in [0, 1]");

  if (for_sweep && requested("martingale_drift"))
    fail("martingale_drift is not available in sweeps");
  if (for_sweep && j.contains("schedules"))
    fail("sweeps use default schedules; custom schedules are not supported");

  // Structural validation of the resolved simulation config.
  try {
    cfg.sim.validate();
  } catch (const std::exception& e) {
    fail(std::string("invalid config: ") + e.what());
  }
  if (cfg.sim.estimators.hessian) {
    try {
      if (!curvature_pack(cfg.sim.model, cfg.sim.fields).hessian_supported())
        fail("hessian estimator is not available for this model/drift");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string("invalid config: ") + e.what());
    }
  }

  echo["x0"] = std::vector<double>(cfg.sim.x0.data(),
                                   cfg.sim.x0.data() + cfg.sim.x0.size());
  echo["v"] = std::vector<double>(cfg.sim.v.data(),
                                  cfg.sim.v.data() + cfg.sim.v.size());
  echo["w"] = std::vector<double>(cfg.sim.w.data(),
                                  cfg.sim.w.data() + cfg.sim.w.size());
  echo["T"] = cfg.sim.T;
  echo["dt"] = cfg.sim.dt;
  echo["n_paths"] = cfg.sim.n_paths;
  echo["seed"] = cfg.sim.seed;
  echo["estimators"] = cfg.estimators;
  echo["oracle_compare"] = cfg.oracle_compare;
  echo["output"] = {
      {"path", cfg.output_path},
      {"format", cfg.output_format == OutputFormat::Csv ? "csv" : "ndjson"}};
  echo["workers"] = cfg.workers == 0 ? json("auto") : json(cfg.workers);
  echo["max_failure_fraction"] = cfg.max_failure_fraction;
  if (!cfg.t_grid.empty()) echo["t_grid"] = cfg.t_grid;
  if (!cfg.checkpoints.empty()) echo["checkpoints"] = cfg.checkpoints;
  cfg.raw_json = echo.dump();
  return cfg;
}

RunConfig parse_config_file(const std::string& path, bool for_sweep) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), for_sweep);
}

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
  json echo = json::parse(cfg.raw_json);
  if (ov.seed) {
    cfg.sim.seed = *ov.seed;
    echo["seed"] = *ov.seed;
  }
  if (ov.paths) {
    if (*ov.paths < 1) fail("--paths must be >= 1");
    cfg.sim.n_paths = *ov.paths;
    echo["n_paths"] = *ov.paths;
  }
  if (ov.workers) {
    if (*ov.workers < 1) fail("--workers must be >= 1");
    cfg.workers = *ov.workers;
    echo["workers"] = *ov.workers;
  }
  if (ov.output) {
    cfg.output_path = *ov.output;
    echo["output"]["path"] = *ov.output;
  }
  cfg.raw_json = echo.dump();
}

int resolve_workers(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("FKMC_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1 && v <= 4096) return static_cast<int>(v);
    fail("FKMC_WORKERS must be a positive integer");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace {

json report_json(const EstimatorReport& rep, const RunConfig& cfg) {
  json o;
  o["kind"] = rep.kind;
  o["estimate"] = rep.estimate;
  o["std_error"] = rep.std_error;
  o["n_paths_used"] = rep.n_paths_used;
  o["n_paths_failed"] = rep.n_paths_failed;
  json tb = json::object();
  for (const auto& [name, val] : rep.term_breakdown) tb[name] = val;
  o["term_breakdown"] = tb;
  o["T"] = rep.T;
  o["dt"] = rep.dt;
  o["seed"] = rep.seed;
  o["model"] = rep.model_summary;
  o["schedule_k"] = rep.schedule_k_id;
  o["schedule_l"] = rep.schedule_l_id;
  if (rep.checkpoint >= 0) o["checkpoint"] = rep.checkpoint;
  if (rep.has_oracle) {
    o["oracle_value"] = rep.oracle_value;
    o["abs_error"] = rep.abs_error;
    o["error_se_ratio"] = rep.error_se_ratio;
  }
  o["config"] = json::parse(cfg.raw_json);
  return o;
}

}  // namespace

std::string report_to_json(const EstimatorReport& rep, const RunConfig& cfg) {
  return report_json(rep, cfg).dump();
}

void write_reports_ndjson(std::ostream& os,
                          const std::vector<EstimatorReport>& reps,
                          const RunConfig& cfg) {
  for (const auto& rep : reps) os << report_to_json(rep, cfg) << "\n";
}

void write_reports_csv(std::ostream& os,
                       const std::vector<EstimatorReport>& reps,
                       const RunConfig& cfg) {
  os << "# config: " << cfg.raw_json << "\n";
  os << "t,kind,estimate,std_error,n_paths_used,n_paths_failed,checkpoint,"
        "oracle_value,abs_error,error_se_ratio\n";
  os.precision(17);
  for (const auto& rep : reps) {
    os << rep.T << "," << rep.kind << "," << rep.estimate << ","
       << rep.std_error << "," << rep.n_paths_used << ","
       << rep.n_paths_failed << ",";
    if (rep.checkpoint >= 0) os << rep.checkpoint;
    os << ",";
    if (rep.has_oracle)
      os << rep.oracle_value << "," << rep.abs_error << ","
         << rep.error_se_ratio;
    else
      os << ",,";
    os << "\n";
  }
}

namespace {

// Writes reports to cfg.output_path (NDJSON or CSV; "-" = stdout).
void emit_reports(const RunConfig& cfg, const std::vector<EstimatorReport>& reps,
                  OutputFormat format) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (cfg.output_path != "-") {
    file.open(cfg.output_path);
    if (!file)
      throw ConfigError("cannot open output file '" + cfg.output_path + "'");
    os = &file;
  }
  if (format == OutputFormat::Ndjson)
    write_reports_ndjson(*os, reps, cfg);
  else
    write_reports_csv(*os, reps, cfg);
  os->flush();
}

struct OracleSlot {
  bool wanted = false;
  std::optional<OracleCase> oc;
};

// Pre-fetches oracle cases for every estimator that needs one; returns a
// failure message naming the first estimator without an oracle.
std::string collect_oracles(const RunConfig& cfg,
                            std::map<std::string, OracleSlot>& slots) {
  for (const std::string& kind : cfg.estimators) {
    OracleSlot slot;
    slot.wanted = cfg.oracle_compare || kind == "martingale_drift";
    if (slot.wanted) {
      slot.oc = oracle_lookup(cfg.sim.model, cfg.sim.fields,
                              quantity_for(kind));
      if (!slot.oc)
        return "no closed-form oracle for estimator '" + kind +
               "' on this model/field combination";
      if (kind == "martingale_drift" &&
          (!slot.oc->solution_value || !slot.oc->solution_gradient))
        return "oracle for martingale_drift lacks a path solution";
    }
    slots[kind] = std::move(slot);
  }
  return "";
}

void attach_oracle(EstimatorReport& rep, const OracleCase& oc,
                   const SimConfig& sim) {
  const Trajectory t0 = make_initial(sim);
  const Vec v_amb = t0.F * sim.v;
  const Vec w_amb = t0.F * sim.w;
  rep.has_oracle = true;
  rep.oracle_value = oc.closed_form(sim.T, t0.x, v_amb, w_amb);
  rep.abs_error = std::abs(rep.estimate - rep.oracle_value);
  rep.error_se_ratio =
      rep.std_error > 0 ? rep.abs_error / rep.std_error
                        : (rep.abs_error == 0 ? 0.0
                                              : std::numeric_limits<double>::infinity());
}

// Runs all estimators for one resolved SimConfig; appends reports.  Returns
// the worst path-failure count seen.
std::int64_t run_estimators(const RunConfig& cfg, const SimConfig& sim,
                            const std::map<std::string, OracleSlot>& oracles,
                            int workers,
                            std::vector<EstimatorReport>& reports) {
  const bool needs_ensemble = sim.estimators.any();
  EnsembleResult ens;
  if (needs_ensemble) ens = simulate_ensemble(sim, workers);
  std::int64_t worst_failed = ens.n_failed;

  for (const std::string& kind : cfg.estimators) {
    const OracleSlot& slot = oracles.at(kind);
    if (kind == "martingale_drift") {
      PathSolution sol;
      const double T = sim.T;
      const auto& oc = *slot.oc;
      sol.value = [&oc, T](double t, const Vec& x) {
        return oc.solution_value(T, t, x);
      };
      sol.gradient = [&oc, T](double t, const Vec& x, Vec& out) {
        oc.solution_gradient(T, t, x, out);
      };
      auto reps = martingale_drift_check(sim, cfg.checkpoints, sol, workers);
      for (auto& rep : reps) {
        worst_failed = std::max(worst_failed, rep.n_paths_failed);
        if (cfg.oracle_compare) attach_oracle(rep, oc, sim);
        reports.push_back(std::move(rep));
      }
      continue;
    }
    EstimatorReport rep;
    if (kind == "semigroup")
      rep = estimate_semigroup(ens, sim);
    else if (kind == "gradient")
      rep = estimate_gradient(ens, sim);
    else if (kind == "generator")
      rep = estimate_generator(ens, sim);
    else
      rep = estimate_hessian(ens, sim);
    if (slot.wanted) attach_oracle(rep, *slot.oc, sim);
    reports.push_back(std::move(rep));
  }
  return worst_failed;
}

RunOutcome finish(const RunConfig& cfg, std::vector<EstimatorReport> reports,
                  std::int64_t worst_failed, OutputFormat format) {
  RunOutcome out;
  out.reports = std::move(reports);
  emit_reports(cfg, out.reports, format);

  const auto allowed = static_cast<std::int64_t>(
      cfg.max_failure_fraction * static_cast<double>(cfg.sim.n_paths));
  if (worst_failed > allowed) {
    out.exit_code = kExitPathFailures;
    std::ostringstream os;
    os << worst_failed << " of " << cfg.sim.n_paths
       << " paths failed (allowed: " << allowed << ")";
    out.message = os.str();
    return out;
  }
  if (cfg.oracle_compare) {
    for (const auto& rep : out.reports) {
      if (!rep.has_oracle) continue;
      if (!(rep.error_se_ratio <= 3.0)) {
        out.exit_code = kExitToleranceFailed;
        std::ostringstream os;
        os << rep.kind << " estimate " << rep.estimate
           << " misses oracle " << rep.oracle_value << " by "
           << rep.error_se_ratio << " SE (limit 3)";
        out.message = os.str();
        return out;
      }
    }
  }
  return out;
}

}  // namespace

RunOutcome run(const RunConfig& cfg) {
  RunOutcome out;
  std::map<std::string, OracleSlot> oracles;
  const std::string missing = collect_oracles(cfg, oracles);
  if (!missing.empty()) {
    out.exit_code = kExitOracleMissing;
    out.message = missing;
    return out;
  }
  const int workers = resolve_workers(cfg);
  std::vector<EstimatorReport> reports;
  std::int64_t worst_failed = 0;
  try {
    worst_failed = run_estimators(cfg, cfg.sim, oracles, workers, reports);
  } catch (const EstimatorError& e) {
    out.exit_code = kExitPathFailures;
    out.message = e.what();
    return out;
  }
  return finish(cfg, std::move(reports), worst_failed, cfg.output_format);
}

RunOutcome sweep(const RunConfig& cfg) {
  RunOutcome out;
  std::map<std::string, OracleSlot> oracles;
  const std::string missing = collect_oracles(cfg, oracles);
  if (!missing.empty()) {
    out.exit_code = kExitOracleMissing;
    out.message = missing;
    return out;
  }

  // Resolve and validate every grid entry before simulating any of them.
  std::vector<SimConfig> sims;
  const bool gen_shape =
      cfg.sim.estimators.generator || cfg.sim.estimators.hessian;
  for (double t : cfg.t_grid) {
    SimConfig sim = cfg.sim;
    sim.T = t;
    sim.k = gen_shape ? Schedule::generator_k_default(t)
                      : Schedule::gradient_default(t);
    sim.l = Schedule::generator_l_default(t);
    try {
      sim.validate();
    } catch (const std::exception& e) {
      out.exit_code = kExitConfigInvalid;
      std::ostringstream os;
      os << "t_grid entry " << t << ": " << e.what();
      out.message = os.str();
      return out;
    }
    sims.push_back(std::move(sim));
  }

  const int workers = resolve_workers(cfg);
  std::vector<EstimatorReport> reports;
  std::int64_t worst_failed = 0;
  try {
    for (const SimConfig& sim : sims)
      worst_failed = std::max(
          worst_failed,
          run_estimators(cfg, sim, oracles, workers, reports));
  } catch (const EstimatorError& e) {
    out.exit_code = kExitPathFailures;
    out.message = e.what();
    return out;
  }
  // Sweeps are always CSV: one row per (t, estimator).
  return finish(cfg, std::move(reports), worst_failed, OutputFormat::Csv);
}

}  // namespace fkmc
