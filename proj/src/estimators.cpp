#include "fkmc/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fkmc {

void RunningMoments::merge(const RunningMoments& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double delta = o.mean - mean;
  const std::int64_t total = n + o.n;
  mean += delta * static_cast<double>(o.n) / static_cast<double>(total);
  m2 += o.m2 + delta * delta *
                   (static_cast<double>(n) * static_cast<double>(o.n) /
                    static_cast<double>(total));
  n = total;
}

double RunningMoments::std_error() const {
  return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

namespace {

// Runs `body(path_index, workspace)` for every path index, claiming indices
// in fixed-size chunks.  Exceptions other than PathError are fatal and
// rethrown on the caller thread.
template <typename Body>
void parallel_paths(const SimConfig& cfg, int n_workers, Body&& body) {
  const std::int64_t n_paths = cfg.n_paths;
  if (n_workers <= 1) {
    StepWorkspace ws = make_workspace(cfg);
    for (std::int64_t p = 0; p < n_paths; ++p) body(p, ws);
    return;
  }
  std::atomic<std::int64_t> next{0};
  const std::int64_t chunk =
      std::max<std::int64_t>(1, n_paths / (16 * n_workers));
  std::mutex fatal_mu;
  std::exception_ptr fatal;
  auto worker = [&]() {
    try {
      StepWorkspace ws = make_workspace(cfg);
      for (;;) {
        const std::int64_t begin = next.fetch_add(chunk);
        if (begin >= n_paths) break;
        const std::int64_t end = std::min(begin + chunk, n_paths);
        for (std::int64_t p = begin; p < end; ++p) body(p, ws);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(fatal_mu);
      if (!fatal) fatal = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (fatal) std::rethrow_exception(fatal);
}

}  // namespace

EnsembleResult simulate_ensemble(const SimConfig& cfg, int n_workers) {
  cfg.validate();
  EnsembleResult ens;
  ens.samples.assign(static_cast<std::size_t>(cfg.n_paths), TerminalSample{});
  std::mutex fail_mu;
  std::map<std::int64_t, std::string> failures;

  parallel_paths(cfg, n_workers, [&](std::int64_t p, StepWorkspace& ws) {
    TerminalSample& s = ens.samples[static_cast<std::size_t>(p)];
    try {
      Trajectory traj = simulate(cfg, p, ws);
      s.failed = false;
      s.fk_f = traj.fk_weight() * cfg.fields.f(traj.x);
      s.acc_grad = traj.acc_grad();
      s.acc_grad_db = traj.acc_grad_db;
      s.acc_grad_ds = traj.acc_grad_ds;
      if (cfg.estimators.need_gen_acc()) {
        s.acc_gen_A = traj.acc_gen_A;
        s.acc_gen_B = traj.acc_gen_B;
        s.acc_gen_Z = traj.acc_gen_Z;
      }
      if (cfg.estimators.need_hess_acc()) {
        s.acc_hess_Wp = traj.acc_hess_Wp;
        s.acc_hess_V = traj.acc_hess_V;
        s.acc_hess_l = traj.acc_hess_l();
        s.acc_hess_l_db = traj.acc_hess_l_db;
        s.acc_hess_k = traj.acc_hess_k();
      }
    } catch (const PathError& e) {
      s.failed = true;
      std::lock_guard<std::mutex> lk(fail_mu);
      failures.emplace(p, e.what());
    }
  });

  ens.n_failed = static_cast<std::int64_t>(failures.size());
  if (!failures.empty()) {
    std::ostringstream os;
    os << "path " << failures.begin()->first << ": "
       << failures.begin()->second;
    ens.first_failure = os.str();
  }
  return ens;
}

namespace {

void fill_common(EstimatorReport& r, const EnsembleResult& ens,
                 const SimConfig& cfg) {
  r.n_paths_failed = ens.n_failed;
  r.n_paths_used = cfg.n_paths - ens.n_failed;
  r.T = cfg.T;
  r.dt = cfg.dt;
  r.seed = cfg.seed;
  std::ostringstream os;
  os << cfg.model.kind_name() << "/dim=" << cfg.model.dim;
  r.model_summary = os.str();
  r.schedule_k_id = cfg.k.id();
  r.schedule_l_id = cfg.l.id();
}

void require_used_paths(const EstimatorReport& r) {
  if (r.n_paths_used < 1)
    throw EstimatorError("every path failed; nothing to aggregate");
}

}  // namespace

EstimatorReport estimate_semigroup(const EnsembleResult& ens,
                                   const SimConfig& cfg) {
  if (!cfg.estimators.semigroup)
    throw EstimatorError("semigroup estimator was not requested in the config");
  EstimatorReport r;
  r.kind = "semigroup";
  fill_common(r, ens, cfg);
  require_used_paths(r);
  RunningMoments m;
  for (const auto& s : ens.samples)
    if (!s.failed) m.push(s.fk_f);
  r.estimate = m.mean;
  r.std_error = m.std_error();
  r.term_breakdown = {{"fk_f", m.mean}};
  return r;
}

EstimatorReport estimate_gradient(const EnsembleResult& ens,
                                  const SimConfig& cfg) {
  if (!cfg.estimators.gradient)
    throw EstimatorError("gradient estimator was not requested in the config");
  EstimatorReport r;
  r.kind = "gradient";
  fill_common(r, ens, cfg);
  require_used_paths(r);
  RunningMoments m, m_db, m_ds;
  for (const auto& s : ens.samples) {
    if (s.failed) continue;
    m.push(-s.fk_f * s.acc_grad);
    m_db.push(-s.fk_f * s.acc_grad_db);
    m_ds.push(-s.fk_f * s.acc_grad_ds);
  }
  r.estimate = m.mean;
  r.std_error = m.std_error();
  r.term_breakdown = {{"db_term", m_db.mean}, {"dv_term", m_ds.mean}};
  return r;
}

EstimatorReport estimate_generator(const EnsembleResult& ens,
                                   const SimConfig& cfg) {
  if (!cfg.estimators.generator)
    throw EstimatorError("generator estimator was not requested in the config");
  EstimatorReport r;
  r.kind = "generator";
  fill_common(r, ens, cfg);
  require_used_paths(r);
  RunningMoments m, m_z, m_ab;
  for (const auto& s : ens.samples) {
    if (s.failed) continue;
    const double ab = 0.5 * s.acc_gen_A.dot(s.acc_gen_B);
    m.push(s.fk_f * (s.acc_gen_Z + ab));
    m_z.push(s.fk_f * s.acc_gen_Z);
    m_ab.push(s.fk_f * ab);
  }
  r.estimate = m.mean;
  r.std_error = m.std_error();
  r.term_breakdown = {{"z_term", m_z.mean}, {"ab_term", m_ab.mean}};
  return r;
}

EstimatorReport estimate_hessian(const EnsembleResult& ens,
                                 const SimConfig& cfg) {
  if (!cfg.estimators.hessian)
    throw EstimatorError("hessian estimator was not requested in the config");
  EstimatorReport r;
  r.kind = "hessian";
  fill_common(r, ens, cfg);
  require_used_paths(r);
  RunningMoments m, m_wp, m_v, m_prod;
  for (const auto& s : ens.samples) {
    if (s.failed) continue;
    const double wp = -s.fk_f * s.acc_hess_Wp;
    const double vt = -s.fk_f * s.acc_hess_V;
    const double pr = s.fk_f * s.acc_hess_l * s.acc_hess_k;
    m.push(wp + vt + pr);
    m_wp.push(wp);
    m_v.push(vt);
    m_prod.push(pr);
  }
  r.estimate = m.mean;
  r.std_error = m.std_error();
  r.term_breakdown = {{"wprime_term", m_wp.mean},
                      {"potential_term", m_v.mean},
                      {"product_term", m_prod.mean}};
  return r;
}

namespace {

EnsembleResult run_one(const SimConfig& cfg) {
  return simulate_ensemble(cfg, 1);
}

}  // namespace

EstimatorReport estimate_semigroup(const SimConfig& cfg) {
  return estimate_semigroup(run_one(cfg), cfg);
}
EstimatorReport estimate_gradient(const SimConfig& cfg) {
  return estimate_gradient(run_one(cfg), cfg);
}
EstimatorReport estimate_generator(const SimConfig& cfg) {
  return estimate_generator(run_one(cfg), cfg);
}
EstimatorReport estimate_hessian(const SimConfig& cfg) {
  return estimate_hessian(run_one(cfg), cfg);
}

std::vector<EstimatorReport> martingale_drift_check(
    const SimConfig& cfg, const std::vector<double>& checkpoints,
    const PathSolution& solution, int n_workers) {
  if (checkpoints.empty())
    throw EstimatorError("martingale check needs at least one checkpoint");
  if (!solution.value || !solution.gradient)
    throw EstimatorError("martingale check needs a path solution oracle");

  SimConfig mcfg = cfg;
  mcfg.estimators = EstimatorSet{};
  mcfg.estimators.gradient = true;  // maintains ∫⟨Wk̇v,//dB⟩
  mcfg.validate();

  // Snap checkpoints onto the step grid.
  const std::int64_t n_steps = mcfg.n_steps();
  std::vector<std::int64_t> cp_steps;
  for (double c : checkpoints) {
    if (!(c >= 0.0) || c > mcfg.T + 1e-12)
      throw EstimatorError("checkpoint outside [0, T]");
    const auto idx = static_cast<std::int64_t>(std::llround(c / mcfg.dt));
    if (std::abs(static_cast<double>(idx) * mcfg.dt - c) > 0.5 * mcfg.dt)
      throw EstimatorError("checkpoint does not lie on the time grid");
    cp_steps.push_back(std::min(idx, n_steps));
  }
  const std::size_t n_cp = cp_steps.size();

  const bool flat = mcfg.model.kind == ManifoldKind::Euclidean;
  const bool has_dv = !mcfg.fields.potential_spatially_constant();

  // Slot matrix: row per path, column per checkpoint.  Filled by whichever
  // worker owns the path, reduced sequentially afterwards.
  std::vector<double> slots(static_cast<std::size_t>(mcfg.n_paths) * n_cp,
                            0.0);
  std::vector<char> ok(static_cast<std::size_t>(mcfg.n_paths), 0);

  parallel_paths(mcfg, n_workers, [&](std::int64_t p, StepWorkspace& ws) {
    double dsint = 0.0;
    Vec df_amb(mcfg.model.ambient_dim());
    Vec df_frame(mcfg.model.dim);
    Vec dv_amb(mcfg.model.ambient_dim());
    Vec dv_frame(mcfg.model.dim);
    Vec wv(mcfg.model.dim);
    double* row = &slots[static_cast<std::size_t>(p) * n_cp];
    auto observer = [&](std::int64_t i, const Trajectory& traj) {
      const double t = traj.t;
      const double fk = traj.fk_weight();
      const double kv = mcfg.k.eval(t).first;
      // Snapshot first: dsint currently holds ∫₀^{t}.
      for (std::size_t c = 0; c < n_cp; ++c) {
        if (cp_steps[c] != i) continue;
        solution.gradient(t, traj.x, df_amb);
        if (flat)
          df_frame = df_amb;
        else
          df_frame.noalias() = traj.F.transpose() * df_amb;
        wv.noalias() = traj.What * mcfg.v;
        const double m_val = fk * kv * df_frame.dot(wv) -
                             fk * solution.value(t, traj.x) * traj.acc_grad_db -
                             dsint;
        row[c] = m_val;
      }
      // Left-point increment of ∫ 𝕍_s f_s dV_{T−s}(W_s k_s v) ds.
      if (i < n_steps && has_dv && kv != 0.0) {
        mcfg.fields.dV(mcfg.T - t, traj.x, dv_amb);
        if (flat)
          dv_frame = dv_amb;
        else
          dv_frame.noalias() = traj.F.transpose() * dv_amb;
        wv.noalias() = traj.What * mcfg.v;
        dsint += fk * solution.value(t, traj.x) * kv * dv_frame.dot(wv) *
                 mcfg.dt;
      }
    };
    try {
      dsint = 0.0;
      simulate(mcfg, p, ws, observer);
      ok[static_cast<std::size_t>(p)] = 1;
    } catch (const PathError&) {
      ok[static_cast<std::size_t>(p)] = 0;
    }
  });

  std::vector<EstimatorReport> reports;
  std::int64_t n_failed = 0;
  for (std::int64_t p = 0; p < mcfg.n_paths; ++p)
    if (!ok[static_cast<std::size_t>(p)]) ++n_failed;
  EnsembleResult shim;
  shim.n_failed = n_failed;
  for (std::size_t c = 0; c < n_cp; ++c) {
    RunningMoments m;
    for (std::int64_t p = 0; p < mcfg.n_paths; ++p)
      if (ok[static_cast<std::size_t>(p)])
        m.push(slots[static_cast<std::size_t>(p) * n_cp + c]);
    EstimatorReport r;
    r.kind = "martingale_drift";
    fill_common(r, shim, mcfg);
    require_used_paths(r);
    r.checkpoint = static_cast<double>(cp_steps[c]) * mcfg.dt;
    r.estimate = m.mean;
    r.std_error = m.std_error();
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace fkmc
