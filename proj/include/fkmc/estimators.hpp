#pragma once

// Ensemble aggregation: the four stochastic-flow estimators and the
// martingale-drift diagnostic.
//
// Determinism contract: per-path terminal functionals are written into a slot
// vector indexed by path, workers claim paths in chunks, and the streaming
// mean/variance reduction always runs in path-index order.  Reports are
// therefore bit-identical for any worker count and any scheduling.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fkmc/paths.hpp"

namespace fkmc {

struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Streaming mean/variance (Welford); merge is the parallel-variance update.
struct RunningMoments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const RunningMoments& o);
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const;
};

struct EstimatorReport {
  std::string kind;  // semigroup | gradient | generator | hessian | martingale_drift
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n_paths_used = 0;
  std::int64_t n_paths_failed = 0;
  // Named partial means (dB-term, dV-term, product-term, …).
  std::vector<std::pair<std::string, double>> term_breakdown;
  // Config echo for reproducibility.
  double T = 0.0, dt = 0.0;
  std::uint64_t seed = 0;
  std::string model_summary;
  std::string schedule_k_id, schedule_l_id;
  // Martingale checks evaluate at a checkpoint time.
  double checkpoint = -1.0;
  // Oracle comparison, filled by the runner when a closed form is available.
  bool has_oracle = false;
  double oracle_value = 0.0;
  double abs_error = 0.0;
  double error_se_ratio = 0.0;  // |estimate − oracle| / std_error
};

// Everything the estimators need from one finished path.
struct TerminalSample {
  bool failed = false;
  double fk_f = 0.0;       // 𝕍_T f(x_T)
  double acc_grad = 0.0;   // combined gradient integral
  double acc_grad_db = 0.0;
  double acc_grad_ds = 0.0;
  Vec acc_gen_A, acc_gen_B;
  double acc_gen_Z = 0.0;
  double acc_hess_Wp = 0.0;
  double acc_hess_V = 0.0;
  double acc_hess_l = 0.0;
  double acc_hess_l_db = 0.0;
  double acc_hess_k = 0.0;
};

struct EnsembleResult {
  std::vector<TerminalSample> samples;  // slot per path, index = path index
  std::int64_t n_failed = 0;
  std::string first_failure;  // description of the first failed path, if any
};

// Simulates every path on `n_workers` threads (1 = in-line).  Bit-exact in
// the worker count.
EnsembleResult simulate_ensemble(const SimConfig& cfg, int n_workers = 1);

// Aggregations over a finished ensemble.  Each checks that cfg requested the
// matching estimator and that preconditions (schedule shapes, curvature data)
// hold.
EstimatorReport estimate_semigroup(const EnsembleResult& ens,
                                   const SimConfig& cfg);
EstimatorReport estimate_gradient(const EnsembleResult& ens,
                                  const SimConfig& cfg);
EstimatorReport estimate_generator(const EnsembleResult& ens,
                                   const SimConfig& cfg);
EstimatorReport estimate_hessian(const EnsembleResult& ens,
                                 const SimConfig& cfg);

// One-call conveniences (simulate + aggregate with one worker).
EstimatorReport estimate_semigroup(const SimConfig& cfg);
EstimatorReport estimate_gradient(const SimConfig& cfg);
EstimatorReport estimate_generator(const SimConfig& cfg);
EstimatorReport estimate_hessian(const SimConfig& cfg);

// Oracle interface for the martingale check: the solution f_t = P^V_{T−t}f
// and its spatial differential along paths.  Implementations live in the
// oracles module.
struct PathSolution {
  // f_t(x) at path time t (the implementation owns the horizon T).
  std::function<double(double t, const Vec& x)> value;
  // Coordinate/ambient differential ∂f_t(x); converted to frame components
  // by the checker.
  std::function<void(double t, const Vec& x, Vec& out)> gradient;
};

// Sample means of the Lemma-style local-martingale expression
//   𝕍_t df_t(W_t k_t v) − 𝕍_t f_t(x_t)∫₀ᵗ⟨W k̇v,//dB⟩
//     − ∫₀ᵗ 𝕍_s f_s(x_s) dV_{T−s}(W_s k_s v) ds
// at each checkpoint; a true martingale has constant expectation, so the
// per-checkpoint means must agree.
std::vector<EstimatorReport> martingale_drift_check(
    const SimConfig& cfg, const std::vector<double>& checkpoints,
    const PathSolution& solution, int n_workers = 1);

}  // namespace fkmc
