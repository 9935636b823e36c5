#pragma once

// Path simulation: the diffusion with generator ½Δ + Z as a geodesic random
// walk, together with the parallel frame //, the damped transport W, the
// second-order process W′(·,w), the Feynman–Kac weight, and every stochastic
// integral the estimators consume.
//
// Numerics per step (all stochastic integrals use left-point evaluation):
//   * position: x ← exp_map(x, F·dB + Z(x)dt), frame parallel-transported;
//   * Ŵ (frame components of W): midpoint/Cayley update of
//     dŴ = −½ R̂ic_Z Ŵ dt, i.e. (I + dt/4·R̂ic_Z)Ŵ₊ = (I − dt/4·R̂ic_Z)Ŵ;
//   * Ŵ′: Itô–Euler for dŴ′ = R̂(dB, Ŵ·)Ŵw − ½(d*R + ∇Ric_Z)(Ŵ·, Ŵw)dt
//     − ½ R̂ic_Z Ŵ′ dt (the driver shares the step's dB with the position);
//   * Feynman–Kac weight: 𝕍_t = exp(−∫V), accumulated in the log domain so a
//     constant potential factors out of a path exactly;
//   * the time argument of V is always T−s.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "fkmc/fields.hpp"
#include "fkmc/geometry.hpp"
#include "fkmc/rng.hpp"
#include "fkmc/schedules.hpp"

namespace fkmc {

// A path abandoned mid-simulation (non-finite state, potential below its
// declared bound, transport condition blow-up, chart domain exit).
struct PathError : std::runtime_error {
  PathError(const std::string& msg, std::int64_t step)
      : std::runtime_error(msg + " at step " + std::to_string(step)),
        step_index(step) {}
  std::int64_t step_index;
};

struct EstimatorSet {
  bool semigroup = false;
  bool gradient = false;
  bool generator = false;
  bool hessian = false;

  bool any() const { return semigroup || gradient || generator || hessian; }
  // Which accumulators the step loop has to maintain.
  bool need_grad_acc() const { return gradient || hessian; }
  bool need_gen_acc() const { return generator; }
  bool need_hess_acc() const { return hessian; }
};

struct SimConfig {
  ManifoldModel model;
  FieldSpec fields;
  Vec x0;  // ambient/chart coordinates
  Vec v, w;  // unit tangent vectors at x0, frame components
  double T = 1.0;
  double dt = 1e-3;
  std::int64_t n_paths = 1;
  std::uint64_t seed = 0;
  Schedule k, l;
  EstimatorSet estimators;
  double winv_condition_bound = 1e8;
  double position_bound = 1e6;

  std::int64_t n_steps() const;
  // Structural checks (T > 0, 0 < dt ≤ T dividing T within rounding,
  // n_paths ≥ 1, x0 on the manifold, v/w unit, schedule shapes demanded by
  // the requested estimators).  Throws std::invalid_argument.
  void validate() const;
};

struct Trajectory {
  double t = 0.0;
  Vec x;
  Mat F;          // realizes //_t
  Mat What;       // //_t⁻¹ W_t
  Mat WhatPrime;  // //_t⁻¹ W′_t(·, w), columns indexed by the first slot
  Mat what_inv;   // Ŵ⁻¹, maintained incrementally when the generator runs

  // ∫₀ᵗ V_{T−s}(x_s) ds; the Feynman–Kac weight is exp(−this).
  double v_integral = 0.0;

  // Stochastic-integral accumulators (names follow the estimator formulas;
  // dB and ds parts are kept apart where the diagnostics report them
  // separately).
  double acc_grad_db = 0.0;  // ∫ ⟨W k̇v, //dB⟩
  double acc_grad_ds = 0.0;  // ∫ dV_{T−s}(W k v) ds
  Vec acc_gen_A;             // ∫ l̇ Ŵᵀ dB + ∫ l Ŵᵀ dV̂ ds
  Vec acc_gen_B;             // ∫ k̇ Ŵ⁻¹ dB
  double acc_gen_Z = 0.0;    // ∫ k̇ ⟨Z, //dB⟩
  double acc_hess_Wp = 0.0;  // ∫ ⟨W′(k̇v, w), //dB⟩
  double acc_hess_V = 0.0;   // ∫ [(∇dV)(Wkv, Ww) + dV(W′(kv,w))] ds
  double acc_hess_l_db = 0.0;  // ∫ ⟨W l̇w, //dB⟩
  double acc_hess_l_ds = 0.0;  // ∫ dV_{T−s}(W l w) ds

  double fk_weight() const { return std::exp(-v_integral); }
  double acc_grad() const { return acc_grad_db + acc_grad_ds; }
  double acc_hess_l() const { return acc_hess_l_db + acc_hess_l_ds; }
  // With a shared k schedule the hessian's k-integral is the gradient
  // integral; keeping one accumulator keeps them consistent by construction.
  double acc_hess_k() const { return acc_grad(); }
};

// Preallocated per-worker scratch: curvature evaluators, cached transport
// updates, and every temporary the step needs (the hot loop allocates
// nothing).
struct StepWorkspace {
  CurvaturePack pack;
  bool cayley_cached = false;
  bool cayley_identity = false;  // R̂ic_Z ≡ 0: Ŵ stays I bit-exactly
  Mat cayley_M;     // (I + dt/4 R̂ic_Z)⁻¹ (I − dt/4 R̂ic_Z)
  Mat cayley_Minv;  // its inverse, for the incremental Ŵ⁻¹
  Mat ricz;         // cached constant R̂ic_Z (or scratch when varying)

  Vec dB, dV_amb, dV_frame, z_amb, z_frame, incr;
  Vec Wv, Ww, Wpv, Wt_u, col_a, col_b;
  Mat hessV_amb, tmp_nn, tmp_nn2, outer, x_frame_tmp;
  Vec x_new;
  Mat F_new;
  Eigen::PartialPivLU<Mat> lu;

  bool track_what_inv = false;
};

StepWorkspace make_workspace(const SimConfig& cfg);

// Initial trajectory at t = 0: canonical frame, Ŵ = I, Ŵ′ = 0, accumulators
// zeroed.
Trajectory make_initial(const SimConfig& cfg);

// Advances one step with the given N(0, dt)-scaled increments dB (frame
// components, length n).  Reads the workspace's cached curvature data.
// Throws PathError on non-finite state or guard violations.
void step(Trajectory& traj, const Vec& dB, const SimConfig& cfg,
          StepWorkspace& ws, std::int64_t step_index);

// Called before each step with (step_index, state at time step_index·dt) and
// once more after the last step with (n_steps, terminal state).
using PathObserver =
    std::function<void(std::int64_t step_index, const Trajectory& traj)>;

// Runs a full path.  The noise stream is a pure function of
// (cfg.seed, path_index); results are bit-identical across workers and runs.
Trajectory simulate(const SimConfig& cfg, std::int64_t path_index,
                    StepWorkspace& ws, const PathObserver& observer = {});

// Convenience overload that builds its own workspace.
Trajectory simulate(const SimConfig& cfg, std::int64_t path_index);

}  // namespace fkmc
