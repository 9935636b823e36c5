#include "fkmc/paths.hpp"

#include <cmath>

#include "chart_ops.hpp"

namespace fkmc {

std::int64_t SimConfig::n_steps() const {
  return static_cast<std::int64_t>(std::llround(T / dt));
}

void SimConfig::validate() const {
  if (!(T > 0)) throw std::invalid_argument("T must be positive");
  if (!(dt > 0) || dt > T) throw std::invalid_argument("need 0 < dt <= T");
  const auto steps = n_steps();
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - T) > 1e-9 * T)
    throw std::invalid_argument("dt must divide T within rounding");
  if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  if (!estimators.any())
    throw std::invalid_argument("at least one estimator must be requested");
  if (x0.size() != model.ambient_dim())
    throw std::invalid_argument("x0 dimension mismatch");
  if (!on_manifold(model, x0, 1e-6))
    throw std::invalid_argument("x0 is not on the manifold");
  fields.validate_for_model(model);

  auto check_unit = [&](const Vec& u, const char* name) {
    if (u.size() != model.dim)
      throw std::invalid_argument(std::string(name) +
                                  " must have frame dimension n");
    if (std::abs(u.norm() - 1.0) > 1e-9)
      throw std::invalid_argument(std::string(name) +
                                  " must be a unit tangent vector");
  };
  if (estimators.need_grad_acc()) check_unit(v, "v");
  if (estimators.need_hess_acc()) check_unit(w, "w");

  auto check_horizon = [&](const Schedule& s, const char* name) {
    if (std::abs(s.horizon() - T) > 1e-12 * std::max(1.0, T))
      throw std::invalid_argument(std::string(name) +
                                  " schedule horizon differs from T");
  };
  if (estimators.need_grad_acc() || estimators.need_gen_acc())
    check_horizon(k, "k");
  try {
    if (estimators.need_gen_acc() || estimators.need_hess_acc()) {
      check_horizon(k, "k");
      check_horizon(l, "l");
      k.require_generator_k_shape();
      l.require_generator_l_shape();
    } else if (estimators.need_grad_acc()) {
      k.require_gradient_shape();
    }
  } catch (const ScheduleError& e) {
    // keep the documented contract: validate() throws invalid_argument
    throw std::invalid_argument(e.what());
  }
  if (!(winv_condition_bound > 1.0))
    throw std::invalid_argument("winv_condition_bound must exceed 1");
  if (!(position_bound > 0))
    throw std::invalid_argument("position_bound must be positive");
}

Trajectory make_initial(const SimConfig& cfg) {
  const int n = cfg.model.dim;
  Trajectory traj;
  traj.t = 0.0;
  traj.x = cfg.x0;
  // Config-level rounding is retracted away exactly once, up front.
  if (cfg.model.kind == ManifoldKind::Sphere) {
    traj.x *= cfg.model.radius() / traj.x.norm();
  } else if (cfg.model.kind == ManifoldKind::Hyperbolic) {
    const int m = cfg.model.ambient_dim();
    double q = traj.x.head(m - 1).squaredNorm() -
               traj.x[m - 1] * traj.x[m - 1];
    traj.x *= cfg.model.radius() / std::sqrt(-q);
  }
  traj.F = initial_frame(cfg.model, traj.x);
  traj.What = Mat::Identity(n, n);
  traj.WhatPrime = Mat::Zero(n, n);
  traj.acc_gen_A = Vec::Zero(n);
  traj.acc_gen_B = Vec::Zero(n);
  return traj;
}

StepWorkspace make_workspace(const SimConfig& cfg) {
  const int n = cfg.model.dim;
  const int m = cfg.model.ambient_dim();
  StepWorkspace ws;
  ws.pack = curvature_pack(cfg.model, cfg.fields);
  if (cfg.estimators.need_hess_acc() && !ws.pack.hessian_supported())
    throw std::invalid_argument(
        "hessian estimator requested but d*R/∇Ric_Z data is unavailable for "
        "this model/drift");
  ws.dB.resize(n);
  ws.dV_amb.resize(m);
  ws.dV_frame.resize(n);
  ws.z_amb.resize(m);
  ws.z_frame.resize(n);
  ws.incr.resize(m);
  ws.Wv.resize(n);
  ws.Ww.resize(n);
  ws.Wpv.resize(n);
  ws.Wt_u.resize(n);
  ws.col_a.resize(n);
  ws.col_b.resize(n);
  ws.hessV_amb.resize(m, m);
  ws.tmp_nn.resize(n, n);
  ws.tmp_nn2.resize(n, n);
  ws.outer.resize(n, n);
  ws.x_frame_tmp.resize(n, n);
  ws.x_new.resize(m);
  ws.F_new.resize(m, n);
  ws.track_what_inv = cfg.estimators.need_gen_acc();
  ws.lu = Eigen::PartialPivLU<Mat>(n);

  if (ws.pack.ricci_z_constant()) {
    // Ric_Z♯ does not move: precompute the midpoint (Cayley) factor
    // (I + dt/4·R)⁻¹(I − dt/4·R) and its inverse once.
    Trajectory probe = make_initial(cfg);
    ws.ricz.resize(n, n);
    ws.pack.ricci_z(probe.x, probe.F, ws.ricz);
    const Mat A = (cfg.dt / 4.0) * ws.ricz;
    const Mat I = Mat::Identity(n, n);
    ws.cayley_M = (I + A).partialPivLu().solve(I - A);
    ws.cayley_Minv = (I - A).partialPivLu().solve(I + A);
    ws.cayley_cached = true;
    ws.cayley_identity = (ws.ricz.cwiseAbs().maxCoeff() == 0.0);
  } else {
    ws.ricz.resize(n, n);
  }
  return ws;
}

namespace {

// Frame components of an ambient tangent vector (Fᵀ g u), specialized per
// model to avoid forming g in the hot loop.
inline void vector_to_frame(const ManifoldModel& model, const Vec& x,
                            const Mat& F, const Vec& u, Vec& out, Mat& g_tmp) {
  switch (model.kind) {
    case ManifoldKind::Euclidean:
      out = u;
      return;
    case ManifoldKind::Sphere:
      out.noalias() = F.transpose() * u;
      return;
    case ManifoldKind::Hyperbolic: {
      const int m = static_cast<int>(u.size());
      out.noalias() = F.transpose() * u;
      // fix the timelike component's sign contribution
      out.noalias() -= 2.0 * u[m - 1] * F.row(m - 1).transpose();
      return;
    }
    case ManifoldKind::Chart:
      model.chart->metric(x, g_tmp);
      out.noalias() = F.transpose() * (g_tmp * u);
      return;
  }
}

inline double inf_norm(const Mat& a) {
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

void step(Trajectory& traj, const Vec& dB, const SimConfig& cfg,
          StepWorkspace& ws, std::int64_t step_index) {
  const int n = cfg.model.dim;
  const double dt = cfg.dt;
  const double s = traj.t;
  const double t_rev = cfg.T - s;  // V's time argument is always T−s
  const auto& est = cfg.estimators;
  const bool flat = cfg.model.kind == ManifoldKind::Euclidean;
  const bool chart = cfg.model.kind == ManifoldKind::Chart;
  const bool drift_on = !cfg.fields.drift_zero();

  // ---- potential along the path ----
  if (!cfg.fields.potential_zero()) {
    const double vv = cfg.fields.V(t_rev, traj.x);
    if (vv < cfg.fields.v_min())
      throw PathError("potential fell below its declared lower bound",
                      step_index);
    traj.v_integral += vv * dt;
  }
  const bool need_dv = !cfg.fields.potential_spatially_constant();
  if (need_dv) {
    cfg.fields.dV(t_rev, traj.x, ws.dV_amb);
    if (flat)
      ws.dV_frame = ws.dV_amb;  // F ≡ I on the flat model
    else
      ws.dV_frame.noalias() = traj.F.transpose() * ws.dV_amb;  // covector: no g
  }
  if (drift_on) {
    cfg.fields.Z(traj.x, ws.z_amb);
    if (est.need_gen_acc())
      vector_to_frame(cfg.model, traj.x, traj.F, ws.z_amb, ws.z_frame,
                      ws.tmp_nn);
  }

  // ---- schedules ----
  const auto [kv, kd] = cfg.k.eval(s);
  double lv = 0.0, ld = 0.0;
  if (est.need_gen_acc() || est.need_hess_acc()) {
    const auto le = cfg.l.eval(s);
    lv = le.first;
    ld = le.second;
  }

  // ---- accumulators (left-point evaluation throughout) ----
  if (est.need_grad_acc()) {
    ws.Wv.noalias() = traj.What * cfg.v;
    if (kd != 0.0) traj.acc_grad_db += kd * ws.Wv.dot(dB);
    if (need_dv && kv != 0.0)
      traj.acc_grad_ds += kv * ws.dV_frame.dot(ws.Wv) * dt;
  }

  if (est.need_gen_acc()) {
    if (ld != 0.0) traj.acc_gen_A.noalias() += ld * (traj.What.transpose() * dB);
    if (need_dv && lv != 0.0)
      traj.acc_gen_A.noalias() +=
          (lv * dt) * (traj.What.transpose() * ws.dV_frame);
    if (kd != 0.0) {
      if (ws.cayley_cached) {
        if (inf_norm(traj.What) * inf_norm(traj.what_inv) >
            cfg.winv_condition_bound)
          throw PathError("damped transport condition bound exceeded",
                          step_index);
        traj.acc_gen_B.noalias() += kd * (traj.what_inv * dB);
      } else {
        ws.lu.compute(traj.What);
        if (ws.lu.rcond() < 1.0 / cfg.winv_condition_bound)
          throw PathError("damped transport condition bound exceeded",
                          step_index);
        traj.acc_gen_B.noalias() += kd * ws.lu.solve(dB);
      }
      if (drift_on) traj.acc_gen_Z += kd * ws.z_frame.dot(dB);
    }
  }

  if (est.need_hess_acc()) {
    ws.Ww.noalias() = traj.What * cfg.w;
    ws.Wpv.noalias() = traj.WhatPrime * cfg.v;
    if (kd != 0.0) traj.acc_hess_Wp += kd * ws.Wpv.dot(dB);
    if (ld != 0.0) traj.acc_hess_l_db += ld * ws.Ww.dot(dB);
    if (need_dv) {
      if (lv != 0.0) traj.acc_hess_l_ds += lv * ws.dV_frame.dot(ws.Ww) * dt;
      if (kv != 0.0) {
        // (∇dV)(Ŵv, Ŵw) + dV(Ŵ′v), both scaled by k_s
        double quad = 0.0;
        cfg.fields.hessV(t_rev, traj.x, ws.hessV_amb);
        if (flat) {
          quad = ws.Wv.dot(ws.hessV_amb * ws.Ww);
        } else if (chart) {
          // covariant Hessian: ∂²V − Γ^m ∂_m V, then frame-sandwich
          std::vector<Mat> gamma;
          chart_ops::christoffel(*cfg.model.chart, traj.x, gamma);
          for (int m = 0; m < n; ++m)
            ws.hessV_amb.noalias() -= ws.dV_amb[m] * gamma[m];
          ws.x_frame_tmp.noalias() =
              traj.F.transpose() * ws.hessV_amb * traj.F;
          quad = ws.Wv.dot(ws.x_frame_tmp * ws.Ww);
        }
        // embedded models only reach here with spatially constant V, for
        // which need_dv is false
        traj.acc_hess_V +=
            kv * (quad + ws.dV_frame.dot(ws.Wpv)) * dt;
      }
    }
  }

  // ---- W′ update (Itô–Euler; uses this step's dB and the pre-update Ŵ) ----
  if (est.need_hess_acc() && !ws.pack.wprime_trivial()) {
    const auto c = ws.pack.constant_curvature();
    if (c.has_value()) {
      // R̂(dB, Ŵe_a)(Ŵw) = c(⟨Ŵe_a, Ŵw⟩dB − ⟨dB, Ŵw⟩Ŵe_a) columnwise
      ws.Wt_u.noalias() = traj.What.transpose() * ws.Ww;
      ws.outer.noalias() = dB * ws.Wt_u.transpose();
      ws.outer.noalias() -= dB.dot(ws.Ww) * traj.What;
      ws.outer *= *c;
    } else {
      for (int a = 0; a < n; ++a) {
        ws.col_a = traj.What.col(a);
        ws.pack.riemann(traj.x, traj.F, dB, ws.col_a, ws.Ww, ws.col_b);
        ws.outer.col(a) = ws.col_b;
      }
    }
    if (!ws.pack.wprime_drift_trivial()) {
      for (int a = 0; a < n; ++a) {
        ws.col_a = traj.What.col(a);
        ws.pack.dstar_r(traj.x, traj.F, ws.col_a, ws.Ww, ws.col_b);
        ws.outer.col(a) -= (0.5 * dt) * ws.col_b;
        ws.pack.nabla_ricci_z(traj.x, traj.F, ws.col_a, ws.Ww, ws.col_b);
        ws.outer.col(a) -= (0.5 * dt) * ws.col_b;
      }
    }
    if (ws.cayley_cached) {
      ws.outer.noalias() -= (0.5 * dt) * (ws.ricz * traj.WhatPrime);
    } else {
      ws.pack.ricci_z(traj.x, traj.F, ws.ricz);
      ws.outer.noalias() -= (0.5 * dt) * (ws.ricz * traj.WhatPrime);
    }
    traj.WhatPrime += ws.outer;
  }

  // ---- Ŵ update (midpoint rule) ----
  if (ws.cayley_cached) {
    if (!ws.cayley_identity) {
      ws.tmp_nn.noalias() = ws.cayley_M * traj.What;
      traj.What.swap(ws.tmp_nn);
      if (ws.track_what_inv) {
        ws.tmp_nn.noalias() = traj.what_inv * ws.cayley_Minv;
        traj.what_inv.swap(ws.tmp_nn);
      }
    }
  } else {
    ws.pack.ricci_z(traj.x, traj.F, ws.ricz);
    ws.tmp_nn = (dt / 4.0) * ws.ricz;
    ws.tmp_nn.diagonal().array() += 1.0;  // I + dt/4·R
    ws.tmp_nn2 = (-dt / 4.0) * ws.ricz;
    ws.tmp_nn2.diagonal().array() += 1.0;  // I − dt/4·R
    ws.lu.compute(ws.tmp_nn);
    ws.outer.noalias() = ws.tmp_nn2 * traj.What;
    traj.What = ws.lu.solve(ws.outer);
  }

  // ---- geometry advance ----
  if (flat) {
    if (drift_on)
      traj.x += dB + dt * ws.z_amb;
    else
      traj.x += dB;
  } else {
    ws.incr.noalias() = traj.F * dB;
    if (drift_on) ws.incr += dt * ws.z_amb;
    geodesic_step(cfg.model, traj.x, ws.incr, traj.F, ws.x_new, ws.F_new);
    traj.x.swap(ws.x_new);
    traj.F.swap(ws.F_new);
  }
  traj.t = s + dt;

  // ---- sanity guards ----
  if (!traj.x.allFinite())
    throw PathError("non-finite position", step_index);
  if (traj.x.norm() > cfg.position_bound)
    throw PathError("position norm exceeded the configured bound", step_index);
  if (!traj.What.allFinite() || !std::isfinite(traj.v_integral))
    throw PathError("non-finite transport state", step_index);
}

Trajectory simulate(const SimConfig& cfg, std::int64_t path_index,
                    StepWorkspace& ws, const PathObserver& observer) {
  Trajectory traj = make_initial(cfg);
  const int n = cfg.model.dim;
  if (ws.track_what_inv) traj.what_inv = Mat::Identity(n, n);
  PathRng rng(cfg.seed, static_cast<std::uint64_t>(path_index));
  const std::int64_t steps = cfg.n_steps();
  const double root_dt = std::sqrt(cfg.dt);
  for (std::int64_t i = 0; i < steps; ++i) {
    // Exact grid times: i·dt evaluates schedules on the intended side of
    // their breakpoints, which running addition would not guarantee.
    traj.t = static_cast<double>(i) * cfg.dt;
    if (observer) observer(i, traj);
    rng.normals(static_cast<std::uint32_t>(i), ws.dB.data(), n);
    ws.dB *= root_dt;
    try {
      step(traj, ws.dB, cfg, ws, i);
    } catch (const GeometryError& e) {
      throw PathError(e.what(), i);  // e.g. the path left the chart domain
    }
  }
  traj.t = static_cast<double>(steps) * cfg.dt;
  if (observer) observer(steps, traj);
  return traj;
}

Trajectory simulate(const SimConfig& cfg, std::int64_t path_index) {
  StepWorkspace ws = make_workspace(cfg);
  return simulate(cfg, path_index, ws);
}

}  // namespace fkmc
