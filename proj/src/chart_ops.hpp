#pragma once

// Internal: finite-difference connection/curvature and geodesic integration
// for the chart backend.  Everything here evaluates the user's metric
// callback; nothing is cached, so calls are pure (and not cheap — the chart
// backend trades speed for generality).

#include <functional>
#include <vector>

#include "fkmc/geometry.hpp"

namespace fkmc::chart_ops {

// Γ^k_ij as gamma[k](i,j).
void christoffel(const ChartSpec& spec, const Vec& x,
                 std::vector<Mat>& gamma);

// RK4 integration of the geodesic + frame-transport ODE over unit parameter
// time; throws GeometryError if the integration leaves the validity region.
void geodesic_step(const ChartSpec& spec, const Vec& x, const Vec& v,
                   const Mat& F, Vec& x_out, Mat& F_out);

// Frame-component curvature evaluators (arguments and results in frame
// components; F maps frame → coordinates).
void ricci_z_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const std::function<void(const Vec&, Vec&)>& drift,
                   const std::function<void(const Vec&, Mat&)>& drift_jac,
                   Mat& out);
void riemann_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const Vec& u, const Vec& v, const Vec& w, Vec& out);
void dstar_r_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const Vec& v1, const Vec& v2, Vec& out);
void nabla_ricci_z_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                         const Vec& u, const Vec& w,
                         const std::function<void(const Vec&, Vec&)>& drift,
                         const std::function<void(const Vec&, Mat&)>& drift_jac,
                         Vec& out);

}  // namespace fkmc::chart_ops
