#pragma once

// Manifold models: metric, geodesics, parallel transport, curvature.
//
// Conventions (these are load-bearing; the estimators assume them):
//   * R(X,Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_{[X,Y]} Z, so constant curvature c
//     gives R(u,v)w = c(⟨v,w⟩u − ⟨u,w⟩v) and Ric♯ = (n−1)c·id.
//   * Laplacian Δ = tr ∇d (Δ sin = −sin on R).
//   * d*R(v₁)v₂ = tr ∇_· R(·,v₁)v₂, the sign that satisfies
//     ⟨d*R(v₁)v₂,v₃⟩ = ⟨(∇_{v₃}Ric♯)(v₁),v₂⟩ − ⟨(∇_{v₂}Ric♯)(v₃),v₁⟩
//     under the curvature convention above.
//
// Representation: sphere and hyperbolic space are embedded (radius 1/√|c|
// sphere in Rⁿ⁺¹; hyperboloid in Minkowski Rⁿ,¹), with closed-form geodesics
// and transports and an exact retraction per step.  The chart backend works
// in coordinates with a user-supplied metric and gets its connection and
// curvature from central finite differences.
//
// Points and tangent vectors are ambient-coordinate vectors (coordinate
// vectors for euclidean/chart).  A frame F is an (ambient dim) × n matrix
// whose columns are orthonormal w.r.t. the metric at the base point; frame
// components of a tangent u are Fᵀ g u.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>

namespace fkmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ManifoldKind { Euclidean, Sphere, Hyperbolic, Chart };

// User-supplied coordinate metric for the chart backend.  `metric` must be
// twice numerically differentiable; derivatives are taken by central
// differences with the stated relative step.
struct ChartSpec {
  int dim = 0;
  std::function<void(const Vec& x, Mat& g)> metric;
  double validity_radius = std::numeric_limits<double>::infinity();
  double fd_step_rel = 1e-5;
};

struct ManifoldModel {
  ManifoldKind kind = ManifoldKind::Euclidean;
  int dim = 0;  // intrinsic dimension n
  double curvature_const = 0.0;
  std::shared_ptr<const ChartSpec> chart;  // set iff kind == Chart

  static ManifoldModel euclidean(int n);
  static ManifoldModel sphere(int n, double c);      // requires c > 0
  static ManifoldModel hyperbolic(int n, double c);  // requires c < 0
  static ManifoldModel make_chart(ChartSpec spec);

  int ambient_dim() const;
  double radius() const;  // embedding radius 1/√|c| for sphere/hyperbolic
  const char* kind_name() const;
};

// --- base-point helpers ------------------------------------------------------

// Canonical base point: origin for euclidean/chart, (0,…,0,r) for the
// embedded models.
Vec canonical_base_point(const ManifoldModel& model);

// Embedding constraint (|x|² = r², Minkowski ⟨x,x⟩ = −r²) within tol;
// euclidean always passes, chart checks the validity radius.
bool on_manifold(const ManifoldModel& model, const Vec& x, double tol = 1e-9);

// Coordinate/ambient metric at x (Minkowski signature matrix for hyperbolic).
void metric_at(const ManifoldModel& model, const Vec& x, Mat& g_out);

// Canonical orthonormal frame at x (deterministic completion).
Mat initial_frame(const ManifoldModel& model, const Vec& x);

// Frame components Fᵀ g u of an ambient tangent vector u at x.
Vec to_frame(const ManifoldModel& model, const Vec& x, const Mat& F,
             const Vec& u);

// Gram matrix Fᵀ g(x) F; identity iff the frame is orthonormal.
Mat frame_gram(const ManifoldModel& model, const Vec& x, const Mat& F);

// --- geodesics ---------------------------------------------------------------

// Point at unit time along the geodesic from x with initial velocity v.
Vec exp_map(const ManifoldModel& model, const Vec& x, const Vec& v);

// Frame parallel-transported from x to exp_map(x, v) along that geodesic.
Mat parallel_transport_step(const ManifoldModel& model, const Vec& x,
                            const Vec& v, const Mat& F);

// Joint position + frame advance (what the path loop calls; avoids running
// the chart geodesic integration twice).  Writes into preallocated outputs.
void geodesic_step(const ManifoldModel& model, const Vec& x, const Vec& v,
                   const Mat& F, Vec& x_out, Mat& F_out);

// --- curvature ---------------------------------------------------------------

class FieldSpec;  // fields.hpp

// Frame-component curvature evaluators at (x, F).  All tangent arguments and
// results are frame components.  Constant-curvature kinds use closed forms,
// never numeric differentiation; the chart backend differentiates the metric.
class CurvaturePack {
 public:
  CurvaturePack() = default;

  // Ric_Z♯ = Ric♯ − 2∇Z.
  void ricci_z(const Vec& x, const Mat& F, Mat& out) const;
  // R(u,v)w.
  void riemann(const Vec& x, const Mat& F, const Vec& u, const Vec& v,
               const Vec& w, Vec& out) const;
  // d*R(v₁)v₂.
  void dstar_r(const Vec& x, const Mat& F, const Vec& v1, const Vec& v2,
               Vec& out) const;
  // (∇_u Ric_Z♯)(w).
  void nabla_ricci_z(const Vec& x, const Mat& F, const Vec& u, const Vec& w,
                     Vec& out) const;

  // Ric_Z♯ independent of x: lets the path loop cache its transport update.
  bool ricci_z_constant() const { return ricci_z_constant_; }
  // Set for euclidean/sphere/hyperbolic; W′'s noise driver then has a closed
  // form in the constant c.
  std::optional<double> constant_curvature() const {
    return constant_curvature_;
  }
  // d*R and ∇Ric_Z data available (precondition of the Hessian estimator).
  bool hessian_supported() const { return hessian_supported_; }
  // riemann ≡ 0, d*R ≡ 0 and ∇Ric_Z ≡ 0, i.e. W′ stays exactly 0.
  bool wprime_trivial() const { return wprime_trivial_; }
  // (d*R + ∇Ric_Z) ≡ 0 while riemann may be nonzero (constant curvature with
  // zero/linear drift): W′'s dt drift vanishes, only the noise driver acts.
  bool wprime_drift_trivial() const { return wprime_drift_trivial_; }

  int dim() const { return model_.dim; }
  const ManifoldModel& model() const { return model_; }

 private:
  friend CurvaturePack curvature_pack(const ManifoldModel&, const FieldSpec&);

  ManifoldModel model_;
  // Drift data copied out of the FieldSpec (coordinate/ambient components).
  std::function<void(const Vec& x, Vec& z)> drift_value_;
  std::function<void(const Vec& x, Mat& jac)> drift_jacobian_;  // ∂Z^i/∂x^j
  bool drift_zero_ = true;
  bool drift_linear_ = true;  // Jacobian constant, so ∇∇Z ≡ 0
  bool ricci_z_constant_ = true;
  std::optional<double> constant_curvature_;
  bool hessian_supported_ = true;
  bool wprime_trivial_ = true;
  bool wprime_drift_trivial_ = true;
};

// Builds the curvature evaluators for a model; the drift part of `fields`
// supplies Z, ∇Z and (where available) the data behind ∇Ric_Z.
CurvaturePack curvature_pack(const ManifoldModel& model,
                             const FieldSpec& fields);

}  // namespace fkmc
