#pragma once

// Potential, drift, and payoff data consumed by the path simulator.
//
// Built-ins are stored as tagged parameters and evaluated through a switch so
// the path loop pays no std::function call on the supported models; custom
// callbacks (used heavily by tests) take a slower generic branch.
//
// Derivative conventions: dV and the drift Jacobian are coordinate/ambient
// partials; the path loop converts to frame components with the current
// frame.  hessV is the coordinate second-derivative matrix; on the chart
// backend the covariant correction −Γ^k ∂_k V is applied by the caller that
// owns the Christoffels.

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

#include "fkmc/geometry.hpp"

namespace fkmc {

struct FieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- potential ---------------------------------------------------------------

enum class PotentialKind { Zero, Constant, Quadratic, Custom };

struct PotentialSpec {
  PotentialKind kind = PotentialKind::Zero;
  double c = 0.0;  // Constant value
  double a = 0.0;  // Quadratic coefficient: V = a|x|²
  // Custom hooks; t is the evaluation time handed down by the caller (the
  // path loop always passes T−s).
  std::function<double(double t, const Vec& x)> value;
  std::function<void(double t, const Vec& x, Vec& out)> gradient;
  std::function<void(double t, const Vec& x, Mat& out)> hessian;

  static PotentialSpec zero();
  static PotentialSpec constant(double c);
  static PotentialSpec quadratic(double a);
};

// --- drift -------------------------------------------------------------------

enum class DriftKind { Zero, Ou, Custom };

struct DriftSpec {
  DriftKind kind = DriftKind::Zero;
  double lambda = 0.0;  // Ou: Z = −λx
  std::function<void(const Vec& x, Vec& out)> value;
  std::function<void(const Vec& x, Mat& out)> jacobian;  // ∂Z^i/∂x^j
  bool jacobian_constant = true;  // ∇∇Z ≡ 0 (true for Zero/Ou)

  static DriftSpec zero();
  static DriftSpec ou(double lambda);
};

// --- payoff ------------------------------------------------------------------

enum class PayoffKind {
  One,         // f ≡ c (default c = 1)
  Coordinate,  // f = x_i
  Linear,      // f = ⟨a, x⟩ + b
  Sin,         // f = sin(x_1)
  Quadratic,   // f = |x|²
  GaussBump,   // f = exp(−|x|²/2)
  ZonalCos,    // f = cos θ on the embedded sphere (θ = polar angle)
  ZonalStep,   // f = ½(1 + tanh((cos θ − center)/width)), bounded step
  Custom
};

struct PayoffSpec {
  PayoffKind kind = PayoffKind::One;
  double c = 1.0;
  int index = 0;
  Vec a;
  double b = 0.0;
  double center = 0.0;
  double width = 0.1;
  std::function<double(const Vec& x)> value;

  static PayoffSpec one(double c = 1.0);
  static PayoffSpec coordinate(int index);
  static PayoffSpec linear(Vec a, double b);
  static PayoffSpec sin_first();
  static PayoffSpec quadratic();
  static PayoffSpec gauss_bump();
  static PayoffSpec zonal_cos();
  static PayoffSpec zonal_step(double center, double width);
};

// --- the bundle --------------------------------------------------------------

class FieldSpec {
 public:
  FieldSpec() = default;
  FieldSpec(PotentialSpec pot, DriftSpec drift, PayoffSpec payoff,
            double v_min = 0.0);

  // V(t, x); the runtime asserts V ≥ v_min on every sampled point.
  double V(double t, const Vec& x) const;
  void dV(double t, const Vec& x, Vec& out) const;          // coordinate ∂V
  void hessV(double t, const Vec& x, Mat& out) const;       // coordinate ∂²V
  void Z(const Vec& x, Vec& out) const;                     // drift vector
  void gradZ(const Vec& x, Mat& out) const;                 // ∂Z^i/∂x^j
  double f(const Vec& x) const;                             // payoff

  bool potential_zero() const { return pot_.kind == PotentialKind::Zero; }
  bool potential_spatially_constant() const;
  bool drift_zero() const { return drift_.kind == DriftKind::Zero; }
  bool drift_linear() const { return drift_.jacobian_constant; }
  double v_min() const { return v_min_; }

  const PotentialSpec& potential() const { return pot_; }
  const DriftSpec& drift() const { return drift_; }
  const PayoffSpec& payoff() const { return payoff_; }

  // Rejects combinations the backends cannot represent faithfully (e.g. a
  // coordinate-defined potential on an embedded curved model).
  void validate_for_model(const ManifoldModel& model) const;

 private:
  PotentialSpec pot_;
  DriftSpec drift_;
  PayoffSpec payoff_;
  double v_min_ = 0.0;
};

// Startup derivative check: dV/hessV against central finite differences of V
// at a few probe points around x0 (relative tolerance 1e-4).  Throws
// FieldError on mismatch.
void check_field_derivatives(const FieldSpec& fields,
                             const ManifoldModel& model, const Vec& x0,
                             double T);

}  // namespace fkmc
