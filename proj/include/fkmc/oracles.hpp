#pragma once

// Closed-form reference values for the acceptance cases and the martingale
// checker's f_t along paths.
//
// These are deliberately independent of the geometry/paths code: everything
// here is scalar analysis (eigenfunction decay, Mehler's formula, the scalar
// Feynman–Kac closed form, Legendre expansions) plus Gauss–Hermite /
// Gauss–Legendre quadrature built from Golub–Welsch.  Each oracle is checked
// against the PDE ∂_t φ = (L − V)φ by finite differences in its own tests.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkmc/fields.hpp"
#include "fkmc/geometry.hpp"

namespace fkmc {

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- quadrature --------------------------------------------------------------

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// ∫ e^{−x²} h(x) dx ≈ Σ wᵢ h(xᵢ) (physicists' weight), default 64 points.
QuadratureRule gauss_hermite(int n = 64);
// ∫_{−1}^{1} h(x) dx ≈ Σ wᵢ h(xᵢ).
QuadratureRule gauss_legendre(int n = 64);

// --- scalar results ----------------------------------------------------------

struct ValueDerivatives {
  double value = 0.0;
  double d1 = 0.0;  // ∂x
  double d2 = 0.0;  // ∂xx
};

// --- euclidean heat (Z = 0, V = 0, n = 1) -------------------------------------

enum class HeatPayoff { Sin, Linear, Quadratic, GaussBump };

// P_t f and first two x-derivatives for L = ½Δ on R.  Sin/Linear/Quadratic
// and the gaussian bump exp(−x²/2) are closed forms; `slope`/`intercept`
// apply to Linear.
ValueDerivatives gaussian_heat(double t, double x, HeatPayoff payoff,
                               double slope = 1.0, double intercept = 0.0);

// Quadrature version for an arbitrary payoff (used to cross-check the closed
// forms): value only.
double gaussian_heat_quadrature(double t, double x,
                                const std::function<double(double)>& f);

// --- Ornstein-Uhlenbeck / Mehler (Z = −λx, V = 0, n = 1) ----------------------

enum class OuPayoff { Coordinate, Quadratic, Sin };

// P_t f(x) = E f(x e^{−λt} + ξ), ξ ~ N(0, (1 − e^{−2λt})/(2λ)).
ValueDerivatives ou_mehler(double t, double x, double lambda, OuPayoff payoff);

// --- scalar Feynman-Kac (V = a x², Z = 0, f ≡ 1, n = 1) -----------------------

// With ω = √(2a): value = (cosh ωt)^{−1/2} exp(−x² (ω/2) tanh ωt).
ValueDerivatives harmonic_feynman_kac(double t, double x, double a);

// --- unit-sphere spectral oracle ----------------------------------------------

// Zonal payoffs f(θ) = Σ c_ℓ P_ℓ(cos θ) on the unit S²; the heat semigroup
// acts by e^{−ℓ(ℓ+1)t/2} on degree ℓ.
class SphereZonalOracle {
 public:
  // Payoff given by explicit Legendre coefficients.
  explicit SphereZonalOracle(std::vector<double> coeffs);
  // Projects a zonal payoff u ↦ f(u), u = cos θ, onto P_0..P_{l_max}; the
  // truncated tail (measured in the coefficient ℓ¹ norm) must be below tol.
  SphereZonalOracle(const std::function<double(double)>& f_of_cos, int l_max,
                    double tol = 1e-9);

  double value(double t, double theta) const;      // P_t f
  double dtheta(double t, double theta) const;     // ∂θ P_t f
  double d2theta(double t, double theta) const;    // ∂θθ P_t f
  // Hessian components in the orthonormal zonal frame (e_θ, e_φ):
  //   Hess(e_θ, e_θ) = ∂θθ, Hess(e_φ, e_φ) = cot θ ∂θ (a removable limit at
  //   the poles), off-diagonal 0.
  double hess_theta_theta(double t, double theta) const;
  double hess_phi_phi(double t, double theta) const;

  const std::vector<double>& coeffs() const { return coeffs_; }

 private:
  std::vector<double> coeffs_;
};

// cos θ expressed in this oracle (single ℓ = 1 coefficient).
SphereZonalOracle sphere_cos_oracle();

// --- case registry ------------------------------------------------------------

enum class OracleQuantity { Semigroup, Gradient, Generator, Hessian };

// A closed-form reference for one (model, fields, quantity) combination.
// Directions are ambient tangent vectors at the evaluation point (the caller
// owns the frame-to-ambient conversion); unused direction slots are ignored.
struct OracleCase {
  std::string id;
  OracleQuantity quantity = OracleQuantity::Semigroup;
  // Reference value at horizon T, evaluated at x0.
  std::function<double(double T, const Vec& x0, const Vec& v_amb,
                       const Vec& w_amb)>
      closed_form;
  // The solution φ_t = P^V_{T−t} f along paths, for the martingale checker;
  // null when this case does not provide it.
  std::function<double(double T, double t, const Vec& x)> solution_value;
  std::function<void(double T, double t, const Vec& x, Vec& out)>
      solution_gradient;
};

// Finds a closed form for the combination, or nullopt when none exists.
std::optional<OracleCase> oracle_lookup(const ManifoldModel& model,
                                        const FieldSpec& fields,
                                        OracleQuantity quantity);

}  // namespace fkmc
