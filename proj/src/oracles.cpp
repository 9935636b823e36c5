#include "fkmc/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace fkmc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Golub–Welsch: nodes/weights from the symmetric Jacobi matrix of the
// orthogonal-polynomial recurrence (zero diagonal for both rules here).
QuadratureRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Mat jacobi = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag[static_cast<std::size_t>(i)];
    jacobi(i + 1, i) = offdiag[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  if (es.info() != Eigen::Success)
    throw OracleError("quadrature eigensolve failed");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
    const double q0 = es.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * q0 * q0;
  }
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw OracleError("quadrature needs at least one node");
  std::vector<double> off;
  for (int k = 1; k < n; ++k) off.push_back(std::sqrt(k / 2.0));
  return golub_welsch(off, std::sqrt(kPi));
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw OracleError("quadrature needs at least one node");
  std::vector<double> off;
  for (int k = 1; k < n; ++k)
    off.push_back(k / std::sqrt(4.0 * k * k - 1.0));
  return golub_welsch(off, 2.0);
}

ValueDerivatives gaussian_heat(double t, double x, HeatPayoff payoff,
                               double slope, double intercept) {
  if (t < 0) throw OracleError("gaussian_heat needs t >= 0");
  ValueDerivatives r;
  switch (payoff) {
    case HeatPayoff::Sin: {
      const double decay = std::exp(-0.5 * t);
      r.value = decay * std::sin(x);
      r.d1 = decay * std::cos(x);
      r.d2 = -decay * std::sin(x);
      return r;
    }
    case HeatPayoff::Linear:
      r.value = slope * x + intercept;
      r.d1 = slope;
      r.d2 = 0.0;
      return r;
    case HeatPayoff::Quadratic:
      r.value = x * x + t;
      r.d1 = 2.0 * x;
      r.d2 = 2.0;
      return r;
    case HeatPayoff::GaussBump: {
      const double s = 1.0 + t;
      const double val = std::exp(-x * x / (2.0 * s)) / std::sqrt(s);
      r.value = val;
      r.d1 = -(x / s) * val;
      r.d2 = (x * x / (s * s) - 1.0 / s) * val;
      return r;
    }
  }
  throw OracleError("unknown heat payoff");
}

double gaussian_heat_quadrature(double t, double x,
                                const std::function<double(double)>& f) {
  if (!(t > 0)) return f(x);
  static const QuadratureRule rule = gauss_hermite(64);
  const double scale = std::sqrt(2.0 * t);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(x + scale * rule.nodes[i]);
  return acc / std::sqrt(kPi);
}

ValueDerivatives ou_mehler(double t, double x, double lambda,
                           OuPayoff payoff) {
  if (t < 0) throw OracleError("ou_mehler needs t >= 0");
  const double decay = std::exp(-lambda * t);
  const double var =
      lambda == 0.0 ? t : -std::expm1(-2.0 * lambda * t) / (2.0 * lambda);
  const double m = x * decay;
  ValueDerivatives r;
  switch (payoff) {
    case OuPayoff::Coordinate:
      r.value = m;
      r.d1 = decay;
      r.d2 = 0.0;
      return r;
    case OuPayoff::Quadratic:
      r.value = m * m + var;
      r.d1 = 2.0 * m * decay;
      r.d2 = 2.0 * decay * decay;
      return r;
    case OuPayoff::Sin: {
      const double damp = std::exp(-0.5 * var);
      r.value = damp * std::sin(m);
      r.d1 = damp * std::cos(m) * decay;
      r.d2 = -damp * std::sin(m) * decay * decay;
      return r;
    }
  }
  throw OracleError("unknown OU payoff");
}

ValueDerivatives harmonic_feynman_kac(double t, double x, double a) {
  if (t < 0) throw OracleError("harmonic_feynman_kac needs t >= 0");
  if (a < 0) throw OracleError("harmonic_feynman_kac needs a >= 0");
  const double omega = std::sqrt(2.0 * a);
  const double beta = 0.5 * omega * std::tanh(omega * t);
  const double val =
      std::exp(-beta * x * x) / std::sqrt(std::cosh(omega * t));
  ValueDerivatives r;
  r.value = val;
  r.d1 = -2.0 * beta * x * val;
  r.d2 = (4.0 * beta * beta * x * x - 2.0 * beta) * val;
  return r;
}

// --- sphere spectral oracle ----------------------------------------------------

namespace {

// P_ℓ(u) with first two u-derivatives for ℓ = 0..lmax, by the standard
// three-term recurrences (differentiated once and twice).
void legendre_all(double u, int lmax, std::vector<double>& p,
                  std::vector<double>& dp, std::vector<double>& d2p) {
  p.assign(static_cast<std::size_t>(lmax) + 1, 0.0);
  dp.assign(static_cast<std::size_t>(lmax) + 1, 0.0);
  d2p.assign(static_cast<std::size_t>(lmax) + 1, 0.0);
  p[0] = 1.0;
  if (lmax >= 1) {
    p[1] = u;
    dp[1] = 1.0;
  }
  for (int l = 1; l < lmax; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const double a = (2.0 * l + 1.0) / (l + 1.0);
    const double b = static_cast<double>(l) / (l + 1.0);
    p[li + 1] = a * u * p[li] - b * p[li - 1];
    dp[li + 1] = a * (p[li] + u * dp[li]) - b * dp[li - 1];
    d2p[li + 1] = a * (2.0 * dp[li] + u * d2p[li]) - b * d2p[li - 1];
  }
}

}  // namespace

SphereZonalOracle::SphereZonalOracle(std::vector<double> coeffs)
    : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty())
    throw OracleError("zonal oracle needs at least one coefficient");
}

SphereZonalOracle::SphereZonalOracle(
    const std::function<double(double)>& f_of_cos, int l_max, double tol) {
  if (l_max < 0) throw OracleError("zonal projection needs l_max >= 0");
  const int extra = 16;
  const int probe = l_max + extra;
  const int nq = std::max(129, 2 * probe + 1);
  const QuadratureRule rule = gauss_legendre(nq);
  std::vector<double> all(static_cast<std::size_t>(probe) + 1, 0.0);
  std::vector<double> p, dp, d2p;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes[i];
    const double fw = f_of_cos(u) * rule.weights[i];
    legendre_all(u, probe, p, dp, d2p);
    for (int l = 0; l <= probe; ++l)
      all[static_cast<std::size_t>(l)] +=
          fw * p[static_cast<std::size_t>(l)];
  }
  for (int l = 0; l <= probe; ++l)
    all[static_cast<std::size_t>(l)] *= (2.0 * l + 1.0) / 2.0;
  double tail = 0.0;
  for (int l = l_max + 1; l <= probe; ++l)
    tail += std::abs(all[static_cast<std::size_t>(l)]);
  if (!(tail < tol))
    throw OracleError(
        "zonal payoff is not resolved by the requested Legendre degree");
  coeffs_.assign(all.begin(), all.begin() + l_max + 1);
}

double SphereZonalOracle::value(double t, double theta) const {
  const int lmax = static_cast<int>(coeffs_.size()) - 1;
  std::vector<double> p, dp, d2p;
  legendre_all(std::cos(theta), lmax, p, dp, d2p);
  double acc = 0.0;
  for (int l = 0; l <= lmax; ++l)
    acc += coeffs_[static_cast<std::size_t>(l)] *
           std::exp(-0.5 * l * (l + 1.0) * t) *
           p[static_cast<std::size_t>(l)];
  return acc;
}

double SphereZonalOracle::dtheta(double t, double theta) const {
  const int lmax = static_cast<int>(coeffs_.size()) - 1;
  const double u = std::cos(theta);
  const double s = std::sin(theta);
  std::vector<double> p, dp, d2p;
  legendre_all(u, lmax, p, dp, d2p);
  double acc = 0.0;
  for (int l = 0; l <= lmax; ++l)
    acc += coeffs_[static_cast<std::size_t>(l)] *
           std::exp(-0.5 * l * (l + 1.0) * t) *
           dp[static_cast<std::size_t>(l)];
  return -s * acc;  // ∂θ = −sinθ ∂u
}

double SphereZonalOracle::d2theta(double t, double theta) const {
  const int lmax = static_cast<int>(coeffs_.size()) - 1;
  const double u = std::cos(theta);
  const double s = std::sin(theta);
  std::vector<double> p, dp, d2p;
  legendre_all(u, lmax, p, dp, d2p);
  double acc = 0.0;
  for (int l = 0; l <= lmax; ++l) {
    const double decay = std::exp(-0.5 * l * (l + 1.0) * t);
    acc += coeffs_[static_cast<std::size_t>(l)] * decay *
           (s * s * d2p[static_cast<std::size_t>(l)] -
            u * dp[static_cast<std::size_t>(l)]);
  }
  return acc;
}

double SphereZonalOracle::hess_theta_theta(double t, double theta) const {
  return d2theta(t, theta);
}

double SphereZonalOracle::hess_phi_phi(double t, double theta) const {
  const double s = std::sin(theta);
  if (std::abs(s) < 1e-8) return d2theta(t, theta);  // removable at the poles
  return (std::cos(theta) / s) * dtheta(t, theta);
}

SphereZonalOracle sphere_cos_oracle() {
  return SphereZonalOracle(std::vector<double>{0.0, 1.0});
}

// --- case registry ------------------------------------------------------------

namespace {

// Zonal orthonormal frame (e_θ, e_φ) at an ambient point of the unit sphere.
struct ZonalFrame {
  double theta = 0.0;
  bool pole = false;
  Vec e_theta, e_phi;
};

ZonalFrame zonal_frame_at(const Vec& x) {
  ZonalFrame zf;
  const double r = x.norm();
  const double u = std::clamp(x[2] / r, -1.0, 1.0);
  zf.theta = std::acos(u);
  const double sx = x[0] / r, sy = x[1] / r;
  const double s = std::hypot(sx, sy);
  if (s < 1e-10) {
    zf.pole = true;
    return zf;
  }
  zf.e_theta = Vec(3);
  zf.e_theta << sx * u / s, sy * u / s, -s;
  zf.e_phi = Vec(3);
  zf.e_phi << -sy / s, sx / s, 0.0;
  return zf;
}

// Flat 1-d scalar family: everything reduces to value/∂x/∂xx of P_t f plus a
// drift term in the generator and a constant-potential scale.
struct Scalar1D {
  std::string id;
  std::function<ValueDerivatives(double t, double x)> vd;
  double drift_lambda = 0.0;
  double v_const = 0.0;
};

OracleCase make_scalar_case(const Scalar1D& sc, OracleQuantity q) {
  OracleCase oc;
  oc.id = sc.id;
  oc.quantity = q;
  const auto vd = sc.vd;
  const double lam = sc.drift_lambda;
  const double c = sc.v_const;
  oc.closed_form = [vd, lam, c, q](double T, const Vec& x0, const Vec& v,
                                   const Vec& w) {
    const ValueDerivatives d = vd(T, x0[0]);
    const double scale = std::exp(-c * T);
    switch (q) {
      case OracleQuantity::Semigroup:
        return scale * d.value;
      case OracleQuantity::Gradient:
        return scale * d.d1 * v[0];
      case OracleQuantity::Generator:
        return scale * (0.5 * d.d2 - lam * x0[0] * d.d1);
      case OracleQuantity::Hessian:
        return scale * d.d2 * v[0] * w[0];
    }
    throw OracleError("unknown oracle quantity");
  };
  oc.solution_value = [vd, c](double T, double t, const Vec& x) {
    return std::exp(-c * (T - t)) * vd(T - t, x[0]).value;
  };
  oc.solution_gradient = [vd, c](double T, double t, const Vec& x, Vec& out) {
    out.resize(1);
    out[0] = std::exp(-c * (T - t)) * vd(T - t, x[0]).d1;
  };
  return oc;
}

OracleCase make_sphere_case(std::string id,
                            std::shared_ptr<const SphereZonalOracle> orc,
                            OracleQuantity q, double v_const) {
  // L acts on Σ c_ℓ e^{…} P_ℓ by −ℓ(ℓ+1)/2 per degree: reuse the oracle with
  // scaled coefficients.
  std::vector<double> gen_coeffs = orc->coeffs();
  for (std::size_t l = 0; l < gen_coeffs.size(); ++l)
    gen_coeffs[l] *= -0.5 * static_cast<double>(l) * (static_cast<double>(l) + 1.0);
  auto gen_orc = std::make_shared<const SphereZonalOracle>(gen_coeffs);

  OracleCase oc;
  oc.id = std::move(id);
  oc.quantity = q;
  const double c = v_const;
  oc.closed_form = [orc, gen_orc, q, c](double T, const Vec& x0, const Vec& v,
                                        const Vec& w) {
    const ZonalFrame zf = zonal_frame_at(x0);
    const double scale = std::exp(-c * T);
    switch (q) {
      case OracleQuantity::Semigroup:
        return scale * orc->value(T, zf.theta);
      case OracleQuantity::Gradient:
        return zf.pole ? 0.0
                       : scale * orc->dtheta(T, zf.theta) * zf.e_theta.dot(v);
      case OracleQuantity::Generator:
        return scale * gen_orc->value(T, zf.theta);
      case OracleQuantity::Hessian: {
        if (zf.pole)  // isotropic at the poles: Hess = ∂θθ(0⁺)·g
          return scale * orc->d2theta(T, zf.theta) * v.dot(w);
        const double vt = zf.e_theta.dot(v), wt = zf.e_theta.dot(w);
        const double vp = zf.e_phi.dot(v), wp = zf.e_phi.dot(w);
        return scale * (orc->hess_theta_theta(T, zf.theta) * vt * wt +
                        orc->hess_phi_phi(T, zf.theta) * vp * wp);
      }
    }
    throw OracleError("unknown oracle quantity");
  };
  oc.solution_value = [orc, c](double T, double t, const Vec& x) {
    return std::exp(-c * (T - t)) * orc->value(T - t, zonal_frame_at(x).theta);
  };
  oc.solution_gradient = [orc, c](double T, double t, const Vec& x, Vec& out) {
    out = Vec::Zero(3);
    const ZonalFrame zf = zonal_frame_at(x);
    if (zf.pole) return;
    out = std::exp(-c * (T - t)) * orc->dtheta(T - t, zf.theta) * zf.e_theta;
  };
  return oc;
}

}  // namespace

std::optional<OracleCase> oracle_lookup(const ManifoldModel& model,
                                        const FieldSpec& fields,
                                        OracleQuantity quantity) {
  const PotentialSpec& pot = fields.potential();
  const DriftSpec& drift = fields.drift();
  const PayoffSpec& pay = fields.payoff();

  const bool pot_zero = pot.kind == PotentialKind::Zero;
  const bool pot_const = pot.kind == PotentialKind::Constant;
  const double v_const = pot_const ? pot.c : 0.0;

  if (model.kind == ManifoldKind::Euclidean && model.dim == 1) {
    if (drift.kind == DriftKind::Zero && (pot_zero || pot_const)) {
      Scalar1D sc;
      sc.v_const = v_const;
      switch (pay.kind) {
        case PayoffKind::Sin:
          sc.id = "flat_heat_sin";
          sc.vd = [](double t, double x) {
            return gaussian_heat(t, x, HeatPayoff::Sin);
          };
          break;
        case PayoffKind::Coordinate:
          sc.id = "flat_heat_coordinate";
          sc.vd = [](double t, double x) {
            return gaussian_heat(t, x, HeatPayoff::Linear, 1.0, 0.0);
          };
          break;
        case PayoffKind::Linear: {
          const double slope = pay.a.size() > 0 ? pay.a[0] : 1.0;
          const double intercept = pay.b;
          sc.id = "flat_heat_linear";
          sc.vd = [slope, intercept](double t, double x) {
            return gaussian_heat(t, x, HeatPayoff::Linear, slope, intercept);
          };
          break;
        }
        case PayoffKind::Quadratic:
          sc.id = "flat_heat_quadratic";
          sc.vd = [](double t, double x) {
            return gaussian_heat(t, x, HeatPayoff::Quadratic);
          };
          break;
        case PayoffKind::GaussBump:
          sc.id = "flat_heat_gauss_bump";
          sc.vd = [](double t, double x) {
            return gaussian_heat(t, x, HeatPayoff::GaussBump);
          };
          break;
        case PayoffKind::One: {
          const double cval = pay.c;
          sc.id = "flat_heat_const";
          sc.vd = [cval](double, double) {
            ValueDerivatives d;
            d.value = cval;
            return d;
          };
          break;
        }
        default:
          return std::nullopt;
      }
      return make_scalar_case(sc, quantity);
    }
    if (drift.kind == DriftKind::Ou && (pot_zero || pot_const)) {
      const double lam = drift.lambda;
      Scalar1D sc;
      sc.v_const = v_const;
      sc.drift_lambda = lam;
      switch (pay.kind) {
        case PayoffKind::Coordinate:
          sc.id = "flat_ou_coordinate";
          sc.vd = [lam](double t, double x) {
            return ou_mehler(t, x, lam, OuPayoff::Coordinate);
          };
          break;
        case PayoffKind::Quadratic:
          sc.id = "flat_ou_quadratic";
          sc.vd = [lam](double t, double x) {
            return ou_mehler(t, x, lam, OuPayoff::Quadratic);
          };
          break;
        case PayoffKind::Sin:
          sc.id = "flat_ou_sin";
          sc.vd = [lam](double t, double x) {
            return ou_mehler(t, x, lam, OuPayoff::Sin);
          };
          break;
        case PayoffKind::One: {
          const double cval = pay.c;
          sc.id = "flat_ou_const";
          sc.vd = [cval](double, double) {
            ValueDerivatives d;
            d.value = cval;
            return d;
          };
          break;
        }
        default:
          return std::nullopt;
      }
      return make_scalar_case(sc, quantity);
    }
    if (drift.kind == DriftKind::Zero &&
        pot.kind == PotentialKind::Quadratic && pay.kind == PayoffKind::One) {
      const double a = pot.a;
      const double cval = pay.c;
      Scalar1D sc;
      sc.id = "flat_harmonic_const";
      sc.vd = [a, cval](double t, double x) {
        ValueDerivatives d = harmonic_feynman_kac(t, x, a);
        d.value *= cval;
        d.d1 *= cval;
        d.d2 *= cval;
        return d;
      };
      return make_scalar_case(sc, quantity);
    }
    return std::nullopt;
  }

  if (model.kind == ManifoldKind::Sphere && model.dim == 2 &&
      std::abs(model.curvature_const - 1.0) <= 1e-12 &&
      drift.kind == DriftKind::Zero && (pot_zero || pot_const)) {
    try {
      std::shared_ptr<const SphereZonalOracle> orc;
      std::string id;
      switch (pay.kind) {
        case PayoffKind::ZonalCos:
          orc = std::make_shared<const SphereZonalOracle>(
              std::vector<double>{0.0, 1.0});
          id = "sphere_zonal_cos";
          break;
        case PayoffKind::ZonalStep: {
          const double center = pay.center, width = pay.width;
          orc = std::make_shared<const SphereZonalOracle>(
              [center, width](double u) {
                return 0.5 * (1.0 + std::tanh((u - center) / width));
              },
              64, 1e-3);
          id = "sphere_zonal_step";
          break;
        }
        case PayoffKind::One:
          orc = std::make_shared<const SphereZonalOracle>(
              std::vector<double>{pay.c});
          id = "sphere_const";
          break;
        default:
          return std::nullopt;
      }
      return make_sphere_case(std::move(id), std::move(orc), quantity,
                              v_const);
    } catch (const OracleError&) {
      return std::nullopt;  // payoff not resolvable at this degree
    }
  }

  return std::nullopt;
}

}  // namespace fkmc
