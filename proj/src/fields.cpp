#include "fkmc/fields.hpp"

#include <cmath>

namespace fkmc {

PotentialSpec PotentialSpec::zero() { return {}; }

PotentialSpec PotentialSpec::constant(double c) {
  PotentialSpec p;
  p.kind = PotentialKind::Constant;
  p.c = c;
  return p;
}

PotentialSpec PotentialSpec::quadratic(double a) {
  PotentialSpec p;
  p.kind = PotentialKind::Quadratic;
  p.a = a;
  return p;
}

DriftSpec DriftSpec::zero() { return {}; }

DriftSpec DriftSpec::ou(double lambda) {
  DriftSpec d;
  d.kind = DriftKind::Ou;
  d.lambda = lambda;
  return d;
}

PayoffSpec PayoffSpec::one(double c) {
  PayoffSpec p;
  p.c = c;
  return p;
}

PayoffSpec PayoffSpec::coordinate(int index) {
  PayoffSpec p;
  p.kind = PayoffKind::Coordinate;
  p.index = index;
  return p;
}

PayoffSpec PayoffSpec::linear(Vec a, double b) {
  PayoffSpec p;
  p.kind = PayoffKind::Linear;
  p.a = std::move(a);
  p.b = b;
  return p;
}

PayoffSpec PayoffSpec::sin_first() {
  PayoffSpec p;
  p.kind = PayoffKind::Sin;
  return p;
}

PayoffSpec PayoffSpec::quadratic() {
  PayoffSpec p;
  p.kind = PayoffKind::Quadratic;
  return p;
}

PayoffSpec PayoffSpec::gauss_bump() {
  PayoffSpec p;
  p.kind = PayoffKind::GaussBump;
  return p;
}

PayoffSpec PayoffSpec::zonal_cos() {
  PayoffSpec p;
  p.kind = PayoffKind::ZonalCos;
  return p;
}

PayoffSpec PayoffSpec::zonal_step(double center, double width) {
  PayoffSpec p;
  p.kind = PayoffKind::ZonalStep;
  p.center = center;
  p.width = width;
  return p;
}

FieldSpec::FieldSpec(PotentialSpec pot, DriftSpec drift, PayoffSpec payoff,
                     double v_min)
    : pot_(std::move(pot)),
      drift_(std::move(drift)),
      payoff_(std::move(payoff)),
      v_min_(v_min) {}

double FieldSpec::V(double t, const Vec& x) const {
  switch (pot_.kind) {
    case PotentialKind::Zero:
      return 0.0;
    case PotentialKind::Constant:
      return pot_.c;
    case PotentialKind::Quadratic:
      return pot_.a * x.squaredNorm();
    case PotentialKind::Custom:
      return pot_.value(t, x);
  }
  return 0.0;
}

void FieldSpec::dV(double t, const Vec& x, Vec& out) const {
  switch (pot_.kind) {
    case PotentialKind::Zero:
    case PotentialKind::Constant:
      out.setZero(x.size());
      return;
    case PotentialKind::Quadratic:
      out = (2.0 * pot_.a) * x;
      return;
    case PotentialKind::Custom:
      if (!pot_.gradient)
        throw FieldError("custom potential without a gradient callback");
      pot_.gradient(t, x, out);
      return;
  }
}

void FieldSpec::hessV(double t, const Vec& x, Mat& out) const {
  const auto n = x.size();
  switch (pot_.kind) {
    case PotentialKind::Zero:
    case PotentialKind::Constant:
      out.setZero(n, n);
      return;
    case PotentialKind::Quadratic:
      out = (2.0 * pot_.a) * Mat::Identity(n, n);
      return;
    case PotentialKind::Custom:
      if (!pot_.hessian)
        throw FieldError("custom potential without a hessian callback");
      pot_.hessian(t, x, out);
      return;
  }
}

void FieldSpec::Z(const Vec& x, Vec& out) const {
  switch (drift_.kind) {
    case DriftKind::Zero:
      out.setZero(x.size());
      return;
    case DriftKind::Ou:
      out = -drift_.lambda * x;
      return;
    case DriftKind::Custom:
      drift_.value(x, out);
      return;
  }
}

void FieldSpec::gradZ(const Vec& x, Mat& out) const {
  const auto n = x.size();
  switch (drift_.kind) {
    case DriftKind::Zero:
      out.setZero(n, n);
      return;
    case DriftKind::Ou:
      out = -drift_.lambda * Mat::Identity(n, n);
      return;
    case DriftKind::Custom:
      if (!drift_.jacobian)
        throw FieldError("custom drift without a jacobian callback");
      drift_.jacobian(x, out);
      return;
  }
}

double FieldSpec::f(const Vec& x) const {
  switch (payoff_.kind) {
    case PayoffKind::One:
      return payoff_.c;
    case PayoffKind::Coordinate:
      return x[payoff_.index];
    case PayoffKind::Linear:
      return payoff_.a.dot(x) + payoff_.b;
    case PayoffKind::Sin:
      return std::sin(x[0]);
    case PayoffKind::Quadratic:
      return x.squaredNorm();
    case PayoffKind::GaussBump:
      return std::exp(-0.5 * x.squaredNorm());
    case PayoffKind::ZonalCos:
      return x[x.size() - 1] / x.norm();
    case PayoffKind::ZonalStep: {
      const double u = x[x.size() - 1] / x.norm();
      return 0.5 * (1.0 + std::tanh((u - payoff_.center) / payoff_.width));
    }
    case PayoffKind::Custom:
      return payoff_.value(x);
  }
  return 0.0;
}

bool FieldSpec::potential_spatially_constant() const {
  return pot_.kind == PotentialKind::Zero ||
         pot_.kind == PotentialKind::Constant;
}

void FieldSpec::validate_for_model(const ManifoldModel& model) const {
  const bool curved_embedded = model.kind == ManifoldKind::Sphere ||
                               model.kind == ManifoldKind::Hyperbolic;
  if (curved_embedded && pot_.kind == PotentialKind::Quadratic)
    throw FieldError(
        "quadratic potential is only defined on coordinate models "
        "(euclidean/chart)");
  if (curved_embedded && drift_.kind == DriftKind::Ou)
    throw FieldError("ou drift is not tangent to the embedded models");
  if (!curved_embedded && (payoff_.kind == PayoffKind::ZonalCos ||
                           payoff_.kind == PayoffKind::ZonalStep))
    throw FieldError("zonal payoffs require the sphere model");
  const int m = model.ambient_dim();
  if (payoff_.kind == PayoffKind::Coordinate &&
      (payoff_.index < 0 || payoff_.index >= m))
    throw FieldError("coordinate payoff index out of range");
  if (payoff_.kind == PayoffKind::Linear && payoff_.a.size() != m)
    throw FieldError("linear payoff coefficient dimension mismatch");
}

void check_field_derivatives(const FieldSpec& fields,
                             const ManifoldModel& model, const Vec& x0,
                             double T) {
  if (fields.potential_spatially_constant()) return;
  if (model.kind == ManifoldKind::Sphere ||
      model.kind == ManifoldKind::Hyperbolic)
    return;  // validate_for_model restricts these to constant potentials

  const int m = model.ambient_dim();
  const double h = 1e-5 * std::max(1.0, x0.cwiseAbs().maxCoeff());
  Vec g(m), gp(m), gm(m);
  Mat H(m, m);
  const double times[] = {0.0, 0.5 * T, T};
  for (double t : times) {
    for (int probe = 0; probe < 3; ++probe) {
      Vec x = x0;
      if (probe > 0) x.array() += (probe == 1 ? 0.17 : -0.29);
      fields.dV(t, x, g);
      fields.hessV(t, x, H);
      for (int i = 0; i < m; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (fields.V(t, xp) - fields.V(t, xm)) / (2.0 * h);
        const double ref = std::max({1.0, std::abs(fd), std::abs(g[i])});
        if (std::abs(fd - g[i]) > 1e-4 * ref)
          throw FieldError("dV disagrees with finite differences of V");
        fields.dV(t, xp, gp);
        fields.dV(t, xm, gm);
        for (int j = 0; j < m; ++j) {
          const double fd2 = (gp[j] - gm[j]) / (2.0 * h);
          const double ref2 = std::max({1.0, std::abs(fd2), std::abs(H(j, i))});
          if (std::abs(fd2 - H(j, i)) > 1e-4 * ref2)
            throw FieldError("hessV disagrees with finite differences of dV");
        }
      }
    }
  }
}

}  // namespace fkmc
