#include "chart_ops.hpp"

#include <cmath>

namespace fkmc::chart_ops {

namespace {

// Central-difference steps.  The base step (spec.fd_step_rel, default 1e-5)
// differentiates the metric; each further derivative layer uses a larger
// step because its integrand already carries the inner layer's noise:
// Γ carries ~ε/h₁ ≈ 1e-11 absolute noise, so ∂Γ balances truncation against
// noise near h₂ ≈ 1e-4, and ∂R/∂Ric near h₃ ≈ 3e-3.
constexpr double kGammaDerivStep = 1e-4;
constexpr double kCurvDerivStep = 3e-3;

double scale_of(const Vec& x) {
  return x.size() ? std::max(1.0, x.cwiseAbs().maxCoeff()) : 1.0;
}

void metric_checked(const ChartSpec& spec, const Vec& x, Mat& g) {
  if (x.norm() > spec.validity_radius)
    throw GeometryError("geodesic left the chart validity region");
  g.resize(spec.dim, spec.dim);
  spec.metric(x, g);
}

// R^l_{ijk} packed flat; index helper keeps the loops readable.
struct Riem {
  int n;
  std::vector<double> r;
  explicit Riem(int n_) : n(n_), r(static_cast<size_t>(n_) * n_ * n_ * n_) {}
  double& at(int l, int i, int j, int k) {
    return r[static_cast<size_t>(((l * n + i) * n + j)) * n + k];
  }
  double at(int l, int i, int j, int k) const {
    return r[static_cast<size_t>(((l * n + i) * n + j)) * n + k];
  }
};

void riemann_tensor(const ChartSpec& spec, const Vec& x, Riem& R);

void ricci_tensor(const ChartSpec& spec, const Vec& x, Mat& ric) {
  const int n = spec.dim;
  Riem R(n);
  riemann_tensor(spec, x, R);
  ric.setZero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) ric(j, k) += R.at(i, i, j, k);
}

// (∇Z)^i_j = ∂_j Z^i + Γ^i_{jm} Z^m.
void covariant_drift_jac(const ChartSpec& spec, const Vec& x,
                         const std::function<void(const Vec&, Vec&)>& drift,
                         const std::function<void(const Vec&, Mat&)>& drift_jac,
                         const std::vector<Mat>& gamma, Mat& out) {
  const int n = spec.dim;
  Vec z(n);
  drift(x, z);
  drift_jac(x, out);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) out(i, j) += gamma[i](j, m) * z[m];
}

// Ric_Z♯ as a (1,1) coordinate matrix: g^{-1}Ric − 2∇Z.
void ricci_z_operator(const ChartSpec& spec, const Vec& x,
                      const std::function<void(const Vec&, Vec&)>& drift,
                      const std::function<void(const Vec&, Mat&)>& drift_jac,
                      Mat& out) {
  const int n = spec.dim;
  Mat g(n, n), ric(n, n);
  metric_checked(spec, x, g);
  ricci_tensor(spec, x, ric);
  out = g.inverse() * ric;
  if (drift) {
    std::vector<Mat> gamma;
    christoffel(spec, x, gamma);
    Mat dz(n, n);
    covariant_drift_jac(spec, x, drift, drift_jac, gamma, dz);
    out -= 2.0 * dz;
  }
}

}  // namespace

void christoffel(const ChartSpec& spec, const Vec& x,
                 std::vector<Mat>& gamma) {
  const int n = spec.dim;
  const double h = spec.fd_step_rel * scale_of(x);
  Mat g(n, n), gp(n, n), gm(n, n);
  metric_checked(spec, x, g);
  std::vector<Mat> dg(n);
  Vec xp = x;
  for (int i = 0; i < n; ++i) {
    xp[i] = x[i] + h;
    metric_checked(spec, xp, gp);
    xp[i] = x[i] - h;
    metric_checked(spec, xp, gm);
    xp[i] = x[i];
    dg[i] = (gp - gm) / (2.0 * h);
  }
  const Mat ginv = g.inverse();
  gamma.assign(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gamma[k](i, j) = 0.5 * s;
      }
}

namespace {

void riemann_tensor(const ChartSpec& spec, const Vec& x, Riem& R) {
  const int n = spec.dim;
  const double h = kGammaDerivStep * scale_of(x);
  std::vector<Mat> gamma;
  christoffel(spec, x, gamma);
  // dgamma[i][k](j,l)... stored as dgamma[i] = ∂_i Γ (same layout as gamma).
  std::vector<std::vector<Mat>> dgamma(n);
  Vec xp = x;
  for (int i = 0; i < n; ++i) {
    std::vector<Mat> gp, gm;
    xp[i] = x[i] + h;
    christoffel(spec, xp, gp);
    xp[i] = x[i] - h;
    christoffel(spec, xp, gm);
    xp[i] = x[i];
    dgamma[i].resize(n);
    for (int k = 0; k < n; ++k) dgamma[i][k] = (gp[k] - gm[k]) / (2.0 * h);
  }
  // R(e_i, e_j)e_k = (∂_i Γ^l_{jk} − ∂_j Γ^l_{ik}
  //                   + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}) e_l.
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = dgamma[i][l](j, k) - dgamma[j][l](i, k);
          for (int m = 0; m < n; ++m)
            s += gamma[l](i, m) * gamma[m](j, k) -
                 gamma[l](j, m) * gamma[m](i, k);
          R.at(l, i, j, k) = s;
        }
}

}  // namespace

void geodesic_step(const ChartSpec& spec, const Vec& x, const Vec& v,
                   const Mat& F, Vec& x_out, Mat& F_out) {
  const int n = spec.dim;
  const int nf = static_cast<int>(F.cols());
  // One classical RK4 step over unit parameter time.  The path loop feeds
  // increments of size O(√dt), so the local error is O(|v|⁵) = O(dt^{5/2}).
  struct State {
    Vec x, p;
    Mat F;
  };
  auto deriv = [&](const State& s) {
    std::vector<Mat> gamma;
    christoffel(spec, s.x, gamma);
    State d;
    d.x = s.p;
    d.p = Vec::Zero(n);
    d.F = Mat::Zero(n, nf);
    for (int k = 0; k < n; ++k) {
      d.p[k] = -s.p.dot(gamma[k] * s.p);
      for (int a = 0; a < nf; ++a)
        d.F(k, a) = -s.p.dot(gamma[k] * s.F.col(a));
    }
    return d;
  };
  auto advance = [&](const State& s, const State& d, double h) {
    return State{s.x + h * d.x, s.p + h * d.p, s.F + h * d.F};
  };
  State s0{x, v, F};
  State k1 = deriv(s0);
  State k2 = deriv(advance(s0, k1, 0.5));
  State k3 = deriv(advance(s0, k2, 0.5));
  State k4 = deriv(advance(s0, k3, 1.0));
  x_out = x + (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x) / 6.0;
  F_out = F + (k1.F + 2.0 * k2.F + 2.0 * k3.F + k4.F) / 6.0;
  if (x_out.norm() > spec.validity_radius)
    throw GeometryError("geodesic left the chart validity region");
}

void ricci_z_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const std::function<void(const Vec&, Vec&)>& drift,
                   const std::function<void(const Vec&, Mat&)>& drift_jac,
                   Mat& out) {
  const int n = spec.dim;
  Mat op(n, n), g(n, n);
  ricci_z_operator(spec, x, drift, drift_jac, op);
  metric_checked(spec, x, g);
  out = F.transpose() * g * op * F;
}

void riemann_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const Vec& u, const Vec& v, const Vec& w, Vec& out) {
  const int n = spec.dim;
  Riem R(n);
  riemann_tensor(spec, x, R);
  const Vec uc = F * u, vc = F * v, wc = F * w;
  Vec rc = Vec::Zero(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          rc[l] += R.at(l, i, j, k) * uc[i] * vc[j] * wc[k];
  Mat g(n, n);
  metric_checked(spec, x, g);
  out = F.transpose() * g * rc;
}

void dstar_r_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                   const Vec& v1, const Vec& v2, Vec& out) {
  const int n = spec.dim;
  const double h = kCurvDerivStep * scale_of(x);
  std::vector<Mat> gamma;
  christoffel(spec, x, gamma);
  Riem R0(n);
  riemann_tensor(spec, x, R0);
  // ∂_m R by central differences.
  std::vector<Riem> dR(n, Riem(n));
  Vec xp = x;
  for (int m = 0; m < n; ++m) {
    Riem Rp(n), Rm(n);
    xp[m] = x[m] + h;
    riemann_tensor(spec, xp, Rp);
    xp[m] = x[m] - h;
    riemann_tensor(spec, xp, Rm);
    xp[m] = x[m];
    for (size_t q = 0; q < Rp.r.size(); ++q)
      dR[m].r[q] = (Rp.r[q] - Rm.r[q]) / (2.0 * h);
  }
  Mat g(n, n);
  metric_checked(spec, x, g);
  const Mat ginv = g.inverse();
  const Vec v1c = F * v1, v2c = F * v2;
  // d*R(v₁)v₂ = tr ∇_· R(·, v₁)v₂ = g^{mi}(∇_m R)^l_{ijk} v₁^j v₂^k e_l.
  Vec rc = Vec::Zero(n);
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i) {
      const double gmi = ginv(m, i);
      if (gmi == 0.0) continue;
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            double cov = dR[m].at(l, i, j, k);
            for (int p = 0; p < n; ++p)
              cov += gamma[l](m, p) * R0.at(p, i, j, k) -
                     gamma[p](m, i) * R0.at(l, p, j, k) -
                     gamma[p](m, j) * R0.at(l, i, p, k) -
                     gamma[p](m, k) * R0.at(l, i, j, p);
            rc[l] += gmi * cov * v1c[j] * v2c[k];
          }
    }
  out = F.transpose() * g * rc;
}

void nabla_ricci_z_frame(const ChartSpec& spec, const Vec& x, const Mat& F,
                         const Vec& u, const Vec& w,
                         const std::function<void(const Vec&, Vec&)>& drift,
                         const std::function<void(const Vec&, Mat&)>& drift_jac,
                         Vec& out) {
  const int n = spec.dim;
  const double h = kCurvDerivStep * scale_of(x);
  std::vector<Mat> gamma;
  christoffel(spec, x, gamma);
  Mat A(n, n);
  ricci_z_operator(spec, x, drift, drift_jac, A);
  // ∂_m A by central differences of the (1,1) operator.
  std::vector<Mat> dA(n);
  Vec xp = x;
  Mat Ap(n, n), Am(n, n);
  for (int m = 0; m < n; ++m) {
    xp[m] = x[m] + h;
    ricci_z_operator(spec, xp, drift, drift_jac, Ap);
    xp[m] = x[m] - h;
    ricci_z_operator(spec, xp, drift, drift_jac, Am);
    xp[m] = x[m];
    dA[m] = (Ap - Am) / (2.0 * h);
  }
  const Vec uc = F * u, wc = F * w;
  // (∇_m A)^l_k = ∂_m A^l_k + Γ^l_{mp}A^p_k − Γ^p_{mk}A^l_p.
  Vec rc = Vec::Zero(n);
  for (int m = 0; m < n; ++m)
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k) {
        double cov = dA[m](l, k);
        for (int p = 0; p < n; ++p)
          cov += gamma[l](m, p) * A(p, k) - gamma[p](m, k) * A(l, p);
        rc[l] += uc[m] * cov * wc[k];
      }
  Mat g(n, n);
  metric_checked(spec, x, g);
  out = F.transpose() * g * rc;
}

}  // namespace fkmc::chart_ops
