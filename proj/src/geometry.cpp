#include "fkmc/geometry.hpp"

#include <cmath>

#include "fkmc/fields.hpp"
#include "chart_ops.hpp"

namespace fkmc {

namespace {

// Minkowski pairing on Rⁿ,¹ (last coordinate timelike).
double mdot(const Vec& a, const Vec& b) {
  const int m = static_cast<int>(a.size());
  double s = 0.0;
  for (int i = 0; i + 1 < m; ++i) s += a[i] * b[i];
  return s - a[m - 1] * b[m - 1];
}

void check_dim(const ManifoldModel& model, const Vec& x) {
  if (x.size() != model.ambient_dim())
    throw GeometryError("point dimension mismatch");
}

}  // namespace

ManifoldModel ManifoldModel::euclidean(int n) {
  if (n < 1) throw GeometryError("dim must be >= 1");
  ManifoldModel m;
  m.kind = ManifoldKind::Euclidean;
  m.dim = n;
  return m;
}

ManifoldModel ManifoldModel::sphere(int n, double c) {
  if (n < 1) throw GeometryError("dim must be >= 1");
  if (!(c > 0)) throw GeometryError("sphere requires curvature > 0");
  ManifoldModel m;
  m.kind = ManifoldKind::Sphere;
  m.dim = n;
  m.curvature_const = c;
  return m;
}

ManifoldModel ManifoldModel::hyperbolic(int n, double c) {
  if (n < 1) throw GeometryError("dim must be >= 1");
  if (!(c < 0)) throw GeometryError("hyperbolic requires curvature < 0");
  ManifoldModel m;
  m.kind = ManifoldKind::Hyperbolic;
  m.dim = n;
  m.curvature_const = c;
  return m;
}

ManifoldModel ManifoldModel::make_chart(ChartSpec spec) {
  if (spec.dim < 1) throw GeometryError("dim must be >= 1");
  if (!spec.metric) throw GeometryError("chart requires a metric callback");
  ManifoldModel m;
  m.kind = ManifoldKind::Chart;
  m.dim = spec.dim;
  m.chart = std::make_shared<const ChartSpec>(std::move(spec));
  return m;
}

int ManifoldModel::ambient_dim() const {
  return (kind == ManifoldKind::Sphere || kind == ManifoldKind::Hyperbolic)
             ? dim + 1
             : dim;
}

double ManifoldModel::radius() const {
  return 1.0 / std::sqrt(std::abs(curvature_const));
}

const char* ManifoldModel::kind_name() const {
  switch (kind) {
    case ManifoldKind::Euclidean: return "euclidean";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Hyperbolic: return "hyperbolic";
    case ManifoldKind::Chart: return "chart";
  }
  return "?";
}

Vec canonical_base_point(const ManifoldModel& model) {
  Vec x = Vec::Zero(model.ambient_dim());
  if (model.kind == ManifoldKind::Sphere ||
      model.kind == ManifoldKind::Hyperbolic)
    x[model.dim] = model.radius();
  return x;
}

bool on_manifold(const ManifoldModel& model, const Vec& x, double tol) {
  if (x.size() != model.ambient_dim()) return false;
  if (!x.allFinite()) return false;
  const double r2 = model.radius() * model.radius();
  switch (model.kind) {
    case ManifoldKind::Euclidean:
      return true;
    case ManifoldKind::Sphere:
      return std::abs(x.squaredNorm() - r2) <= tol * r2;
    case ManifoldKind::Hyperbolic:
      return std::abs(mdot(x, x) + r2) <= tol * r2 && x[model.dim] > 0;
    case ManifoldKind::Chart:
      return x.norm() <= model.chart->validity_radius;
  }
  return false;
}

void metric_at(const ManifoldModel& model, const Vec& x, Mat& g_out) {
  const int m = model.ambient_dim();
  switch (model.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Sphere:
      g_out = Mat::Identity(m, m);
      break;
    case ManifoldKind::Hyperbolic:
      g_out = Mat::Identity(m, m);
      g_out(m - 1, m - 1) = -1.0;
      break;
    case ManifoldKind::Chart:
      model.chart->metric(x, g_out);
      break;
  }
}

Mat initial_frame(const ManifoldModel& model, const Vec& x) {
  check_dim(model, x);
  const int n = model.dim;
  const int m = model.ambient_dim();
  switch (model.kind) {
    case ManifoldKind::Euclidean:
      return Mat::Identity(n, n);
    case ManifoldKind::Chart: {
      // Columns of L⁻ᵀ for g = LLᵀ are g-orthonormal.
      Mat g(n, n);
      model.chart->metric(x, g);
      Eigen::LLT<Mat> llt(g);
      if (llt.info() != Eigen::Success)
        throw GeometryError("chart metric is not positive definite");
      return llt.matrixL()
          .transpose()
          .solve(Mat::Identity(n, n));
    }
    case ManifoldKind::Sphere:
    case ManifoldKind::Hyperbolic: {
      const bool hyp = model.kind == ManifoldKind::Hyperbolic;
      const double r2 = model.radius() * model.radius();
      Mat F(m, n);
      int col = 0;
      for (int i = 0; i < m && col < n; ++i) {
        Vec u = Vec::Zero(m);
        u[i] = 1.0;
        // Project onto the tangent space at x, then against earlier columns.
        if (hyp)
          u += (mdot(u, x) / r2) * x;
        else
          u -= (u.dot(x) / r2) * x;
        for (int j = 0; j < col; ++j) {
          const double p = hyp ? mdot(u, F.col(j)) : u.dot(F.col(j));
          u -= p * F.col(j);
        }
        const double nn = hyp ? mdot(u, u) : u.squaredNorm();
        if (nn > 0.25) {  // skip near-degenerate directions deterministically
          F.col(col++) = u / std::sqrt(nn);
        }
      }
      if (col != n) throw GeometryError("frame completion failed");
      return F;
    }
  }
  throw GeometryError("unreachable");
}

Vec to_frame(const ManifoldModel& model, const Vec& x, const Mat& F,
             const Vec& u) {
  switch (model.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Sphere:
      return F.transpose() * u;
    case ManifoldKind::Hyperbolic: {
      Vec ju = u;
      ju[u.size() - 1] = -ju[u.size() - 1];
      return F.transpose() * ju;
    }
    case ManifoldKind::Chart: {
      Mat g(model.dim, model.dim);
      model.chart->metric(x, g);
      return F.transpose() * (g * u);
    }
  }
  throw GeometryError("unreachable");
}

Mat frame_gram(const ManifoldModel& model, const Vec& x, const Mat& F) {
  Mat g;
  metric_at(model, x, g);
  return F.transpose() * g * F;
}

namespace {

// Shared closed-form advance for the embedded models.  Writes the moved
// point and the transported frame; exact retraction afterwards.
void embedded_step(const ManifoldModel& model, const Vec& x, const Vec& v,
                   const Mat* F_in, Vec& x_out, Mat* F_out) {
  const bool hyp = model.kind == ManifoldKind::Hyperbolic;
  const double r = model.radius();
  const double vv = hyp ? mdot(v, v) : v.squaredNorm();
  if (!(vv > 0)) {  // zero increment: nothing moves
    x_out = x;
    if (F_out) *F_out = *F_in;
    return;
  }
  const double vn = std::sqrt(vv);
  const double theta = vn / r;
  const Vec vhat = v / vn;
  const double ca = hyp ? std::cosh(theta) : std::cos(theta);
  const double sa = hyp ? std::sinh(theta) : std::sin(theta);

  x_out = ca * x + (r * sa) * vhat;

  if (F_out) {
    F_out->resize(F_in->rows(), F_in->cols());  // no-op when preallocated
    // w ↦ w + ⟨w, v̂⟩[(cos θ − 1)v̂ ∓ sin θ·x/r]; the bracket is the change of
    // the transported v̂ along the geodesic, orthogonal directions are fixed.
    Vec corr = (ca - 1.0) * vhat + (hyp ? sa / r : -sa / r) * x;
    for (int a = 0; a < F_out->cols(); ++a) {
      const double p =
          hyp ? mdot(F_in->col(a), vhat) : F_in->col(a).dot(vhat);
      F_out->col(a) = F_in->col(a) + p * corr;
    }
  }

  // Exact retraction: rescale onto the model surface, re-orthonormalize the
  // frame in the tangent space at the new point.
  if (hyp) {
    x_out *= r / std::sqrt(-mdot(x_out, x_out));
  } else {
    x_out *= r / x_out.norm();
  }
  if (F_out) {
    const double r2 = r * r;
    for (int a = 0; a < F_out->cols(); ++a) {
      Vec col = F_out->col(a);
      if (hyp)
        col += (mdot(col, x_out) / r2) * x_out;
      else
        col -= (col.dot(x_out) / r2) * x_out;
      for (int b = 0; b < a; ++b) {
        const double p =
            hyp ? mdot(col, F_out->col(b)) : col.dot(F_out->col(b));
        col -= p * F_out->col(b);
      }
      const double nn = hyp ? mdot(col, col) : col.squaredNorm();
      if (!(nn > 0)) throw GeometryError("frame degenerated during transport");
      F_out->col(a) = col / std::sqrt(nn);
    }
  }
}

}  // namespace

void geodesic_step(const ManifoldModel& model, const Vec& x, const Vec& v,
                   const Mat& F, Vec& x_out, Mat& F_out) {
  switch (model.kind) {
    case ManifoldKind::Euclidean:
      x_out = x + v;
      F_out = F;
      return;
    case ManifoldKind::Sphere:
    case ManifoldKind::Hyperbolic:
      embedded_step(model, x, v, &F, x_out, &F_out);
      return;
    case ManifoldKind::Chart:
      chart_ops::geodesic_step(*model.chart, x, v, F, x_out, F_out);
      return;
  }
}

Vec exp_map(const ManifoldModel& model, const Vec& x, const Vec& v) {
  check_dim(model, x);
  if (!v.allFinite()) throw GeometryError("non-finite geodesic increment");
  switch (model.kind) {
    case ManifoldKind::Euclidean:
      return x + v;
    case ManifoldKind::Sphere:
    case ManifoldKind::Hyperbolic: {
      Vec x_out;
      embedded_step(model, x, v, nullptr, x_out, nullptr);
      return x_out;
    }
    case ManifoldKind::Chart: {
      Vec x_out;
      Mat F = Mat::Zero(model.dim, 0), F_out;
      chart_ops::geodesic_step(*model.chart, x, v, F, x_out, F_out);
      return x_out;
    }
  }
  throw GeometryError("unreachable");
}

Mat parallel_transport_step(const ManifoldModel& model, const Vec& x,
                            const Vec& v, const Mat& F) {
  check_dim(model, x);
  Vec x_out;
  Mat F_out;
  geodesic_step(model, x, v, F, x_out, F_out);
  return F_out;
}

// --- CurvaturePack ------------------------------------------------------------

CurvaturePack curvature_pack(const ManifoldModel& model,
                             const FieldSpec& fields) {
  CurvaturePack p;
  p.model_ = model;
  p.drift_zero_ = fields.drift_zero();
  p.drift_linear_ = fields.drift_linear();
  if (!p.drift_zero_) {
    p.drift_value_ = [fields](const Vec& x, Vec& z) { fields.Z(x, z); };
    p.drift_jacobian_ = [fields](const Vec& x, Mat& j) { fields.gradZ(x, j); };
  }

  const bool curved_embedded = model.kind == ManifoldKind::Sphere ||
                               model.kind == ManifoldKind::Hyperbolic;
  if (model.kind != ManifoldKind::Chart)
    p.constant_curvature_ =
        model.kind == ManifoldKind::Euclidean ? 0.0 : model.curvature_const;

  p.ricci_z_constant_ =
      model.kind != ManifoldKind::Chart &&
      (p.drift_zero_ ||
       (p.drift_linear_ && model.kind == ManifoldKind::Euclidean));

  // ∇Ric_Z needs ∇Ric♯ (closed-form 0 for constant curvature, FD on chart)
  // plus ∇∇Z (0 for zero/linear drift, FD on euclidean/chart).  The embedded
  // curved models don't carry a covariant-∇∇Z implementation for a nonzero
  // drift, so the Hessian estimator is refused there.
  p.hessian_supported_ = !(curved_embedded && !p.drift_zero_);

  p.wprime_drift_trivial_ =
      model.kind != ManifoldKind::Chart &&
      (p.drift_zero_ || p.drift_linear_);
  p.wprime_trivial_ =
      model.kind == ManifoldKind::Euclidean && p.drift_linear_;
  return p;
}

void CurvaturePack::ricci_z(const Vec& x, const Mat& F, Mat& out) const {
  const int n = model_.dim;
  if (model_.kind == ManifoldKind::Chart) {
    chart_ops::ricci_z_frame(*model_.chart, x, F, drift_value_,
                             drift_jacobian_, out);
    return;
  }
  const double ric = model_.curvature_const * (n - 1);
  out = ric * Mat::Identity(n, n);
  if (!drift_zero_) {
    const int m = model_.ambient_dim();
    Mat jac(m, m);
    drift_jacobian_(x, jac);
    if (model_.kind == ManifoldKind::Hyperbolic) {
      Mat jjac = jac;
      jjac.row(m - 1) = -jjac.row(m - 1);  // apply the Minkowski form
      out.noalias() -= 2.0 * F.transpose() * jjac * F;
    } else {
      out.noalias() -= 2.0 * F.transpose() * jac * F;
    }
  }
}

void CurvaturePack::riemann(const Vec& x, const Mat& F, const Vec& u,
                            const Vec& v, const Vec& w, Vec& out) const {
  if (model_.kind == ManifoldKind::Chart) {
    chart_ops::riemann_frame(*model_.chart, x, F, u, v, w, out);
    return;
  }
  // R(u,v)w = c(⟨v,w⟩u − ⟨u,w⟩v) in any orthonormal frame.
  const double c = model_.curvature_const;
  out = c * (v.dot(w) * u - u.dot(w) * v);
}

void CurvaturePack::dstar_r(const Vec& x, const Mat& F, const Vec& v1,
                            const Vec& v2, Vec& out) const {
  if (model_.kind == ManifoldKind::Chart) {
    chart_ops::dstar_r_frame(*model_.chart, x, F, v1, v2, out);
    return;
  }
  out = Vec::Zero(model_.dim);  // ∇R ≡ 0 on constant curvature
}

void CurvaturePack::nabla_ricci_z(const Vec& x, const Mat& F, const Vec& u,
                                  const Vec& w, Vec& out) const {
  const int n = model_.dim;
  if (model_.kind == ManifoldKind::Chart) {
    chart_ops::nabla_ricci_z_frame(*model_.chart, x, F, u, w, drift_value_,
                                   drift_jacobian_, out);
    return;
  }
  out = Vec::Zero(n);  // ∇Ric♯ ≡ 0 on constant curvature
  if (drift_zero_ || drift_linear_) return;
  if (model_.kind != ManifoldKind::Euclidean)
    throw GeometryError(
        "nabla_ricci_z: nonlinear drift on an embedded curved model is "
        "unsupported");
  // −2(∇_u ∇Z)(w) on flat space by central differences of the Jacobian.
  const double h = 1e-5 * std::max(1.0, x.cwiseAbs().maxCoeff());
  const Vec u_amb = F * u;
  const Vec w_amb = F * w;
  Mat jp(n, n), jm(n, n);
  drift_jacobian_(x + h * u_amb, jp);
  drift_jacobian_(x - h * u_amb, jm);
  const Vec dd = ((jp - jm) / (2.0 * h)) * w_amb;
  out.noalias() = -2.0 * F.transpose() * dd;
}

}  // namespace fkmc
