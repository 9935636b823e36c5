#include <doctest.h>

#include <fkmc/fields.hpp>
#include <fkmc/geometry.hpp>
#include <fkmc/rng.hpp>

#include <cmath>

using namespace fkmc;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("model factories and basic queries") {
  const auto e = ManifoldModel::euclidean(3);
  CHECK(e.dim == 3);
  CHECK(e.ambient_dim() == 3);
  CHECK(e.curvature_const == 0.0);

  const auto s = ManifoldModel::sphere(2, 4.0);
  CHECK(s.dim == 2);
  CHECK(s.ambient_dim() == 3);
  CHECK(s.radius() == doctest::Approx(0.5));

  const auto h = ManifoldModel::hyperbolic(2, -1.0);
  CHECK(h.ambient_dim() == 3);
  CHECK(h.radius() == doctest::Approx(1.0));

  CHECK_THROWS_AS(ManifoldModel::sphere(2, -1.0), GeometryError);
  CHECK_THROWS_AS(ManifoldModel::sphere(2, 0.0), GeometryError);
  CHECK_THROWS_AS(ManifoldModel::hyperbolic(2, 1.0), GeometryError);
  CHECK_THROWS_AS(ManifoldModel::euclidean(0), GeometryError);
}

TEST_CASE("canonical base points satisfy the embedding constraint") {
  for (const auto& model :
       {ManifoldModel::euclidean(2), ManifoldModel::sphere(2, 1.0),
        ManifoldModel::sphere(3, 0.25), ManifoldModel::hyperbolic(2, -1.0),
        ManifoldModel::hyperbolic(2, -4.0)}) {
    const Vec x = canonical_base_point(model);
    CHECK(on_manifold(model, x));
  }
  // Off-manifold points are rejected.
  const auto s = ManifoldModel::sphere(2, 1.0);
  CHECK_FALSE(on_manifold(s, vec3(0.0, 0.0, 1.1)));
  const auto h = ManifoldModel::hyperbolic(2, -1.0);
  CHECK_FALSE(on_manifold(h, vec3(0.0, 0.0, -1.0)));  // wrong sheet
}

TEST_CASE("exp_map: euclidean is translation") {
  const auto model = ManifoldModel::euclidean(2);
  const Vec x = vec2(0.3, -0.7);
  const Vec v = vec2(1.5, 0.25);
  const Vec y = exp_map(model, x, v);
  CHECK(y.isApprox(x + v, 1e-15));
}

TEST_CASE("exp_map: unit sphere great circles") {
  const auto model = ManifoldModel::sphere(2, 1.0);
  const Vec north = vec3(0.0, 0.0, 1.0);

  // Quarter arc reaches the equator.
  Vec y = exp_map(model, north, vec3(M_PI / 2.0, 0.0, 0.0));
  CHECK(y.isApprox(vec3(1.0, 0.0, 0.0), 1e-12));

  // Half arc reaches the antipode.
  y = exp_map(model, north, vec3(M_PI, 0.0, 0.0));
  CHECK(y.isApprox(vec3(0.0, 0.0, -1.0), 1e-12));

  // Full circle returns home.
  y = exp_map(model, north, vec3(2.0 * M_PI, 0.0, 0.0));
  CHECK(y.isApprox(north, 1e-9));

  // Zero velocity is the identity.
  y = exp_map(model, north, vec3(0.0, 0.0, 0.0));
  CHECK(y.isApprox(north, 1e-15));

  // Generic step stays on the sphere.
  y = exp_map(model, north, vec3(0.4, -0.3, 0.0));
  CHECK(on_manifold(model, y, 1e-12));
}

TEST_CASE("exp_map: sphere of radius 2 uses arc length / radius") {
  const auto model = ManifoldModel::sphere(2, 0.25);  // r = 2
  const Vec top = vec3(0.0, 0.0, 2.0);
  // |v| = pi means angle pi/2 on a radius-2 sphere.
  const Vec y = exp_map(model, top, vec3(M_PI, 0.0, 0.0));
  CHECK(y.isApprox(vec3(2.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("exp_map: hyperboloid geodesics in closed form") {
  const auto model = ManifoldModel::hyperbolic(2, -1.0);
  const Vec base = vec3(0.0, 0.0, 1.0);
  const double s = 0.8;
  const Vec y = exp_map(model, base, vec3(s, 0.0, 0.0));
  CHECK(y.isApprox(vec3(std::sinh(s), 0.0, std::cosh(s)), 1e-12));
  CHECK(on_manifold(model, y, 1e-12));
}

TEST_CASE("parallel transport: euclidean identity, sphere quarter arc") {
  const auto e = ManifoldModel::euclidean(3);
  const Mat F0 = Mat::Identity(3, 3);
  const Mat Fe = parallel_transport_step(e, vec3(0, 0, 0), vec3(1, 2, 3), F0);
  CHECK((Fe - F0).cwiseAbs().maxCoeff() == 0.0);

  const auto s = ManifoldModel::sphere(2, 1.0);
  const Vec north = vec3(0.0, 0.0, 1.0);
  Mat F(3, 2);
  F.col(0) = vec3(1.0, 0.0, 0.0);
  F.col(1) = vec3(0.0, 1.0, 0.0);
  const Mat Ft =
      parallel_transport_step(s, north, vec3(M_PI / 2.0, 0.0, 0.0), F);
  // The velocity direction e_x turns into -e_z at the equator point (1,0,0);
  // e_y is orthogonal to the great-circle plane and is unchanged.
  CHECK(Ft.col(0).isApprox(vec3(0.0, 0.0, -1.0), 1e-12));
  CHECK(Ft.col(1).isApprox(vec3(0.0, 1.0, 0.0), 1e-12));
}

TEST_CASE("parallel transport around a spherical octant is a quarter turn") {
  const auto s = ManifoldModel::sphere(2, 1.0);
  const Vec north = vec3(0.0, 0.0, 1.0);
  const Vec a = vec3(1.0, 0.0, 0.0);
  const Vec b = vec3(0.0, 1.0, 0.0);
  Mat F(3, 2);
  F.col(0) = vec3(1.0, 0.0, 0.0);
  F.col(1) = vec3(0.0, 1.0, 0.0);

  Mat F1 = parallel_transport_step(s, north, (M_PI / 2.0) * a, F);
  Mat F2 = parallel_transport_step(s, a, (M_PI / 2.0) * b, F1);
  Mat F3 = parallel_transport_step(s, b, (M_PI / 2.0) * north, F2);

  // Holonomy of the octant loop (area pi/2, curvature 1): rotation by pi/2.
  CHECK(F3.col(0).isApprox(vec3(0.0, 1.0, 0.0), 1e-12));
  CHECK(F3.col(1).isApprox(vec3(-1.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("hyperbolic transport preserves the Minkowski gram matrix") {
  const auto h = ManifoldModel::hyperbolic(2, -1.0);
  const Vec base = canonical_base_point(h);
  Mat F = initial_frame(h, base);
  Vec x = base;
  // Walk a few legs and verify orthonormality is exact (closed-form
  // transport + retraction).
  PathRng rng(11u, 0u);
  double xi[2];
  for (int i = 0; i < 50; ++i) {
    rng.normals(static_cast<std::uint32_t>(i), xi, 2);
    const Vec v = F * vec2(0.12 * xi[0], 0.12 * xi[1]);
    Vec x_new(3);
    Mat F_new(3, 2);
    geodesic_step(h, x, v, F, x_new, F_new);
    x = x_new;
    F = F_new;
    CHECK(on_manifold(h, x, 1e-10));
  }
  const Mat gram = frame_gram(h, x, F);
  CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("frame stays orthonormal over a unit-time random walk") {
  // Drive a sphere path with dt = 1e-3 Brownian-scale increments for 1000
  // steps; the per-step renormalization must keep the gram within 1e-8.
  const auto s = ManifoldModel::sphere(2, 1.0);
  Vec x = canonical_base_point(s);
  Mat F = initial_frame(s, x);
  PathRng rng(3u, 5u);
  const double sdt = std::sqrt(1e-3);
  double xi[2];
  Vec x_new(3);
  Mat F_new(3, 2);
  for (int i = 0; i < 1000; ++i) {
    rng.normals(static_cast<std::uint32_t>(i), xi, 2);
    const Vec v = F * vec2(sdt * xi[0], sdt * xi[1]);
    geodesic_step(s, x, v, F, x_new, F_new);
    x.swap(x_new);
    F.swap(F_new);
  }
  const Mat gram = frame_gram(s, x, F);
  CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(on_manifold(s, x, 1e-9));
}

TEST_CASE("initial_frame is deterministic and orthonormal") {
  const auto s = ManifoldModel::sphere(2, 1.0);

  // At the north pole the coordinate axes are already tangent.
  Mat F = initial_frame(s, vec3(0.0, 0.0, 1.0));
  CHECK(F.col(0).isApprox(vec3(1.0, 0.0, 0.0), 1e-14));
  CHECK(F.col(1).isApprox(vec3(0.0, 1.0, 0.0), 1e-14));

  // On the phi = 0 meridian the first column is the unit polar direction.
  const double th = M_PI / 3.0;
  const Vec x = vec3(std::sin(th), 0.0, std::cos(th));
  F = initial_frame(s, x);
  CHECK(F.col(0).isApprox(vec3(std::cos(th), 0.0, -std::sin(th)), 1e-12));
  const Mat gram = frame_gram(s, x, F);
  CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  // to_frame inverts F on tangent vectors.
  const Vec comps = vec2(0.3, -1.2);
  const Vec u = F * comps;
  CHECK(to_frame(s, x, F, u).isApprox(comps, 1e-12));

  // Hyperbolic: frame components use the Minkowski metric.
  const auto h = ManifoldModel::hyperbolic(2, -1.0);
  const Vec xb = exp_map(h, canonical_base_point(h), vec3(0.7, 0.2, 0.0));
  const Mat Fh = initial_frame(h, xb);
  const Mat gh = frame_gram(h, xb, Fh);
  CHECK((gh - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  const Vec uh = Fh * comps;
  CHECK(to_frame(h, xb, Fh, uh).isApprox(comps, 1e-12));
}

TEST_CASE("curvature pack: flat space with zero drift is fully trivial") {
  const auto e = ManifoldModel::euclidean(3);
  const FieldSpec fields(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::one());
  const auto pack = curvature_pack(e, fields);
  CHECK(pack.wprime_trivial());
  CHECK(pack.wprime_drift_trivial());
  CHECK(pack.ricci_z_constant());
  CHECK(pack.hessian_supported());
  REQUIRE(pack.constant_curvature().has_value());
  CHECK(*pack.constant_curvature() == 0.0);

  const Vec x = vec3(0.1, 0.2, 0.3);
  const Mat F = Mat::Identity(3, 3);
  Mat ric(3, 3);
  pack.ricci_z(x, F, ric);
  CHECK(ric.cwiseAbs().maxCoeff() == 0.0);
  Vec out(3);
  pack.riemann(x, F, vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 1, 0), out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  pack.dstar_r(x, F, vec3(1, 0, 0), vec3(0, 1, 0), out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("curvature pack: Ornstein-Uhlenbeck drift gives Ric_Z = 2 lambda I") {
  const double lambda = 0.7;
  const auto e = ManifoldModel::euclidean(2);
  const FieldSpec fields(PotentialSpec::zero(), DriftSpec::ou(lambda),
                         PayoffSpec::one());
  const auto pack = curvature_pack(e, fields);
  CHECK(pack.wprime_trivial());  // flat with linear drift
  CHECK(pack.ricci_z_constant());
  CHECK(pack.hessian_supported());

  Mat ric(2, 2);
  pack.ricci_z(vec2(0.4, -0.9), Mat::Identity(2, 2), ric);
  CHECK(ric.isApprox(2.0 * lambda * Mat::Identity(2, 2), 1e-14));

  Vec out(2);
  pack.nabla_ricci_z(vec2(0.4, -0.9), Mat::Identity(2, 2), vec2(1, 0),
                     vec2(0, 1), out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("curvature pack: constant-curvature closed forms") {
  const FieldSpec fields(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::one());

  const auto s = ManifoldModel::sphere(2, 1.0);
  const auto ps = curvature_pack(s, fields);
  CHECK_FALSE(ps.wprime_trivial());
  CHECK(ps.wprime_drift_trivial());
  CHECK(ps.hessian_supported());
  REQUIRE(ps.constant_curvature().has_value());
  CHECK(*ps.constant_curvature() == 1.0);

  const Vec x = canonical_base_point(s);
  const Mat F = initial_frame(s, x);
  Mat ric(2, 2);
  ps.ricci_z(x, F, ric);
  CHECK(ric.isApprox(Mat::Identity(2, 2), 1e-14));  // Ric = (n-1)c I with n=2

  // R(u,v)w = c(<v,w>u - <u,w>v) in frame components.
  Vec out(2);
  ps.riemann(x, F, vec2(1, 0), vec2(0, 1), vec2(0, 1), out);
  CHECK(out.isApprox(vec2(1.0, 0.0), 1e-14));
  ps.riemann(x, F, vec2(1, 0), vec2(0, 1), vec2(1, 0), out);
  CHECK(out.isApprox(vec2(0.0, -1.0), 1e-14));
  // Antisymmetry in (u, v).
  Vec out2(2);
  ps.riemann(x, F, vec2(1, 0), vec2(0, 1), vec2(0, 1), out);
  ps.riemann(x, F, vec2(0, 1), vec2(1, 0), vec2(0, 1), out2);
  CHECK((out + out2).cwiseAbs().maxCoeff() == 0.0);
  // d*R vanishes for constant curvature.
  ps.dstar_r(x, F, vec2(1, 0), vec2(0, 1), out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  const auto h = ManifoldModel::hyperbolic(2, -1.0);
  const auto ph = curvature_pack(h, fields);
  Mat rich(2, 2);
  ph.ricci_z(canonical_base_point(h), initial_frame(h, canonical_base_point(h)),
             rich);
  CHECK(rich.isApprox(-Mat::Identity(2, 2), 1e-14));
}

TEST_CASE("curvature pack: hessian support is refused only where undefined") {
  // Nonzero drift on an embedded curved model has no covariant second
  // derivative implementation; the pack must say so up front.
  DriftSpec drift;
  drift.kind = DriftKind::Custom;
  drift.jacobian_constant = false;
  drift.value = [](const Vec& x, Vec& out) { out = -x; };
  drift.jacobian = [](const Vec& x, Mat& out) {
    out = -Mat::Identity(x.size(), x.size());
  };
  const FieldSpec fields(PotentialSpec::zero(), drift, PayoffSpec::one());

  const auto s = ManifoldModel::sphere(2, 1.0);
  CHECK_FALSE(curvature_pack(s, fields).hessian_supported());

  const auto e = ManifoldModel::euclidean(2);
  CHECK(curvature_pack(e, fields).hessian_supported());
}

TEST_CASE("curvature pack: nonlinear flat drift differentiates the Jacobian") {
  // Z(x) = (-x0^3, -x1): nabla_ricci_z = -2 (grad_u gradZ)(w) with
  // (gradZ)_{00} = -3 x0^2, so (grad_{e0} gradZ)(e0) = (-6 x0, 0).
  DriftSpec drift;
  drift.kind = DriftKind::Custom;
  drift.jacobian_constant = false;
  drift.value = [](const Vec& x, Vec& out) {
    out.resize(2);
    out << -x[0] * x[0] * x[0], -x[1];
  };
  drift.jacobian = [](const Vec& x, Mat& out) {
    out.setZero(2, 2);
    out(0, 0) = -3.0 * x[0] * x[0];
    out(1, 1) = -1.0;
  };
  const FieldSpec fields(PotentialSpec::zero(), drift, PayoffSpec::one());
  const auto e = ManifoldModel::euclidean(2);
  const auto pack = curvature_pack(e, fields);
  CHECK_FALSE(pack.ricci_z_constant());
  CHECK_FALSE(pack.wprime_trivial());

  const Vec x = vec2(0.5, -0.2);
  const Mat F = Mat::Identity(2, 2);
  Mat ric(2, 2);
  pack.ricci_z(x, F, ric);
  Mat expect(2, 2);
  expect << 6.0 * 0.5 * 0.5, 0.0, 0.0, 2.0;  // -2 * jacobian
  CHECK(ric.isApprox(expect, 1e-12));

  Vec out(2);
  pack.nabla_ricci_z(x, F, vec2(1, 0), vec2(1, 0), out);
  CHECK(out[0] == doctest::Approx(12.0 * 0.5).epsilon(1e-6));  // -2 * (-6 x0)
  CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-6));
}
