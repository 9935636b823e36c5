#include <doctest.h>

#include <fkmc/estimators.hpp>
#include <fkmc/oracles.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace fkmc;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

SimConfig base_flat(int dim, std::int64_t n_paths) {
  SimConfig cfg;
  cfg.model = ManifoldModel::euclidean(dim);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::one());
  cfg.x0 = Vec::Zero(dim);
  cfg.v = Vec::Zero(dim);
  cfg.v[0] = 1.0;
  cfg.w = cfg.v;
  cfg.T = 1.0;
  cfg.dt = 1e-2;
  cfg.n_paths = n_paths;
  cfg.k = Schedule::gradient_default(cfg.T);
  cfg.l = Schedule::generator_l_default(cfg.T);
  cfg.estimators.semigroup = true;
  return cfg;
}

}  // namespace

TEST_CASE("RunningMoments: push/merge agree with direct formulas") {
  std::mt19937 gen(7);
  std::normal_distribution<double> dist(0.4, 1.3);
  std::vector<double> xs(257);
  for (auto& x : xs) x = dist(gen);

  RunningMoments whole;
  for (double x : xs) whole.push(x);

  // Direct two-pass computation.
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double m2 = 0.0;
  for (double x : xs) m2 += (x - mean) * (x - mean);
  const double var = m2 / static_cast<double>(xs.size() - 1);

  CHECK(whole.mean == doctest::Approx(mean).epsilon(1e-13));
  CHECK(whole.variance() == doctest::Approx(var).epsilon(1e-12));
  CHECK(whole.std_error() ==
        doctest::Approx(std::sqrt(var / static_cast<double>(xs.size())))
            .epsilon(1e-12));

  // Merging split halves (any split point) reproduces the whole.
  for (size_t split : {size_t{1}, size_t{100}, size_t{256}}) {
    RunningMoments a, b;
    for (size_t i = 0; i < split; ++i) a.push(xs[i]);
    for (size_t i = split; i < xs.size(); ++i) b.push(xs[i]);
    a.merge(b);
    CHECK(a.n == whole.n);
    CHECK(a.mean == doctest::Approx(whole.mean).epsilon(1e-13));
    CHECK(a.variance() == doctest::Approx(whole.variance()).epsilon(1e-12));
  }

  // Merging an empty accumulator is the identity.
  RunningMoments c, empty;
  for (double x : xs) c.push(x);
  c.merge(empty);
  CHECK(c.mean == whole.mean);
  CHECK(c.n == whole.n);
}

TEST_CASE("trivial semigroup: V = 0, f = 1 gives exactly 1.0 with zero error") {
  auto cfg = base_flat(1, 64);
  const auto report = estimate_semigroup(cfg);
  CHECK(report.estimate == 1.0);
  CHECK(report.std_error == 0.0);
  CHECK(report.n_paths_used == 64);
  CHECK(report.n_paths_failed == 0);
  CHECK(report.kind == "semigroup");
}

TEST_CASE("constant payoff scales the trivial semigroup exactly") {
  auto cfg = base_flat(1, 32);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::one(2.5));
  const auto report = estimate_semigroup(cfg);
  CHECK(report.estimate == 2.5);
  CHECK(report.std_error == 0.0);
}

TEST_CASE("constant potential rescales every sample by exp(-cT) exactly") {
  const double c = 0.9;
  auto cfg0 = base_flat(1, 256);
  cfg0.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                          PayoffSpec::sin_first());
  auto cfgc = cfg0;
  cfgc.fields = FieldSpec(PotentialSpec::constant(c), DriftSpec::zero(),
                          PayoffSpec::sin_first(), c);

  const auto e0 = simulate_ensemble(cfg0);
  const auto ec = simulate_ensemble(cfgc);
  const double scale = std::exp(-c * cfg0.T);
  REQUIRE(e0.samples.size() == ec.samples.size());
  for (size_t i = 0; i < e0.samples.size(); ++i) {
    CHECK(ec.samples[i].fk_f ==
          doctest::Approx(scale * e0.samples[i].fk_f).epsilon(1e-13));
  }
  const auto r0 = estimate_semigroup(e0, cfg0);
  const auto rc = estimate_semigroup(ec, cfgc);
  CHECK(rc.estimate == doctest::Approx(scale * r0.estimate).epsilon(1e-13));
}

TEST_CASE("gradient of a constant payoff is zero within noise") {
  auto cfg = base_flat(1, 2000);
  cfg.estimators.gradient = true;
  const auto report = estimate_gradient(cfg);
  CHECK(report.kind == "gradient");
  CHECK(report.std_error > 0.0);
  CHECK(std::abs(report.estimate) < 4.0 * report.std_error);
  CHECK(report.std_error < 0.05);
}

TEST_CASE("estimators refuse aggregation they were not configured for") {
  auto cfg = base_flat(1, 8);  // only semigroup requested
  const auto ens = simulate_ensemble(cfg);
  CHECK_NOTHROW(estimate_semigroup(ens, cfg));
  CHECK_THROWS_AS(estimate_gradient(ens, cfg), EstimatorError);
  CHECK_THROWS_AS(estimate_generator(ens, cfg), EstimatorError);
  CHECK_THROWS_AS(estimate_hessian(ens, cfg), EstimatorError);
}

TEST_CASE("ensemble results are bit-identical across worker counts") {
  auto cfg = base_flat(2, 101);  // odd count exercises uneven chunking
  cfg.fields = FieldSpec(PotentialSpec::quadratic(0.3), DriftSpec::zero(),
                         PayoffSpec::gauss_bump(), 0.0);
  cfg.estimators.gradient = true;

  const auto e1 = simulate_ensemble(cfg, 1);
  const auto e3 = simulate_ensemble(cfg, 3);
  const auto e7 = simulate_ensemble(cfg, 7);

  const auto r1 = estimate_gradient(e1, cfg);
  const auto r3 = estimate_gradient(e3, cfg);
  const auto r7 = estimate_gradient(e7, cfg);
  CHECK(r1.estimate == r3.estimate);
  CHECK(r1.estimate == r7.estimate);
  CHECK(r1.std_error == r3.std_error);
  CHECK(r1.std_error == r7.std_error);

  const auto s1 = estimate_semigroup(e1, cfg);
  const auto s7 = estimate_semigroup(e7, cfg);
  CHECK(s1.estimate == s7.estimate);
}

TEST_CASE("flat heat gradient matches the closed form at a small budget") {
  auto cfg = base_flat(1, 4000);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::sin_first());
  cfg.estimators.gradient = true;
  const auto report = estimate_gradient(cfg);
  const double truth = std::exp(-0.5);  // d/dx P_1 sin at x = 0
  CHECK(std::abs(report.estimate - truth) < 4.0 * report.std_error);
  // dB term carries everything when V = 0.
  bool found_dv = false;
  for (const auto& [name, value] : report.term_breakdown)
    if (name == "dv_term") {
      found_dv = true;
      CHECK(value == 0.0);
    }
  CHECK(found_dv);
}

TEST_CASE("generator estimate matches -1/2 sin at a small budget") {
  auto cfg = base_flat(1, 6000);
  cfg.x0 = vec1(M_PI / 2.0);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::sin_first());
  cfg.estimators = EstimatorSet{};
  cfg.estimators.generator = true;
  cfg.k = Schedule::generator_k_default(cfg.T);
  cfg.l = Schedule::generator_l_default(cfg.T);
  const auto report = estimate_generator(cfg);
  const double truth = -0.5 * std::exp(-0.5);
  CHECK(std::abs(report.estimate - truth) < 4.0 * report.std_error);
}

TEST_CASE("hessian estimate matches the OU closed form at a small budget") {
  // d²/dx² P_1(x²) for OU(λ=1) is 2e^{−2T}.
  auto cfg = base_flat(1, 6000);
  cfg.x0 = vec1(1.0);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::ou(1.0),
                         PayoffSpec::quadratic());
  cfg.estimators = EstimatorSet{};
  cfg.estimators.hessian = true;
  cfg.k = Schedule::generator_k_default(cfg.T);
  cfg.l = Schedule::generator_l_default(cfg.T);
  const auto report = estimate_hessian(cfg);
  const double truth = 2.0 * std::exp(-2.0);
  CHECK(std::abs(report.estimate - truth) < 4.0 * report.std_error);
}

TEST_CASE("failed paths are excluded and counted") {
  // Drift pushes half the initial points out of a narrow chart; here instead
  // every path has the same config, so build failure via the v_min guard on a
  // potential that dips negative along the path: V = −x² with declared bound
  // −0.5 fails exactly on paths that wander past |x| > √0.5 by the end.
  PotentialSpec pot;
  pot.kind = PotentialKind::Custom;
  pot.value = [](double, const Vec& x) { return -x.squaredNorm(); };
  pot.gradient = [](double, const Vec& x, Vec& out) { out = -2.0 * x; };
  pot.hessian = [](double, const Vec& x, Mat& out) {
    out = -2.0 * Mat::Identity(x.size(), x.size());
  };
  auto cfg = base_flat(1, 400);
  cfg.fields = FieldSpec(pot, DriftSpec::zero(), PayoffSpec::one(), -0.5);
  const auto ens = simulate_ensemble(cfg);
  REQUIRE(ens.n_failed > 0);
  REQUIRE(ens.n_failed < 400);
  CHECK(!ens.first_failure.empty());
  const auto report = estimate_semigroup(ens, cfg);
  CHECK(report.n_paths_failed == ens.n_failed);
  CHECK(report.n_paths_used == 400 - ens.n_failed);
  // Weights stay finite and the estimate is a mean over survivors only.
  CHECK(std::isfinite(report.estimate));

  // If every path fails, aggregation refuses.
  auto all_fail = cfg;
  all_fail.fields = FieldSpec(PotentialSpec::constant(-1.0), DriftSpec::zero(),
                              PayoffSpec::one(), 0.0);
  const auto dead = simulate_ensemble(all_fail);
  CHECK(dead.n_failed == 400);
  CHECK_THROWS_AS(estimate_semigroup(dead, all_fail), EstimatorError);
}

TEST_CASE("martingale drift check: flat heat solution is drift-free") {
  auto cfg = base_flat(1, 3000);
  cfg.fields = FieldSpec(PotentialSpec::zero(), DriftSpec::zero(),
                         PayoffSpec::sin_first());
  cfg.estimators.gradient = true;

  const auto model = cfg.model;
  const auto oc = oracle_lookup(model, cfg.fields, OracleQuantity::Gradient);
  REQUIRE(oc.has_value());
  REQUIRE(oc->solution_value);
  const double T = cfg.T;
  PathSolution sol;
  sol.value = [oc, T](double t, const Vec& x) {
    return oc->solution_value(T, t, x);
  };
  sol.gradient = [oc, T](double t, const Vec& x, Vec& out) {
    oc->solution_gradient(T, t, x, out);
  };

  const auto reports =
      martingale_drift_check(cfg, {0.25, 0.5, 0.75}, sol, 2);
  REQUIRE(reports.size() == 3);
  // At any checkpoint the mean equals dP_T f(v) = e^{−1/2} (x0 = 0).
  const double truth = std::exp(-0.5);
  for (const auto& r : reports) {
    CHECK(r.kind == "martingale_drift");
    CHECK(std::abs(r.estimate - truth) < 4.0 * r.std_error);
  }
  CHECK(reports[0].checkpoint == doctest::Approx(0.25));
  CHECK(reports[1].checkpoint == doctest::Approx(0.5));
  CHECK(reports[2].checkpoint == doctest::Approx(0.75));
  // Pairwise agreement between checkpoints (the martingale property).
  for (size_t i = 1; i < reports.size(); ++i) {
    const double se = std::hypot(reports[i].std_error, reports[0].std_error);
    CHECK(std::abs(reports[i].estimate - reports[0].estimate) < 4.0 * se);
  }
}

TEST_CASE("martingale drift check validates its inputs") {
  auto cfg = base_flat(1, 10);
  cfg.estimators.gradient = true;
  PathSolution sol;  // null callbacks
  CHECK_THROWS_AS(martingale_drift_check(cfg, {0.5}, sol), EstimatorError);

  sol.value = [](double, const Vec&) { return 1.0; };
  sol.gradient = [](double, const Vec& x, Vec& out) {
    out = Vec::Zero(x.size());
  };
  CHECK_THROWS_AS(martingale_drift_check(cfg, {}, sol), EstimatorError);
  // Checkpoints must lie on the time grid within dt/2.
  CHECK_NOTHROW(martingale_drift_check(cfg, {0.5}, sol));
}

TEST_CASE("report echoes the run configuration") {
  auto cfg = base_flat(2, 16);
  cfg.seed = 99;
  const auto report = estimate_semigroup(cfg);
  CHECK(report.T == cfg.T);
  CHECK(report.dt == cfg.dt);
  CHECK(report.seed == 99);
  CHECK(report.model_summary.find("euclidean") != std::string::npos);
  CHECK(report.schedule_k_id == cfg.k.id());
  CHECK(report.schedule_l_id == cfg.l.id());
}
