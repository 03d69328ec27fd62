#include <doctest.h>

#include <cmath>

#include "kimura_mfg/coupling_lab.hpp"
#include "kimura_mfg/errors.hpp"

using namespace kmfg;

namespace {
ModelSpec instance(int d) {
  ModelSpec s;
  s.d = d;
  s.eps = 0.5;
  s.kappa = 2.0;
  s.delta = 0.1;
  s.T = 1.0;
  s.f = CostFamily::constant(Vec(d, 0.0));
  s.g = CostFamily::constant(Vec(d, 0.0));
  return s;
}
}  // namespace

TEST_CASE("sigma") {
  CHECK(sigma_eval({}) == 1.0);
  CHECK(sigma_eval({0.19}) == doctest::Approx(0.9));
  CHECK(sigma_eval({0.5, 0.5}) == 0.0);
}

TEST_CASE("reflections") {
  const Eigen::MatrixXd R = reflection_matrix({0.7, 0.2}, {0.3, 0.2});
  CHECK(R(0, 0) == doctest::Approx(-1.0));
  CHECK(R(1, 1) == doctest::Approx(1.0));
  CHECK(R(0, 1) == doctest::Approx(0.0));
  Stream rng(1, 0, 0);
  for (int k = 0; k < 1000; ++k) {
    // Square roots of simplex points lie on the unit sphere.
    Vec p(3), q(3);
    double sp = 0, sq = 0;
    for (int i = 0; i < 3; ++i) {
      p[i] = rng.uniform_pos();
      q[i] = rng.uniform_pos();
      sp += p[i];
      sq += q[i];
    }
    Eigen::VectorXd pt(3), qt(3);
    for (int i = 0; i < 3; ++i) {
      pt[i] = std::sqrt(p[i] / sp);
      qt[i] = std::sqrt(q[i] / sq);
    }
    const Vec a(pt.data(), pt.data() + 3), b(qt.data(), qt.data() + 3);
    const Eigen::MatrixXd M = reflection_matrix(a, b);
    CHECK((M * M - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((M * qt - pt).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conditioning state") {
  const ConditioningState s = make_conditioning_state({0.2}, {0.25, 0.75});
  CHECK(s.sigma2() == doctest::Approx(0.8));
  const SimplexPoint x = s.reconstruct();
  CHECK(x[0] == doctest::Approx(0.2));
  CHECK(x[1] == doctest::Approx(0.2));
  CHECK(x[2] == doctest::Approx(0.6));
}

TEST_CASE("m = 0 reduces to the plain SDE step") {
  const ModelSpec s = instance(3);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const SimplexPoint p{0.2, 0.3, 0.5};
  Stream rng(2, 0, 0);
  const NoiseIncrement dw = draw_increments(3, cfg.dt, rng);
  const NoiseIncrement dwo(3);
  const ConditioningState c =
      step_conditioning(make_conditioning_state({}, p), 0.0, cfg.dt, dw, dwo, FeedbackStrategy::zero(), s);
  const SimplexPoint direct = step_P(p, 0.0, dw, FeedbackStrategy::zero(), s, cfg);
  for (int i = 0; i < 3; ++i) CHECK(c.p[i] == doctest::Approx(direct[i]).epsilon(1e-13));
}

TEST_CASE("coupled steps") {
  const ModelSpec s = instance(3);
  const double dt = 1e-3;
  // Identical members stay identical, tau fires at once.
  CoupledState same = make_coupled_state(make_conditioning_state({0.3}, {0.5, 0.5}),
                                         make_conditioning_state({0.3}, {0.5, 0.5}));
  CHECK(same.tau);
  CHECK(same.first == Trigger::Tau);
  for (int n = 0; n < 50; ++n) {
    Stream rng(3, 0, static_cast<std::uint32_t>(n));
    const NoiseIncrement dw = draw_increments(2, dt, rng);
    const NoiseIncrement dwo = draw_increments(3, dt, rng);
    step_coupled(same, dt, dw, dwo, rng.uniform(), FeedbackStrategy::zero(), s);
    for (double z : same.Z()) CHECK(z == 0.0);
  }
  // p-block sums stay one.
  CoupledState c = make_coupled_state(make_conditioning_state({0.3}, {0.55, 0.45}),
                                      make_conditioning_state({0.3}, {0.45, 0.55}));
  for (int n = 0; n < 200; ++n) {
    Stream rng(4, 0, static_cast<std::uint32_t>(n));
    const NoiseIncrement dw = draw_increments(2, dt, rng);
    const NoiseIncrement dwo = draw_increments(3, dt, rng);
    step_coupled(c, dt, dw, dwo, rng.uniform(), FeedbackStrategy::zero(), s);
    CHECK(std::abs(c.P.p[0] + c.P.p[1] - 1.0) <= 1e-15);
    CHECK(std::abs(c.Q.p[0] + c.Q.p[1] - 1.0) <= 1e-15);
  }
}

TEST_CASE("rotated noise") {
  const RotatedNoiseReport r = rotated_noise_check(100000, 3, 1e-3, 5);
  CHECK(r.antisymmetry_defect <= 1e-15);
  CHECK(r.max_variance_z <= 3.0);
  CHECK(r.max_covariance_z <= 3.0);
}

TEST_CASE("coupling experiments") {
  const ModelSpec s = instance(3);
  CouplingSetup setup;
  setup.po = {0.3};
  setup.qo = {0.3};
  setup.p = {0.5, 0.5};
  setup.q = {0.5, 0.5};
  setup.horizon = 0.1;
  setup.steps = 100;
  const CouplingResult r = coupling_experiment(s, FeedbackStrategy::zero(), setup, 200, 6);
  CHECK(r.failure == 0.0);
  CHECK(r.count_tau == 200);
  setup.p = {0.6, 0.4};
  setup.q = {0.5, 0.5};
  setup.qo = {0.3, 0.1};
  CHECK_THROWS_AS(coupling_experiment(s, FeedbackStrategy::zero(), setup, 10, 6), InvalidInput);
}

TEST_CASE("coupling sweep is isotone") {
  const ModelSpec s = instance(3);
  const CouplingSweep sw = coupling_sweep(s, FeedbackStrategy::zero(), 1, {0.3}, {0.5, 0.5},
                                          {0.016, 0.004, 0.001}, 500, 2000, 7);
  CHECK(sw.monotone);
  CHECK(sw.fit.slope > 0.0);
}

TEST_CASE("identity in law") {
  ModelSpec s = instance(3);
  s.delta = 0.14;
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  const IdentityInLawReport r =
      identity_in_law_check(s, FeedbackStrategy::zero(), 1, {0.3, 0.35, 0.35}, 4000, cfg, 8);
  for (const auto& row : r.rows) {
    if (row.t == 0.0) CHECK(row.z == 0.0);
  }
  CHECK(r.max_abs_z <= 3.0);
}
