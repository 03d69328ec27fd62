#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/particle_system.hpp"

using namespace kmfg;

namespace {
FeedbackStrategy unit_rates(int d) {
  RateMatrix r(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) r(i, j) = i == j ? 0.0 : 1.0;
  return FeedbackStrategy::constant(r);
}

double total(const Vec& v) { return std::accumulate(v.begin(), v.end(), 0.0); }
}  // namespace

TEST_CASE("ensembles and empirical measures") {
  const ParticleEnsemble one = make_ensemble(3, {0, 0, 0});
  const SimplexPoint e1 = empirical_measure(one);
  CHECK(e1 == SimplexPoint{1.0, 0.0, 0.0});

  ParticleEnsemble two = make_ensemble(2, {0, 1});
  two.Y = {2.0, 0.0};
  const SimplexPoint a = empirical_measure(two);
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == doctest::Approx(0.0));
  two.Y = {1.0, 2.0};
  const SimplexPoint b = empirical_measure(two);
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(1.0));

  const ParticleEnsemble s = stratified_ensemble(3, 10, {0.25, 0.25, 0.5});
  const SimplexPoint mu = empirical_measure(s);
  CHECK(total(mu) == doctest::Approx(1.0));
  CHECK(mu[2] == doctest::Approx(0.5));
  CHECK(std::is_sorted(s.X.begin(), s.X.end()));

  CHECK_THROWS_AS(make_ensemble(2, {0, 2}), InvalidInput);
}

TEST_CASE("transition matrices") {
  const RateMatrix A = transition_matrix(unit_rates(3), 0.0, {0.2, 0.3, 0.5}, 10);
  for (int i = 0; i < 3; ++i) {
    double row = 0.0;
    for (int j = 0; j < 3; ++j) row += A(i, j);
    CHECK(row == doctest::Approx(1.0));
    CHECK(A(i, i) == doctest::Approx(0.8));
  }
  CHECK(transition_quantile(A, 0, 0.0) == 0);
  CHECK(transition_quantile(A, 0, 0.85) == 1);
  CHECK(transition_quantile(A, 0, 0.95) == 2);
  CHECK_THROWS(transition_matrix(unit_rates(3), 0.0, {0.2, 0.3, 0.5}, 1));
}

TEST_CASE("multinomial counts") {
  const std::vector<int> S = multinomial_counts({0.25, 0.75}, {0.1, 0.3, 0.6, 0.9});
  CHECK(S == std::vector<int>{1, 3});
  const std::vector<int> skip = multinomial_counts({0.5, 0.0, 0.5}, {0.1, 0.5, 0.99});
  CHECK(skip[1] == 0);
  CHECK(skip[0] + skip[2] == 3);
}

TEST_CASE("noise limits of the particle step") {
  const ParticleSeeds seeds = ParticleSeeds::from_seed(11);
  SUBCASE("eps = 0 keeps masses at one") {
    const ParticleTrajectory tr =
        run_particles(stratified_ensemble(3, 50, {0.2, 0.3, 0.5}), unit_rates(3), 0.0, 200, seeds, 0, true);
    for (const Vec& y : tr.Y)
      for (double v : y) CHECK(v == 1.0);
    for (const StepRecord& st : tr.steps) CHECK_FALSE(st.coin);
  }
  SUBCASE("eps = 1 freezes positions") {
    const ParticleEnsemble start = stratified_ensemble(3, 50, {0.2, 0.3, 0.5});
    const ParticleTrajectory tr = run_particles(start, unit_rates(3), 1.0, 200, seeds, 0, true);
    for (const auto& x : tr.X) CHECK(x == start.X);
  }
  SUBCASE("total mass stays N") {
    const std::size_t N = 40;
    const ParticleTrajectory tr =
        run_particles(stratified_ensemble(2, N, {0.4, 0.6}), unit_rates(2), 0.5, 10000, seeds, 3, true);
    CHECK(total(tr.Y.back()) == doctest::Approx(static_cast<double>(N)).epsilon(1e-9));
    for (const SimplexPoint& mu : tr.mu) CHECK(total(mu) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("conditional mass") {
  const SimplexPoint mu{0.25, 0.75};
  const Vec Q{0.4, 0.6};
  const Vec same = conditional_mass_step(Q, mu, FeedbackStrategy::zero(), 0.0, false, {}, 20);
  CHECK(same == Q);
  const Vec moved = conditional_mass_step(Q, mu, unit_rates(2), 0.0, false, {}, 20);
  CHECK(total(moved) == doctest::Approx(1.0));

  // On the resampling branch the total is preserved in mean.
  const std::size_t N = 20;
  const std::size_t reps = 10000;
  std::vector<double> sums(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Stream rng(5, r, 0);
    std::vector<double> V(N);
    for (double& v : V) v = rng.uniform();
    sums[r] = total(conditional_mass_step(Q, mu, unit_rates(2), 0.0, true, multinomial_counts(mu, V), N));
  }
  const MeanSe m = mean_se(sums);
  CHECK(std::abs(m.mean - 1.0) <= 3 * m.se);
}

TEST_CASE("discrete cost") {
  const std::size_t N = 10;
  const std::vector<int> X{0, 1, 1, 0};
  const Vec Y{1.0, 1.5, 0.5, 2.0};
  const std::vector<SimplexPoint> mu(4, SimplexPoint{0.5, 0.5});
  const double terminal = discrete_cost(X, Y, mu, CostFamily::constant({0, 0}),
                                        CostFamily::constant({3, 3}), FeedbackStrategy::zero(), N);
  CHECK(terminal == doctest::Approx(6.0));
  const double running = discrete_cost(X, Vec(4, 1.0), mu, CostFamily::constant({1, 1}),
                                       CostFamily::constant({0, 0}), FeedbackStrategy::zero(), N);
  CHECK(running == doctest::Approx(0.3));
  CHECK_THROWS_AS(discrete_cost(X, Vec(3, 1.0), mu, CostFamily::constant({1, 1}),
                                CostFamily::constant({0, 0}), FeedbackStrategy::zero(), N),
                  InvalidInput);
}

TEST_CASE("particle drift") {
  RateMatrix r(2);
  r(0, 1) = 1.0;
  r(1, 0) = 1.0;
  const Vec a = particle_drift({0.3, 0.7}, r);
  CHECK(a[0] == doctest::Approx(0.4));
  CHECK(a[1] == doctest::Approx(-0.4));
}

TEST_CASE("one-step moments") {
  const ParticleEnsemble ens = stratified_ensemble(3, 200, {0.2, 0.3, 0.5});
  const MomentDiagnostics still = moment_diagnostics(ens, FeedbackStrategy::zero(), 0.0, 2000, 12);
  for (const MeanSe& m : still.mean_observed) CHECK(m.mean == 0.0);
  const MomentDiagnostics resample = moment_diagnostics(ens, unit_rates(3), 1.0, 20000, 12);
  for (double e : resample.mean_expected) CHECK(e == 0.0);
  CHECK(resample.cov_expected[0] == doctest::Approx(0.2 * 0.8 / 200));
  CHECK(resample.max_abs_z <= 4.0);
  const MomentDiagnostics mixed = moment_diagnostics(ens, unit_rates(3), 0.5, 20000, 12);
  CHECK(mixed.max_abs_z <= 4.0);
}

TEST_CASE("convergence table") {
  ConvergenceSetup setup;
  setup.eps_particle = 0.0;
  setup.T = 0.2;
  setup.p0 = {0.4, 0.6};
  setup.N_list = {50, 200};
  setup.n_paths = 300;
  setup.sde_dt = 1e-3;
  setup.sde_paths = 300;
  const ConvergenceTable tab = convergence_study(unit_rates(2), setup, 13);
  CHECK(tab.rows.size() == 8);
  CHECK(tab.worst.size() == 2);
  for (const ConvergenceRow& row : tab.rows) CHECK(std::isfinite(row.gap));
}
