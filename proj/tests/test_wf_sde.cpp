#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"
#include "kimura_mfg/wf_sde.hpp"

using namespace kmfg;

namespace {
ModelSpec spec(int d, double eps = 0.5, double kappa = 2.0) {
  ModelSpec s;
  s.d = d;
  s.eps = eps;
  s.kappa = kappa;
  s.delta = 0.1;
  s.T = 1.0;
  s.f = CostFamily::constant(Vec(d, 0.0));
  s.g = CostFamily::constant(Vec(d, 0.0));
  return s;
}
}  // namespace

TEST_CASE("step counts") {
  CHECK(step_count(1.0, 1e-3) == 1000);
  CHECK_THROWS_AS(step_count(1.0, 0.3), InvalidInput);
  CHECK_THROWS_AS(step_count(1.0, -0.1), InvalidInput);
}

TEST_CASE("noise increments") {
  Stream s(1, 0, 0);
  const NoiseIncrement one = draw_increments(1, 0.1, s);
  CHECK(one(0, 0) == 0.0);
  const double dt = 1e-3;
  const int n = 100000;
  double s2 = 0, s4 = 0;
  for (int k = 0; k < n; ++k) {
    Stream r(2, k, 0);
    const NoiseIncrement w = draw_increments(3, dt, r);
    for (int i = 0; i < 3; ++i) {
      CHECK(w(i, i) == 0.0);
      for (int j = 0; j < 3; ++j) CHECK(w(i, j) == -w(j, i));
    }
    s2 += w(0, 1) * w(0, 1);
    s4 += std::pow(w(0, 1), 4);
  }
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / n);
  CHECK(std::abs(var - dt) <= 3 * se);
}

TEST_CASE("deterministic steps") {
  const ModelSpec s = spec(2, 0.0, 2.0);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const NoiseIncrement zero(2);
  const SimplexPoint p = step_P({0.5, 0.5}, 0.0, zero, FeedbackStrategy::zero(), s, cfg);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  const SimplexPoint v = step_P({0.0, 1.0}, 0.0, zero, FeedbackStrategy::zero(), s, cfg);
  CHECK(v[0] == doctest::Approx(2.0 * 1e-3));
  CHECK(v[1] == doctest::Approx(1.0 - 2.0 * 1e-3));
}

TEST_CASE("mass is conserved exactly") {
  // No forcing and a coarse step so the clip fires.
  const ModelSpec s = spec(3, 1.0, 0.0);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  RateMatrix r(3);
  r(0, 1) = 1.0;
  r(2, 0) = 0.5;
  const FeedbackStrategy alpha = FeedbackStrategy::constant(r);
  SimplexPoint p{0.2, 0.3, 0.5};
  NoiseIncrement dw(3);
  ClipStats stats;
  double worst = 0.0;
  for (int n = 0; n < 1000000; ++n) {
    Stream rng(3, 0, static_cast<std::uint32_t>(n));
    draw_increments(dw, cfg.dt, rng);
    p = step_P(p, 0.0, dw, alpha, s, cfg, &stats);
    worst = std::max(worst, std::abs(p[0] + p[1] + p[2] - 1.0));
    for (double x : p) REQUIRE(x >= 0.0);
  }
  CHECK(worst <= 1e-15);
  CHECK(stats.clip_events > 0);
}

TEST_CASE("mass-conserving clip") {
  SimplexPoint p{-0.01, 0.41, 0.6};
  ClipStats st;
  mass_conserving_clip(p, &st);
  CHECK(p[0] == 0.0);
  CHECK(p[2] == doctest::Approx(0.59));
  CHECK(p[0] + p[1] + p[2] == 1.0);
  CHECK(st.clip_events == 1);
}

TEST_CASE("tagged player equal to the crowd") {
  const ModelSpec s = spec(3);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  RateMatrix r(3);
  r(0, 1) = 0.4;
  r(1, 2) = 0.9;
  const FeedbackStrategy alpha = FeedbackStrategy::constant(r);
  const SimplexPoint p{0.2, 0.3, 0.5};
  Stream rng(4, 0, 0);
  const NoiseIncrement dw = draw_increments(3, cfg.dt, rng);
  const SimplexPoint pn = step_P(p, 0.0, dw, alpha, s, cfg);
  const Vec qn = step_Q(p, p, 0.0, dw, alpha, s, cfg);
  for (int i = 0; i < 3; ++i) CHECK(qn[i] == doctest::Approx(pn[i]).epsilon(1e-13));
}

TEST_CASE("Q is frozen without noise, control and forcing") {
  ModelSpec s = spec(3, 0.0, 2.0);
  s.delta = 0.05;
  SchemeConfig cfg;
  const Vec q{0.1, 0.6, 0.3};
  const Vec qn = step_Q(q, {0.3, 0.3, 0.4}, 0.0, NoiseIncrement(3), FeedbackStrategy::zero(), s, cfg);
  for (int i = 0; i < 3; ++i) CHECK(qn[i] == doctest::Approx(q[i]).epsilon(1e-15));
  CHECK_THROWS_AS(step_Q(q, {0.0, 0.5, 0.5}, 0.0, NoiseIncrement(3), FeedbackStrategy::zero(), s, cfg),
                  BoundaryGuard);
}

TEST_CASE("expected tagged mass stays one") {
  const ModelSpec s = spec(3);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  RateMatrix r(3);
  r(1, 0) = 1.0;
  r(2, 1) = 0.5;
  const FeedbackStrategy beta = FeedbackStrategy::constant(r);
  SimulateOptions so;
  so.beta = &beta;
  so.q0 = {1.0, 0.0, 0.0};
  so.store_stride = 500;
  const PathBundle b = simulate(s, FeedbackStrategy::zero(), {0.3, 0.3, 0.4}, 10000, cfg, 5, so);
  std::vector<double> mass;
  for (const auto& q : b.Q) mass.push_back(q[1][0] + q[1][1] + q[1][2]);
  REQUIRE(b.times[1] == doctest::Approx(0.5));
  const MeanSe m = mean_se(mass);
  CHECK(std::abs(m.mean - 1.0) <= 3 * m.se);
}

TEST_CASE("path bundles") {
  const ModelSpec s = spec(2);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  const PathBundle empty = simulate(s, FeedbackStrategy::zero(), {0.3, 0.7}, 0, cfg, 1);
  CHECK(empty.n_paths() == 0);
  const PathBundle b = simulate(s, FeedbackStrategy::zero(), {0.3, 0.7}, 500, cfg, 1);
  double m0 = 0, m1 = 0;
  for (const auto& path : b.P) {
    m0 += path.back()[0];
    m1 += path.back()[1];
  }
  CHECK(m0 / 500 >= 0.0);
  CHECK(m1 / 500 >= 0.0);
  CHECK((m0 + m1) / 500 == doctest::Approx(1.0));
}

TEST_CASE("simulation does not depend on the worker count") {
  const ModelSpec s = spec(3);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  set_thread_cap(1);
  std::ostringstream a, b;
  write_paths_csv(a, simulate(s, FeedbackStrategy::zero(), {0.2, 0.3, 0.5}, 37, cfg, 9));
  set_thread_cap(4);
  write_paths_csv(b, simulate(s, FeedbackStrategy::zero(), {0.2, 0.3, 0.5}, 37, cfg, 9));
  set_thread_cap(0);
  CHECK(a.str() == b.str());
}

TEST_CASE("Monte Carlo cost oracles") {
  ModelSpec s = spec(2);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  const FeedbackStrategy zero = FeedbackStrategy::zero();
  s.g = CostFamily::constant({1.7, 1.7});
  const MeanSe c = mc_cost(s, zero, zero, 0, {0.4, 0.6}, 4000, cfg, 3);
  CHECK(std::abs(c.mean - 1.7) <= 3 * c.se + 1e-12);

  s.g = CostFamily::constant({0, 0});
  s.f = CostFamily::constant({1, 1});
  const MeanSe t = mc_cost(s, zero, zero, 1, {0.4, 0.6}, 4000, cfg, 3);
  CHECK(std::abs(t.mean - s.T) <= 3 * t.se + 1e-12);

  // Shifting g by c moves each path by c sum_i Q_T^i, whose mean is c.
  s.f = CostFamily::linear({0, 0}, {{1, 0}, {0, -1}});
  s.g = CostFamily::linear({0, 0}, {{0, 1}, {1, 0}});
  const auto base = mc_cost_paths(s, zero, zero, 0, {0.4, 0.6}, 4000, cfg, 8);
  ModelSpec shifted = s;
  shifted.g = s.g.shifted(2.0);
  const auto moved = mc_cost_paths(shifted, zero, zero, 0, {0.4, 0.6}, 4000, cfg, 8);
  std::vector<double> diff(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    diff[k] = moved[k] - base[k];
    CHECK(diff[k] >= 0.0);
  }
  const MeanSe d = mean_se(diff);
  CHECK(std::abs(d.mean - 2.0) <= 3 * d.se);
}

TEST_CASE("exponential moments") {
  const ModelSpec s = spec(2, 0.5, 2.0);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  SimulateOptions so;
  so.store_stride = 1000;
  const PathBundle b = simulate(s, FeedbackStrategy::zero(), {0.2, 0.8}, 200, cfg, 4, so);
  const ExpMomentResult tiny = exp_moment_estimate(b, 1e-9, s);
  for (const MeanSe& m : tiny.per_coordinate) CHECK(m.mean == doctest::Approx(1.0).epsilon(1e-6));
  const ExpMomentResult one = exp_moment_estimate(b, 1.0, s);
  for (const MeanSe& m : one.per_coordinate) CHECK(std::isfinite(m.mean));
  CHECK_FALSE(one.diagnostic_only);
}
