#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/mfg_system.hpp"

using namespace kmfg;

namespace {
ModelSpec instance() {
  ModelSpec s;
  s.d = 2;
  s.eps = 0.5;
  s.kappa = 2.0;
  s.delta = 0.1;
  s.T = 1.0;
  s.f = CostFamily::constant({0, 0});
  s.g = CostFamily::constant({0, 0});
  return s;
}

ModelSpec anti_monotone() {
  ModelSpec s = instance();
  s.kappa = 61 * 0.25;
  s.delta = 0.05;
  s.f = CostFamily::anti_monotone_pair(2.0);
  return s;
}

MasterSolution solve(const ModelSpec& s, int n = 50, double dt = 1e-3) {
  MasterOptions mo;
  mo.dt = dt;
  return solve_master(s, build_grid(s.d, n), mo);
}
}  // namespace

TEST_CASE("constant costs give the uncontrolled dynamics") {
  ModelSpec s = instance();
  s.g = CostFamily::constant({2, 2});
  const MasterSolution sol = solve(s);
  const FeedbackStrategy fb = master_feedback(sol);
  RateMatrix r(2);
  fb.rates(0.3, {0.4, 0.6}, r);
  CHECK(r(0, 1) == 0.0);
  CHECK(r(1, 0) == 0.0);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  const EquilibriumPaths eq = simulate_equilibrium(sol, {0.4, 0.6}, 20, cfg, 3);
  const PathBundle direct = simulate(s, FeedbackStrategy::zero(), {0.4, 0.6}, 20, cfg, 3);
  for (std::size_t k = 0; k < 20; ++k) CHECK(eq.paths.P[k].back() == direct.P[k].back());
}

TEST_CASE("stored values meet the terminal cost") {
  ModelSpec s = instance();
  s.g = CostFamily::linear({0.1, -0.2}, {{1, 0}, {0.5, -1}});
  const MasterSolution sol = solve(s);
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  const EquilibriumPaths eq = simulate_equilibrium(sol, {0.3, 0.7}, 50, cfg, 4);
  for (std::size_t k = 0; k < 50; ++k) {
    const SimplexPoint& pT = eq.paths.P[k].back();
    for (int i = 0; i < 2; ++i) CHECK(eq.u[k].back()[i] == doctest::Approx(s.g.eval(1.0, i, pT)).epsilon(1e-10));
  }
}

TEST_CASE("equilibrium runs are reproducible") {
  const MasterSolution sol = solve(anti_monotone());
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  std::ostringstream a, b;
  write_paths_csv(a, simulate_equilibrium(sol, {0.3, 0.7}, 30, cfg, 5).paths);
  write_paths_csv(b, simulate_equilibrium(sol, {0.3, 0.7}, 30, cfg, 5).paths);
  CHECK(a.str() == b.str());
}

TEST_CASE("value oracles") {
  SchemeConfig cfg;
  cfg.dt = 1e-2;
  ModelSpec s = instance();
  s.g = CostFamily::constant({0.7, 0.7});
  const ValueCheck c = verify_value(solve(s), {0.3, 0.7}, 1, 2000, cfg, 6);
  CHECK(c.master_value == doctest::Approx(0.7));
  CHECK(std::abs(c.z) <= 3.0);
  s.g = CostFamily::constant({0, 0});
  s.f = CostFamily::constant({1, 1});
  const ValueCheck t = verify_value(solve(s), {0.3, 0.7}, 0, 2000, cfg, 6);
  CHECK(t.master_value == doctest::Approx(1.0));
  CHECK(std::abs(t.z) <= 3.0);
}

TEST_CASE("suboptimality probes") {
  const MasterSolution sol = solve(anti_monotone());
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const ProbeResult same = suboptimality_probe(sol, {0.3, 0.7}, 0, master_feedback(sol), 500, cfg, 7);
  CHECK(same.gap.mean == 0.0);
  const ProbeResult zero = suboptimality_probe(sol, {0.3, 0.7}, 0, FeedbackStrategy::zero(), 2000, cfg, 7);
  CHECK(zero.gap.mean > 3 * zero.gap.se);
  const FeedbackStrategy star = master_feedback(sol);
  const FeedbackStrategy bumped(
      [&star](double t, const SimplexPoint& p, RateMatrix& r) {
        star.rates(t, p, r);
        r(0, 1) += 1.0;
      },
      star.sup_bound() + 1.0);
  const ProbeResult plus = suboptimality_probe(sol, {0.3, 0.7}, 0, bumped, 2000, cfg, 7);
  CHECK(plus.gap.mean > 3 * plus.gap.se);
}

TEST_CASE("zero-noise equilibria") {
  ModelSpec s = instance();
  s.eps = 0.0;
  s.kappa = 0.1;
  s.delta = 0.05;
  std::vector<double> guesses;
  for (int k = 0; k <= 10; ++k) guesses.push_back(k / 10.0);
  s.g = CostFamily::anti_monotone_pair(2.0);
  const ZeroNoiseReport anti = zero_noise_equilibria(s, {0.5, 0.5}, guesses);
  CHECK(anti.equilibria.size() == 3);
  for (const auto& run : anti.runs) CHECK(run.converged);
  s.g = CostFamily::linear({-1, -1}, {{2, 0}, {0, 2}});
  CHECK(zero_noise_equilibria(s, {0.5, 0.5}, guesses).equilibria.size() == 1);
  s.g = CostFamily::anti_monotone_pair(2.0);
  s.T = 0.01;
  CHECK(zero_noise_equilibria(s, {0.5, 0.5}, guesses).equilibria.size() == 1);
  const auto j = to_json(anti);
  CHECK(j["n_equilibria"] == 3);

  s.eps = 0.5;
  CHECK_THROWS_AS(zero_noise_equilibria(s, {0.5, 0.5}, guesses), InvalidInput);
}
