#include <doctest.h>

#include <cmath>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/model.hpp"
#include "kimura_mfg/rng.hpp"

using namespace kmfg;

namespace {
SimplexPoint random_point(Stream& s, int d) {
  SimplexPoint p(d);
  double sum = 0;
  for (double& x : p) {
    x = -std::log(s.uniform_pos());
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

ModelSpec spec3() {
  ModelSpec s;
  s.d = 3;
  s.eps = 0.5;
  s.kappa = 2.0;
  s.delta = 0.1;
  s.f = CostFamily::quadratic({0.1, 0.2, 0.3}, {{1, 0, 0}, {0, -1, 0.5}, {0.2, 0, 0}},
                              {{0, 1, 0}, {0, 0, 0}, {1, 0, 1}});
  s.g = CostFamily::constant({0, 0, 0});
  return s;
}
}  // namespace

TEST_CASE("forcing profile") {
  CHECK(phi_eval(0.04, 2, 0.1) == 2.0);
  CHECK(phi_eval(0.25, 2, 0.1) == 0.0);
  CHECK(phi_eval(0.15, 2, 0.1) == doctest::Approx(1.0));
  CHECK(phi_eval(0.1, 2, 0.1) == 2.0);
  CHECK(phi_eval(0.2, 2, 0.1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(phi_eval(-0.1, 2, 0.1), InvalidInput);
}

TEST_CASE("hamiltonian and optimal rate") {
  CHECK(hamiltonian({0, 0, 0}, 0) == 0.0);
  CHECK(hamiltonian({1, 0}, 0) == -0.5);
  CHECK(hamiltonian({2, 1, 0}, 0) == -2.5);
  CHECK(optimal_rate({1, 0}, 0, 1) == 1.0);
  CHECK(optimal_rate({0, 1}, 0, 1) == 0.0);
  // Brute-force minimisation of -b (y_i - y_j) + b^2 / 2 over b >= 0.
  Stream s(11, 0, 0);
  for (int k = 0; k < 100; ++k) {
    const Vec y = {2 * s.uniform() - 1, 2 * s.uniform() - 1};
    double best = 0, best_val = 0;
    for (int m = 0; m <= 20000; ++m) {
      const double b = 1e-4 * m;
      const double v = -b * (y[0] - y[1]) + 0.5 * b * b;
      if (v < best_val) {
        best_val = v;
        best = b;
      }
    }
    CHECK(std::abs(optimal_rate(y, 0, 1) - best) <= 1e-4);
  }
}

TEST_CASE("drift is zero-sum and vanishes at the symmetric point") {
  ModelSpec s;
  s.d = 2;
  s.kappa = 2;
  s.delta = 0.1;
  const Vec a = drift_a(0.0, {0.5, 0.5}, FeedbackStrategy::zero(), s);
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.0);
  const ModelSpec s3 = spec3();
  Stream rng(12, 0, 0);
  for (int k = 0; k < 1000; ++k) {
    const SimplexPoint p = random_point(rng, 3);
    RateMatrix r(3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i != j) r(i, j) = 3 * rng.uniform();
      }
    }
    const Vec v = drift_a(p, r, s3);
    CHECK(std::abs(v[0] + v[1] + v[2]) <= 1e-15);
  }
  // At a vertex the forcing pushes mass into the empty states.
  const Vec v = drift_a(0.0, {0.0, 1.0}, FeedbackStrategy::zero(), s);
  CHECK(v[0] == doctest::Approx(2.0));
}

TEST_CASE("master coefficients") {
  ModelSpec s;
  s.d = 2;
  s.eps = 0.5;
  s.kappa = 2;
  s.delta = 0.1;
  s.f = CostFamily::constant({0, 0});
  const CoefficientsBF c = coefficients_BF(0.0, {0.5, 0.5}, {0, 0}, 0, s);
  CHECK(c.B[0] == doctest::Approx(0.125));
  CHECK(c.B[1] == doctest::Approx(-0.125));
  CHECK(c.F == 0.0);

  const ModelSpec s3 = spec3();
  Stream rng(13, 0, 0);
  for (int k = 0; k < 1000; ++k) {
    const SimplexPoint p = random_point(rng, 3);
    const Vec y = {rng.normal(), rng.normal(), rng.normal()};
    for (int i = 0; i < 3; ++i) {
      const CoefficientsBF bf = coefficients_BF(0.3, p, y, i, s3);
      CHECK(std::abs(bf.B[0] + bf.B[1] + bf.B[2]) <= 1e-13);
      const CoefficientsBF flat = coefficients_BF(0.3, p, {y[0], y[0], y[0]}, i, s3);
      CHECK(flat.F == doctest::Approx(s3.f.eval(0.3, i, p)));
    }
  }
}

TEST_CASE("validation") {
  ModelSpec s;
  CHECK_NOTHROW(s.validate());
  s.eps = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  ValidationOptions vo;
  vo.allow_zero_noise = true;
  CHECK_NOTHROW(s.validate(vo));
  s.eps = 0.5;
  s.delta = 0.2;  // 1 / (4 sqrt 2) = 0.177
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.delta = 0.1;
  s.kappa = 0.1;  // below eps^2 / 2: a warning, not an error
  const auto warn = s.validate();
  CHECK(warn.size() == 3);
  s.kappa = 20.0;
  CHECK(s.validate().empty());
  s.f = CostFamily::constant({0, 0, 0});
  CHECK_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("model json round trip") {
  ModelSpec s = spec3();
  s.g = CostFamily::constant({1, 2, 3}).shifted(0.5);
  const ModelSpec t = ModelSpec::from_json(s.to_json());
  CHECK(t.to_json() == s.to_json());
  const SimplexPoint p{0.2, 0.3, 0.5};
  for (int i = 0; i < 3; ++i) {
    CHECK(t.f.eval(0.1, i, p) == s.f.eval(0.1, i, p));
    CHECK(t.g.eval(0.1, i, p) == s.g.eval(0.1, i, p));
  }
  CHECK_THROWS_AS(ModelSpec::from_json(nlohmann::json::array()), InvalidInput);
}

TEST_CASE("cost families") {
  const CostFamily a = CostFamily::anti_monotone_pair(2.0);
  CHECK(a.eval(0, 0, {0.3, 0.7}) == doctest::Approx(0.4));
  CHECK(a.eval(0, 1, {0.3, 0.7}) == doctest::Approx(-0.4));
  CHECK_THROWS_AS(a.check_dimension(3), InvalidInput);
  // A tabulated copy of an affine cost interpolates it exactly.
  const SimplexGrid g = build_grid(3, 5);
  std::vector<Vec> values;
  for (const auto& p : g.nodes) values.push_back({p[0], 1 + p[1], 2 * p[2]});
  const CostFamily tab = CostFamily::tabulated(3, 5, values);
  const SimplexPoint p{0.21, 0.33, 0.46};
  CHECK(tab.eval(0, 0, p) == doctest::Approx(0.21));
  CHECK(tab.eval(0, 1, p) == doctest::Approx(1.33));
  CHECK(tab.eval(0, 2, p) == doctest::Approx(0.92));
}

TEST_CASE("feedback strategies") {
  RateMatrix r(2);
  r(0, 1) = 0.7;
  const FeedbackStrategy c = FeedbackStrategy::constant(r);
  CHECK(c.rate(0, 0, {0.5, 0.5}, 1) == 0.7);
  CHECK(c.rate(0, 1, {0.5, 0.5}, 0) == 0.0);
  RateMatrix out(2);
  FeedbackStrategy::zero().rates(0, {0.5, 0.5}, out);
  CHECK(out(0, 1) == 0.0);
  CHECK(FeedbackStrategy::zero().is_zero());
}
