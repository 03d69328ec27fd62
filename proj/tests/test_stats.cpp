#include <doctest.h>

#include <cmath>

#include "kimura_mfg/stats.hpp"

using namespace kmfg;

TEST_CASE("mean and standard error") {
  const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  // Sample sd sqrt(5/3), divided by sqrt(4).
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(m.n == 4);
}

TEST_CASE("variance estimate") {
  const MeanSe v = variance_se({1.0, 2.0, 3.0, 4.0});
  CHECK(v.mean == doctest::Approx(5.0 / 3.0));
  CHECK(v.se > 0.0);
  const MeanSe c = variance_se({2.0, 2.0, 2.0});
  CHECK(c.mean == 0.0);
  CHECK(c.se == 0.0);
}

TEST_CASE("z score") {
  CHECK(z_score(1.0, 0.0, 1.0, 0.0) == 0.0);
  CHECK(z_score(1.0, 0.3, 0.0, 0.4) == doctest::Approx(2.0));
  CHECK(z_score(0.0, 0.3, 1.0, 0.4) == doctest::Approx(-2.0));
}

TEST_CASE("line fit recovers an exact line") {
  const LineFit f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
}
