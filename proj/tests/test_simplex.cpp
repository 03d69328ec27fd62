#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/rng.hpp"
#include "kimura_mfg/simplex.hpp"

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
}  // namespace

TEST_CASE("simplex point validation") {
  CHECK(to_simplex_point({0.5, 0.5}) == SimplexPoint{0.5, 0.5});
  const SimplexPoint clipped = to_simplex_point({-1e-15, 1.0});
  CHECK(clipped[0] == 0.0);
  CHECK_THROWS_AS(to_simplex_point({-1e-3, 1.001}), InvalidInput);
  CHECK_THROWS_AS(to_simplex_point({0.5, 0.6}), InvalidInput);
  CHECK_THROWS_AS(to_simplex_point({NAN, 1.0}), InvalidInput);
  CHECK(is_interior({0.2, 0.8}));
  CHECK_FALSE(is_interior({0.0, 1.0}));
}

TEST_CASE("local chart round trip") {
  Stream s(1, 0, 0);
  for (int d : {2, 3, 5}) {
    for (int drop = 0; drop < d; ++drop) {
      LocalChart chart(d, drop);
      const SimplexPoint p = random_point(s, d);
      const SimplexPoint q = chart.from_local(chart.to_local(p));
      for (int i = 0; i < d; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("projection onto the simplex") {
  CHECK(project_to_simplex({0.5, 0.5}) == SimplexPoint{0.5, 0.5});
  const SimplexPoint v = project_to_simplex({2.0, 0.0});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  const SimplexPoint b = project_to_simplex({0.6, 0.6, 0.6});
  for (double x : b) CHECK(x == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("Wright-Fisher distance") {
  CHECK(wf_distance({0.3, 0.7}, {0.3, 0.7}) == 0.0);
  // |sqrt .25 - sqrt .81| + |sqrt .75 - sqrt .19|, evaluated separately to 0.8301355.
  CHECK(wf_distance({0.25, 0.75}, {0.81, 0.19}) == doctest::Approx(0.8301355).epsilon(1e-7));
  Stream s(2, 0, 0);
  for (int k = 0; k < 1000; ++k) {
    const auto p = random_point(s, 3), q = random_point(s, 3), r = random_point(s, 3);
    CHECK(wf_distance(p, r) <= wf_distance(p, q) + wf_distance(q, r) + 1e-15);
  }
}

TEST_CASE("diffusion matrix") {
  const Eigen::MatrixXd a = diffusion_matrix({0.5, 0.5}, 1.0);
  CHECK(a(0, 0) == doctest::Approx(0.25));
  CHECK(a(0, 1) == doctest::Approx(-0.25));
  CHECK(a(1, 1) == doctest::Approx(0.25));
  CHECK(diffusion_matrix({1.0, 0.0, 0.0}, 0.7).cwiseAbs().maxCoeff() == 0.0);
  // Positive on the tangent space at interior points.
  Stream s(3, 0, 0);
  for (int k = 0; k < 500; ++k) {
    const SimplexPoint p = random_point(s, 4);
    Eigen::VectorXd xi(4);
    for (int i = 0; i < 4; ++i) xi[i] = s.normal();
    xi.array() -= xi.mean();
    CHECK(xi.dot(diffusion_matrix(p, 0.5) * xi) > 0.0);
  }
}

TEST_CASE("grids") {
  const SimplexGrid g2 = build_grid(2, 4);
  REQUIRE(g2.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(g2.nodes[k][0] == doctest::Approx(0.25 * k));
  const SimplexGrid g3 = build_grid(3, 2);
  CHECK(g3.size() == 6);
  CHECK(build_grid(3, 10).size() == 66);
  for (const auto& p : build_grid(3, 7).nodes) CHECK(on_simplex(p));
  CHECK_THROWS_AS(build_grid(4, 3), UnsupportedDimension);
  // Boundary flags match zero coordinates.
  for (std::size_t k = 0; k < g3.size(); ++k) {
    bool zero = false;
    for (double x : g3.nodes[k]) zero = zero || x == 0.0;
    CHECK(static_cast<bool>(g3.boundary[k]) == zero);
  }
  std::ostringstream os;
  write_grid_csv(os, g2);
  CHECK(os.str().find("node_id") != std::string::npos);
}

TEST_CASE("grid shifts stay on the lattice") {
  const SimplexGrid g = build_grid(3, 6);
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (int j = 0; j < 3; ++j) {
      for (int l = 0; l < 3; ++l) {
        if (j == l) continue;
        const std::ptrdiff_t m = g.shift(k, j, l);
        if (m < 0) {
          CHECK(g.nodes[k][l] < g.h / 2);
          continue;
        }
        CHECK(g.nodes[m][j] == doctest::Approx(g.nodes[k][j] + g.h));
        CHECK(g.nodes[m][l] == doctest::Approx(g.nodes[k][l] - g.h));
      }
    }
  }
}

TEST_CASE("piecewise-linear location reproduces affine functions") {
  Stream s(4, 0, 0);
  for (int d : {2, 3}) {
    const SimplexGrid g = build_grid(d, 9);
    for (int k = 0; k < 200; ++k) {
      const SimplexPoint p = random_point(s, d);
      const Element e = locate(g, p);
      double wsum = 0, f = 0;
      for (int v = 0; v < e.count; ++v) {
        CHECK(e.weight[v] >= -1e-12);
        wsum += e.weight[v];
        const auto& q = g.nodes[e.node[v]];
        f += e.weight[v] * (0.3 + 2.0 * q[0] - q[d - 1]);
      }
      CHECK(wsum == doctest::Approx(1.0));
      CHECK(f == doctest::Approx(0.3 + 2.0 * p[0] - p[d - 1]));
      // Hat-chart gradient of x1 is e_1.
      double g0 = 0;
      for (int v = 0; v < e.count; ++v) g0 += e.grad_coef[0][v] * g.nodes[e.node[v]][0];
      CHECK(g0 == doctest::Approx(1.0));
    }
  }
}
