#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace kmfg {

using Vec = std::vector<double>;

// A probability vector over d states. Indices are 0-based throughout the API.
using SimplexPoint = Vec;

inline constexpr double kSimplexSumTol = 1e-12;
inline constexpr double kRoundoffClip = 1e-14;

// Validates w as a simplex point. Entries in [-1e-14, 0) are clipped to 0;
// anything more negative, non-finite, or a sum off by more than 1e-12 throws
// InvalidInput.
SimplexPoint to_simplex_point(Vec w);

bool on_simplex(const Vec& p, double tol = kSimplexSumTol);
bool is_interior(const SimplexPoint& p);

// Drops one coordinate; the dropped one is rebuilt as 1 - (sum of the rest).
class LocalChart {
 public:
  LocalChart(int d, int dropped_index);

  Vec to_local(const SimplexPoint& p) const;
  SimplexPoint from_local(const Vec& x) const;

  int d() const { return d_; }
  int dropped_index() const { return dropped_; }

 private:
  int d_;
  int dropped_;
};

// Euclidean projection onto the simplex (sort-and-threshold).
SimplexPoint project_to_simplex(const Vec& v);

// sum_i |sqrt(p_i) - sqrt(q_i)|
double wf_distance(const SimplexPoint& p, const SimplexPoint& q);

// eps^2 (p_i delta_ij - p_i p_j)
Eigen::MatrixXd diffusion_matrix(const SimplexPoint& p, double eps);

// Regular lattice {k / n} on the simplex for d in {2, 3}. Node order is
// lexicographic in the hat coordinates (p_1, ..., p_{d-1}).
struct SimplexGrid {
  int d = 0;
  int n = 0;
  double h = 0.0;
  std::vector<std::array<int, 3>> counts;  // lattice counts, sum = n
  std::vector<SimplexPoint> nodes;
  std::vector<char> boundary;

  std::size_t size() const { return nodes.size(); }
  // Node id for lattice counts, or -1 when outside the simplex.
  std::ptrdiff_t index_of(const std::array<int, 3>& k) const;
  // Neighbour p + h (e_j - e_k), or -1 when it leaves the simplex.
  std::ptrdiff_t shift(std::size_t node, int j, int k) const;
};

SimplexGrid build_grid(int d, int n);

void write_grid_csv(std::ostream& os, const SimplexGrid& grid);

// Piecewise-linear element containing p: interval for d = 2, lattice triangle
// for d = 3. Weights are barycentric; grad_coef maps node values to the
// hat-coordinate gradient of the interpolant on that element.
struct Element {
  int count = 0;
  std::array<std::size_t, 3> node{};
  std::array<double, 3> weight{};
  // grad[c] = sum_v grad_coef[c][v] * u[node[v]] for hat coordinate c.
  std::array<std::array<double, 3>, 2> grad_coef{};
};

Element locate(const SimplexGrid& grid, const SimplexPoint& p);

}  // namespace kmfg
