#include "kimura_mfg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>

#include "kimura_mfg/errors.hpp"

namespace kmfg {

SimplexPoint to_simplex_point(Vec w) {
  if (w.empty()) throw InvalidInput("simplex point must have at least one entry");
  double s = 0.0;
  for (double& v : w) {
    if (!std::isfinite(v)) throw InvalidInput("simplex point has a non-finite entry");
    if (v < 0.0) {
      if (v < -kRoundoffClip) {
        throw InvalidInput("simplex point has a negative entry: " + std::to_string(v));
      }
      v = 0.0;
    }
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexSumTol) {
    throw InvalidInput("simplex point entries sum to " + std::to_string(s));
  }
  return w;
}

bool on_simplex(const Vec& p, double tol) {
  if (p.empty()) return false;
  double s = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

bool is_interior(const SimplexPoint& p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0; });
}

LocalChart::LocalChart(int d, int dropped_index) : d_(d), dropped_(dropped_index) {
  if (d < 1 || dropped_index < 0 || dropped_index >= d) {
    throw InvalidInput("local chart: dropped index out of range");
  }
}

Vec LocalChart::to_local(const SimplexPoint& p) const {
  if (static_cast<int>(p.size()) != d_) throw InvalidInput("local chart: dimension mismatch");
  Vec x;
  x.reserve(d_ - 1);
  for (int i = 0; i < d_; ++i) {
    if (i != dropped_) x.push_back(p[i]);
  }
  return x;
}

SimplexPoint LocalChart::from_local(const Vec& x) const {
  if (static_cast<int>(x.size()) != d_ - 1) {
    throw InvalidInput("local chart: dimension mismatch");
  }
  SimplexPoint p(d_);
  double s = 0.0;
  for (int i = 0, c = 0; i < d_; ++i) {
    if (i == dropped_) continue;
    p[i] = x[c++];
    s += p[i];
  }
  p[dropped_] = 1.0 - s;
  return p;
}

SimplexPoint project_to_simplex(const Vec& v) {
  if (v.empty()) throw InvalidInput("project_to_simplex: empty input");
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput("project_to_simplex: non-finite input");
  }
  Vec u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  SimplexPoint p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = std::max(v[i] - theta, 0.0);
  return p;
}

double wf_distance(const SimplexPoint& p, const SimplexPoint& q) {
  if (p.size() != q.size()) throw InvalidInput("wf_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += std::abs(std::sqrt(std::max(p[i], 0.0)) - std::sqrt(std::max(q[i], 0.0)));
  }
  return s;
}

Eigen::MatrixXd diffusion_matrix(const SimplexPoint& p, double eps) {
  const auto d = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd a(d, d);
  const double e2 = eps * eps;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      a(i, j) = e2 * ((i == j ? p[i] : 0.0) - p[i] * p[j]);
    }
  }
  return a;
}

std::ptrdiff_t SimplexGrid::index_of(const std::array<int, 3>& k) const {
  if (d == 2) {
    if (k[0] < 0 || k[1] < 0 || k[0] + k[1] != n) return -1;
    return k[0];
  }
  if (k[0] < 0 || k[1] < 0 || k[2] < 0 || k[0] + k[1] + k[2] != n) return -1;
  const std::ptrdiff_t a = k[0];
  return a * (n + 1) - a * (a - 1) / 2 + k[1];
}

std::ptrdiff_t SimplexGrid::shift(std::size_t node, int j, int k) const {
  std::array<int, 3> c = counts[node];
  c[j] += 1;
  c[k] -= 1;
  return index_of(c);
}

SimplexGrid build_grid(int d, int n) {
  if (d != 2 && d != 3) {
    throw UnsupportedDimension("grids are available for d = 2 and d = 3 only");
  }
  if (n < 2) throw InvalidInput("grid resolution must be at least 2");
  SimplexGrid g;
  g.d = d;
  g.n = n;
  g.h = 1.0 / n;
  auto add = [&](std::array<int, 3> k) {
    SimplexPoint p(d);
    double s = 0.0;
    for (int i = 0; i + 1 < d; ++i) {
      p[i] = static_cast<double>(k[i]) / n;
      s += p[i];
    }
    p[d - 1] = 1.0 - s;
    if (k[d - 1] == 0) p[d - 1] = 0.0;
    bool b = false;
    for (int i = 0; i < d; ++i) b = b || k[i] == 0;
    g.counts.push_back(k);
    g.nodes.push_back(std::move(p));
    g.boundary.push_back(b ? 1 : 0);
  };
  if (d == 2) {
    for (int a = 0; a <= n; ++a) add({a, n - a, 0});
  } else {
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) add({a, b, n - a - b});
    }
  }
  return g;
}

void write_grid_csv(std::ostream& os, const SimplexGrid& grid) {
  os << "node_id";
  for (int i = 1; i <= grid.d; ++i) os << ",p_" << i;
  os << ",is_boundary\n";
  char buf[64];
  for (std::size_t id = 0; id < grid.size(); ++id) {
    os << id;
    for (double v : grid.nodes[id]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    os << ',' << (grid.boundary[id] ? 1 : 0) << '\n';
  }
}

Element locate(const SimplexGrid& grid, const SimplexPoint& p) {
  if (static_cast<int>(p.size()) != grid.d) throw InvalidInput("locate: dimension mismatch");
  const int n = grid.n;
  const double fn = static_cast<double>(n);
  Element e;
  if (grid.d == 2) {
    const double s = std::clamp(p[0], 0.0, 1.0) * fn;
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
    const double f = std::clamp(s - i, 0.0, 1.0);
    e.count = 2;
    e.node = {static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), 0};
    e.weight = {1.0 - f, f, 0.0};
    e.grad_coef[0] = {-fn, fn, 0.0};
    return e;
  }
  const double s = std::clamp(p[0], 0.0, 1.0) * fn;
  const double r = std::clamp(p[1], 0.0, 1.0) * fn;
  const int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
  const int j = std::clamp(static_cast<int>(std::floor(r)), 0, n - 1 - i);
  const double fs = s - i;
  const double fr = r - j;
  e.count = 3;
  auto id = [&](int a, int b) {
    return static_cast<std::size_t>(grid.index_of({a, b, n - a - b}));
  };
  if (fs + fr <= 1.0 || i + j + 2 > n) {
    double w1 = std::clamp(fs, 0.0, 1.0);
    double w2 = std::clamp(fr, 0.0, 1.0);
    if (w1 + w2 > 1.0) {
      const double t = w1 + w2;
      w1 /= t;
      w2 /= t;
    }
    e.node = {id(i, j), id(i + 1, j), id(i, j + 1)};
    e.weight = {1.0 - w1 - w2, w1, w2};
    e.grad_coef[0] = {-fn, fn, 0.0};
    e.grad_coef[1] = {-fn, 0.0, fn};
  } else {
    e.node = {id(i + 1, j + 1), id(i + 1, j), id(i, j + 1)};
    e.weight = {fs + fr - 1.0, 1.0 - fr, 1.0 - fs};
    e.grad_coef[0] = {fn, 0.0, -fn};
    e.grad_coef[1] = {fn, -fn, 0.0};
  }
  return e;
}

}  // namespace kmfg
