#include "kimura_mfg/kimura_pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/stats.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

Vec FieldOnGrid::slice(std::size_t tn, int c) const {
  Vec u(n_nodes());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = at(tn, k, c);
  return u;
}

void FieldOnGrid::set_slice(std::size_t tn, int c, const Vec& u) {
  for (std::size_t k = 0; k < u.size(); ++k) at(tn, k, c) = u[k];
}

void write_field_csv(std::ostream& os, const FieldOnGrid& f, int component) {
  os << "t,node_id,value\n";
  char buf[96];
  for (std::size_t tn = 0; tn < f.n_times(); ++tn) {
    for (std::size_t k = 0; k < f.n_nodes(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g\n", f.times[tn], k, f.at(tn, k, component));
      os << buf;
    }
  }
}

namespace {

// Stencil directions as (plus index, minus index) in full coordinates.
constexpr int kDirs3[3][2] = {{0, 2}, {1, 2}, {0, 1}};

template <class Emit>
void for_each_transport_pair(const SimplexGrid& g, std::size_t node, const Vec& B, Emit&& emit) {
  const int d = g.d;
  std::array<double, 3> pos{}, neg{};
  for (int j = 0; j < d; ++j) {
    pos[j] = std::max(B[j], 0.0);
    neg[j] = std::max(-B[j], 0.0);
  }
  int k = 0;
  for (int j = 0; j < d; ++j) {
    while (pos[j] > 0.0 && k < d) {
      if (neg[k] <= 0.0) {
        ++k;
        continue;
      }
      const double w = std::min(pos[j], neg[k]);
      pos[j] -= w;
      neg[k] -= w;
      const std::ptrdiff_t nb = g.shift(node, j, k);
      if (nb < 0) {
        if (B[k] < -1e-12) {
          std::ostringstream os;
          os << "transport points out of the simplex at node " << node;
          throw NumericalFailure(os.str());
        }
      } else {
        emit(static_cast<std::size_t>(nb), w);
      }
      if (neg[k] <= 0.0) ++k;
    }
  }
}

}  // namespace

KimuraStepper::KimuraStepper(std::shared_ptr<const SimplexGrid> grid, double eps, double dt)
    : grid_(std::move(grid)), eps_(eps), dt_(dt) {
  const SimplexGrid& g = *grid_;
  if (g.d != 2 && g.d != 3) throw UnsupportedDimension("Kimura stepper supports d = 2, 3");
  if (!(dt > 0.0)) throw InvalidInput("time step must be positive");
  const double scale = 0.5 * eps * eps / (g.h * g.h);
  const std::size_t N = g.size();
  diff_coef_.assign(N, {0.0, 0.0, 0.0});
  diff_nb_.assign(N, {-1, -1, -1, -1, -1, -1});
  for (std::size_t k = 0; k < N; ++k) {
    const SimplexPoint& p = g.nodes[k];
    if (g.d == 2) {
      const double c = scale * p[0] * p[1];
      if (c > 0.0) {
        diff_coef_[k][0] = c;
        diff_nb_[k][0] = g.shift(k, 0, 1);
        diff_nb_[k][1] = g.shift(k, 1, 0);
      }
    } else {
      for (int dir = 0; dir < 3; ++dir) {
        const int a = kDirs3[dir][0], b = kDirs3[dir][1];
        const double c = scale * p[a] * p[b];
        if (c > 0.0) {
          diff_coef_[k][dir] = c;
          diff_nb_[k][2 * dir] = g.shift(k, a, b);
          diff_nb_[k][2 * dir + 1] = g.shift(k, b, a);
        }
      }
    }
  }
  if (g.d == 2) {
    // Tridiagonal I - dt L_diff; node k couples to k +- 1.
    thomas_c_.assign(N, 0.0);
    thomas_m_.assign(N, 1.0);
    double prev_c = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double c = dt * diff_coef_[k][0];
      const double lower = k > 0 ? -c : 0.0;
      const double diag = 1.0 + 2.0 * c;
      const double upper = k + 1 < N ? -c : 0.0;
      const double m = diag - lower * prev_c;
      thomas_m_[k] = m;
      thomas_c_[k] = upper / m;
      prev_c = thomas_c_[k];
    }
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t k = 0; k < N; ++k) {
      double diag = 1.0;
      for (int dir = 0; dir < 3; ++dir) {
        const double c = dt * diff_coef_[k][dir];
        if (c == 0.0) continue;
        diag += 2.0 * c;
        trip.emplace_back(k, diff_nb_[k][2 * dir], -c);
        trip.emplace_back(k, diff_nb_[k][2 * dir + 1], -c);
      }
      trip.emplace_back(k, k, diag);
    }
    implicit_.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    implicit_.setFromTriplets(trip.begin(), trip.end());
    implicit_.makeCompressed();
  }
}

void KimuraStepper::check_cfl(const std::vector<Vec>& B) const {
  double worst = 0.0;
  for (const Vec& b : B) {
    double s = 0.0;
    for (double v : b) s += std::max(v, 0.0);
    worst = std::max(worst, s);
  }
  if (dt_ * worst > grid_->h) {
    const double suggested = 0.9 * grid_->h / worst;
    std::ostringstream os;
    os << "CFL violation: dt * max drift = " << dt_ * worst << " exceeds h = " << grid_->h
       << "; suggested dt <= " << suggested;
    throw CflViolation(os.str(), suggested);
  }
}

void KimuraStepper::apply_transport(const std::vector<Vec>& B, const Vec& u, Vec& out) const {
  const SimplexGrid& g = *grid_;
  out.assign(g.size(), 0.0);
  const double inv_h = 1.0 / g.h;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double s = 0.0;
    for_each_transport_pair(g, k, B[k], [&](std::size_t nb, double w) {
      s += w * (u[nb] - u[k]);
    });
    out[k] = s * inv_h;
  }
}

void KimuraStepper::apply_diffusion(const Vec& u, Vec& out) const {
  const std::size_t N = grid_->size();
  out.assign(N, 0.0);
  const int dirs = grid_->d == 2 ? 1 : 3;
  for (std::size_t k = 0; k < N; ++k) {
    double s = 0.0;
    for (int dir = 0; dir < dirs; ++dir) {
      const double c = diff_coef_[k][dir];
      if (c == 0.0) continue;
      s += c * (u[diff_nb_[k][2 * dir]] + u[diff_nb_[k][2 * dir + 1]] - 2.0 * u[k]);
    }
    out[k] = s;
  }
}

void KimuraStepper::solve_implicit(const Vec& rhs, Vec& x) const {
  const std::size_t N = rhs.size();
  x.assign(N, 0.0);
  if (grid_->d == 2) {
    Vec y(N);
    double prev = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double lower = k > 0 ? -dt_ * diff_coef_[k][0] : 0.0;
      y[k] = (rhs[k] - lower * prev) / thomas_m_[k];
      prev = y[k];
    }
    x[N - 1] = y[N - 1];
    for (std::size_t k = N - 1; k-- > 0;) x[k] = y[k] - thomas_c_[k] * x[k + 1];
    return;
  }
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(N));
  if (b.lpNorm<Eigen::Infinity>() == 0.0) return;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::DiagonalPreconditioner<double>>
      solver;
  solver.setTolerance(1e-10);
  solver.compute(implicit_);
  Eigen::VectorXd sol = solver.solve(b);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("implicit diffusion solve did not converge");
  }
  for (std::size_t k = 0; k < N; ++k) x[k] = sol[static_cast<Eigen::Index>(k)];
}

Vec KimuraStepper::step(const Vec& u_next, const std::vector<Vec>& B, const Vec& source) const {
  const std::size_t N = grid_->size();
  Vec tr;
  apply_transport(B, u_next, tr);
  Vec rhs(N);
  for (std::size_t k = 0; k < N; ++k) rhs[k] = u_next[k] + dt_ * (tr[k] + source[k]);
  // Solve for the correction so that constants pass through exactly.
  Vec lrhs;
  apply_diffusion(rhs, lrhs);
  for (double& v : lrhs) v *= dt_;
  Vec corr;
  solve_implicit(lrhs, corr);
  for (std::size_t k = 0; k < N; ++k) rhs[k] += corr[k];
  return rhs;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> assemble_local_operator(const SimplexGrid& grid,
                                                                     double eps,
                                                                     const std::vector<Vec>& B) {
  if (grid.d != 2 && grid.d != 3) throw UnsupportedDimension("operator supports d = 2, 3");
  if (B.size() != grid.size()) throw InvalidInput("one drift vector per node is required");
  const double scale = 0.5 * eps * eps / (grid.h * grid.h);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const SimplexPoint& p = grid.nodes[k];
    double diag = 0.0;
    auto add_dir = [&](int a, int b, double c) {
      if (c <= 0.0) return;
      trip.emplace_back(k, grid.shift(k, a, b), c);
      trip.emplace_back(k, grid.shift(k, b, a), c);
      diag -= 2.0 * c;
    };
    if (grid.d == 2) {
      add_dir(0, 1, scale * p[0] * p[1]);
    } else {
      for (const auto& dir : kDirs3) add_dir(dir[0], dir[1], scale * p[dir[0]] * p[dir[1]]);
    }
    for_each_transport_pair(grid, k, B[k], [&](std::size_t nb, double w) {
      trip.emplace_back(k, nb, w / grid.h);
      diag -= w / grid.h;
    });
    trip.emplace_back(k, k, diag);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Eigen::Index>(grid.size()),
                                                 static_cast<Eigen::Index>(grid.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

LinearKimuraProblem LinearKimuraProblem::from_parts(
    double eps, double T, double kappa, double delta,
    std::function<void(double, const SimplexPoint&, Vec&)> b,
    std::function<void(double, const SimplexPoint&, Vec&)> b0,
    std::function<double(double, const SimplexPoint&)> source,
    std::function<double(const SimplexPoint&)> terminal) {
  LinearKimuraProblem pr;
  pr.eps = eps;
  pr.T = T;
  pr.source = std::move(source);
  pr.terminal = std::move(terminal);
  pr.drift = [kappa, delta, b = std::move(b), b0 = std::move(b0)](double t, const SimplexPoint& p,
                                                                   Vec& out) {
    const std::size_t d = p.size();
    out.assign(d, 0.0);
    Vec tmp(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      out[j] = kappa > 0.0 ? phi_eval(std::max(p[j], 0.0), kappa, delta) : 0.0;
    }
    if (b) {
      b(t, p, tmp);
      for (std::size_t j = 0; j < d; ++j) out[j] += tmp[j];
    }
    if (b0) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      b0(t, p, tmp);
      for (std::size_t j = 0; j < d; ++j) out[j] += p[j] * tmp[j];
    }
  };
  return pr;
}

FieldOnGrid solve_linear(const LinearKimuraProblem& problem, const SimplexGrid& grid_in, double dt) {
  auto grid = std::make_shared<const SimplexGrid>(grid_in);
  const int M = step_count(problem.T, dt);
  KimuraStepper stepper(grid, problem.eps, dt);
  const std::size_t N = grid->size();
  FieldOnGrid f;
  f.grid = grid;
  f.components = 1;
  for (int n = 0; n <= M; ++n) f.times.push_back(n * dt);
  f.values.assign(static_cast<std::size_t>(M + 1) * N, 0.0);
  Vec u(N);
  for (std::size_t k = 0; k < N; ++k) u[k] = problem.terminal(grid->nodes[k]);
  f.set_slice(M, 0, u);
  std::vector<Vec> B(N);
  Vec src(N, 0.0);
  for (int n = M - 1; n >= 0; --n) {
    const double t = n * dt;
    for (std::size_t k = 0; k < N; ++k) {
      const SimplexPoint& p = grid->nodes[k];
      if (problem.drift) {
        problem.drift(t, p, B[k]);
      } else {
        B[k].assign(grid->d, 0.0);
      }
      double s = 0.0;
      for (double v : B[k]) s += v;
      if (std::abs(s) > 1e-10) {
        throw InvalidInput("linear Kimura problem: drift components must sum to zero");
      }
      src[k] = problem.source ? problem.source(t, p) : 0.0;
    }
    stepper.check_cfl(B);
    u = stepper.step(u, B, src);
    f.set_slice(n, 0, u);
  }
  return f;
}

HolderEstimate holder_estimate(const Vec& u, const SimplexGrid& grid) {
  HolderEstimate est;
  if (u.size() != grid.size()) throw InvalidInput("holder estimate: field size mismatch");
  const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
  if (*mx - *mn <= 1e-14) {
    est.unbounded = true;
    return est;
  }
  constexpr int kBins = 20;
  const double lo = grid.h;
  const double hi = 1.0;  // half the Wright-Fisher diameter of the simplex
  const double log_span = std::log(hi / lo);
  std::vector<double> best(kBins, 0.0);
  std::vector<Vec> roots(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (double v : grid.nodes[k]) roots[k].push_back(std::sqrt(v));
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      double dist = 0.0;
      for (int i = 0; i < grid.d; ++i) dist += std::abs(roots[a][i] - roots[b][i]);
      if (dist < lo * (1.0 - 1e-12) || dist > hi) continue;
      int bin = static_cast<int>(kBins * std::log(std::max(dist, lo) / lo) / log_span);
      bin = std::clamp(bin, 0, kBins - 1);
      best[bin] = std::max(best[bin], std::abs(u[a] - u[b]));
    }
  }
  std::vector<double> x, y;
  for (int b = 0; b < kBins; ++b) {
    if (best[b] <= 0.0) continue;
    const double center = lo * std::exp((b + 0.5) * log_span / kBins);
    x.push_back(std::log(center));
    y.push_back(std::log(best[b]));
  }
  est.bins_used = static_cast<int>(x.size());
  if (x.size() < 2) {
    est.unbounded = true;
    return est;
  }
  const LineFit fit = fit_line(x, y);
  est.exponent = fit.slope;
  est.constant = std::exp(fit.intercept);
  return est;
}

}  // namespace kmfg
