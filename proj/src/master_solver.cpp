#include "kimura_mfg/master_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

int PicardReport::max_iterations() const {
  return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
}

MasterSolution solve_master(const ModelSpec& spec, const SimplexGrid& grid_in,
                            const MasterOptions& opt) {
  spec.validate();
  if (grid_in.d != spec.d) throw InvalidInput("master solver: grid dimension differs from model");
  if (!(opt.picard_tol > 0.0) || opt.picard_max < 1) {
    throw InvalidInput("master solver: bad Picard settings");
  }
  auto grid = std::make_shared<const SimplexGrid>(grid_in);
  const int d = spec.d;
  const int M = step_count(spec.T, opt.dt);
  const std::size_t N = grid->size();
  KimuraStepper stepper(grid, spec.eps, opt.dt);

  MasterSolution sol;
  sol.spec = spec;
  sol.dt = opt.dt;
  sol.U.grid = grid;
  sol.U.components = d;
  for (int n = 0; n <= M; ++n) sol.U.times.push_back(n * opt.dt);
  sol.U.values.assign(static_cast<std::size_t>(M + 1) * N * d, 0.0);
  sol.report.iterations.assign(M, 0);
  sol.report.last_change.assign(M, 0.0);

  // Node-major d-vectors.
  std::vector<Vec> next(N, Vec(d)), terminal(N, Vec(d));
  for (std::size_t k = 0; k < N; ++k) {
    for (int i = 0; i < d; ++i) {
      terminal[k][i] = spec.g.eval(spec.T, i, grid->nodes[k]);
      sol.U.at(M, k, i) = terminal[k][i];
    }
  }
  next = terminal;

  std::vector<Vec> lag(N), cur(N, Vec(d));
  std::vector<std::vector<Vec>> B(d, std::vector<Vec>(N));
  std::vector<Vec> F(d, Vec(N));
  std::vector<Vec> unext(d, Vec(N));
  for (int n = M - 1; n >= 0; --n) {
    const double t = n * opt.dt;
    switch (opt.lag_init) {
      case LagInit::Previous: lag = next; break;
      case LagInit::Zero: lag.assign(N, Vec(d, 0.0)); break;
      case LagInit::Terminal: lag = terminal; break;
    }
    for (int i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < N; ++k) unext[i][k] = next[k][i];
    }
    std::vector<double> history;
    bool converged = false;
    for (int it = 1; it <= opt.picard_max; ++it) {
      parallel_for(static_cast<std::size_t>(d), [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        for (std::size_t k = 0; k < N; ++k) {
          CoefficientsBF c = coefficients_BF(t, grid->nodes[k], lag[k], i, spec);
          B[i][k] = std::move(c.B);
          F[i][k] = c.F;
        }
        stepper.check_cfl(B[i]);
        const Vec u = stepper.step(unext[i], B[i], F[i]);
        for (std::size_t k = 0; k < N; ++k) cur[k][i] = u[k];
      });
      double change = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        for (int i = 0; i < d; ++i) {
          if (!std::isfinite(cur[k][i])) throw NumericalFailure("master solver produced a non-finite value");
          change = std::max(change, std::abs(cur[k][i] - lag[k][i]));
        }
      }
      history.push_back(change);
      lag = cur;
      if (change < opt.picard_tol) {
        sol.report.iterations[n] = it;
        sol.report.last_change[n] = change;
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream os;
      os << "Picard iteration did not converge at t = " << t << " after " << opt.picard_max
         << " sweeps (last change " << history.back() << ")";
      throw PicardFailure(os.str(), history);
    }
    next = lag;
    for (std::size_t k = 0; k < N; ++k) {
      for (int i = 0; i < d; ++i) sol.U.at(n, k, i) = next[k][i];
    }
  }
  return sol;
}

namespace {

struct TimeWeights {
  std::size_t n0, n1;
  double w0, w1;
};

TimeWeights time_weights(const MasterSolution& sol, double t) {
  const double T = sol.spec.T;
  if (!(t >= -1e-12 && t <= T + 1e-12)) throw InvalidInput("evaluation time outside [0, T]");
  const std::size_t M = sol.U.n_times() - 1;
  const double s = std::clamp(t, 0.0, T) / sol.dt;
  std::size_t n = static_cast<std::size_t>(std::floor(s));
  if (n >= M) n = M - 1;
  const double th = std::clamp(s - static_cast<double>(n), 0.0, 1.0);
  return {n, n + 1, 1.0 - th, th};
}

}  // namespace

Vec eval_U(const MasterSolution& sol, double t, const SimplexPoint& p) {
  const TimeWeights tw = time_weights(sol, t);
  const Element e = locate(sol.grid(), p);
  const int d = sol.spec.d;
  Vec u(d, 0.0);
  for (int v = 0; v < e.count; ++v) {
    for (int i = 0; i < d; ++i) {
      u[i] += e.weight[v] *
              (tw.w0 * sol.U.at(tw.n0, e.node[v], i) + tw.w1 * sol.U.at(tw.n1, e.node[v], i));
    }
  }
  return u;
}

Vec intrinsic_derivative(const MasterSolution& sol, double t, const SimplexPoint& p, int i) {
  const TimeWeights tw = time_weights(sol, t);
  const Element e = locate(sol.grid(), p);
  const int d = sol.spec.d;
  Vec g(d, 0.0);
  for (int c = 0; c + 1 < d; ++c) {
    for (int v = 0; v < e.count; ++v) {
      const double val =
          tw.w0 * sol.U.at(tw.n0, e.node[v], i) + tw.w1 * sol.U.at(tw.n1, e.node[v], i);
      g[c] += e.grad_coef[c][v] * val;
    }
  }
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= d;
  for (double& v : g) v -= mean;
  return g;
}

double eval_V(const MasterSolution& sol, double t, const SimplexPoint& p, int i, int j, int k) {
  if (j == k) throw InvalidInput("eval_V requires j != k");
  const double w = p[j] * p[k];
  if (w <= 0.0) return 0.0;
  const Vec D = intrinsic_derivative(sol, t, p, i);
  return sol.spec.eps / std::sqrt(2.0) * (D[j] - D[k]) * std::sqrt(w);
}

ResidualReport residual(const MasterSolution& sol) {
  const SimplexGrid& g = sol.grid();
  const int d = sol.spec.d;
  const std::size_t N = g.size();
  const std::size_t M = sol.U.n_times() - 1;
  KimuraStepper stepper(sol.U.grid, sol.spec.eps, sol.dt);
  ResidualReport r;
  r.field.assign(M * N * d, 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < M; ++n) {
    const double t = static_cast<double>(n) * sol.dt;
    std::vector<Vec> un(d), diff(d);
    for (int i = 0; i < d; ++i) {
      un[i] = sol.U.slice(n, i);
      stepper.apply_diffusion(un[i], diff[i]);
    }
    for (std::size_t k = 0; k < N; ++k) {
      if (g.boundary[k]) continue;
      Vec y(d);
      for (int i = 0; i < d; ++i) y[i] = un[i][k];
      for (int i = 0; i < d; ++i) {
        const CoefficientsBF c = coefficients_BF(t, g.nodes[k], y, i, sol.spec);
        double transport = 0.0;
        for (int j = 0; j + 1 < d; ++j) {
          const auto up = g.shift(k, j, d - 1);
          const auto dn = g.shift(k, d - 1, j);
          transport += c.B[j] * (un[i][up] - un[i][dn]) / (2.0 * g.h);
        }
        const double val = (sol.U.at(n + 1, k, i) - un[i][k]) / sol.dt + c.F + transport +
                           diff[i][k];
        r.field[(n * N + k) * d + i] = val;
        r.sup = std::max(r.sup, std::abs(val));
        total += std::abs(val);
        ++count;
      }
    }
  }
  r.mean = count ? total / static_cast<double>(count) : 0.0;
  return r;
}

}  // namespace kmfg
