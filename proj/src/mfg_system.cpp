#include "kimura_mfg/mfg_system.hpp"

#include <algorithm>
#include <cmath>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"

namespace kmfg {

FeedbackStrategy master_feedback(const MasterSolution& sol) {
  double sup = 0.0;
  for (double v : sol.U.values) sup = std::max(sup, std::abs(v));
  const MasterSolution* s = &sol;
  return FeedbackStrategy(
      [s](double t, const SimplexPoint& p, RateMatrix& out) {
        const Vec u = eval_U(*s, t, p);
        for (int i = 0; i < out.d; ++i) {
          for (int j = 0; j < out.d; ++j) out(i, j) = i == j ? 0.0 : std::max(u[i] - u[j], 0.0);
        }
      },
      2.0 * sup);
}

EquilibriumPaths simulate_equilibrium(const MasterSolution& sol, const SimplexPoint& p0,
                                      std::size_t n_paths, const SchemeConfig& cfg,
                                      std::uint64_t seed, int store_stride) {
  const FeedbackStrategy alpha = master_feedback(sol);
  SimulateOptions opt;
  opt.store_stride = store_stride;
  EquilibriumPaths out;
  out.paths = simulate(sol.spec, alpha, p0, n_paths, cfg, seed, opt);
  out.u.resize(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) {
    for (std::size_t n = 0; n < out.paths.times.size(); ++n) {
      out.u[k].push_back(eval_U(sol, out.paths.times[n], out.paths.P[k][n]));
    }
  }
  return out;
}

ValueCheck verify_value(const MasterSolution& sol, const SimplexPoint& p0, int l,
                        std::size_t n_paths, const SchemeConfig& cfg, std::uint64_t seed) {
  const FeedbackStrategy alpha = master_feedback(sol);
  ValueCheck v;
  v.estimate = mc_cost(sol.spec, alpha, alpha, l, p0, n_paths, cfg, seed);
  v.master_value = eval_U(sol, 0.0, p0)[l];
  v.gap = v.estimate.mean - v.master_value;
  v.z = v.estimate.se > 0.0 ? v.gap / v.estimate.se : (v.gap == 0.0 ? 0.0 : INFINITY);
  return v;
}

ProbeResult suboptimality_probe(const MasterSolution& sol, const SimplexPoint& p0, int l,
                                const FeedbackStrategy& beta_alt, std::size_t n_paths,
                                const SchemeConfig& cfg, std::uint64_t seed) {
  const FeedbackStrategy alpha = master_feedback(sol);
  const std::vector<double> opt = mc_cost_paths(sol.spec, alpha, alpha, l, p0, n_paths, cfg, seed);
  const std::vector<double> alt =
      mc_cost_paths(sol.spec, alpha, beta_alt, l, p0, n_paths, cfg, seed);
  std::vector<double> diff(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) diff[k] = alt[k] - opt[k];
  ProbeResult r;
  r.gap = mean_se(diff);
  r.z = r.gap.se > 0.0 ? r.gap.mean / r.gap.se : 0.0;
  return r;
}

namespace {

struct Sweep {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> flow;  // P^1 on the time grid
  std::vector<Vec> value;
};

void backward_values(const ModelSpec& spec, const std::vector<double>& flow, double dt,
                     std::vector<Vec>& u) {
  const int nt = static_cast<int>(flow.size()) - 1;
  u.assign(nt + 1, Vec(2));
  const SimplexPoint pT{flow[nt], 1.0 - flow[nt]};
  for (int i = 0; i < 2; ++i) u[nt][i] = spec.g.eval(spec.T, i, pT);
  for (int n = nt; n > 0; --n) {
    const SimplexPoint p{flow[n], 1.0 - flow[n]};
    for (int i = 0; i < 2; ++i) {
      u[n - 1][i] = u[n][i] + dt * coefficients_BF(n * dt, p, u[n], i, spec).F;
    }
  }
}

Sweep run_sweeps(const ModelSpec& spec, const SimplexPoint& p0, double guess,
                 const ZeroNoiseOptions& opt) {
  const int nt = opt.time_steps;
  const double dt = spec.T / nt;
  Sweep s;
  s.flow.resize(nt + 1);
  for (int n = 0; n <= nt; ++n) s.flow[n] = p0[0] + (guess - p0[0]) * n / nt;
  std::vector<double> next(nt + 1);
  RateMatrix rates(2);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    backward_values(spec, s.flow, dt, s.value);
    next[0] = p0[0];
    for (int n = 0; n < nt; ++n) {
      const SimplexPoint p{next[n], 1.0 - next[n]};
      const Vec& y = s.value[n];
      rates(0, 1) = std::max(y[0] - y[1], 0.0);
      rates(1, 0) = std::max(y[1] - y[0], 0.0);
      const Vec a = drift_a(p, rates, spec);
      next[n + 1] = std::clamp(next[n] + dt * a[0], 0.0, 1.0);
    }
    double change = 0.0;
    for (int n = 0; n <= nt; ++n) change = std::max(change, std::abs(next[n] - s.flow[n]));
    s.iterations = it;
    s.residual = change;
    if (!std::isfinite(change)) return s;
    if (change < opt.tol) {
      s.converged = true;
      return s;
    }
    for (int n = 0; n <= nt; ++n) {
      s.flow[n] = opt.damping * s.flow[n] + (1.0 - opt.damping) * next[n];
    }
  }
  backward_values(spec, s.flow, dt, s.value);
  return s;
}

}  // namespace

ZeroNoiseReport zero_noise_equilibria(const ModelSpec& spec, const SimplexPoint& p0_in,
                                      const std::vector<double>& guesses,
                                      const ZeroNoiseOptions& opt) {
  ValidationOptions vo;
  vo.allow_zero_noise = true;
  spec.validate(vo);
  if (spec.d != 2) throw UnsupportedDimension("zero-noise probe is set up for d = 2");
  if (spec.eps != 0.0) throw InvalidInput("zero-noise probe requires epsilon = 0");
  if (opt.time_steps < 1 || !(opt.damping >= 0.0 && opt.damping < 1.0) || !(opt.tol > 0.0) ||
      !(opt.cluster_tol > 0.0)) {
    throw InvalidInput("zero-noise probe: bad options");
  }
  const SimplexPoint p0 = to_simplex_point(p0_in);
  std::vector<Sweep> sweeps(guesses.size());
  parallel_for(guesses.size(), [&](std::size_t k) {
    if (!(guesses[k] >= 0.0 && guesses[k] <= 1.0)) throw InvalidInput("guess outside [0, 1]");
    sweeps[k] = run_sweeps(spec, p0, guesses[k], opt);
  });
  ZeroNoiseReport rep;
  const double dt = spec.T / opt.time_steps;
  for (std::size_t k = 0; k < guesses.size(); ++k) {
    const Sweep& s = sweeps[k];
    rep.runs.push_back({guesses[k], s.converged, s.iterations, s.flow.back(), s.residual});
    if (!s.converged) continue;
    bool fresh = true;
    for (const ZeroNoiseEquilibrium& e : rep.equilibria) {
      double dist = 0.0;
      for (std::size_t n = 0; n < s.flow.size(); ++n) {
        dist = std::max(dist, std::abs(s.flow[n] - e.flow[n][0]));
      }
      if (dist <= opt.cluster_tol) {
        fresh = false;
        break;
      }
    }
    if (!fresh) continue;
    ZeroNoiseEquilibrium e;
    for (std::size_t n = 0; n < s.flow.size(); ++n) {
      e.times.push_back(static_cast<double>(n) * dt);
      e.flow.push_back({s.flow[n], 1.0 - s.flow[n]});
    }
    e.value = s.value;
    e.residual = s.residual;
    e.seed_guess = guesses[k];
    e.iterations = s.iterations;
    rep.equilibria.push_back(std::move(e));
  }
  return rep;
}

nlohmann::json to_json(const ZeroNoiseReport& r) {
  nlohmann::json j;
  j["n_equilibria"] = r.equilibria.size();
  j["equilibria"] = nlohmann::json::array();
  for (const auto& e : r.equilibria) {
    j["equilibria"].push_back({{"terminal_p", e.flow.back()},
                               {"initial_value", e.value.front()},
                               {"residual", e.residual},
                               {"seed_guess", e.seed_guess},
                               {"iterations", e.iterations}});
  }
  j["runs"] = nlohmann::json::array();
  for (const auto& run : r.runs) {
    j["runs"].push_back({{"guess", run.guess},
                         {"converged", run.converged},
                         {"iterations", run.iterations},
                         {"terminal_p1", run.terminal_p1},
                         {"residual", run.residual}});
  }
  return j;
}

}  // namespace kmfg
