#include "kimura_mfg/wf_sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"

namespace kmfg {

int step_count(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("time step must be positive");
  const double m = std::round(T / dt);
  if (m < 1.0 || std::abs(m * dt - T) > 1e-12) {
    throw InvalidInput("time step must divide T");
  }
  return static_cast<int>(m);
}

void draw_increments(NoiseIncrement& out, double dt, Stream& rng) {
  const double s = std::sqrt(dt);
  for (int i = 0; i < out.d; ++i) {
    out.at(i, i) = 0.0;
    for (int j = i + 1; j < out.d; ++j) {
      const double z = s * rng.normal();
      out.at(i, j) = z;
      out.at(j, i) = -z;
    }
  }
}

NoiseIncrement draw_increments(int d, double dt, Stream& rng) {
  if (!(dt > 0.0)) throw InvalidInput("time step must be positive");
  NoiseIncrement w(std::max(d, 0));
  draw_increments(w, dt, rng);
  return w;
}

void mass_conserving_clip(SimplexPoint& p, ClipStats* stats) {
  const std::size_t d = p.size();
  for (std::size_t k = 0; k < d; ++k) {
    if (p[k] < 0.0) {
      const double deficit = -p[k];
      p[k] = 0.0;
      const auto big = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      p[big] -= deficit;
      if (stats) {
        ++stats->clip_events;
        stats->total_deficit += deficit;
      }
    }
  }
  const auto big = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  double rest = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    if (k != big) rest += p[k];
  }
  p[big] = 1.0 - rest;
}

SimplexPoint step_P_drift(const SimplexPoint& p, const Vec& a, double eps,
                          const NoiseIncrement& dw, double dt, ClipStats* stats) {
  const int d = static_cast<int>(p.size());
  SimplexPoint out = p;
  Vec root(d);
  for (int i = 0; i < d; ++i) root[i] = std::sqrt(std::max(p[i], 0.0));
  for (int i = 0; i < d; ++i) out[i] += a[i] * dt;
  if (eps != 0.0 && dw.d == d) {
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        const double inc = eps * root[i] * root[j] * dw(i, j);
        out[i] += inc;
        out[j] -= inc;
      }
    }
  }
  mass_conserving_clip(out, stats);
  return out;
}

SimplexPoint step_P(const SimplexPoint& p, double t, const NoiseIncrement& dw,
                    const FeedbackStrategy& alpha, const ModelSpec& spec,
                    const SchemeConfig& cfg, ClipStats* stats) {
  const Vec a = drift_a(t, p, alpha, spec);
  return step_P_drift(p, a, spec.eps, dw, cfg.dt, stats);
}

Vec step_Q(const Vec& q, const SimplexPoint& p, const RateMatrix& beta_rates,
           const NoiseIncrement& dw, const ModelSpec& spec, const SchemeConfig& cfg) {
  const int d = static_cast<int>(p.size());
  for (double v : p) {
    if (v < cfg.clip_floor) throw BoundaryGuard("Q dynamics: P touched a face of the simplex");
  }
  Vec phi(d);
  for (int i = 0; i < d; ++i) phi[i] = spec.phi(p[i]);
  const bool has_rates = beta_rates.d == d;
  Vec out = q;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double bji = has_rates ? beta_rates(j, i) : 0.0;
      const double bij = has_rates ? beta_rates(i, j) : 0.0;
      const double flux = (q[j] * (phi[i] + bji) - q[i] * (phi[j] + bij)) * cfg.dt;
      out[i] += flux;
      out[j] -= flux;
    }
  }
  if (spec.eps != 0.0 && dw.d == d) {
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        if (j != i) s += std::sqrt(p[j] / p[i]) * dw(i, j);
      }
      out[i] += spec.eps * q[i] * s;
    }
  }
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

Vec step_Q(const Vec& q, const SimplexPoint& p, double t, const NoiseIncrement& dw,
           const FeedbackStrategy& beta, const ModelSpec& spec, const SchemeConfig& cfg) {
  RateMatrix m(static_cast<int>(p.size()));
  beta.rates(t, p, m);
  return step_Q(q, p, m, dw, spec, cfg);
}

namespace {

struct PathState {
  std::vector<SimplexPoint> P;
  std::vector<Vec> Q;
  Vec inv;
  double min_coord = 1.0;
  ClipStats clips;
};

PathState run_path(const ModelSpec& spec, const FeedbackStrategy& alpha, const SimplexPoint& p0,
                   const SchemeConfig& cfg, std::uint64_t key, std::uint64_t path_id, int steps,
                   const SimulateOptions& opt) {
  const int d = spec.d;
  PathState st;
  st.inv.assign(d, 0.0);
  SimplexPoint p = p0;
  Vec q;
  if (opt.beta) q = opt.q0.empty() ? p0 : opt.q0;
  auto store = [&](int n) {
    if (n % opt.store_stride == 0 || n == steps) {
      st.P.push_back(p);
      if (opt.beta) st.Q.push_back(q);
    }
  };
  auto add_inv = [&](const SimplexPoint& x, double w) {
    for (int i = 0; i < d; ++i) {
      st.inv[i] += w / std::max(x[i], 1e-300);
      st.min_coord = std::min(st.min_coord, x[i]);
    }
  };
  store(0);
  add_inv(p, 0.5 * cfg.dt);
  NoiseIncrement dw(d);
  RateMatrix rates(d), brates(d);
  for (int n = 0; n < steps; ++n) {
    const double t = n * cfg.dt;
    Stream rng(key, path_id, static_cast<std::uint32_t>(n));
    draw_increments(dw, cfg.dt, rng);
    alpha.rates(t, p, rates);
    if (opt.beta) {
      opt.beta->rates(t, p, brates);
      q = step_Q(q, p, brates, dw, spec, cfg);
    }
    p = step_P_drift(p, drift_a(p, rates, spec), spec.eps, dw, cfg.dt, &st.clips);
    add_inv(p, n + 1 == steps ? 0.5 * cfg.dt : cfg.dt);
    store(n + 1);
  }
  return st;
}

}  // namespace

PathBundle simulate(const ModelSpec& spec, const FeedbackStrategy& alpha, const SimplexPoint& p0_in,
                    std::size_t n_paths, const SchemeConfig& cfg, std::uint64_t seed,
                    const SimulateOptions& opt) {
  const SimplexPoint p0 = to_simplex_point(p0_in);
  if (static_cast<int>(p0.size()) != spec.d) throw InvalidInput("simulate: p0 has wrong dimension");
  if (!is_interior(p0)) throw InvalidInput("simulate: p0 must be interior");
  if (opt.store_stride < 1) throw InvalidInput("simulate: store stride must be positive");
  if (opt.beta && !opt.q0.empty() && static_cast<int>(opt.q0.size()) != spec.d) {
    throw InvalidInput("simulate: q0 has wrong dimension");
  }
  const int steps = step_count(spec.T, cfg.dt);
  PathBundle b;
  b.d = spec.d;
  for (int n = 0; n <= steps; ++n) {
    if (n % opt.store_stride == 0 || n == steps) b.times.push_back(n * cfg.dt);
  }
  const std::uint64_t key = derive_key(seed, Domain::kSdeNoise);
  std::vector<PathState> states(n_paths);
  parallel_for(n_paths, [&](std::size_t k) {
    states[k] = run_path(spec, alpha, p0, cfg, key, k, steps, opt);
  });
  for (std::size_t k = 0; k < n_paths; ++k) {
    b.P.push_back(std::move(states[k].P));
    if (opt.beta) b.Q.push_back(std::move(states[k].Q));
    b.inverse_integral.push_back(std::move(states[k].inv));
    b.min_coordinate.push_back(states[k].min_coord);
    b.stream_ids.push_back(k);
    b.clips.merge(states[k].clips);
  }
  return b;
}

void write_paths_csv(std::ostream& os, const PathBundle& b) {
  os << "path_id,t";
  for (int i = 1; i <= b.d; ++i) os << ",P_" << i;
  if (!b.Q.empty()) {
    for (int i = 1; i <= b.d; ++i) os << ",Q_" << i;
  }
  os << '\n';
  char buf[64];
  for (std::size_t k = 0; k < b.n_paths(); ++k) {
    for (std::size_t n = 0; n < b.times.size(); ++n) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g", static_cast<std::size_t>(b.stream_ids[k]),
                    b.times[n]);
      os << buf;
      for (double v : b.P[k][n]) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
      }
      if (!b.Q.empty()) {
        for (double v : b.Q[k][n]) {
          std::snprintf(buf, sizeof buf, ",%.17g", v);
          os << buf;
        }
      }
      os << '\n';
    }
  }
}

std::vector<double> mc_cost_paths(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                  const FeedbackStrategy& beta, int l, const SimplexPoint& p0_in,
                                  std::size_t n_paths, const SchemeConfig& cfg,
                                  std::uint64_t seed) {
  const SimplexPoint p0 = to_simplex_point(p0_in);
  const int d = spec.d;
  if (static_cast<int>(p0.size()) != d) throw InvalidInput("mc_cost: p0 has wrong dimension");
  if (!is_interior(p0)) throw InvalidInput("mc_cost: p0 must be interior");
  if (l < 0 || l >= d) throw InvalidInput("mc_cost: start state out of range");
  const int steps = step_count(spec.T, cfg.dt);
  const std::uint64_t key = derive_key(seed, Domain::kSdeNoise);
  std::vector<double> out(n_paths, 0.0);
  parallel_for(n_paths, [&](std::size_t k) {
    SimplexPoint p = p0;
    Vec q(d, 0.0);
    q[l] = 1.0;
    NoiseIncrement dw(d);
    RateMatrix rates(d), brates(d);
    auto running = [&](double t) {
      double r = 0.0;
      for (int i = 0; i < d; ++i) {
        double ctrl = 0.0;
        for (int j = 0; j < d; ++j) {
          if (j != i) ctrl += brates(i, j) * brates(i, j);
        }
        r += q[i] * (spec.f.eval(t, i, p) + 0.5 * ctrl);
      }
      return r;
    };
    double J = 0.0;
    for (int n = 0; n < steps; ++n) {
      const double t = n * cfg.dt;
      beta.rates(t, p, brates);
      J += (n == 0 ? 0.5 : 1.0) * cfg.dt * running(t);
      Stream rng(key, k, static_cast<std::uint32_t>(n));
      draw_increments(dw, cfg.dt, rng);
      alpha.rates(t, p, rates);
      q = step_Q(q, p, brates, dw, spec, cfg);
      p = step_P_drift(p, drift_a(p, rates, spec), spec.eps, dw, cfg.dt);
    }
    beta.rates(spec.T, p, brates);
    J += 0.5 * cfg.dt * running(spec.T);
    for (int i = 0; i < d; ++i) J += q[i] * spec.g.eval(spec.T, i, p);
    out[k] = J;
  });
  return out;
}

MeanSe mc_cost(const ModelSpec& spec, const FeedbackStrategy& alpha, const FeedbackStrategy& beta,
               int l, const SimplexPoint& p0, std::size_t n_paths, const SchemeConfig& cfg,
               std::uint64_t seed) {
  if (n_paths == 0) return {};
  return mean_se(mc_cost_paths(spec, alpha, beta, l, p0, n_paths, cfg, seed));
}

ExpMomentResult exp_moment_estimate(const PathBundle& b, double lambda, const ModelSpec& spec) {
  if (!(lambda > 0.0)) throw InvalidInput("exp moment: lambda must be positive");
  ExpMomentResult r;
  r.gamma = spec.kappa - (1.0 + lambda) * spec.eps * spec.eps / 2.0;
  r.diagnostic_only = r.gamma <= 0.0;
  for (int i = 0; i < b.d; ++i) {
    std::vector<double> x(b.n_paths());
    for (std::size_t k = 0; k < b.n_paths(); ++k) {
      x[k] = std::exp(lambda * r.gamma * b.inverse_integral[k][i]);
    }
    r.per_coordinate.push_back(mean_se(x));
  }
  return r;
}

ExpMomentStudy exp_moment_study(const ModelSpec& spec, double lambda,
                                const std::vector<double>& starts, std::size_t n_paths,
                                const SchemeConfig& cfg, std::uint64_t seed) {
  if (spec.d != 2) throw UnsupportedDimension("exp moment study is set up for d = 2");
  ExpMomentStudy s;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const double x = starts[k];
    const PathBundle b = simulate(spec, FeedbackStrategy::zero(), {x, 1.0 - x}, n_paths, cfg,
                                  seed + k, {nullptr, {}, step_count(spec.T, cfg.dt)});
    const ExpMomentResult r = exp_moment_estimate(b, lambda, spec);
    s.p0.push_back(x);
    s.estimate.push_back(r.per_coordinate[0]);
    lx.push_back(std::log(x));
    ly.push_back(std::log(r.per_coordinate[0].mean));
  }
  if (starts.size() >= 2) s.fit = fit_line(lx, ly);
  return s;
}

}  // namespace kmfg
