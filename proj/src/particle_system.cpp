#include "kimura_mfg/particle_system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"

namespace kmfg {

ParticleEnsemble make_ensemble(int d, std::vector<int> positions) {
  if (d < 1) throw InvalidInput("ensemble: d must be positive");
  for (int x : positions) {
    if (x < 0 || x >= d) throw InvalidInput("ensemble: position out of range");
  }
  ParticleEnsemble e;
  e.d = d;
  e.Y.assign(positions.size(), 1.0);
  e.X = std::move(positions);
  return e;
}

ParticleEnsemble stratified_ensemble(int d, std::size_t N, const SimplexPoint& p0_in) {
  const SimplexPoint p0 = to_simplex_point(p0_in);
  if (static_cast<int>(p0.size()) != d) throw InvalidInput("ensemble: p0 has wrong dimension");
  std::vector<std::size_t> count(d);
  std::vector<std::pair<double, int>> rem;
  std::size_t used = 0;
  for (int i = 0; i < d; ++i) {
    const double exact = p0[i] * static_cast<double>(N);
    count[i] = static_cast<std::size_t>(std::floor(exact));
    used += count[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < N; ++r, ++used) ++count[rem[r % d].second];
  std::vector<int> pos;
  pos.reserve(N);
  for (int i = 0; i < d; ++i) pos.insert(pos.end(), count[i], i);
  return make_ensemble(d, std::move(pos));
}

ParticleEnsemble random_ensemble(int d, std::size_t N, const SimplexPoint& p0_in, std::uint64_t seed,
                                 std::uint64_t replicate) {
  const SimplexPoint p0 = to_simplex_point(p0_in);
  if (static_cast<int>(p0.size()) != d) throw InvalidInput("ensemble: p0 has wrong dimension");
  Stream rng(derive_key(seed, Domain::kInitial), replicate, 0);
  std::vector<int> pos(N);
  for (std::size_t l = 0; l < N; ++l) {
    const double u = rng.uniform();
    double cum = 0.0;
    int s = d - 1;
    for (int i = 0; i < d; ++i) {
      cum += p0[i];
      if (u < cum) {
        s = i;
        break;
      }
    }
    pos[l] = s;
  }
  return make_ensemble(d, std::move(pos));
}

SimplexPoint empirical_measure(const ParticleEnsemble& ens) {
  SimplexPoint mu(ens.d, 0.0);
  for (std::size_t l = 0; l < ens.N(); ++l) mu[ens.X[l]] += ens.Y[l];
  const double N = static_cast<double>(ens.N());
  for (double& v : mu) v /= N;
  return mu;
}

ParticleSeeds ParticleSeeds::from_seed(std::uint64_t seed) {
  return {derive_key(seed, Domain::kIdiosyncratic), derive_key(seed, Domain::kCommon)};
}

RateMatrix transition_matrix(const FeedbackStrategy& up_alpha, double t, const SimplexPoint& mu,
                             std::size_t N) {
  const int d = static_cast<int>(mu.size());
  RateMatrix A(d);
  up_alpha.rates(t, mu, A);
  const double n = static_cast<double>(N);
  for (int i = 0; i < d; ++i) {
    double out = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      if (A(i, j) < 0.0) throw InvalidInput("mean-field rates must be nonnegative");
      A(i, j) /= n;
      out += A(i, j);
    }
    if (out > 1.0) throw InvalidInput("mean-field rates exceed N: transition is not a probability");
    A(i, i) = 1.0 - out;
  }
  return A;
}

int transition_quantile(const RateMatrix& A, int i, double u) {
  double cum = 0.0;
  int last = i;
  for (int j = 0; j < A.d; ++j) {
    const double pj = A(i, j);
    if (pj <= 0.0) continue;
    cum += pj;
    last = j;
    if (u < cum) return j;
  }
  return last;
}

std::vector<int> multinomial_counts(const SimplexPoint& mu, const std::vector<double>& V) {
  const int d = static_cast<int>(mu.size());
  Vec cum(d);
  std::partial_sum(mu.begin(), mu.end(), cum.begin());
  std::vector<int> S(d, 0);
  for (double v : V) {
    int s = d - 1;
    for (int i = 0; i < d; ++i) {
      if (v < cum[i]) {
        s = i;
        break;
      }
    }
    // Rounding in the cumulative sums must not land a draw on an empty site.
    while (mu[s] <= 0.0 && s > 0) --s;
    ++S[s];
  }
  return S;
}

StepRecord step_ensemble(ParticleEnsemble& ens, const FeedbackStrategy& up_alpha, double eps,
                         const ParticleSeeds& seeds, std::uint64_t replicate) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("particle eps must lie in [0, 1]");
  const std::size_t N = ens.N();
  const SimplexPoint mu = empirical_measure(ens);
  const double t = static_cast<double>(ens.m) / static_cast<double>(N);
  Stream common(seeds.common, replicate, static_cast<std::uint32_t>(ens.m));
  StepRecord rec;
  rec.coin = common.uniform() < eps;
  if (rec.coin) {
    std::vector<double> V(N);
    for (double& v : V) v = common.uniform();
    rec.S = multinomial_counts(mu, V);
    const double n = static_cast<double>(N);
    for (std::size_t l = 0; l < N; ++l) {
      const int i = ens.X[l];
      ens.Y[l] = mu[i] > 0.0 ? ens.Y[l] * rec.S[i] / (n * mu[i]) : 0.0;
    }
  } else {
    const RateMatrix A = transition_matrix(up_alpha, t, mu, N);
    Stream idio(seeds.idiosyncratic, replicate, static_cast<std::uint32_t>(ens.m));
    for (std::size_t l = 0; l < N; ++l) ens.X[l] = transition_quantile(A, ens.X[l], idio.uniform());
  }
  ++ens.m;
  return rec;
}

Vec conditional_mass_step(const Vec& Q, const SimplexPoint& mu, const FeedbackStrategy& up_beta,
                          double t, bool coin, const std::vector<int>& S, std::size_t N) {
  const int d = static_cast<int>(mu.size());
  for (double q : Q) {
    if (!(q >= 0.0)) throw InvalidInput("conditional mass must be nonnegative");
  }
  Vec out(d, 0.0);
  if (coin) {
    if (static_cast<int>(S.size()) != d) throw InvalidInput("multinomial counts have wrong size");
    for (int i = 0; i < d; ++i) {
      out[i] = mu[i] > 0.0 ? Q[i] * S[i] / (static_cast<double>(N) * mu[i]) : 0.0;
    }
    return out;
  }
  const RateMatrix A = transition_matrix(up_beta, t, mu, N);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) out[i] += Q[j] * A(j, i);
  }
  return out;
}

ParticleTrajectory run_particles(ParticleEnsemble ens, const FeedbackStrategy& up_alpha, double eps,
                                 int M, const ParticleSeeds& seeds, std::uint64_t replicate,
                                 bool record_players) {
  ParticleTrajectory tr;
  tr.mu.push_back(empirical_measure(ens));
  if (record_players) {
    tr.X.push_back(ens.X);
    tr.Y.push_back(ens.Y);
  }
  for (int m = 0; m < M; ++m) {
    tr.steps.push_back(step_ensemble(ens, up_alpha, eps, seeds, replicate));
    tr.mu.push_back(empirical_measure(ens));
    if (record_players) {
      tr.X.push_back(ens.X);
      tr.Y.push_back(ens.Y);
    }
  }
  return tr;
}

double discrete_cost(const std::vector<int>& X, const Vec& Y, const std::vector<SimplexPoint>& mu,
                     const CostFamily& f, const CostFamily& g, const FeedbackStrategy& up_beta,
                     std::size_t N) {
  if (X.size() != Y.size() || X.size() != mu.size() || X.empty()) {
    throw InvalidInput("discrete cost: trajectories must share one length M + 1");
  }
  const std::size_t M = X.size() - 1;
  const double n = static_cast<double>(N);
  double J = Y[M] * g.eval(static_cast<double>(M) / n, X[M], mu[M]);
  for (std::size_t m = 0; m < M; ++m) {
    const double t = static_cast<double>(m) / n;
    const int i = X[m];
    RateMatrix b(static_cast<int>(mu[m].size()));
    up_beta.rates(t, mu[m], b);
    double ctrl = 0.0;
    for (int j = 0; j < b.d; ++j) {
      if (j != i) ctrl += b(i, j) * b(i, j);
    }
    J += Y[m] * (f.eval(t, i, mu[m]) + 0.5 * ctrl) / n;
  }
  return J;
}

Vec particle_drift(const SimplexPoint& mu, const RateMatrix& rates) {
  const int d = static_cast<int>(mu.size());
  Vec a(d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double flux = mu[j] * rates(j, i) - mu[i] * rates(i, j);
      a[i] += flux;
      a[j] -= flux;
    }
  }
  return a;
}

MomentDiagnostics moment_diagnostics(const ParticleEnsemble& ens, const FeedbackStrategy& up_alpha,
                                     double eps, std::size_t n_replicates, std::uint64_t seed) {
  const int d = ens.d;
  const std::size_t N = ens.N();
  const double n = static_cast<double>(N);
  MomentDiagnostics rep;
  rep.mu = empirical_measure(ens);
  RateMatrix rates(d);
  up_alpha.rates(static_cast<double>(ens.m) / n, rep.mu, rates);
  const Vec a = particle_drift(rep.mu, rates);
  for (int i = 0; i < d; ++i) rep.mean_expected.push_back((1.0 - eps) * a[i] / n);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double xi = (i == j ? rep.mu[i] : 0.0) - rep.mu[i] * rep.mu[j];
      rep.cov_expected.push_back(eps * xi / n);
    }
  }
  const ParticleSeeds seeds = ParticleSeeds::from_seed(seed);
  std::vector<Vec> inc(n_replicates), res(n_replicates);
  parallel_for(n_replicates, [&](std::size_t r) {
    ParticleEnsemble e = ens;
    const StepRecord rec = step_ensemble(e, up_alpha, eps, seeds, r);
    const SimplexPoint mu1 = empirical_measure(e);
    inc[r].resize(d);
    res[r].assign(d, 0.0);
    for (int i = 0; i < d; ++i) {
      inc[r][i] = mu1[i] - rep.mu[i];
      if (rec.coin) res[r][i] = inc[r][i];
    }
  });
  std::vector<double> x(n_replicates);
  for (int i = 0; i < d; ++i) {
    for (std::size_t r = 0; r < n_replicates; ++r) x[r] = inc[r][i];
    const MeanSe ms = mean_se(x);
    rep.mean_observed.push_back(ms);
    rep.mean_z.push_back(z_score(ms.mean, ms.se, rep.mean_expected[i], 0.0));
  }
  int c = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j, ++c) {
      for (std::size_t r = 0; r < n_replicates; ++r) x[r] = res[r][i] * res[r][j];
      const MeanSe ms = mean_se(x);
      rep.cov_observed.push_back(ms);
      rep.cov_z.push_back(z_score(ms.mean, ms.se, rep.cov_expected[c], 0.0));
    }
  }
  for (double z : rep.mean_z) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
  for (double z : rep.cov_z) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
  return rep;
}

ConvergenceTable convergence_study(const FeedbackStrategy& up_alpha, const ConvergenceSetup& setup,
                                   std::uint64_t seed) {
  const SimplexPoint p0 = to_simplex_point(setup.p0);
  const int d = static_cast<int>(p0.size());
  const double eps = setup.eps_particle;
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("particle eps must lie in [0, 1]");
  for (std::size_t k = 1; k < setup.N_list.size(); ++k) {
    if (setup.N_list[k] <= setup.N_list[k - 1]) throw InvalidInput("N list must increase");
  }
  const std::vector<double> times = {setup.T / 2.0, setup.T};

  // Reference diffusion: drift (1 - eps) a without forcing, noise sqrt(eps).
  ModelSpec sde;
  sde.d = d;
  sde.eps = std::sqrt(eps);
  sde.kappa = 0.0;
  sde.delta = 0.01;
  sde.T = setup.T;
  sde.f = CostFamily::constant(Vec(d, 0.0));
  sde.g = CostFamily::constant(Vec(d, 0.0));
  const double scale = 1.0 - eps;
  const FeedbackStrategy scaled(
      [&up_alpha, scale](double t, const SimplexPoint& p, RateMatrix& out) {
        up_alpha.rates(t, p, out);
        for (double& v : out.r) v *= scale;
      },
      scale * up_alpha.sup_bound());
  SchemeConfig cfg;
  cfg.dt = setup.sde_dt;
  const int steps = step_count(setup.T, setup.sde_dt);
  if (steps % 2 != 0) throw InvalidInput("convergence study: SDE step count must be even");
  SimulateOptions so;
  so.store_stride = steps / 2;
  const PathBundle ref = simulate(sde, scaled, p0, setup.sde_paths, cfg, seed, so);
  auto moment = [](const std::vector<double>& x, int k) {
    return k == 1 ? mean_se(x) : variance_se(x);
  };

  ConvergenceTable table;
  const ParticleSeeds seeds = ParticleSeeds::from_seed(seed);
  for (std::size_t N : setup.N_list) {
    const ParticleEnsemble ens0 = stratified_ensemble(d, N, p0);
    std::vector<std::size_t> marks;
    for (double t : times) {
      marks.push_back(static_cast<std::size_t>(std::floor(static_cast<double>(N) * t + 1e-9)));
    }
    std::vector<std::vector<double>> at(times.size(), std::vector<double>(setup.n_paths));
    parallel_for(setup.n_paths, [&](std::size_t path) {
      ParticleEnsemble e = ens0;
      std::size_t next = 0;
      for (std::size_t m = 0; next < marks.size(); ++m) {
        while (next < marks.size() && marks[next] == m) {
          at[next][path] = empirical_measure(e)[0];
          ++next;
        }
        if (next < marks.size()) step_ensemble(e, up_alpha, eps, seeds, path);
      }
    });
    ConvergenceRow worst;
    worst.gap = -1.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      std::vector<double> s(setup.sde_paths);
      for (std::size_t path = 0; path < setup.sde_paths; ++path) s[path] = ref.P[path][k + 1][0];
      for (int mom = 1; mom <= 2; ++mom) {
        ConvergenceRow row;
        row.N = N;
        row.t = times[k];
        row.moment = mom;
        row.particle = moment(at[k], mom);
        row.sde = moment(s, mom);
        row.gap = std::abs(row.particle.mean - row.sde.mean);
        row.se = std::sqrt(row.particle.se * row.particle.se + row.sde.se * row.sde.se);
        table.rows.push_back(row);
        if (row.gap > worst.gap) worst = row;
      }
    }
    table.worst.push_back(worst);
  }
  const std::size_t per_n = times.size() * 2;
  for (std::size_t k = 1; k < setup.N_list.size(); ++k) {
    for (std::size_t r = 0; r < per_n; ++r) {
      const ConvergenceRow& a = table.rows[(k - 1) * per_n + r];
      const ConvergenceRow& b = table.rows[k * per_n + r];
      if (b.gap > a.gap + std::sqrt(a.se * a.se + b.se * b.se)) table.monotone = false;
    }
  }
  return table;
}

nlohmann::json to_json(const MomentDiagnostics& r) {
  nlohmann::json j;
  j["mu"] = r.mu;
  j["mean_expected"] = r.mean_expected;
  j["mean_z"] = r.mean_z;
  j["cov_expected"] = r.cov_expected;
  j["cov_z"] = r.cov_z;
  std::vector<double> mo, co;
  for (const auto& m : r.mean_observed) mo.push_back(m.mean);
  for (const auto& c : r.cov_observed) co.push_back(c.mean);
  j["mean_observed"] = mo;
  j["cov_observed"] = co;
  j["max_abs_z"] = r.max_abs_z;
  return j;
}

nlohmann::json to_json(const ConvergenceTable& r) {
  nlohmann::json j;
  j["monotone"] = r.monotone;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"N", row.N},
                         {"t", row.t},
                         {"moment", row.moment == 1 ? "mean" : "variance"},
                         {"particle", row.particle.mean},
                         {"particle_se", row.particle.se},
                         {"sde", row.sde.mean},
                         {"sde_se", row.sde.se},
                         {"gap", row.gap},
                         {"se", row.se}});
  }
  return j;
}

}  // namespace kmfg
