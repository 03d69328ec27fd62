#include "kimura_mfg/coupling_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"

namespace kmfg {

double sigma_eval(const Vec& p0) {
  double s = 0.0;
  for (double v : p0) {
    if (!(v >= 0.0)) throw InvalidInput("sigma: entries must be nonnegative");
    s += v;
  }
  if (s > 1.0 + kSimplexSumTol) throw InvalidInput("sigma: mass of p0 exceeds 1");
  return std::sqrt(std::max(1.0 - s, 0.0));
}

Eigen::MatrixXd reflection_matrix(const Vec& pt, const Vec& qt) {
  if (pt.size() != qt.size()) throw InvalidInput("reflection: dimension mismatch");
  const auto k = static_cast<Eigen::Index>(pt.size());
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = pt[i] - qt[i];
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(k, k);
  const double n2 = z.squaredNorm();
  if (n2 > 0.0) R -= 2.0 * z * z.transpose() / n2;
  return R;
}

double ConditioningState::sigma2() const {
  double s = 0.0;
  for (double v : po) s += v;
  return 1.0 - s;
}

SimplexPoint ConditioningState::reconstruct() const {
  const double s2 = sigma2();
  SimplexPoint x = po;
  for (double v : p) x.push_back(s2 * v);
  return x;
}

ConditioningState make_conditioning_state(const Vec& po, const SimplexPoint& p) {
  sigma_eval(po);
  ConditioningState s;
  s.po = po;
  s.p = to_simplex_point(p);
  return s;
}

Vec conditioning_drift(double t, const SimplexPoint& x, const FeedbackStrategy& alpha,
                       const ModelSpec& spec) {
  return drift_a(t, project_to_simplex(x), alpha, spec);
}

ConditioningState step_conditioning(const ConditioningState& s, double t, double dt,
                                    const NoiseIncrement& dw, const NoiseIncrement& dwo,
                                    const FeedbackStrategy& alpha, const ModelSpec& spec) {
  const int m = static_cast<int>(s.po.size());
  const int k = static_cast<int>(s.p.size());
  const double s2 = s.sigma2();
  if (s2 < 1e-10) throw BoundaryGuard("conditioning system: sigma vanished");
  const double sg = std::sqrt(s2);
  const Vec b = conditioning_drift(t, s.reconstruct(), alpha, spec);
  const double eps = spec.eps;

  Vec a(k);
  double sum_b = 0.0;
  for (int i = 0; i < k; ++i) sum_b += b[m + i];
  for (int i = 0; i < k; ++i) a[i] = (b[m + i] - s.p[i] * sum_b) / s2;
  ConditioningState out;
  out.p = step_P_drift(s.p, a, eps / sg, dw, dt);

  Vec ro(m), rp(k);
  for (int i = 0; i < m; ++i) ro[i] = std::sqrt(std::max(s.po[i], 0.0));
  for (int j = 0; j < k; ++j) rp[j] = std::sqrt(std::max(s.p[j], 0.0));
  out.po = s.po;
  for (int i = 0; i < m; ++i) {
    double noise = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) noise += ro[i] * ro[j] * dwo(i, j);
    }
    for (int j = 0; j < k; ++j) noise += sg * ro[i] * rp[j] * dwo(i, m + j);
    out.po[i] += b[i] * dt + eps * noise;
    out.po[i] = std::max(out.po[i], 0.0);
  }
  return out;
}

std::string to_string(Trigger t) {
  switch (t) {
    case Trigger::None: return "none";
    case Trigger::Tau: return "tau";
    case Trigger::Varrho: return "varrho";
    case Trigger::Sigma: return "sigma";
    case Trigger::Rho: return "rho";
  }
  return "none";
}

Vec CoupledState::Z() const {
  Vec z(P.p.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = std::sqrt(std::max(P.p[i], 0.0)) - std::sqrt(std::max(Q.p[i], 0.0));
  }
  return z;
}

namespace {

double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l1(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double po_distance(const CoupledState& s) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < s.P.po.size(); ++i) {
    const double d = s.P.po[i] - s.Q.po[i];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

void record(CoupledState& s, bool tau, bool varrho, bool sigma, bool rho) {
  s.tau = s.tau || tau;
  s.varrho = s.varrho || varrho;
  s.sigma = s.sigma || sigma;
  s.rho = s.rho || rho;
  if (s.first != Trigger::None) return;
  if (tau) s.first = Trigger::Tau;
  else if (varrho) s.first = Trigger::Varrho;
  else if (sigma) s.first = Trigger::Sigma;
  else if (rho) s.first = Trigger::Rho;
  if (s.first != Trigger::None) s.first_step = s.steps;
}

}  // namespace

CoupledState make_coupled_state(const ConditioningState& P, const ConditioningState& Q) {
  if (P.po.size() != Q.po.size() || P.p.size() != Q.p.size()) {
    throw InvalidInput("coupled state: members differ in shape");
  }
  CoupledState s;
  s.P = P;
  s.Q = Q;
  const double z = norm2(s.Z());
  if (z <= 1e-9) {
    record(s, true, false, false, false);
    s.Q = s.P;
  }
  return s;
}

void step_coupled(CoupledState& s, double dt, const NoiseIncrement& dw, const NoiseIncrement& dwo,
                  double bridge_u, const FeedbackStrategy& alpha, const ModelSpec& spec,
                  const CouplingOptions& opt) {
  const int k = static_cast<int>(s.P.p.size());
  if (s.tau) {
    s.P = step_conditioning(s.P, s.t, dt, dw, dwo, alpha, spec);
    s.Q = s.P;
    s.t += dt;
    ++s.steps;
    record(s, false, false, false, l1(s.P.po) >= 0.75);
    return;
  }
  const Vec z0 = s.Z();
  const double nz0 = norm2(z0);
  Vec e(k);
  for (int i = 0; i < k; ++i) e[i] = z0[i] / nz0;

  // R dw R with R = I - 2 e e^T.
  NoiseIncrement rw(k);
  {
    Vec we(k, 0.0);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) we[i] += dw(i, j) * e[j];
    }
    // e^T dw e = 0 by antisymmetry, so R dw R = dw - 2 (dw e) e^T - 2 e (e^T dw).
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        rw.at(i, j) = dw(i, j) - 2.0 * we[i] * e[j] + 2.0 * e[i] * we[j];
      }
    }
  }

  // Per-step variance of e . Z from the noise, for the bridge test.
  double var = 0.0;
  if (opt.bridge) {
    const double sp = std::sqrt(std::max(s.P.sigma2(), 1e-300));
    const double sq = std::sqrt(std::max(s.Q.sigma2(), 1e-300));
    const double c = spec.eps * (1.0 / sp + 1.0 / sq) / 2.0;
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      const double pi = std::sqrt(std::max(s.P.p[i], 0.0));
      for (int j = i + 1; j < k; ++j) {
        const double pj = std::sqrt(std::max(s.P.p[j], 0.0));
        const double w = e[i] * pj - e[j] * pi;
        acc += w * w;
      }
    }
    var = c * c * acc * dt;
  }

  s.P = step_conditioning(s.P, s.t, dt, dw, dwo, alpha, spec);
  s.Q = step_conditioning(s.Q, s.t, dt, rw, dwo, alpha, spec);
  s.t += dt;
  ++s.steps;

  const Vec z1 = s.Z();
  const double nz1 = norm2(z1);
  double y1 = 0.0;
  for (int i = 0; i < k; ++i) y1 += e[i] * z1[i];
  bool tau = nz1 <= opt.tau_threshold || y1 <= 0.0;
  if (!tau && opt.bridge && var > 0.0) {
    tau = bridge_u < std::exp(-2.0 * nz0 * y1 / var);
  }
  const bool varrho = po_distance(s) > nz1;
  const bool sigma = nz1 >= spec.delta / 4.0;
  const bool rho = l1(s.P.po) >= 0.75;
  record(s, tau, varrho, sigma, rho);
  if (tau) s.Q = s.P;
}

RotatedNoiseReport rotated_noise_check(std::size_t n_steps, int k, double dt, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("rotated noise check needs dimension at least 2");
  if (n_steps < 2 || !(dt > 0.0)) throw InvalidInput("rotated noise check: bad sizes");
  const std::uint64_t key_w = derive_key(seed, Domain::kSdeNoise);
  const std::uint64_t key_r = derive_key(seed, Domain::kRotation);
  const int pairs = k * (k - 1) / 2;
  std::vector<std::vector<double>> samples(pairs, std::vector<double>(n_steps));
  std::vector<double> defect(n_steps, 0.0);
  parallel_for(n_steps, [&](std::size_t n) {
    Stream rs(key_r, 0, static_cast<std::uint32_t>(n));
    Stream ws(key_w, 0, static_cast<std::uint32_t>(n));
    Vec a(k), b(k);
    for (int i = 0; i < k; ++i) a[i] = rs.normal();
    for (int i = 0; i < k; ++i) b[i] = a[i] + rs.normal();
    const Eigen::MatrixXd R = reflection_matrix(a, b);
    const NoiseIncrement w = draw_increments(k, dt, ws);
    Eigen::MatrixXd M(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) M(i, j) = w(i, j);
    }
    const Eigen::MatrixXd N = R * M * R;
    defect[n] = (N + N.transpose()).cwiseAbs().maxCoeff();
    int c = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) samples[c++][n] = N(i, j);
    }
  });
  RotatedNoiseReport r;
  r.antisymmetry_defect = *std::max_element(defect.begin(), defect.end());
  for (int a = 0; a < pairs; ++a) {
    std::vector<double> sq(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) sq[n] = samples[a][n] * samples[a][n];
    const MeanSe v = mean_se(sq);
    r.variances.push_back(v.mean);
    r.max_variance_z = std::max(r.max_variance_z, std::abs(z_score(v.mean, v.se, dt, 0.0)));
    for (int b = a + 1; b < pairs; ++b) {
      std::vector<double> prod(n_steps);
      for (std::size_t n = 0; n < n_steps; ++n) prod[n] = samples[a][n] * samples[b][n];
      const MeanSe c = mean_se(prod);
      r.max_covariance_z = std::max(r.max_covariance_z, std::abs(z_score(c.mean, c.se, 0.0, 0.0)));
    }
  }
  return r;
}

CouplingResult coupling_experiment(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                   const CouplingSetup& setup, std::size_t n_paths,
                                   std::uint64_t seed, const CouplingOptions& opt) {
  const int d = spec.d;
  const int m = setup.m;
  if (m < 0 || m >= d - 1) throw InvalidInput("coupling: split index must satisfy 0 <= m < d - 1");
  if (static_cast<int>(setup.po.size()) != m || static_cast<int>(setup.qo.size()) != m ||
      static_cast<int>(setup.p.size()) != d - m || static_cast<int>(setup.q.size()) != d - m) {
    throw InvalidInput("coupling: start points do not match (d, m)");
  }
  if (!(setup.horizon > 0.0) || setup.steps < 1) throw InvalidInput("coupling: bad horizon");
  const ConditioningState P0 = make_conditioning_state(setup.po, setup.p);
  const ConditioningState Q0 = make_conditioning_state(setup.qo, setup.q);

  CouplingResult res;
  double gap2 = 0.0;
  for (int i = 0; i < d - m; ++i) gap2 += (setup.p[i] - setup.q[i]) * (setup.p[i] - setup.q[i]);
  res.gap = std::sqrt(gap2);
  res.horizon = setup.horizon;
  res.n_paths = n_paths;
  if (l1(setup.po) > 0.5) res.warnings.emplace_back("|p0|_1 > 1/2: outside the stated preconditions");
  const double limit = spec.delta * spec.delta / (64.0 * std::sqrt(static_cast<double>(d)));
  if (!(res.gap < limit)) {
    std::ostringstream os;
    os << "|p - q| = " << res.gap << " is not below delta^2/(64 sqrt d) = " << limit;
    res.warnings.push_back(os.str());
  }

  const double dt = setup.horizon / setup.steps;
  const std::uint64_t key = derive_key(seed, Domain::kConditioningNoise);
  const std::uint64_t key_b = derive_key(seed, Domain::kBridge);
  std::vector<Trigger> first(n_paths, Trigger::None);
  parallel_for(n_paths, [&](std::size_t path) {
    CoupledState s = make_coupled_state(P0, Q0);
    NoiseIncrement dw(d - m), dwo(d);
    for (int n = 0; n < setup.steps && s.first == Trigger::None; ++n) {
      Stream rng(key, path, static_cast<std::uint32_t>(n));
      draw_increments(dw, dt, rng);
      draw_increments(dwo, dt, rng);
      Stream br(key_b, path, static_cast<std::uint32_t>(n));
      step_coupled(s, dt, dw, dwo, br.uniform(), alpha, spec, opt);
    }
    first[path] = s.first;
  });
  std::size_t fails = 0;
  for (Trigger t : first) {
    switch (t) {
      case Trigger::Tau: ++res.count_tau; break;
      case Trigger::Varrho: ++res.count_varrho; break;
      case Trigger::Sigma: ++res.count_sigma; ++fails; break;
      case Trigger::Rho: ++res.count_rho; break;
      case Trigger::None: ++res.count_none; ++fails; break;
    }
  }
  if (n_paths > 0) {
    res.failure = static_cast<double>(fails) / static_cast<double>(n_paths);
    res.se = std::sqrt(res.failure * (1.0 - res.failure) / static_cast<double>(n_paths));
  }
  return res;
}

CouplingSweep coupling_sweep(const ModelSpec& spec, const FeedbackStrategy& alpha, int m,
                             const Vec& po, const SimplexPoint& p, const std::vector<double>& gaps,
                             int steps, std::size_t n_paths, std::uint64_t seed,
                             const CouplingOptions& opt) {
  if (p.size() < 2) throw InvalidInput("coupling sweep: p-block needs two coordinates");
  CouplingSweep sw;
  std::vector<double> lx, ly;
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    CouplingSetup setup;
    setup.m = m;
    setup.po = po;
    setup.qo = po;
    setup.p = p;
    setup.q = p;
    setup.q[0] += gaps[g] / std::sqrt(2.0);
    setup.q[1] -= gaps[g] / std::sqrt(2.0);
    setup.horizon = std::cbrt(gaps[g]);
    setup.steps = steps;
    sw.results.push_back(coupling_experiment(spec, alpha, setup, n_paths, seed + g, opt));
    const CouplingResult& r = sw.results.back();
    if (r.failure > 0.0) {
      lx.push_back(std::log(r.gap));
      ly.push_back(std::log(r.failure));
    }
  }
  // Failure should not grow as the gap shrinks (3 SE slack).
  std::vector<std::size_t> order(gaps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return sw.results[a].gap > sw.results[b].gap; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const CouplingResult& big = sw.results[order[i - 1]];
    const CouplingResult& small = sw.results[order[i]];
    const double slack = 3.0 * std::sqrt(big.se * big.se + small.se * small.se);
    if (small.failure > big.failure + slack) sw.monotone = false;
  }
  if (lx.size() >= 2) sw.fit = fit_line(lx, ly);
  return sw;
}

IdentityInLawReport identity_in_law_check(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                          int m, const SimplexPoint& x0_in, std::size_t n_paths,
                                          const SchemeConfig& cfg, std::uint64_t seed) {
  const SimplexPoint x0 = to_simplex_point(x0_in);
  const int d = spec.d;
  if (static_cast<int>(x0.size()) != d) throw InvalidInput("identity in law: start has wrong dimension");
  if (!is_interior(x0)) throw InvalidInput("identity in law: start must be interior");
  if (m < 1 || m >= d - 1) throw InvalidInput("identity in law: need 1 <= m < d - 1");
  const int steps = step_count(spec.T, cfg.dt);
  // Stored at steps 0, M/4, M/2, M (rounded).
  const std::vector<int> marks = {0, steps / 4, steps / 2, steps};

  Vec po(x0.begin(), x0.begin() + m);
  const double s2 = 1.0 - l1(po);
  SimplexPoint p(x0.begin() + m, x0.end());
  for (double& v : p) v /= s2;
  mass_conserving_clip(p);
  const ConditioningState start = make_conditioning_state(po, p);

  const std::uint64_t key = derive_key(seed, Domain::kConditioningNoise);
  std::vector<std::vector<SimplexPoint>> cond(n_paths);
  parallel_for(n_paths, [&](std::size_t path) {
    ConditioningState s = start;
    NoiseIncrement dw(d - m), dwo(d);
    cond[path].push_back(s.reconstruct());
    std::size_t next_mark = 1;
    for (int n = 0; n < steps; ++n) {
      Stream rng(key, path, static_cast<std::uint32_t>(n));
      draw_increments(dw, cfg.dt, rng);
      draw_increments(dwo, cfg.dt, rng);
      s = step_conditioning(s, n * cfg.dt, cfg.dt, dw, dwo, alpha, spec);
      while (next_mark < marks.size() && marks[next_mark] == n + 1) {
        cond[path].push_back(s.reconstruct());
        ++next_mark;
      }
    }
  });

  SimulateOptions so;
  so.store_stride = steps % 4 == 0 ? steps / 4 : 1;
  const PathBundle direct = simulate(spec, alpha, x0, n_paths, cfg, seed, so);
  IdentityInLawReport rep;
  for (std::size_t mk = 0; mk < marks.size(); ++mk) {
    for (int i = 0; i < d; ++i) {
      for (int order = 1; order <= 2; ++order) {
        std::vector<double> a(n_paths), b(n_paths);
        for (std::size_t path = 0; path < n_paths; ++path) {
          const double xa = cond[path][mk][i];
          const double xb = direct.P[path][marks[mk] / so.store_stride][i];
          a[path] = order == 1 ? xa : xa * xa;
          b[path] = order == 1 ? xb : xb * xb;
        }
        MomentComparison row;
        row.t = marks[mk] * cfg.dt;
        row.coordinate = i;
        row.order = order;
        row.conditioned = mean_se(a);
        row.direct = mean_se(b);
        row.z = z_score(row.conditioned.mean, row.conditioned.se, row.direct.mean, row.direct.se);
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

nlohmann::json to_json(const CouplingResult& r) {
  return nlohmann::json{{"gap", r.gap},
                        {"horizon", r.horizon},
                        {"failure_prob", r.failure},
                        {"std_err", r.se},
                        {"n_paths", r.n_paths},
                        {"first_trigger",
                         {{"tau", r.count_tau},
                          {"varrho", r.count_varrho},
                          {"sigma", r.count_sigma},
                          {"rho", r.count_rho},
                          {"none", r.count_none}}},
                        {"warnings", r.warnings}};
}

}  // namespace kmfg
