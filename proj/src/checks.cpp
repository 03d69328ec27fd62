#include "kimura_mfg/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "kimura_mfg/coupling_lab.hpp"
#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/kimura_pde.hpp"
#include "kimura_mfg/master_solver.hpp"
#include "kimura_mfg/mfg_system.hpp"
#include "kimura_mfg/particle_system.hpp"
#include "kimura_mfg/rng.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

namespace {

namespace fs = std::filesystem;

class Clock {
 public:
  Clock() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

CheckRow le(std::string name, double v, double bound) {
  return {std::move(name), v, "<=", bound, v <= bound, false};
}
CheckRow lt(std::string name, double v, double bound) {
  return {std::move(name), v, "<", bound, v < bound, false};
}
CheckRow ge(std::string name, double v, double bound) {
  return {std::move(name), v, ">=", bound, v >= bound, false};
}
CheckRow gt(std::string name, double v, double bound) {
  return {std::move(name), v, ">", bound, v > bound, false};
}
CheckRow eq(std::string name, double v, double target) {
  return {std::move(name), v, "==", target, v == target, false};
}
CheckRow flag(std::string name, bool ok) {
  return {std::move(name), ok ? 1.0 : 0.0, "flag", 1.0, ok, false};
}
CheckRow timing(std::string name, double seconds, double bound) {
  CheckRow r = lt(std::move(name), seconds, bound);
  r.timing = true;
  return r;
}

std::size_t scaled(std::size_t n, const CheckOptions& opt, std::size_t floor = 50) {
  const double v = std::round(static_cast<double>(n) * opt.scale);
  return std::max<std::size_t>(floor, static_cast<std::size_t>(v));
}

double tol(const CheckOptions& opt, double fallback) { return opt.tolerance.value_or(fallback); }

CostFamily zero_cost(int d) { return CostFamily::constant(Vec(d, 0.0)); }

ModelSpec base_spec(int d, double eps, double kappa, double delta, double T) {
  ModelSpec s;
  s.d = d;
  s.eps = eps;
  s.kappa = kappa;
  s.delta = delta;
  s.T = T;
  s.f = zero_cost(d);
  s.g = zero_cost(d);
  return s;
}

// Anti-monotone pair instance used by the value and restoration checks.
ModelSpec anti_monotone_instance() {
  ModelSpec s = base_spec(2, 0.5, 61.0 * 0.25, 0.05, 1.0);
  s.f = CostFamily::anti_monotone_pair(2.0);
  return s;
}

// ---------------------------------------------------------------------------

CheckResult constant_case(const CheckOptions& opt, bool full) {
  CheckResult r{"1", "constant exactness", {}, {}};
  const double c = 1.5;
  ModelSpec s = base_spec(2, 0.5, 2.0, 0.1, 1.0);
  s.g = CostFamily::constant({c, c});
  const int n = full ? 200 : 50;
  MasterOptions mo;
  mo.dt = 1e-3;
  Clock clock;
  const MasterSolution sol = solve_master(s, build_grid(2, n), mo);
  const double secs = clock.seconds();
  double err = 0.0;
  for (double v : sol.U.values) err = std::max(err, std::abs(v - c));
  r.rows.push_back(le("sup |U - c|", err, tol(opt, 1e-10)));
  if (full) r.rows.push_back(timing("runtime s (n=200, dt=1e-3)", secs, 5.0));
  r.notes.push_back("d=2, n=" + std::to_string(n) + ", f=0, g=" + std::to_string(c));
  return r;
}

struct OracleErrors {
  double linear = 0.0;
  double quadratic = 0.0;
};

OracleErrors oracle_errors(int n, double dt, double eps, double T) {
  const SimplexGrid grid = build_grid(2, n);
  const auto lin = LinearKimuraProblem::from_parts(eps, T, 0.0, 0.1, nullptr, nullptr, nullptr,
                                                   [](const SimplexPoint& p) { return p[0]; });
  const auto quad = LinearKimuraProblem::from_parts(
      eps, T, 0.0, 0.1, nullptr, nullptr, nullptr,
      [](const SimplexPoint& p) { return p[0] * p[0]; });
  const FieldOnGrid ul = solve_linear(lin, grid, dt);
  const FieldOnGrid uq = solve_linear(quad, grid, dt);
  OracleErrors e;
  for (std::size_t tn = 0; tn < ul.n_times(); ++tn) {
    const double decay = std::exp(-eps * eps * (T - ul.times[tn]));
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double x = grid.nodes[k][0];
      e.linear = std::max(e.linear, std::abs(ul.at(tn, k) - x));
      e.quadratic = std::max(e.quadratic, std::abs(uq.at(tn, k) - (x + (x * x - x) * decay)));
    }
  }
  return e;
}

CheckResult oracle_case(const CheckOptions& opt, bool want_linear, bool want_quadratic) {
  CheckResult r{"2", "linear and quadratic oracles", {}, {}};
  const double eps = 0.5, T = 1.0;
  const OracleErrors coarse = oracle_errors(100, 2e-3, eps, T);
  const OracleErrors fine = oracle_errors(200, 1e-3, eps, T);
  if (want_linear) r.rows.push_back(le("linear sup error, n=200", fine.linear, tol(opt, 1e-3)));
  if (want_quadratic) {
    r.rows.push_back(le("quadratic sup error, n=200", fine.quadratic, tol(opt, 1e-3)));
    r.rows.push_back(
        ge("quadratic error ratio (n=100,dt=2e-3)/(n=200,dt=1e-3)", coarse.quadratic / fine.quadratic, 1.7));
  }
  r.notes.push_back("errors are sup over all grid nodes and time levels");
  return r;
}

// Criteria 3 and 4 share the master solutions.
struct ValueSetup {
  ModelSpec spec;
  MasterSolution coarse, fine;
  SimplexPoint p0{0.3, 0.7};
  double solve_seconds = 0.0;
};

ValueSetup value_setup() {
  ValueSetup v;
  v.spec = anti_monotone_instance();
  Clock clock;
  MasterOptions mo;
  mo.dt = 1e-3;
  v.coarse = solve_master(v.spec, build_grid(2, 50), mo);
  mo.dt = 5e-4;
  v.fine = solve_master(v.spec, build_grid(2, 100), mo);
  v.solve_seconds = clock.seconds();
  return v;
}

CheckResult value_case(const CheckOptions& opt, const ValueSetup& v) {
  CheckResult r{"3", "verification identity", {}, {}};
  Clock clock;
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const std::size_t paths = scaled(10000, opt);
  const int l = 0;
  const ValueCheck vc = verify_value(v.fine, v.p0, l, paths, cfg, opt.seed);
  const double offset = std::abs(eval_U(v.fine, 0.0, v.p0)[l] - eval_U(v.coarse, 0.0, v.p0)[l]);
  const double z_adj = std::max(0.0, std::abs(vc.gap) - offset) / vc.estimate.se;
  r.rows.push_back(le("|z| after discretization offset", z_adj, tol(opt, 3.0)));
  if (opt.scale >= 1.0) r.rows.push_back(timing("runtime s", clock.seconds() + v.solve_seconds, 120.0));
  std::ostringstream os;
  os << std::setprecision(6) << "U(0,p0)=" << vc.master_value << ", estimate=" << vc.estimate.mean
     << " +- " << vc.estimate.se << ", raw z=" << vc.z << ", offset=" << offset
     << ", max Picard iterations per step=" << v.fine.report.max_iterations();
  r.notes.push_back(os.str());
  return r;
}

CheckResult suboptimality_case(const CheckOptions& opt, const ValueSetup& v) {
  CheckResult r{"4", "suboptimality of registered deviations", {}, {}};
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const std::size_t paths = scaled(10000, opt);
  const FeedbackStrategy star = master_feedback(v.fine);
  const FeedbackStrategy plus_one(
      [&star](double t, const SimplexPoint& p, RateMatrix& out) {
        star.rates(t, p, out);
        out(0, 1) += 1.0;
      },
      star.sup_bound() + 1.0);
  const FeedbackStrategy doubled(
      [&star](double t, const SimplexPoint& p, RateMatrix& out) {
        star.rates(t, p, out);
        for (double& x : out.r) x *= 2.0;
      },
      2.0 * star.sup_bound());
  const std::vector<std::pair<std::string, const FeedbackStrategy*>> devs = {
      {"beta = 0", nullptr}, {"beta* + 1 on 0->1", &plus_one}, {"2 beta*", &doubled}};
  const FeedbackStrategy zero = FeedbackStrategy::zero();
  double best_z = 0.0;
  for (const auto& [name, beta] : devs) {
    const ProbeResult pr =
        suboptimality_probe(v.fine, v.p0, 0, beta ? *beta : zero, paths, cfg, opt.seed);
    r.rows.push_back(ge("gap, " + name, pr.gap.mean, 0.0));
    best_z = std::max(best_z, pr.z);
    std::ostringstream os;
    os << std::setprecision(6) << name << ": gap=" << pr.gap.mean << " +- " << pr.gap.se;
    r.notes.push_back(os.str());
  }
  r.rows.push_back(gt("largest gap / SE", best_z, tol(opt, 3.0)));
  return r;
}

CheckResult conservation_case(const CheckOptions& opt) {
  CheckResult r{"5", "conservation and positivity", {}, {}};
  // Long single paths, checking the sum after every step.
  const long steps = static_cast<long>(std::max(1000.0, std::round(1e6 * std::min(1.0, opt.scale))));
  for (int d : {2, 3}) {
    const ModelSpec s = base_spec(d, 0.5, 2.0, 0.1, 1.0);
    const FeedbackStrategy zero = FeedbackStrategy::zero();
    SchemeConfig cfg;
    cfg.dt = 1e-4;
    SimplexPoint p(d, 1.0 / d);
    NoiseIncrement dw(d);
    double worst = 0.0;
    for (long n = 0; n < steps; ++n) {
      Stream rng(derive_key(opt.seed, Domain::kSdeNoise), 1000 + d, static_cast<std::uint32_t>(n));
      draw_increments(dw, cfg.dt, rng);
      p = step_P(p, 0.0, dw, zero, s, cfg);
      double sum = 0.0;
      for (double x : p) sum += x;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    r.rows.push_back(le("max |sum P - 1| over " + std::to_string(steps) + " steps, d=" +
                            std::to_string(d),
                        worst, 1e-15));
  }
  const std::size_t paths = scaled(1000, opt);
  for (double kappa : {2.0, 0.125}) {
    const ModelSpec s = base_spec(2, 0.5, kappa, 0.1, 1.0);
    SchemeConfig cfg;
    cfg.dt = 1e-4;
    SimulateOptions so;
    so.store_stride = step_count(s.T, cfg.dt);
    const PathBundle b = simulate(s, FeedbackStrategy::zero(), {0.3, 0.7}, paths, cfg, opt.seed, so);
    std::size_t dips = 0;
    for (double m : b.min_coordinate) dips += m < 1e-4;
    std::ostringstream name;
    name << "fraction of paths below 1e-4, kappa=" << kappa;
    r.rows.push_back(lt(name.str(), static_cast<double>(dips) / static_cast<double>(paths), 0.01));
  }
  r.notes.push_back("positivity runs: d=2, eps=0.5, delta=0.1, p0=(0.3,0.7), T=1, dt=1e-4");
  return r;
}

CheckResult exp_moment_case(const CheckOptions& opt) {
  CheckResult r{"6", "exponential moment scaling", {}, {}};
  const ModelSpec s = base_spec(2, 0.5, 8.0 * 0.25, 0.14, 1.0);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const double lambda = 1.0;
  const ExpMomentStudy st =
      exp_moment_study(s, lambda, {0.05, 0.1, 0.2, 0.4}, scaled(4000, opt), cfg, opt.seed);
  r.rows.push_back(le("|slope / (-lambda) - 1|", std::abs(st.fit.slope / -lambda - 1.0), tol(opt, 0.2)));
  std::ostringstream os;
  os << std::setprecision(4) << "slope=" << st.fit.slope << " +- " << st.fit.slope_se;
  r.notes.push_back(os.str());
  return r;
}

FeedbackStrategy particle_rates(int d) {
  // Base rates r_ij scaled by (1 + mu_j).
  static const double base[3][3] = {{0.0, 1.0, 0.5}, {0.3, 0.0, 0.8}, {0.6, 0.2, 0.0}};
  return FeedbackStrategy(
      [d](double, const SimplexPoint& mu, RateMatrix& out) {
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            if (i != j) out(i, j) = base[i][j] * (1.0 + mu[j]);
          }
        }
      },
      2.0);
}

CheckResult particle_moment_case(const CheckOptions& opt) {
  CheckResult r{"7", "particle one-step moments", {}, {}};
  const ParticleEnsemble ens = stratified_ensemble(3, 1000, {0.2, 0.3, 0.5});
  Clock clock;
  const MomentDiagnostics md =
      moment_diagnostics(ens, particle_rates(3), 0.5, scaled(100000, opt, 1000), opt.seed);
  const double secs = clock.seconds();
  r.rows.push_back(le("max |z| over mean and covariance entries", md.max_abs_z, tol(opt, 3.0)));
  if (opt.scale >= 1.0) r.rows.push_back(timing("runtime s", secs, 60.0));
  return r;
}

CheckResult convergence_case(const CheckOptions& opt) {
  CheckResult r{"8", "diffusion approximation", {}, {}};
  const FeedbackStrategy rates(
      [](double, const SimplexPoint& mu, RateMatrix& out) {
        out(0, 1) = 1.0 * (1.0 + mu[1]);
        out(1, 0) = 0.5 * (1.0 + mu[0]);
      },
      2.0);
  for (double eps : {0.0, 0.5}) {
    ConvergenceSetup cs;
    cs.eps_particle = eps;
    cs.p0 = {0.5, 0.5};
    cs.N_list = {100, 400, 1600};
    cs.n_paths = scaled(1000, opt);
    cs.sde_paths = scaled(1000, opt);
    const ConvergenceTable t = convergence_study(rates, cs, opt.seed);
    std::ostringstream name;
    name << "gaps non-increasing in N within 1 SE, particle eps=" << eps;
    r.rows.push_back(flag(name.str(), t.monotone));
    for (const ConvergenceRow& row : t.rows) {
      std::ostringstream os;
      os << std::setprecision(3) << "eps=" << eps << " N=" << row.N << " t=" << row.t << ' '
         << (row.moment == 1 ? "mean" : "variance") << " gap=" << row.gap << " se=" << row.se;
      r.notes.push_back(os.str());
    }
  }
  return r;
}

CheckResult coupling_case(const CheckOptions& opt) {
  CheckResult r{"9", "reflection coupling", {}, {}};
  const ModelSpec s = base_spec(3, 0.5, 2.0, 0.14, 1.0);
  const CouplingSweep sw = coupling_sweep(s, FeedbackStrategy::zero(), 1, {0.3}, {0.5, 0.5},
                                          {0.016, 0.008, 0.004, 0.002, 0.001}, 1000,
                                          scaled(4000, opt), opt.seed);
  bool strict = true;
  for (std::size_t k = 1; k < sw.results.size(); ++k) {
    if (sw.results[k].failure > sw.results[k - 1].failure) strict = false;
  }
  for (const CouplingResult& c : sw.results) {
    std::ostringstream os;
    os << std::setprecision(4) << "gap=" << c.gap << " failure=" << c.failure << " +- " << c.se;
    r.notes.push_back(os.str());
  }
  r.rows.push_back(flag("failure non-increasing as the gap shrinks", strict));
  r.rows.push_back(gt("fitted decay exponent", sw.fit.slope, 0.0));

  const RotatedNoiseReport rn = rotated_noise_check(scaled(100000, opt, 1000), 3, 1e-3, opt.seed);
  r.rows.push_back(le("rotated noise variance |z|", rn.max_variance_z, tol(opt, 3.0)));
  r.rows.push_back(le("rotated noise covariance |z|", rn.max_covariance_z, tol(opt, 3.0)));
  r.rows.push_back(le("R W R antisymmetry defect", rn.antisymmetry_defect, 1e-12));

  // Reflection identities on random directions.
  Stream rng(derive_key(opt.seed, Domain::kRotation), 999, 0);
  double invol = 0.0, symm = 0.0, flip = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Vec a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    const Eigen::MatrixXd R = reflection_matrix(a, b);
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) z[i] = a[i] - b[i];
    invol = std::max(invol, (R * R - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff());
    symm = std::max(symm, (R - R.transpose()).cwiseAbs().maxCoeff());
    flip = std::max(flip, (R * z + z).cwiseAbs().maxCoeff());
  }
  r.rows.push_back(le("max |R R - I|", invol, 1e-12));
  r.rows.push_back(le("max |R - R^T|", symm, 1e-12));
  r.rows.push_back(le("max |R Z + Z|", flip, 1e-12));
  return r;
}

CheckResult identity_case(const CheckOptions& opt) {
  CheckResult r{"10", "identity in law of the conditioning system", {}, {}};
  const ModelSpec s = base_spec(3, 0.5, 2.0, 0.14, 1.0);
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const IdentityInLawReport rep = identity_in_law_check(s, FeedbackStrategy::zero(), 1, {0.3, 0.35, 0.35},
                                                        scaled(10000, opt), cfg, opt.seed);
  r.rows.push_back(le("max |z| over mean and second moments", rep.max_abs_z, tol(opt, 3.0)));
  return r;
}

CheckResult zero_noise_case(const CheckOptions& opt) {
  CheckResult r{"11", "non-uniqueness at eps=0 and restoration", {}, {}};
  std::vector<double> guesses;
  for (int k = 0; k <= 100; ++k) guesses.push_back(k / 100.0);
  const SimplexPoint p0{0.5, 0.5};
  const double gamma = 2.0;
  auto zero_noise = [&](CostFamily g, double T) {
    ModelSpec s = base_spec(2, 0.0, 0.1, 0.05, T);
    s.g = std::move(g);
    return zero_noise_equilibria(s, p0, guesses).equilibria.size();
  };
  const std::size_t anti = zero_noise(CostFamily::anti_monotone_pair(gamma), 1.0);
  const std::size_t mono =
      zero_noise(CostFamily::linear({-gamma / 2, -gamma / 2}, {{gamma, 0.0}, {0.0, gamma}}), 1.0);
  const std::size_t short_t = zero_noise(CostFamily::anti_monotone_pair(gamma), 0.01);
  r.rows.push_back(ge("equilibria, anti-monotone terminal cost, T=1", static_cast<double>(anti), 2.0));
  r.rows.push_back(eq("equilibria, monotone terminal cost, T=1", static_cast<double>(mono), 1.0));
  r.rows.push_back(eq("equilibria, anti-monotone terminal cost, T=0.01", static_cast<double>(short_t), 1.0));

  ModelSpec s = base_spec(2, 0.5, 61.0 * 0.25, 0.05, 1.0);
  s.g = CostFamily::anti_monotone_pair(gamma);
  const SimplexGrid grid = build_grid(2, 100);
  MasterOptions mo;
  mo.dt = 5e-4;
  mo.lag_init = LagInit::Zero;
  const MasterSolution a = solve_master(s, grid, mo);
  mo.lag_init = LagInit::Terminal;
  const MasterSolution b = solve_master(s, grid, mo);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.U.values.size(); ++k) {
    diff = std::max(diff, std::abs(a.U.values[k] - b.U.values[k]));
  }
  r.rows.push_back(le("sup |U_zero-lag - U_terminal-lag|", diff, 1e-6));

  SchemeConfig cfg;
  cfg.dt = 1e-3;
  const std::size_t paths = scaled(4000, opt);
  const int stride = step_count(s.T, cfg.dt) / 2;
  const EquilibriumPaths pa = simulate_equilibrium(a, p0, paths, cfg, opt.seed, stride);
  const EquilibriumPaths pb = simulate_equilibrium(b, p0, paths, cfg, opt.seed + 1, stride);
  double worst = 0.0;
  for (std::size_t tn = 1; tn < pa.paths.times.size(); ++tn) {
    std::vector<double> xa(paths), xb(paths);
    for (std::size_t k = 0; k < paths; ++k) {
      xa[k] = pa.paths.P[k][tn][0];
      xb[k] = pb.paths.P[k][tn][0];
    }
    for (const auto& [ma, mb] : {std::pair{mean_se(xa), mean_se(xb)}, std::pair{variance_se(xa), variance_se(xb)}}) {
      worst = std::max(worst, std::abs(z_score(ma.mean, ma.se, mb.mean, mb.se)));
    }
  }
  r.rows.push_back(le("path moment |z| between the two solutions", worst, tol(opt, 3.0)));
  r.notes.push_back("restoration instance: eps=0.5, kappa=15.25, delta=0.05, n=100, dt=5e-4");
  return r;
}

// ---------------------------------------------------------------------------
// Determinism through the CLI.

nlohmann::json small_model(int d, double eps) {
  ModelSpec s = base_spec(d, eps, 2.0, 0.1, 1.0);
  if (d == 2) s.g = CostFamily::anti_monotone_pair(1.0);
  return s.to_json();
}

std::vector<nlohmann::json> determinism_configs() {
  using nlohmann::json;
  const json numerics = {{"grid_n", 20},  {"dt_pde", 1e-3},  {"dt_sde", 1e-2},
                         {"n_paths", 64}, {"picard_tol", 1e-9}};
  std::vector<json> out;
  auto add = [&](const std::string& cmd, json model, json params) {
    out.push_back({{"command", cmd}, {"model", std::move(model)}, {"numerics", numerics},
                   {"seed", 12345}, {"params", std::move(params)}});
  };
  add("solve-master", small_model(2, 0.5), json::object());
  add("simulate-mfg", small_model(2, 0.5), {{"p0", {0.3, 0.7}}, {"store_stride", 10}});
  add("verify-value", small_model(2, 0.5), {{"p0", {0.3, 0.7}}, {"l", 0}});
  add("zero-noise", small_model(2, 0.0), {{"p0", {0.5, 0.5}}, {"n_guesses", 11}});
  add("linear-kimura", small_model(2, 0.5), {{"terminal", "quadratic"}, {"coordinate", 0}});
  add("coupling", small_model(3, 0.5),
      {{"m", 1}, {"po", {0.3}}, {"p", {0.5, 0.5}}, {"gaps", {0.016, 0.004}}, {"steps", 100}});
  add("particle", small_model(3, 0.5),
      {{"N", 60}, {"eps_particle", 0.5}, {"p0", {0.2, 0.3, 0.5}}, {"replicates", 200}});
  add("exp-moment", small_model(2, 0.5), {{"lambda", 1.0}, {"starts", {0.1, 0.4}}});
  add("diagnostics", small_model(2, 0.5), json::object());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Empty string when both runs match, otherwise a description of the first difference.
std::string compare_runs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> fa, fb;
  for (const auto& e : fs::directory_iterator(a)) fa.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) fb.push_back(e.path().filename().string());
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return "different output file sets";
  if (fa.empty()) return "no outputs";
  for (const std::string& name : fa) {
    if (name == "manifest.json") {
      auto ja = nlohmann::json::parse(slurp(a / name));
      auto jb = nlohmann::json::parse(slurp(b / name));
      ja.erase("wall_time_s");
      jb.erase("wall_time_s");
      for (auto* j : {&ja, &jb}) {
        j->erase("output_dir");
        if (j->contains("config")) (*j)["config"].erase("output_dir");
      }
      if (ja != jb) return "manifest differs";
    } else if (slurp(a / name) != slurp(b / name)) {
      return name + " differs";
    }
  }
  return {};
}

CheckResult determinism_case(const CheckOptions& opt) {
  CheckResult r{"12", "determinism", {}, {}};
  if (opt.cli_path.empty() || !fs::exists(opt.cli_path)) {
    r.rows.push_back(flag("CLI binary available", false));
    return r;
  }
  const fs::path root = fs::temp_directory_path() / ("kimura_mfg_determinism_" + std::to_string(opt.seed));
  fs::remove_all(root);
  fs::create_directories(root);
  for (nlohmann::json cfg : determinism_configs()) {
    const std::string cmd = cfg["command"];
    std::string problem;
    for (const char* threads : {"1", "3"}) {
      const fs::path dir = root / (cmd + "_t" + threads);
      cfg["output_dir"] = dir.string();
      const fs::path cfg_path = root / (cmd + "_t" + threads + ".json");
      std::ofstream(cfg_path) << cfg.dump(2);
      const std::string line = "\"" + opt.cli_path + "\" --config \"" + cfg_path.string() +
                               "\" --threads " + threads + " > \"" + (root / "log.txt").string() +
                               "\" 2>&1";
      const int rc = std::system(line.c_str());
      if (rc != 0) problem = "exit status " + std::to_string(rc);
    }
    if (problem.empty()) problem = compare_runs(root / (cmd + "_t1"), root / (cmd + "_t3"));
    r.rows.push_back(flag(cmd + " byte-identical (1 vs 3 threads)", problem.empty()));
    if (!problem.empty()) r.notes.push_back(cmd + ": " + problem);
  }
  fs::remove_all(root);
  return r;
}

}  // namespace

bool CheckResult::pass() const {
  if (rows.empty()) return false;
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

CheckResult run_acceptance(int id, const CheckOptions& opt) {
  switch (id) {
    case 1:
      return constant_case(opt, true);
    case 2:
      return oracle_case(opt, true, true);
    case 3:
      return value_case(opt, value_setup());
    case 4:
      return suboptimality_case(opt, value_setup());
    case 5:
      return conservation_case(opt);
    case 6:
      return exp_moment_case(opt);
    case 7:
      return particle_moment_case(opt);
    case 8:
      return convergence_case(opt);
    case 9:
      return coupling_case(opt);
    case 10:
      return identity_case(opt);
    case 11:
      return zero_noise_case(opt);
    case 12:
      return determinism_case(opt);
    default:
      throw InvalidInput("no acceptance criterion " + std::to_string(id));
  }
}

std::vector<std::string> check_case_names() {
  std::vector<std::string> names = {"constant", "quadratic-oracle", "linear-oracle"};
  for (int k = 1; k <= 11; ++k) names.push_back("acc-" + std::to_string(k));
  return names;
}

CheckResult run_check_case(const std::string& name, const CheckOptions& opt) {
  if (name == "constant") return constant_case(opt, false);
  if (name == "quadratic-oracle") return oracle_case(opt, false, true);
  if (name == "linear-oracle") return oracle_case(opt, true, false);
  if (name.rfind("acc-", 0) == 0) {
    const std::string num = name.substr(4);
    for (int k = 1; k <= 11; ++k) {
      if (num == std::to_string(k)) return run_acceptance(k, opt);
    }
  }
  throw InvalidInput("unknown check case '" + name + "'");
}

void print_check(std::ostream& os, const CheckResult& r) {
  os << (r.pass() ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.title << '\n';
  for (const CheckRow& row : r.rows) {
    os << "    " << (row.pass ? "ok  " : "FAIL") << "  " << row.name << ": " << std::setprecision(6)
       << row.value;
    if (row.op != "flag") os << ' ' << row.op << ' ' << row.bound;
    os << '\n';
  }
  for (const std::string& n : r.notes) os << "      " << n << '\n';
}

nlohmann::json to_json(const CheckResult& r, bool include_timing) {
  nlohmann::json j;
  j["id"] = r.id;
  j["title"] = r.title;
  j["pass"] = r.pass();
  j["rows"] = nlohmann::json::array();
  for (const CheckRow& row : r.rows) {
    if (row.timing && !include_timing) continue;
    j["rows"].push_back({{"name", row.name},
                         {"value", row.value},
                         {"op", row.op},
                         {"bound", row.bound},
                         {"pass", row.pass}});
  }
  j["notes"] = r.notes;
  return j;
}

}  // namespace kmfg
