#include "commands.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kimura_mfg/checks.hpp"
#include "kimura_mfg/coupling_lab.hpp"
#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/kimura_pde.hpp"
#include "kimura_mfg/master_solver.hpp"
#include "kimura_mfg/mfg_system.hpp"
#include "kimura_mfg/particle_system.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
T param(const json& p, const char* key, T fallback) {
  if (!p.contains(key)) return fallback;
  try {
    return p.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(std::string("params.") + key + " has the wrong type");
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

ModelSpec load_model(const RunContext& ctx, ValidationOptions vo = {}) {
  if (ctx.model_json.is_null()) throw InvalidInput("config needs a 'model' object");
  ModelSpec spec = ModelSpec::from_json(ctx.model_json);
  for (const std::string& w : spec.validate(vo)) std::cerr << "warning: " << w << '\n';
  return spec;
}

LagInit lag_from(const std::string& s) {
  if (s == "previous") return LagInit::Previous;
  if (s == "zero") return LagInit::Zero;
  if (s == "terminal") return LagInit::Terminal;
  throw InvalidInput("params.lag_init must be previous, zero or terminal");
}

MasterSolution master_from(const RunContext& ctx, const ModelSpec& spec) {
  MasterOptions mo;
  mo.dt = ctx.numerics.dt_pde;
  mo.picard_tol = ctx.numerics.picard_tol;
  mo.picard_max = param(ctx.params, "picard_max", mo.picard_max);
  mo.lag_init = lag_from(param<std::string>(ctx.params, "lag_init", "previous"));
  if (mo.picard_max < 1) throw InvalidInput("params.picard_max must be positive");
  return solve_master(spec, build_grid(spec.d, ctx.numerics.grid_n), mo);
}

SimplexPoint start_point(const RunContext& ctx, int d) {
  SimplexPoint fallback(d, 1.0 / d);
  SimplexPoint p0 = to_simplex_point(param(ctx.params, "p0", fallback));
  if (static_cast<int>(p0.size()) != d) throw InvalidInput("params.p0 has the wrong dimension");
  return p0;
}

SchemeConfig sde_config(const RunContext& ctx) {
  SchemeConfig cfg;
  cfg.dt = ctx.numerics.dt_sde;
  return cfg;
}

void write_master_fields(RunContext& ctx, const MasterSolution& sol) {
  {
    auto os = open_out(ctx.output("grid.csv"));
    write_grid_csv(os, sol.grid());
  }
  for (int i = 0; i < sol.spec.d; ++i) {
    auto os = open_out(ctx.output("U_" + std::to_string(i + 1) + ".csv"));
    write_field_csv(os, sol.U, i);
  }
  auto os = open_out(ctx.output("picard.csv"));
  os << "step,iterations,last_change\n";
  for (std::size_t n = 0; n < sol.report.iterations.size(); ++n) {
    os << n << ',' << sol.report.iterations[n] << ',' << num(sol.report.last_change[n]) << '\n';
  }
}

json picard_summary(const MasterSolution& sol) {
  return {{"max_iterations_per_step", sol.report.max_iterations()},
          {"steps", sol.report.iterations.size()}};
}

// ---------------------------------------------------------------------------

int cmd_solve_master(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const MasterSolution sol = master_from(ctx, spec);
  write_master_fields(ctx, sol);
  ctx.write_json("summary.json", {{"picard", picard_summary(sol)}, {"components", spec.d}});
  return kOk;
}

int cmd_simulate_mfg(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const MasterSolution sol = master_from(ctx, spec);
  const SimplexPoint p0 = start_point(ctx, spec.d);
  const int stride = param(ctx.params, "store_stride", 1);
  const EquilibriumPaths eq =
      simulate_equilibrium(sol, p0, ctx.numerics.n_paths, sde_config(ctx), ctx.seed, stride);
  auto os = open_out(ctx.output("paths.csv"));
  os << "path_id,t";
  for (int i = 1; i <= spec.d; ++i) os << ",P_" << i;
  for (int i = 1; i <= spec.d; ++i) os << ",u_" << i;
  os << '\n';
  for (std::size_t k = 0; k < eq.paths.n_paths(); ++k) {
    for (std::size_t tn = 0; tn < eq.paths.times.size(); ++tn) {
      os << eq.paths.stream_ids[k] << ',' << num(eq.paths.times[tn]);
      for (double x : eq.paths.P[k][tn]) os << ',' << num(x);
      for (double x : eq.u[k][tn]) os << ',' << num(x);
      os << '\n';
    }
  }
  ctx.write_json("summary.json", {{"picard", picard_summary(sol)},
                                  {"clip_events", eq.paths.clips.clip_events},
                                  {"clip_total_deficit", eq.paths.clips.total_deficit}});
  return kOk;
}

int cmd_verify_value(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const MasterSolution sol = master_from(ctx, spec);
  const SimplexPoint p0 = start_point(ctx, spec.d);
  const int l = param(ctx.params, "l", 0);
  if (l < 0 || l >= spec.d) throw InvalidInput("params.l out of range");
  const SchemeConfig cfg = sde_config(ctx);
  const ValueCheck vc = verify_value(sol, p0, l, ctx.numerics.n_paths, cfg, ctx.seed);
  json out = {{"l", l},
              {"p0", p0},
              {"master_value", vc.master_value},
              {"estimate", vc.estimate.mean},
              {"se", vc.estimate.se},
              {"gap", vc.gap},
              {"z", vc.z}};
  // Registered deviations: zero control, +1 on the first transition, doubled rates.
  const FeedbackStrategy star = master_feedback(sol);
  const FeedbackStrategy plus_one(
      [&](double t, const SimplexPoint& p, RateMatrix& r) {
        star.rates(t, p, r);
        r(l, (l + 1) % spec.d) += 1.0;
      },
      star.sup_bound() + 1.0);
  const FeedbackStrategy doubled(
      [&](double t, const SimplexPoint& p, RateMatrix& r) {
        star.rates(t, p, r);
        for (double& x : r.r) x *= 2.0;
      },
      2.0 * star.sup_bound());
  out["deviations"] = json::array();
  for (const auto& [name, beta] :
       {std::pair<std::string, FeedbackStrategy>{"zero", FeedbackStrategy::zero()},
        {"plus_one", plus_one},
        {"doubled", doubled}}) {
    const ProbeResult pr = suboptimality_probe(sol, p0, l, beta, ctx.numerics.n_paths, cfg, ctx.seed);
    out["deviations"].push_back({{"name", name}, {"gap", pr.gap.mean}, {"se", pr.gap.se}, {"z", pr.z}});
  }
  ctx.write_json("value.json", out);
  return kOk;
}

int cmd_zero_noise(RunContext& ctx) {
  ValidationOptions vo;
  vo.allow_zero_noise = true;
  const ModelSpec spec = load_model(ctx, vo);
  const SimplexPoint p0 = start_point(ctx, spec.d);
  std::vector<double> guesses = param(ctx.params, "guesses", std::vector<double>{});
  if (guesses.empty()) {
    const int n = param(ctx.params, "n_guesses", 101);
    if (n < 2) throw InvalidInput("params.n_guesses must be at least 2");
    for (int k = 0; k < n; ++k) guesses.push_back(static_cast<double>(k) / (n - 1));
  }
  ZeroNoiseOptions opt;
  opt.time_steps = param(ctx.params, "time_steps", opt.time_steps);
  opt.damping = param(ctx.params, "damping", opt.damping);
  opt.tol = param(ctx.params, "tol", opt.tol);
  opt.max_iterations = param(ctx.params, "max_iterations", opt.max_iterations);
  opt.cluster_tol = param(ctx.params, "cluster_tol", opt.cluster_tol);
  const ZeroNoiseReport rep = zero_noise_equilibria(spec, p0, guesses, opt);
  ctx.write_json("zero_noise.json", to_json(rep));
  auto os = open_out(ctx.output("flows.csv"));
  os << "equilibrium,t,p_1,p_2,u_1,u_2\n";
  for (std::size_t e = 0; e < rep.equilibria.size(); ++e) {
    const ZeroNoiseEquilibrium& q = rep.equilibria[e];
    for (std::size_t n = 0; n < q.times.size(); ++n) {
      os << e << ',' << num(q.times[n]) << ',' << num(q.flow[n][0]) << ',' << num(q.flow[n][1])
         << ',' << num(q.value[n][0]) << ',' << num(q.value[n][1]) << '\n';
    }
  }
  return kOk;
}

int cmd_linear_kimura(RunContext& ctx) {
  ValidationOptions vo;
  vo.allow_zero_forcing = true;
  const ModelSpec spec = load_model(ctx, vo);
  const std::string terminal = param<std::string>(ctx.params, "terminal", "coordinate");
  const int k = param(ctx.params, "coordinate", 0);
  if (k < 0 || k >= spec.d) throw InvalidInput("params.coordinate out of range");
  if (terminal != "coordinate" && terminal != "quadratic") {
    throw InvalidInput("params.terminal must be coordinate or quadratic");
  }
  const bool quad = terminal == "quadratic";
  // Forced Wright-Fisher drift phi(p_j) - p_j sum_k phi(p_k): zero-sum by construction.
  std::function<void(double, const SimplexPoint&, Vec&)> pull;
  if (spec.kappa > 0.0) {
    pull = [&spec](double, const SimplexPoint& p, Vec& out) {
      double total = 0.0;
      for (double x : p) total += spec.phi(std::max(x, 0.0));
      for (double& v : out) v = -total;
    };
  }
  const auto problem = LinearKimuraProblem::from_parts(
      spec.eps, spec.T, spec.kappa, spec.delta, nullptr, pull, nullptr,
      [k, quad](const SimplexPoint& p) { return quad ? p[k] * p[k] : p[k]; });
  const SimplexGrid grid = build_grid(spec.d, ctx.numerics.grid_n);
  const FieldOnGrid u = solve_linear(problem, grid, ctx.numerics.dt_pde);
  {
    auto os = open_out(ctx.output("grid.csv"));
    write_grid_csv(os, grid);
  }
  {
    auto os = open_out(ctx.output("field.csv"));
    write_field_csv(os, u);
  }
  json summary = {{"terminal", terminal}, {"coordinate", k}};
  if (spec.kappa == 0.0) {
    // Closed forms hold without forcing.
    double err = 0.0;
    for (std::size_t tn = 0; tn < u.n_times(); ++tn) {
      const double decay = std::exp(-spec.eps * spec.eps * (spec.T - u.times[tn]));
      for (std::size_t node = 0; node < grid.size(); ++node) {
        const double x = grid.nodes[node][k];
        const double exact = quad ? x + (x * x - x) * decay : x;
        err = std::max(err, std::abs(u.at(tn, node) - exact));
      }
    }
    summary["oracle_sup_error"] = err;
  }
  const HolderEstimate he = holder_estimate(u.slice(0), grid);
  summary["holder"] = {{"unbounded", he.unbounded},
                       {"exponent", he.exponent},
                       {"constant", he.constant},
                       {"bins_used", he.bins_used}};
  ctx.write_json("summary.json", summary);
  return kOk;
}

int cmd_coupling(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const int m = param(ctx.params, "m", 1);
  const Vec po = param(ctx.params, "po", Vec{0.3});
  const Vec p = param(ctx.params, "p", Vec(spec.d - m, 1.0 / (spec.d - m)));
  const Vec gaps = param(ctx.params, "gaps", Vec{0.016, 0.008, 0.004, 0.002, 0.001});
  const int steps = param(ctx.params, "steps", 1000);
  const CouplingSweep sw = coupling_sweep(spec, FeedbackStrategy::zero(), m, po, p, gaps, steps,
                                          ctx.numerics.n_paths, ctx.seed);
  json out;
  out["results"] = json::array();
  for (const CouplingResult& r : sw.results) out["results"].push_back(to_json(r));
  out["fit"] = {{"slope", sw.fit.slope}, {"intercept", sw.fit.intercept}, {"slope_se", sw.fit.slope_se}};
  out["monotone"] = sw.monotone;
  const RotatedNoiseReport rn =
      rotated_noise_check(ctx.numerics.n_paths * 10, spec.d - m, ctx.numerics.dt_sde, ctx.seed);
  out["rotated_noise"] = {{"antisymmetry_defect", rn.antisymmetry_defect},
                          {"max_variance_z", rn.max_variance_z},
                          {"max_covariance_z", rn.max_covariance_z}};
  ctx.write_json("coupling.json", out);
  auto os = open_out(ctx.output("sweep.csv"));
  os << "gap,horizon,failure,se,tau,varrho,sigma,rho,none\n";
  for (const CouplingResult& r : sw.results) {
    os << num(r.gap) << ',' << num(r.horizon) << ',' << num(r.failure) << ',' << num(r.se) << ','
       << r.count_tau << ',' << r.count_varrho << ',' << r.count_sigma << ',' << r.count_rho << ','
       << r.count_none << '\n';
  }
  return kOk;
}

FeedbackStrategy particle_strategy(const RunContext& ctx, int d) {
  const std::vector<Vec> base = param(ctx.params, "rates", std::vector<Vec>(d, Vec(d, 1.0)));
  if (static_cast<int>(base.size()) != d) throw InvalidInput("params.rates must be d x d");
  double sup = 0.0;
  for (const Vec& row : base) {
    if (static_cast<int>(row.size()) != d) throw InvalidInput("params.rates must be d x d");
    for (double x : row) {
      if (x < 0.0) throw InvalidInput("params.rates must be nonnegative");
      sup = std::max(sup, x);
    }
  }
  // Mean-field dependence r_ij (1 + mu_j).
  return FeedbackStrategy(
      [base, d](double, const SimplexPoint& mu, RateMatrix& out) {
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            if (i != j) out(i, j) = base[i][j] * (1.0 + mu[j]);
          }
        }
      },
      2.0 * sup);
}

int cmd_particle(RunContext& ctx) {
  ValidationOptions vo;
  vo.allow_zero_forcing = true;
  const ModelSpec spec = load_model(ctx, vo);
  const int d = spec.d;
  const std::size_t N = param<std::size_t>(ctx.params, "N", 1000);
  const double eps = param(ctx.params, "eps_particle", 0.5);
  const SimplexPoint p0 = start_point(ctx, d);
  const std::string init = param<std::string>(ctx.params, "initial", "stratified");
  if (N == 0) throw InvalidInput("params.N must be positive");
  ParticleEnsemble ens;
  if (init == "stratified") {
    ens = stratified_ensemble(d, N, p0);
  } else if (init == "random") {
    ens = random_ensemble(d, N, p0, ctx.seed, 0);
  } else {
    throw InvalidInput("params.initial must be stratified or random");
  }
  const FeedbackStrategy up = particle_strategy(ctx, d);
  const int M = static_cast<int>(std::floor(static_cast<double>(N) * spec.T + 1e-9));
  const bool players = param(ctx.params, "record_players", true);
  const ParticleSeeds seeds = ParticleSeeds::from_seed(ctx.seed);
  const ParticleTrajectory tr = run_particles(ens, up, eps, M, seeds, 0, players);
  {
    auto os = open_out(ctx.output("trajectory.csv"));
    os << "m,i,mu_bar_i\n";
    for (std::size_t m = 0; m < tr.mu.size(); ++m) {
      for (int i = 0; i < d; ++i) os << m << ',' << i + 1 << ',' << num(tr.mu[m][i]) << '\n';
    }
  }
  if (players) {
    auto os = open_out(ctx.output("players.csv"));
    os << "m,l,X,Y\n";
    for (std::size_t m = 0; m < tr.X.size(); ++m) {
      for (std::size_t l = 0; l < tr.X[m].size(); ++l) {
        os << m << ',' << l << ',' << tr.X[m][l] + 1 << ',' << num(tr.Y[m][l]) << '\n';
      }
    }
  }
  const std::size_t reps = param<std::size_t>(ctx.params, "replicates", ctx.numerics.n_paths);
  const MomentDiagnostics md = moment_diagnostics(ens, up, eps, reps, ctx.seed);
  ctx.write_json("diagnostics.json", {{"N", N}, {"M", M}, {"eps_particle", eps}, {"moments", to_json(md)}});
  return kOk;
}

int cmd_exp_moment(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const double lambda = param(ctx.params, "lambda", 1.0);
  const Vec starts = param(ctx.params, "starts", Vec{0.05, 0.1, 0.2, 0.4});
  const ExpMomentStudy st =
      exp_moment_study(spec, lambda, starts, ctx.numerics.n_paths, sde_config(ctx), ctx.seed);
  json out = {{"lambda", lambda},
              {"gamma", spec.kappa - (1.0 + lambda) * spec.eps * spec.eps / 2.0},
              {"slope", st.fit.slope},
              {"slope_se", st.fit.slope_se},
              {"intercept", st.fit.intercept}};
  ctx.write_json("exp_moment.json", out);
  auto os = open_out(ctx.output("exp_moment.csv"));
  os << "p0,estimate,se\n";
  for (std::size_t k = 0; k < st.p0.size(); ++k) {
    os << num(st.p0[k]) << ',' << num(st.estimate[k].mean) << ',' << num(st.estimate[k].se) << '\n';
  }
  return kOk;
}

int cmd_diagnostics(RunContext& ctx) {
  const ModelSpec spec = load_model(ctx);
  const MasterSolution sol = master_from(ctx, spec);
  const ResidualReport res = residual(sol);
  const RegimeFlags flags = spec.regime();
  json out = {{"picard", picard_summary(sol)},
              {"residual", {{"sup", res.sup}, {"mean", res.mean}}},
              {"regime",
               {{"kappa_ge_half_eps2", flags.kappa_ge_half_eps2},
                {"kappa_ge_61_eps2", flags.kappa_ge_61_eps2},
                {"kappa_ge_61_plus_d_eps2", flags.kappa_ge_61_plus_d_eps2}}}};
  out["holder"] = json::array();
  for (int i = 0; i < spec.d; ++i) {
    const HolderEstimate he = holder_estimate(sol.U.slice(0, i), sol.grid());
    out["holder"].push_back({{"component", i + 1},
                             {"unbounded", he.unbounded},
                             {"exponent", he.exponent},
                             {"constant", he.constant}});
  }
  ctx.write_json("diagnostics.json", out);
  auto os = open_out(ctx.output("residual_t0.csv"));
  os << "node_id";
  for (int i = 1; i <= spec.d; ++i) os << ",r_" << i;
  os << '\n';
  const std::size_t nodes = sol.grid().size();
  for (std::size_t k = 0; k < nodes; ++k) {
    os << k;
    for (int i = 0; i < spec.d; ++i) os << ',' << num(res.field[k * spec.d + i]);
    os << '\n';
  }
  return kOk;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(md, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, out, &len);
  EVP_MD_CTX_free(md);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(out[i]);
  }
  return hex.str();
}

}  // namespace

fs::path RunContext::output(const std::string& name) {
  outputs.push_back(name);
  return output_dir / name;
}

void RunContext::write_json(const std::string& name, const json& j) {
  auto os = open_out(output(name));
  os << j.dump(2) << '\n';
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "solve-master", "simulate-mfg", "verify-value", "zero-noise", "linear-kimura",
      "coupling",     "particle",     "exp-moment",   "diagnostics"};
  return names;
}

RunContext make_context(const json& config, std::optional<std::uint64_t> seed_override) {
  if (!config.is_object()) throw InvalidInput("config must be a JSON object");
  static const std::vector<std::string> keys = {"command", "model",       "numerics", "seed",
                                                "params",  "output_dir", "check"};
  for (const auto& [k, v] : config.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw InvalidInput("unknown config key '" + k + "'");
    }
  }
  RunContext ctx;
  ctx.config = config;
  if (config.contains("command")) {
    ctx.command = config.at("command").get<std::string>();
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), ctx.command) == names.end()) {
      throw InvalidInput("unknown command '" + ctx.command + "'");
    }
  }
  if (config.contains("model")) ctx.model_json = config.at("model");
  if (config.contains("params")) {
    ctx.params = config.at("params");
    if (!ctx.params.is_object()) throw InvalidInput("params must be an object");
  } else {
    ctx.params = json::object();
  }
  if (config.contains("numerics")) {
    const json& n = config.at("numerics");
    if (!n.is_object()) throw InvalidInput("numerics must be an object");
    for (const auto& [k, v] : n.items()) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw InvalidInput("numerics." + k + " must be a positive number");
      }
      if (k == "grid_n") {
        if (!v.is_number_integer()) throw InvalidInput("numerics.grid_n must be an integer");
        ctx.numerics.grid_n = v.get<int>();
      } else if (k == "dt_pde") {
        ctx.numerics.dt_pde = v.get<double>();
      } else if (k == "dt_sde") {
        ctx.numerics.dt_sde = v.get<double>();
      } else if (k == "n_paths") {
        if (!v.is_number_integer()) throw InvalidInput("numerics.n_paths must be an integer");
        ctx.numerics.n_paths = v.get<std::size_t>();
      } else if (k == "picard_tol") {
        ctx.numerics.picard_tol = v.get<double>();
      } else {
        throw InvalidInput("unknown numerics key '" + k + "'");
      }
    }
  }
  if (seed_override) {
    ctx.seed = *seed_override;
  } else if (config.contains("seed")) {
    const json& s = config.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      throw InvalidInput("seed must be a nonnegative integer");
    }
    ctx.seed = s.get<std::uint64_t>();
  }
  ctx.config["seed"] = ctx.seed;
  ctx.output_dir = config.value("output_dir", std::string("kimura_mfg_out"));
  return ctx;
}

int run_command(RunContext& ctx) {
  if (ctx.command.empty()) throw InvalidInput("config needs a 'command'");
  fs::create_directories(ctx.output_dir);
  const std::string& c = ctx.command;
  if (c == "solve-master") return cmd_solve_master(ctx);
  if (c == "simulate-mfg") return cmd_simulate_mfg(ctx);
  if (c == "verify-value") return cmd_verify_value(ctx);
  if (c == "zero-noise") return cmd_zero_noise(ctx);
  if (c == "linear-kimura") return cmd_linear_kimura(ctx);
  if (c == "coupling") return cmd_coupling(ctx);
  if (c == "particle") return cmd_particle(ctx);
  if (c == "exp-moment") return cmd_exp_moment(ctx);
  return cmd_diagnostics(ctx);
}

int run_check(RunContext& ctx) {
  if (!ctx.config.contains("check") || !ctx.config.at("check").is_object()) {
    throw InvalidInput("check mode needs a 'check' object naming a case");
  }
  const json& c = ctx.config.at("check");
  const std::string name = c.value("case", std::string());
  const auto names = check_case_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw InvalidInput("unknown check case '" + name + "'");
  }
  CheckOptions opt;
  opt.seed = ctx.seed;
  opt.scale = c.value("scale", 0.1);
  if (!(opt.scale > 0.0)) throw InvalidInput("check.scale must be positive");
  if (c.contains("tolerance")) opt.tolerance = c.at("tolerance").get<double>();
  fs::create_directories(ctx.output_dir);
  const CheckResult r = run_check_case(name, opt);
  print_check(std::cout, r);
  ctx.write_json("check.json", to_json(r, false));
  return r.pass() ? kOk : kCheckFailed;
}

void write_manifest(const RunContext& ctx, double wall_time_s) {
  json m;
  m["artifact"] = "kimura_mfg";
  m["version"] = kVersion;
  m["config"] = ctx.config;
  m["output_dir"] = ctx.output_dir.string();
  m["outputs"] = json::array();
  for (const std::string& name : ctx.outputs) {
    const fs::path p = ctx.output_dir / name;
    m["outputs"].push_back({{"file", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  m["wall_time_s"] = wall_time_s;
  std::ofstream os(ctx.output_dir / "manifest.json", std::ios::binary);
  os << m.dump(2) << '\n';
}

}  // namespace kmfg::cli
