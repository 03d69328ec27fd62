#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "kimura_mfg/master_solver.hpp"
#include "kimura_mfg/stats.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

// Rates (U^i - U^j)_+ read from the master solution. The solution must
// outlive the returned strategy.
FeedbackStrategy master_feedback(const MasterSolution& sol);

struct EquilibriumPaths {
  PathBundle paths;
  std::vector<std::vector<Vec>> u;  // [path][stored time] = U(t, P_t)
};

EquilibriumPaths simulate_equilibrium(const MasterSolution& sol, const SimplexPoint& p0,
                                      std::size_t n_paths, const SchemeConfig& cfg,
                                      std::uint64_t seed, int store_stride = 1);

struct ValueCheck {
  MeanSe estimate;
  double master_value = 0.0;
  double gap = 0.0;  // estimate - master value
  double z = 0.0;
};

ValueCheck verify_value(const MasterSolution& sol, const SimplexPoint& p0, int l,
                        std::size_t n_paths, const SchemeConfig& cfg, std::uint64_t seed);

struct ProbeResult {
  MeanSe gap;  // paired J(beta_alt) - J(beta*)
  double z = 0.0;
};

ProbeResult suboptimality_probe(const MasterSolution& sol, const SimplexPoint& p0, int l,
                                const FeedbackStrategy& beta_alt, std::size_t n_paths,
                                const SchemeConfig& cfg, std::uint64_t seed);

struct ZeroNoiseOptions {
  int time_steps = 200;
  double damping = 0.5;  // weight kept on the previous flow
  double tol = 1e-9;
  int max_iterations = 5000;
  // Converged flows closer than this in sup norm are one equilibrium.
  double cluster_tol = 1e-6;
};

struct ZeroNoiseEquilibrium {
  std::vector<double> times;
  std::vector<SimplexPoint> flow;
  std::vector<Vec> value;  // u_t
  double residual = 0.0;
  double seed_guess = 0.0;
  int iterations = 0;
};

struct ZeroNoiseRun {
  double guess = 0.0;
  bool converged = false;
  int iterations = 0;
  double terminal_p1 = 0.0;
  double residual = 0.0;
};

struct ZeroNoiseReport {
  std::vector<ZeroNoiseEquilibrium> equilibria;  // distinct clusters
  std::vector<ZeroNoiseRun> runs;                // one per guess
};

// d = 2, eps = 0. Guesses are terminal values of P^1; each seeds a linear flow
// from p0 that is refined by damped forward-backward sweeps.
ZeroNoiseReport zero_noise_equilibria(const ModelSpec& spec, const SimplexPoint& p0,
                                      const std::vector<double>& guesses,
                                      const ZeroNoiseOptions& opt = {});

nlohmann::json to_json(const ZeroNoiseReport& r);

}  // namespace kmfg
