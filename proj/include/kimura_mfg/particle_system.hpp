#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "kimura_mfg/model.hpp"
#include "kimura_mfg/rng.hpp"
#include "kimura_mfg/stats.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

// Positions are 0-based states; masses start at 1.
struct ParticleEnsemble {
  int d = 0;
  std::vector<int> X;
  Vec Y;
  int m = 0;

  std::size_t N() const { return X.size(); }
};

ParticleEnsemble make_ensemble(int d, std::vector<int> positions);
// Deterministic allocation by largest remainder, positions sorted by state.
ParticleEnsemble stratified_ensemble(int d, std::size_t N, const SimplexPoint& p0);
// I.i.d. positions drawn from p0 with the initial-condition stream.
ParticleEnsemble random_ensemble(int d, std::size_t N, const SimplexPoint& p0, std::uint64_t seed,
                                 std::uint64_t replicate);

SimplexPoint empirical_measure(const ParticleEnsemble& ens);

// Idiosyncratic (U, initial states) and common (coin, multinomial) keys.
struct ParticleSeeds {
  std::uint64_t idiosyncratic = 0;
  std::uint64_t common = 0;
  static ParticleSeeds from_seed(std::uint64_t seed);
};

// One-step transition of the mean-field strategy: off-diagonal rate / N,
// diagonal 1 - (row sum) / N. Throws if a diagonal entry turns negative.
RateMatrix transition_matrix(const FeedbackStrategy& up_alpha, double t, const SimplexPoint& mu,
                             std::size_t N);

// Quantile of row i at level u, states taken in increasing index.
int transition_quantile(const RateMatrix& A, int i, double u);

// Multinomial counts S(mu) from N uniforms by cumulative thresholds.
std::vector<int> multinomial_counts(const SimplexPoint& mu, const std::vector<double>& V);

struct StepRecord {
  bool coin = false;   // resampling branch taken
  std::vector<int> S;  // multinomial counts when coin is set
};

// Coin and V come from Stream(common, replicate, m); U from
// Stream(idiosyncratic, replicate, m). Only the active branch draws.
StepRecord step_ensemble(ParticleEnsemble& ens, const FeedbackStrategy& up_alpha, double eps,
                         const ParticleSeeds& seeds, std::uint64_t replicate);

Vec conditional_mass_step(const Vec& Q, const SimplexPoint& mu, const FeedbackStrategy& up_beta,
                          double t, bool coin, const std::vector<int>& S, std::size_t N);

struct ParticleTrajectory {
  std::vector<SimplexPoint> mu;     // m = 0..M
  std::vector<std::vector<int>> X;  // per step, empty unless players were recorded
  std::vector<Vec> Y;
  std::vector<StepRecord> steps;
};

ParticleTrajectory run_particles(ParticleEnsemble ens, const FeedbackStrategy& up_alpha, double eps,
                                 int M, const ParticleSeeds& seeds, std::uint64_t replicate,
                                 bool record_players = false);

// Y_M g(X_M, mu_M) + 1/N sum_m Y_m f(m/N, X_m, mu_m)
//   + 1/(2N) sum_m Y_m sum_{j != X_m} upbeta(m/N, X_m, mu_m)(j)^2
double discrete_cost(const std::vector<int>& X, const Vec& Y, const std::vector<SimplexPoint>& mu,
                     const CostFamily& f, const CostFamily& g, const FeedbackStrategy& up_beta,
                     std::size_t N);

// Pairwise drift sum_j (mu_j rate(j, i) - mu_i rate(i, j)) without forcing.
Vec particle_drift(const SimplexPoint& mu, const RateMatrix& rates);

struct MomentDiagnostics {
  SimplexPoint mu;
  Vec mean_expected;  // (1 - eps) a / N
  std::vector<MeanSe> mean_observed;
  std::vector<double> mean_z;
  Vec cov_expected;  // eps Xi / N, upper triangle row by row
  std::vector<MeanSe> cov_observed;
  std::vector<double> cov_z;
  double max_abs_z = 0.0;
};

// Replicated one-step increments of mu from a fixed ensemble.
MomentDiagnostics moment_diagnostics(const ParticleEnsemble& ens, const FeedbackStrategy& up_alpha,
                                     double eps, std::size_t n_replicates, std::uint64_t seed);

struct ConvergenceRow {
  std::size_t N = 0;
  double t = 0.0;
  int moment = 1;  // 1 = mean, 2 = variance, of coordinate 0
  MeanSe particle, sde;
  double gap = 0.0;
  double se = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  // Per N: the row with the largest gap.
  std::vector<ConvergenceRow> worst;
  bool monotone = true;  // gap_{k+1} <= gap_k + sqrt(se_k^2 + se_{k+1}^2)
};

struct ConvergenceSetup {
  double eps_particle = 0.0;
  double T = 0.5;
  SimplexPoint p0;
  std::vector<std::size_t> N_list;
  std::size_t n_paths = 1000;
  double sde_dt = 1e-4;
  std::size_t sde_paths = 1000;
};

// Compares mu at floor(N t), t in {T/2, T}, with the SDE of drift (1 - eps) a
// and noise intensity sqrt(eps) (no forcing).
ConvergenceTable convergence_study(const FeedbackStrategy& up_alpha, const ConvergenceSetup& setup,
                                   std::uint64_t seed);

nlohmann::json to_json(const MomentDiagnostics& r);
nlohmann::json to_json(const ConvergenceTable& r);

}  // namespace kmfg
