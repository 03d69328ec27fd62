#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kimura_mfg/model.hpp"
#include "kimura_mfg/rng.hpp"
#include "kimura_mfg/stats.hpp"
#include "kimura_mfg/wf_sde.hpp"

namespace kmfg {

// sqrt(1 - |p0|_1)
double sigma_eval(const Vec& p0);

// I - 2 Z Z^T / |Z|^2 with Z = pt - qt; identity when Z = 0.
Eigen::MatrixXd reflection_matrix(const Vec& pt, const Vec& qt);

// First m coordinates kept (p0); the rest renormalised to the simplex p.
struct ConditioningState {
  Vec po;
  SimplexPoint p;

  double sigma2() const;
  // X = (po, sigma^2 p)
  SimplexPoint reconstruct() const;
};

ConditioningState make_conditioning_state(const Vec& po, const SimplexPoint& p);

// Drift b(t, x) = drift_a(t, proj(x)) of the full model, used by the
// conditioning system.
Vec conditioning_drift(double t, const SimplexPoint& x, const FeedbackStrategy& alpha,
                       const ModelSpec& spec);

// One Euler step of the conditioning system. dw is the (d-m)-dimensional
// antisymmetric increment of the p-block, dwo the d-dimensional one whose
// rows i < m drive po.
ConditioningState step_conditioning(const ConditioningState& s, double t, double dt,
                                    const NoiseIncrement& dw, const NoiseIncrement& dwo,
                                    const FeedbackStrategy& alpha, const ModelSpec& spec);

enum class Trigger { None, Tau, Varrho, Sigma, Rho };
std::string to_string(Trigger t);

struct CoupledState {
  ConditioningState P, Q;
  double t = 0.0;
  bool tau = false, varrho = false, sigma = false, rho = false;
  Trigger first = Trigger::None;  // earliest trigger; ties resolved in the order above
  int first_step = -1;
  int steps = 0;

  Vec Z() const;  // sqrt(P) - sqrt(Q) on the p-blocks
};

CoupledState make_coupled_state(const ConditioningState& P, const ConditioningState& Q);

struct CouplingOptions {
  double tau_threshold = 1e-9;
  // Also count a crossing of the hyperplane orthogonal to the previous Z
  // inside a step, using the Brownian-bridge hitting probability.
  bool bridge = true;
};

// Advances both members with the same noise, the Q p-block with R dw R.
// bridge_u is a uniform in [0, 1) used by the bridge test.
void step_coupled(CoupledState& s, double dt, const NoiseIncrement& dw, const NoiseIncrement& dwo,
                  double bridge_u, const FeedbackStrategy& alpha, const ModelSpec& spec,
                  const CouplingOptions& opt = {});

struct RotatedNoiseReport {
  double antisymmetry_defect = 0.0;
  double max_variance_z = 0.0;    // entry variances against dt
  double max_covariance_z = 0.0;  // distinct entries against 0
  std::vector<double> variances;
};

// Accumulates R dW R along a random unit-direction path in dimension k.
RotatedNoiseReport rotated_noise_check(std::size_t n_steps, int k, double dt, std::uint64_t seed);

struct CouplingResult {
  double gap = 0.0;  // |p - q|
  double horizon = 0.0;
  double failure = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
  std::size_t count_tau = 0, count_varrho = 0, count_sigma = 0, count_rho = 0, count_none = 0;
  std::vector<std::string> warnings;
};

struct CouplingSetup {
  int m = 1;
  Vec po, qo;
  SimplexPoint p, q;
  double horizon = 0.1;
  int steps = 1000;
};

// Fraction of paths where sigma fires strictly before tau, varrho, rho, or
// nothing fires by the horizon.
CouplingResult coupling_experiment(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                   const CouplingSetup& setup, std::size_t n_paths,
                                   std::uint64_t seed, const CouplingOptions& opt = {});

struct CouplingSweep {
  std::vector<CouplingResult> results;
  LineFit fit;  // log failure against log gap
  bool monotone = true;
};

// Gaps along (1, -1, 0, ...) / sqrt 2 from p, horizon gap^(1/3).
CouplingSweep coupling_sweep(const ModelSpec& spec, const FeedbackStrategy& alpha, int m,
                             const Vec& po, const SimplexPoint& p, const std::vector<double>& gaps,
                             int steps, std::size_t n_paths, std::uint64_t seed,
                             const CouplingOptions& opt = {});

struct MomentComparison {
  double t = 0.0;
  int coordinate = 0;
  int order = 1;  // 1 = mean, 2 = raw second moment
  MeanSe conditioned, direct;
  double z = 0.0;
};

struct IdentityInLawReport {
  std::vector<MomentComparison> rows;
  double max_abs_z = 0.0;
};

// Rebuilt X = (P0, sigma^2 P) against the full SDE from the same start.
IdentityInLawReport identity_in_law_check(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                          int m, const SimplexPoint& x0, std::size_t n_paths,
                                          const SchemeConfig& cfg, std::uint64_t seed);

nlohmann::json to_json(const CouplingResult& r);

}  // namespace kmfg
