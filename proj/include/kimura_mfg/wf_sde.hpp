#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "kimura_mfg/model.hpp"
#include "kimura_mfg/rng.hpp"
#include "kimura_mfg/stats.hpp"

namespace kmfg {

struct SchemeConfig {
  double dt = 1e-3;
  // Q dynamics refuse P entries below this value.
  double clip_floor = 1e-10;
};

// Number of steps covering [0, T]; throws unless dt divides T within 1e-12.
int step_count(double T, double dt);

// Antisymmetric matrix of Brownian increments; only i < j entries are drawn.
struct NoiseIncrement {
  int d = 0;
  std::vector<double> w;

  NoiseIncrement() = default;
  explicit NoiseIncrement(int dim) : d(dim), w(static_cast<std::size_t>(dim) * dim, 0.0) {}
  double operator()(int i, int j) const { return w[static_cast<std::size_t>(i) * d + j]; }
  double& at(int i, int j) { return w[static_cast<std::size_t>(i) * d + j]; }
};

NoiseIncrement draw_increments(int d, double dt, Stream& rng);
void draw_increments(NoiseIncrement& out, double dt, Stream& rng);

struct ClipStats {
  std::uint64_t clip_events = 0;
  double total_deficit = 0.0;

  void merge(const ClipStats& o) {
    clip_events += o.clip_events;
    total_deficit += o.total_deficit;
  }
};

// Negative coordinates go to 0 with the deficit taken from the largest one;
// the largest coordinate then absorbs the rounding residual so the sum is 1.
void mass_conserving_clip(SimplexPoint& p, ClipStats* stats = nullptr);

// One Euler step p + a dt + eps sum_j sqrt(p_i p_j) dW^{ij}, done pair by pair.
SimplexPoint step_P_drift(const SimplexPoint& p, const Vec& a, double eps,
                          const NoiseIncrement& dw, double dt, ClipStats* stats = nullptr);

SimplexPoint step_P(const SimplexPoint& p, double t, const NoiseIncrement& dw,
                    const FeedbackStrategy& alpha, const ModelSpec& spec,
                    const SchemeConfig& cfg, ClipStats* stats = nullptr);

Vec step_Q(const Vec& q, const SimplexPoint& p, double t, const NoiseIncrement& dw,
           const FeedbackStrategy& beta, const ModelSpec& spec, const SchemeConfig& cfg);
Vec step_Q(const Vec& q, const SimplexPoint& p, const RateMatrix& beta_rates,
           const NoiseIncrement& dw, const ModelSpec& spec, const SchemeConfig& cfg);

struct PathBundle {
  int d = 0;
  std::vector<double> times;                 // stored times
  std::vector<std::vector<SimplexPoint>> P;  // [path][stored time]
  std::vector<std::vector<Vec>> Q;           // empty unless beta was given
  std::vector<std::uint64_t> stream_ids;
  // Per path and coordinate: trapezoidal integral of 1 / P^i over [0, T].
  std::vector<Vec> inverse_integral;
  // Per path: smallest coordinate seen at any step.
  std::vector<double> min_coordinate;
  ClipStats clips;

  std::size_t n_paths() const { return P.size(); }
};

struct SimulateOptions {
  const FeedbackStrategy* beta = nullptr;
  Vec q0;                 // defaults to p0 when beta is set
  int store_stride = 1;   // keep every k-th step (the final time is always kept)
};

// Noise for path k at step n comes from Stream(derive_key(seed, kSdeNoise), k, n).
PathBundle simulate(const ModelSpec& spec, const FeedbackStrategy& alpha, const SimplexPoint& p0,
                    std::size_t n_paths, const SchemeConfig& cfg, std::uint64_t seed,
                    const SimulateOptions& opt = {});

void write_paths_csv(std::ostream& os, const PathBundle& b);

// Per-path cost sum_i [Q_T^i g^i(P_T) + int Q^i (f^i + 1/2 sum_j beta_ij^2) dt]
// with Q_0 = e_l. Paths depend only on (seed, path id), so two calls with the
// same seed share the crowd noise.
std::vector<double> mc_cost_paths(const ModelSpec& spec, const FeedbackStrategy& alpha,
                                  const FeedbackStrategy& beta, int l, const SimplexPoint& p0,
                                  std::size_t n_paths, const SchemeConfig& cfg,
                                  std::uint64_t seed);

MeanSe mc_cost(const ModelSpec& spec, const FeedbackStrategy& alpha, const FeedbackStrategy& beta,
               int l, const SimplexPoint& p0, std::size_t n_paths, const SchemeConfig& cfg,
               std::uint64_t seed);

struct ExpMomentResult {
  double gamma = 0.0;
  bool diagnostic_only = false;  // gamma <= 0
  std::vector<MeanSe> per_coordinate;
};

// E[exp(lambda gamma int_0^T ds / P^i_s)], gamma = kappa - (1 + lambda) eps^2 / 2.
ExpMomentResult exp_moment_estimate(const PathBundle& b, double lambda, const ModelSpec& spec);

struct ExpMomentStudy {
  std::vector<double> p0;  // starting mass of coordinate 0
  std::vector<MeanSe> estimate;
  LineFit fit;             // log estimate against log p0
};

// d = 2 runs started at (x, 1 - x) for each x, zero control.
ExpMomentStudy exp_moment_study(const ModelSpec& spec, double lambda, const std::vector<double>& starts,
                                std::size_t n_paths, const SchemeConfig& cfg, std::uint64_t seed);

}  // namespace kmfg
