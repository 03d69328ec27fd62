#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "kimura_mfg/simplex.hpp"

namespace kmfg {

// phi(r) = kappa on [0, delta], linear ramp to 0 on (delta, 2 delta], 0 after.
double phi_eval(double r, double kappa, double delta);

// -1/2 sum_j (y_i - y_j)_+^2
double hamiltonian(const Vec& y, int i);

// (y_i - y_j)_+
double optimal_rate(const Vec& y, int i, int j);

class CostFamily {
 public:
  enum class Kind { Constant, Linear, Quadratic, AntiMonotonePair, Tabulated };

  static CostFamily constant(Vec c);
  // c_i + sum_j A_ij p_j
  static CostFamily linear(Vec c, std::vector<Vec> a);
  // c_i + sum_j A_ij p_j + sum_j B_ij p_j^2
  static CostFamily quadratic(Vec c, std::vector<Vec> a, std::vector<Vec> b);
  // d = 2 only: -gamma (p_i - 1/2)
  static CostFamily anti_monotone_pair(double gamma);
  // values[node][i] on build_grid(d, n), interpolated piecewise linearly.
  static CostFamily tabulated(int d, int n, std::vector<Vec> values);

  static CostFamily from_json(const nlohmann::json& j, int d);
  nlohmann::json to_json() const;

  double eval(double t, int i, const SimplexPoint& p) const;
  double sup_bound() const;
  Kind kind() const { return kind_; }
  // Throws InvalidInput if the coefficients do not fit dimension d.
  void check_dimension(int d) const;

  // Adds a constant to every component.
  CostFamily shifted(double c) const;

 private:
  Kind kind_ = Kind::Constant;
  Vec c_;
  std::vector<Vec> a_;
  std::vector<Vec> b_;
  double gamma_ = 0.0;
  double shift_ = 0.0;
  int table_n_ = 0;
  std::vector<Vec> table_;
  std::shared_ptr<const SimplexGrid> grid_;
};

std::string to_string(CostFamily::Kind k);

struct RegimeFlags {
  bool kappa_ge_half_eps2 = false;
  bool kappa_ge_61_eps2 = false;
  bool kappa_ge_61_plus_d_eps2 = false;
};

struct ValidationOptions {
  bool allow_zero_noise = false;
  bool allow_zero_forcing = false;
};

struct ModelSpec {
  int d = 2;
  double eps = 0.5;
  double kappa = 1.0;
  double delta = 0.1;
  double T = 1.0;
  CostFamily f = CostFamily::constant({0.0, 0.0});
  CostFamily g = CostFamily::constant({0.0, 0.0});

  double phi(double r) const { return phi_eval(r, kappa, delta); }

  // Throws InvalidInput on hard violations; returns regime warnings.
  std::vector<std::string> validate(ValidationOptions opt = {}) const;
  RegimeFlags regime() const;

  static ModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Row-major d x d matrix of jump rates; the diagonal holds minus the row sum.
struct RateMatrix {
  int d = 0;
  std::vector<double> r;

  RateMatrix() = default;
  explicit RateMatrix(int dim) : d(dim), r(static_cast<std::size_t>(dim) * dim, 0.0) {}
  double& operator()(int i, int j) { return r[static_cast<std::size_t>(i) * d + j]; }
  double operator()(int i, int j) const { return r[static_cast<std::size_t>(i) * d + j]; }
  void fix_diagonal();
};

class FeedbackStrategy {
 public:
  // Fills off-diagonal rates at (t, p); the diagonal is set afterwards.
  using Fill = std::function<void(double t, const SimplexPoint& p, RateMatrix& out)>;

  FeedbackStrategy() = default;
  FeedbackStrategy(Fill fill, double sup_bound);

  static FeedbackStrategy zero();
  static FeedbackStrategy constant(const RateMatrix& rates);

  void rates(double t, const SimplexPoint& p, RateMatrix& out) const;
  double rate(double t, int i, const SimplexPoint& p, int j) const;
  double sup_bound() const { return sup_; }
  bool is_zero() const { return !fill_; }

 private:
  Fill fill_;
  double sup_ = 0.0;
};

// a_i = sum_j ( p_j [phi(p_i) + rate(j, i)] - p_i [phi(p_j) + rate(i, j)] ),
// accumulated pairwise so the components sum to zero exactly.
Vec drift_a(const SimplexPoint& p, const RateMatrix& rates, const ModelSpec& spec);
Vec drift_a(double t, const SimplexPoint& p, const FeedbackStrategy& alpha,
            const ModelSpec& spec);

struct CoefficientsBF {
  Vec B;
  double F = 0.0;
};

CoefficientsBF coefficients_BF(double t, const SimplexPoint& p, const Vec& y, int i,
                               const ModelSpec& spec);

}  // namespace kmfg
