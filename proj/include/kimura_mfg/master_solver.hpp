#pragma once

#include <memory>
#include <vector>

#include "kimura_mfg/kimura_pde.hpp"
#include "kimura_mfg/model.hpp"

namespace kmfg {

// Starting point of the Picard lag at each backward step.
enum class LagInit { Previous, Zero, Terminal };

struct MasterOptions {
  double dt = 1e-3;
  double picard_tol = 1e-9;
  int picard_max = 50;
  LagInit lag_init = LagInit::Previous;
};

struct PicardReport {
  std::vector<int> iterations;     // per backward step, index n = 0..M-1
  std::vector<double> last_change;  // sup change at the accepted iterate
  int max_iterations() const;
};

struct MasterSolution {
  ModelSpec spec;
  double dt = 0.0;
  FieldOnGrid U;  // d components
  PicardReport report;

  const SimplexGrid& grid() const { return *U.grid; }
};

MasterSolution solve_master(const ModelSpec& spec, const SimplexGrid& grid,
                            const MasterOptions& opt = {});

Vec eval_U(const MasterSolution& sol, double t, const SimplexPoint& p);

// Intrinsic differences of U^i: hat-chart gradient with a zero last entry,
// minus its mean. They sum to zero.
Vec intrinsic_derivative(const MasterSolution& sol, double t, const SimplexPoint& p, int i);

// (eps / sqrt 2) (D_j U^i - D_k U^i) sqrt(p_j p_k)
double eval_V(const MasterSolution& sol, double t, const SimplexPoint& p, int i, int j, int k);

struct ResidualReport {
  double sup = 0.0;
  double mean = 0.0;
  // [(n * nodes + node) * d + i] for n = 0..M-1; zero at boundary nodes.
  std::vector<double> field;
};

ResidualReport residual(const MasterSolution& sol);

}  // namespace kmfg
