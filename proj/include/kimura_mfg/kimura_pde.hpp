#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "kimura_mfg/simplex.hpp"

namespace kmfg {

// values[(time * nodes + node) * components + c]
struct FieldOnGrid {
  std::shared_ptr<const SimplexGrid> grid;
  std::vector<double> times;
  int components = 1;
  std::vector<double> values;

  std::size_t n_times() const { return times.size(); }
  std::size_t n_nodes() const { return grid->size(); }
  double& at(std::size_t tn, std::size_t node, int c = 0) {
    return values[(tn * n_nodes() + node) * components + c];
  }
  double at(std::size_t tn, std::size_t node, int c = 0) const {
    return values[(tn * n_nodes() + node) * components + c];
  }
  Vec slice(std::size_t tn, int c = 0) const;
  void set_slice(std::size_t tn, int c, const Vec& u);
};

void write_field_csv(std::ostream& os, const FieldOnGrid& f, int component = 0);

// Backward stepper for  d_t u + L u + source = 0  on a fixed grid, where
//   L u = eps^2/2 sum (x_i delta_ij - x_i x_j) d_ij u + sum_j B_j d_j u
// in the hat chart. Diffusion is implicit, transport explicit and upwinded.
// B is given per node in full coordinates and must sum to zero.
class KimuraStepper {
 public:
  KimuraStepper(std::shared_ptr<const SimplexGrid> grid, double eps, double dt);

  const SimplexGrid& grid() const { return *grid_; }
  double dt() const { return dt_; }

  // Throws CflViolation when dt * max_node sum_j (B_j)_+ > h.
  void check_cfl(const std::vector<Vec>& B) const;

  // out = sum_j B_j d_j u, upwinded along a transport plan between the
  // positive and negative parts of B.
  void apply_transport(const std::vector<Vec>& B, const Vec& u, Vec& out) const;
  void apply_diffusion(const Vec& u, Vec& out) const;

  // u_n from u_{n+1}: explicit transport and source, then implicit diffusion.
  Vec step(const Vec& u_next, const std::vector<Vec>& B, const Vec& source) const;

 private:
  void solve_implicit(const Vec& rhs, Vec& x) const;

  std::shared_ptr<const SimplexGrid> grid_;
  double eps_;
  double dt_;
  // Per node: diffusion weight per stencil direction (d = 2: one, d = 3: three).
  std::vector<std::array<double, 3>> diff_coef_;
  std::vector<std::array<std::ptrdiff_t, 6>> diff_nb_;
  // d = 2 Thomas factors.
  Vec thomas_c_, thomas_m_;
  // d = 3 implicit matrix.
  Eigen::SparseMatrix<double, Eigen::RowMajor> implicit_;
};

// Sparse matrix of diffusion plus upwinded transport; row sums vanish.
Eigen::SparseMatrix<double, Eigen::RowMajor> assemble_local_operator(const SimplexGrid& grid,
                                                                     double eps,
                                                                     const std::vector<Vec>& B);

struct LinearKimuraProblem {
  double eps = 0.5;
  double T = 1.0;
  // Full-coordinate drift with zero sum.
  std::function<void(double t, const SimplexPoint& p, Vec& drift)> drift;
  std::function<double(double t, const SimplexPoint& p)> source;
  std::function<double(const SimplexPoint& p)> terminal;

  // drift_j = phi(p_j) + b_j + p_j b0_j. Either of b, b0 may be empty.
  static LinearKimuraProblem from_parts(
      double eps, double T, double kappa, double delta,
      std::function<void(double, const SimplexPoint&, Vec&)> b,
      std::function<void(double, const SimplexPoint&, Vec&)> b0,
      std::function<double(double, const SimplexPoint&)> source,
      std::function<double(const SimplexPoint&)> terminal);
};

FieldOnGrid solve_linear(const LinearKimuraProblem& problem, const SimplexGrid& grid, double dt);

struct HolderEstimate {
  bool unbounded = false;  // field constant up to 1e-14
  double exponent = 0.0;
  double constant = 0.0;
  int bins_used = 0;
};

// Log-log fit of the largest oscillation per distance bin against the
// Wright-Fisher distance. 20 log bins over [h, diameter / 2].
HolderEstimate holder_estimate(const Vec& u, const SimplexGrid& grid);

}  // namespace kmfg
