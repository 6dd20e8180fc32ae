#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bmech/block_tridiagonal.hpp"
#include "bmech/geometry.hpp"
#include "bmech/sysdsl.hpp"

namespace bmech {

struct TimeGrid {
  double t_i = 0.0;
  double t_f = 1.0;
  int N = 2;

  TimeGrid() = default;
  TimeGrid(double ti, double tf, int slices);  // validates t_i < t_f, N >= 2

  double tau() const { return (t_f - t_i) / N; }
  double t(int k) const { return t_i + k * tau(); }
  double t_mid(int k) const { return t_i + (k + 0.5) * tau(); }
};

// Nodes stored column-wise: x.col(k) is the configuration at t_k, k = 0..N.
struct DiscreteHistory {
  Eigen::MatrixXd x;

  int dim() const { return static_cast<int>(x.rows()); }
  int slices() const { return static_cast<int>(x.cols()) - 1; }
  static DiscreteHistory straight_line(const ChartPoint& x_i, const ChartPoint& x_f, int N);
};

// Midpoint discrete Lagrangian L_d(a, b) = tau L((a+b)/2, (b-a)/tau, t_mid)
// with derivatives in its two node arguments.
struct SliceDerivatives {
  double value = 0.0;
  Eigen::VectorXd d_a, d_b;
  Eigen::MatrixXd aa, ab, bb;  // d_a d_a, d_a d_b, d_b d_b
};

class DiscreteLagrangian {
 public:
  explicit DiscreteLagrangian(const SystemSpec& spec);

  int dim() const { return dim_; }
  double lagrangian(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) const;
  double value(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t_mid, double tau) const;
  SliceDerivatives derivatives(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t_mid,
                               double tau) const;
  // Smallest |eigenvalue| of d_v d_v L at the slice midpoint.
  double mass_scale(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t_mid, double tau) const;

 private:
  Jet2 jet(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) const;

  int dim_;
  Expr lagrangian_;
  std::vector<double> params_;
};

double discrete_action(const SystemSpec& spec, const DiscreteHistory& h, const TimeGrid& grid);

struct ActionDerivatives {
  double action = 0.0;
  // Gradient with respect to every node; interior columns are the discrete
  // Euler-Lagrange residual, gradient.col(N) = p_f and gradient.col(0) = -p_i.
  Eigen::MatrixXd gradient;
  Eigen::VectorXd p_f, p_i;
  BlockTridiagonal hessian;  // over all N+1 nodes
  std::vector<SliceDerivatives> slices;
};

ActionDerivatives action_gradient_hessian(const SystemSpec& spec, const DiscreteHistory& h,
                                          const TimeGrid& grid);

struct ClassicalSolution {
  DiscreteHistory history;
  TimeGrid grid;
  double action = 0.0;
  Eigen::VectorXd p_f, p_i;
  bool converged = false;
  double residual_norm = 0.0;
  int iterations = 0;
  // Smallest |eigenvalue| of the interior second variation relative to the
  // free-particle value at the same resolution.
  double conditioning = 0.0;
  ActionDerivatives derivatives;  // at the converged history
};

struct SolveOptions {
  int max_iterations = 50;
  double tolerance_factor = 1e-10;  // residual tolerance = factor * n * N
  bool check_caustic = true;
};

ClassicalSolution solve_classical(const SystemSpec& spec, const ChartPoint& x_f,
                                  const ChartPoint& x_i, const TimeGrid& grid,
                                  const std::optional<DiscreteHistory>& init = std::nullopt,
                                  const SolveOptions& options = {});

struct ActionDerivs {
  double action = 0.0;
  Eigen::VectorXd grad_f, grad_i;
  Eigen::MatrixXd Hff, Hfi, Hif, Hii;
};

// S-bar with gradients read off the boundary momenta and Hessian blocks from
// the Schur complement of the interior second variation.
ActionDerivs classical_action_derivs(const ClassicalSolution& sol);
ActionDerivs classical_action_derivs(const SystemSpec& spec, const ChartPoint& x_f,
                                     const ChartPoint& x_i, const TimeGrid& grid);

struct BoundaryGreens {
  Eigen::MatrixXd Hff, Hfi, Hif, Hii;
  Eigen::MatrixXd gFif;  // Hfi^-1
  Eigen::MatrixXd gFfi;  // Hif^-1 = gFif^T
  // 2n x 2n over (final, initial) values: [[0, -gFfi], [gFif, 0]].
  Eigen::MatrixXd gFC;
};

BoundaryGreens boundary_greens(const ActionDerivs& d);

// Linearized solutions about a converged history. Fields are n x (N+1).
class JacobiFields {
 public:
  explicit JacobiFields(const ClassicalSolution& sol);

  int dim() const { return n_; }
  int slices() const { return N_; }

  // Jacobi field with prescribed end values.
  Eigen::MatrixXd dirichlet(const Eigen::VectorXd& dx_f, const Eigen::VectorXd& dx_i) const;
  // Jacobi field with value dx and momentum dp at node k.
  Eigen::MatrixXd cauchy(int k, const Eigen::VectorXd& dx, const Eigen::VectorXd& dp) const;
  // Linearized momentum of a variation at node k (forward slice; backward at k = N).
  Eigen::VectorXd momentum(const Eigen::MatrixXd& dh, int k) const;
  // Jacobi field matching value and momentum of dh at node k.
  Eigen::MatrixXd cauchy_project(const Eigen::MatrixXd& dh, int k) const;
  // Symplectic pairing dp1.dx2 - dp2.dx1 at every node.
  Eigen::VectorXd wronskian(const Eigen::MatrixXd& dh1, const Eigen::MatrixXd& dh2) const;
  // Interior Euler-Lagrange residual of a linearized history.
  Eigen::MatrixXd residual(const Eigen::MatrixXd& dh) const;

 private:
  int n_, N_;
  std::vector<Eigen::MatrixXd> A_, B_, C_;
  BlockTridiagonal interior_;
};

}  // namespace bmech
