#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "bmech/classical.hpp"
#include "bmech/geometry.hpp"

namespace bmech {

// A point of T*(Q x Q). Stored momenta are the end momenta of the history;
// the canonical momentum conjugate to q = (x_f, x_i) is p = (-p_f, p_i).
struct BoundaryPhasePoint {
  Eigen::VectorXd x_f, p_f, x_i, p_i;

  int dim() const { return static_cast<int>(x_f.size()); }
  Eigen::VectorXd q() const;
  Eigen::VectorXd p() const;
  // z = (q, p), the coordinates every bracket below is written in.
  Eigen::VectorXd z() const;
  // (x_f, p_f, x_i, p_i), the slot order of SymbolTable::boundary_phase.
  Eigen::VectorXd packed() const;

  static BoundaryPhasePoint from_z(const Eigen::VectorXd& z);
  static BoundaryPhasePoint from_packed(const Eigen::VectorXd& w);
};

// Function on the boundary phase space with value, gradient and Hessian in
// z = (q, p) coordinates.
class Observable {
 public:
  enum class Kind { F, G, General };

  // F_f = f(q) with f on Q x Q (2n variables: x_f then x_i).
  static Observable F(ScalarField f);
  // G_a = a(q).p with a on Q x Q.
  static Observable G(VectorField a);
  // Expression over SymbolTable::boundary_phase(n).
  static Observable from_expr(Expr e, std::vector<double> params, int n);
  // Differenced by central differences at step 1e-5.
  static Observable from_function(int n, std::function<double(const BoundaryPhasePoint&)> fn);

  Kind kind() const { return kind_; }
  int dim() const { return n_; }
  const ScalarField& f() const { return f_; }
  const VectorField& a() const { return a_; }

  double operator()(const BoundaryPhasePoint& pt) const;
  Eigen::VectorXd gradient(const BoundaryPhasePoint& pt) const;
  Eigen::MatrixXd hessian(const BoundaryPhasePoint& pt) const;

 private:
  friend Observable bracket_observable(const Observable& A, const Observable& B);
  friend Observable product(const Observable& A, const Observable& B);

  Kind kind_ = Kind::General;
  int n_ = 0;
  ScalarField f_;
  VectorField a_;
  Expr expr_;
  std::vector<double> params_;
  std::function<double(const Eigen::VectorXd&)> value_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess_;
};

// Boundary Poisson tensor in z coordinates: {A,B} = dA^T Pi dB with
// Pi = [[0, -I], [I, 0]], so {q^a, p_b} = -delta^a_b.
Eigen::MatrixXd boundary_poisson_tensor(int n);

// {A,B} on the boundary phase space; closed forms for F/G pairs.
double poisson_boundary(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt);
// The generic cotangent-bundle formula, ignoring the F/G shortcuts.
double poisson_boundary_generic(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt);

// {A,B} as an observable, with exact gradient from the Hessians of A and B.
Observable bracket_observable(const Observable& A, const Observable& B);
Observable product(const Observable& A, const Observable& B);

// Distance of pt from the classical subspace: |p + grad S|_inf.
double off_shell_violation(const BoundaryPhasePoint& pt, const ActionDerivs& S);
// On-shell tolerance 1e-6 (1 + |p|_inf).
double on_shell_tolerance(const BoundaryPhasePoint& pt);

// Bracket on the space of classical solutions from the Hessian blocks of the
// classical action and the boundary Green functions. Throws OffShell.
double poisson_covariant(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt,
                         const ActionDerivs& S, const BoundaryGreens& greens);

// Point on the classical subspace above (x_f, x_i).
BoundaryPhasePoint on_shell_point(const ActionDerivs& S, const Eigen::VectorXd& x_f,
                                  const Eigen::VectorXd& x_i);

// X_H = dH . omega^-1 with the inverse normalized so omega^-1 . omega = -1;
// for omega = dp ^ dx in (x, p) order, H = p gives (1, 0).
Eigen::VectorXd canonical_vector_field(const Eigen::VectorXd& grad_H, const Eigen::MatrixXd& omega);
Eigen::VectorXd canonical_vector_field(const ScalarField& H, const Eigen::MatrixXd& omega,
                                       const Eigen::VectorXd& z);
// Matrix of dp ^ dx on an m-dimensional configuration space, (x, p) order.
Eigen::MatrixXd canonical_symplectic_matrix(int m);

// Connection on Q x Q acting on each factor.
ConnectionField product_connection(const ConnectionField& gamma_q);

struct ConnectionCheck {
  double bracket1 = 0.0;
  double bracket2 = 0.0;
  double diff = 0.0;
};

// Boundary bracket written with covariant partial derivatives
// d_a + Gamma^c_ab p_c d/dp_b under two connections on Q x Q.
ConnectionCheck connection_invariance_check(const Observable& A, const Observable& B,
                                            const BoundaryPhasePoint& pt, const ConnectionField& g1,
                                            const ConnectionField& g2);

}  // namespace bmech
