#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bmech/sysdsl.hpp"

namespace bmech {

using ChartPoint = Eigen::VectorXd;
using cplx = std::complex<double>;

// T[a](b, c): a rank-3 array with the first index split off.
using Tensor3 = std::vector<Eigen::MatrixXd>;

Tensor3 zero_tensor3(int n);

// Central-difference step used for fields without exact derivatives.
double fd_step(const ChartPoint& x);

// Real function on an n-dimensional chart. Built from an expression it carries
// exact derivatives; built from a callable it is differenced.
class ScalarField {
 public:
  using Fn = std::function<double(const ChartPoint&)>;

  ScalarField() = default;
  // `e` must only reference variable slots 0..dim-1.
  static ScalarField from_expr(Expr e, std::vector<double> params, int dim);
  static ScalarField from_function(int dim, Fn f);
  static ScalarField constant(int dim, double c);

  int dim() const { return dim_; }
  bool exact() const { return expr_ != nullptr || is_const_; }
  bool is_constant() const { return is_const_ || (expr_ && !has_variables(expr_)); }

  double operator()(const ChartPoint& x) const;
  Eigen::VectorXd gradient(const ChartPoint& x) const;
  Eigen::MatrixXd hessian(const ChartPoint& x) const;

 private:
  int dim_ = 0;
  Expr expr_;
  std::vector<double> params_;
  Fn fn_;
  bool is_const_ = false;
  double const_value_ = 0.0;
};

// Vector field a^k(x) given component-wise.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<ScalarField> components);
  static VectorField constant(const Eigen::VectorXd& a);

  int dim() const { return static_cast<int>(comp_.size()); }
  const ScalarField& component(int k) const { return comp_[k]; }

  Eigen::VectorXd operator()(const ChartPoint& x) const;
  // J(a, b) = d_b a^a
  Eigen::MatrixXd jacobian(const ChartPoint& x) const;
  double divergence(const ChartPoint& x) const;

 private:
  std::vector<ScalarField> comp_;
};

// Lie bracket [a, b]^k = a.d b^k - b.d a^k, evaluated pointwise.
Eigen::VectorXd lie_bracket(const VectorField& a, const VectorField& b, const ChartPoint& x);

class MetricField {
 public:
  using Fn = std::function<Eigen::MatrixXd(const ChartPoint&)>;

  MetricField() = default;
  static MetricField from_exprs(const std::vector<std::vector<Expr>>& g, std::vector<double> params);
  static MetricField from_function(int dim, Fn g);
  static MetricField identity(int dim);

  int dim() const { return dim_; }
  bool exact() const { return !fn_; }
  bool is_constant() const;

  Eigen::MatrixXd operator()(const ChartPoint& x) const;
  // dg[c](a, b) = d_c g_ab
  Tensor3 derivative(const ChartPoint& x) const;
  // ddg[c * n + d](a, b) = d_c d_d g_ab
  std::vector<Eigen::MatrixXd> second_derivative(const ChartPoint& x) const;

  // Throws SingularMetric unless g is symmetric positive-definite at every point.
  void check_positive_definite(const std::vector<ChartPoint>& points) const;

 private:
  int dim_ = 0;
  std::vector<std::vector<ScalarField>> comp_;
  Fn fn_;
};

class ConnectionField {
 public:
  using Fn = std::function<Tensor3(const ChartPoint&)>;

  ConnectionField() = default;
  ConnectionField(int dim, Fn gamma) : dim_(dim), fn_(std::move(gamma)) {}
  static ConnectionField flat(int dim);
  static ConnectionField levi_civita(const MetricField& g);
  // Gamma + S with S symmetric in its lower pair; the difference of two
  // torsion-free connections is always of this form.
  ConnectionField perturbed(Fn s) const;

  int dim() const { return dim_; }
  Tensor3 operator()(const ChartPoint& x) const { return fn_(x); }

 private:
  int dim_ = 0;
  Fn fn_;
};

struct Curvature {
  Tensor3 christoffel;    // christoffel[a](b, c) = Gamma^a_bc
  Eigen::MatrixXd ricci;  // R_bd
  double scalar = 0.0;
};

// Levi-Civita coefficients, Ricci tensor and scalar curvature of g at x.
Curvature christoffel_curvature(const MetricField& g, const ChartPoint& x);
Tensor3 christoffel(const MetricField& g, const ChartPoint& x);

// Coordinate Lie derivative of a weight-alpha scalar density:
// a.d psi + alpha (d_k a^k) psi.
cplx lie_derivative_density(const Eigen::VectorXd& a, double div_a, cplx psi,
                            const Eigen::VectorXcd& grad_psi, cplx alpha);
cplx lie_derivative_density(const VectorField& a, const ScalarField& psi, cplx alpha,
                            const ChartPoint& x);

// A density value in the current chart together with its complex weight.
struct DensityValue {
  cplx value;
  cplx weight;

  DensityValue conj() const { return {std::conj(value), std::conj(weight)}; }
  // Real power of a positive real density; weight scales by beta.
  DensityValue pow(double beta) const;
};

DensityValue operator*(const DensityValue& a, const DensityValue& b);
DensityValue operator/(const DensityValue& a, const DensityValue& b);
// Sum of densities of equal weight; WeightMismatch otherwise.
DensityValue operator+(const DensityValue& a, const DensityValue& b);

// |det g|^(1/2)
DensityValue volume_element(const Eigen::MatrixXd& g);
DensityValue volume_element(const MetricField& g, const ChartPoint& x);
// |det(omega / 2 pi)|^(1/2) for an antisymmetric non-degenerate omega.
DensityValue liouville_volume(const Eigen::MatrixXd& omega);

}  // namespace bmech
