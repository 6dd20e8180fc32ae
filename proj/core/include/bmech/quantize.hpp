#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bmech/geometry.hpp"
#include "bmech/sysdsl.hpp"

namespace bmech {

using SparseC = Eigen::SparseMatrix<cplx>;

struct Axis {
  double min = 0.0;
  double h = 1.0;
  int M = 8;
  bool periodic = false;

  // M points covering [min, max) when periodic, [min, max] otherwise.
  static Axis over(double min, double max, int M, bool periodic);
  double coord(int j) const { return min + j * h; }
  double length() const { return periodic ? M * h : (M - 1) * h; }
};

// Tensor-product grid, first axis slowest.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes);
  static Grid from_domain(const std::vector<DomainInterval>& domain, int M);
  // Axes of a followed by axes of b.
  static Grid product(const Grid& a, const Grid& b);

  int dim() const { return static_cast<int>(axes_.size()); }
  int size() const { return size_; }
  const Axis& axis(int d) const { return axes_[d]; }
  const std::vector<Axis>& axes() const { return axes_; }
  double cell_volume() const;
  int stride(int d) const { return strides_[d]; }
  int coordinate_index(int flat, int d) const { return (flat / strides_[d]) % axes_[d].M; }
  ChartPoint point(int flat) const;
  bool operator==(const Grid& o) const;

 private:
  std::vector<Axis> axes_;
  std::vector<int> strides_;
  int size_ = 0;
};

// Complex grid function tagged with its density weight.
struct DensityField {
  Grid grid;
  Eigen::VectorXcd values;
  cplx weight;

  static DensityField sample(const Grid& grid, const std::function<cplx(const ChartPoint&)>& f, cplx weight);
};

// Pairing sum conj(psi) phi, defined when conj(weight psi) + weight phi = 1.
cplx pairing(const DensityField& psi, const DensityField& phi);

// Matrix over a grid. A missing weight marks a weight-preserving operator
// (multiplication by a function) that accepts any density.
struct GridOperator {
  Grid grid;
  Eigen::MatrixXcd matrix;
  std::optional<cplx> weight;

  DensityField apply(const DensityField& psi) const;
};

GridOperator compose(const GridOperator& a, const GridOperator& b);
GridOperator commutator(const GridOperator& a, const GridOperator& b);

// Wave-function weight for ordering parameter gamma.
inline cplx wave_weight(double gamma) { return {0.5, gamma}; }

// Multiplication by f.
GridOperator op_F(const ScalarField& f, const Grid& grid);
GridOperator op_F(const std::function<cplx(const ChartPoint&)>& f, const Grid& grid);

// First-derivative stencil along axis d: central, periodic wrap or one-sided
// second order at non-periodic edges.
SparseC difference_matrix(const Grid& grid, int d);

// Discrete mu^-1 L_a mu with the stencil used by op_G; mu defaults to the
// uniform cell density.
Eigen::VectorXd discrete_divergence(const VectorField& a, const Grid& grid,
                                    const std::optional<ScalarField>& mu = std::nullopt);

// -(i/2) sum_d (A_d D_d + D_d A_d) + gamma diag(mu^-1 L_a mu).
SparseC op_G_sparse(const VectorField& a, double gamma, const Grid& grid,
                    const std::optional<ScalarField>& mu = std::nullopt);
GridOperator op_G(const VectorField& a, double gamma, const Grid& grid,
                  const std::optional<ScalarField>& mu = std::nullopt);

// True if a is constant and only has components along periodic axes.
bool is_lattice_translation(const VectorField& a, const Grid& grid);
// Generator of lattice translations for constant a on periodic axes
// (Fourier symbol a.k with the Nyquist wavenumber taken as +pi/h).
Eigen::MatrixXcd translation_generator(const Eigen::VectorXd& a, const Grid& grid);

// exp(-i eps G) with G the translation generator (constant a on periodic
// axes) or op_G(a, 0) otherwise.
GridOperator shift_operator(const VectorField& a, double eps, const Grid& grid);

// Half-density form of -Laplace-Beltrami plus xi R, |g|^(1/4) (-Delta + xi R) |g|^(-1/4).
SparseC op_K_sparse(const MetricField& g, double xi, const Grid& grid);
GridOperator op_K(const MetricField& g, double xi, const Grid& grid);
// Scalar curvature sampled on the grid.
Eigen::VectorXd scalar_curvature_on(const MetricField& g, const Grid& grid);

// Per-axis Fourier taper: 1 for |k| <= k_c, 0 beyond 2 k_c, smooth (C-infinity) between.
// k_c defaults to pi / (3 h).
Eigen::MatrixXcd band_limit_projector(const Grid& grid, std::optional<double> cutoff = std::nullopt);

// Basis of the matrices commuting with every operator in ops.
std::vector<Eigen::MatrixXcd> commutant_basis(const std::vector<GridOperator>& ops, double tol = 1e-9);

}  // namespace bmech
