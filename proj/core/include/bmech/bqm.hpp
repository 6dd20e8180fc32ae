#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmech/classical.hpp"
#include "bmech/quantize.hpp"

namespace bmech {

// Propagator kernel K(x_f, x_i; T) on a single-end grid, as a density in each
// argument. U = K * cell_volume is the evolution matrix on grid values.
struct KernelMatrix {
  Grid grid;
  Eigen::MatrixXcd K;
  cplx weight{0.5, 0.0};  // per argument
  double T = 0.0;
  double norm_drift = 0.0;

  Eigen::MatrixXcd evolution() const { return K * grid.cell_volume(); }
};

// Element of the boundary space as a matrix W(x_f, x_i): covector factor on
// the final grid, vector factor on the initial grid.
struct BoundaryState {
  Grid grid_f, grid_i;
  Eigen::MatrixXcd W;

  // <psi_f| x |psi_i>: conj(psi_f) psi_i^T.
  static BoundaryState product(const DensityField& psi_f, const DensityField& psi_i);
  // Position ket at grid indices (j_f, j_i), normalised as a discrete delta.
  static BoundaryState position(const Grid& grid_f, int j_f, const Grid& grid_i, int j_i);
  // The state whose amplitude pairing with itself is the kernel norm.
  static BoundaryState from_kernel(const KernelMatrix& k);

  int numerical_rank(double rel_tol = 1e-10) const;
};

enum class BoundaryEnd { Final, Initial };

// Single-end operator lifted to the boundary space: A^dagger x 1 on the final
// end, 1 x A on the initial end.
struct BoundaryOperator {
  BoundaryEnd end;
  GridOperator op;

  BoundaryState apply(const BoundaryState& s) const;
  // Matrix on the product grid (final axes first) acting on row-major vec(W).
  Eigen::MatrixXcd product_matrix(const Grid& grid_f, const Grid& grid_i) const;
};

BoundaryOperator lift_observable(const GridOperator& A, BoundaryEnd end);

// (phys|state) = cell_f cell_i sum K(f, i) W(f, i).
cplx amplitude(const KernelMatrix& phys, const BoundaryState& state);

// Metric and potential of L = 1/2 v.g(x).v - V(x).
struct NaturalSystem {
  int dim = 1;
  MetricField g;
  ScalarField V;
};

// Reads g and V off the spec (explicit fields when given, otherwise from
// L_vv and -L(x, 0)) and checks L has that form at the sample points.
// Throws NonNaturalLagrangian.
NaturalSystem natural_system(const SystemSpec& spec, const std::vector<ChartPoint>& samples);

enum class PropagatorMethod { CrankNicolson, Trotter };

struct PropagatorOptions {
  PropagatorMethod method = PropagatorMethod::CrankNicolson;
  int slices = 512;
  int threads = 1;
  double drift_tolerance = 0.01;
};

// Hamiltonian 1/2 op_K(g, 0) + V on the grid.
SparseC hamiltonian(const NaturalSystem& sys, const Grid& grid);

// Propagator kernel. Crank-Nicolson steps the Schroedinger equation; Trotter
// multiplies short-time kernels exp(i tau L) built from the lattice free
// kernel (periodic continuation, constant metric) and the potential at the
// minimal-image midpoint. Throws Instability when column norms drift.
KernelMatrix phys_state(const SystemSpec& spec, double T, const Grid& grid, const PropagatorOptions& opt = {});
KernelMatrix phys_state(const NaturalSystem& sys, double T, const Grid& grid, const PropagatorOptions& opt = {});

// ---------------------------------------------------------------------------
// Closed-form kernels of quadratic one-dimensional systems, used as oracles.

// psi(x) = (2 pi sigma^2)^(-1/4) exp(-(x - c)^2 / (4 sigma^2) + i p x)
struct GaussianPacket {
  double center = 0.0;
  double sigma = 1.0;
  double momentum = 0.0;

  cplx operator()(double x) const;
};

// K(x_f, x_i) = norm exp(i (alpha x_f^2 + beta x_i^2 + 2 delta x_f x_i))
struct QuadraticKernel {
  cplx norm;
  double alpha = 0.0, beta = 0.0, delta = 0.0;

  static QuadraticKernel free(double mass, double T);
  // Valid for 0 < omega T < pi.
  static QuadraticKernel mehler(double mass, double omega, double T);

  cplx operator()(double x_f, double x_i) const;
  // Exact integral of K(x, y) psi(y) over y.
  cplx evolve(const GaussianPacket& psi, double x) const;
};

// Largest relative L2 error of K applied to the packets against the oracle.
double kernel_packet_error(const KernelMatrix& k, const QuadraticKernel& oracle,
                           const std::vector<GaussianPacket>& packets);
// Largest relative L2 distance between two kernels applied to the packets.
double kernel_packet_distance(const KernelMatrix& a, const KernelMatrix& b,
                              const std::vector<GaussianPacket>& packets);

// ---------------------------------------------------------------------------
// Semiclassical decomposition K = a exp(i S-bar).

using ActionEvaluator = std::function<ActionDerivs(const ChartPoint& x_f, const ChartPoint& x_i)>;

ActionEvaluator classical_evaluator(const SystemSpec& spec, double T, int slices);

struct SemiclassicalOptions {
  // Box [lo, hi] on every coordinate of both ends.
  double window_lo = -1.0;
  double window_hi = 1.0;
  // Physical pass band of the kernel smoothing; default pi / (3 h).
  std::optional<double> cutoff;
  double gamma = 0.0;
  int threads = 1;
};

struct SemiclassicalResult {
  std::vector<int> rows, cols;  // window grid indices (final, initial)
  Eigen::MatrixXcd measure;     // a on the window
  Eigen::MatrixXd action;       // S-bar on the window
  cplx mean;
  double max_rel_variation = 0.0;
  // ||i L_a K + (a.grad S) K|| / ||K|| on the window, one per field.
  std::vector<double> residuals;
  std::vector<Eigen::MatrixXd> residual_fields;  // |residual| / rms|K|
};

// Fields live on the product space (final coordinates first).
SemiclassicalResult semiclassical_measure(const KernelMatrix& phys, const ActionEvaluator& S,
                                          const std::vector<VectorField>& fields,
                                          const SemiclassicalOptions& opt = {});

// Least-squares slope of log(err) against log(h).
double fitted_order(const std::vector<double>& h, const std::vector<double>& err);

}  // namespace bmech
