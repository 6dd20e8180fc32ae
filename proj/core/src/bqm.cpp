#include "bmech/bqm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

namespace bmech {

namespace {

constexpr cplx I1{0.0, 1.0};

// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <class F>
void parallel_for(int n, int threads, F body) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int b = t * chunk, e = std::min(n, b + chunk);
    pool.emplace_back([&, t, b, e] {
      try {
        if (b < e) body(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double column_drift(const Eigen::MatrixXcd& U) {
  double d = 0.0;
  for (int j = 0; j < U.cols(); ++j) d = std::max(d, std::abs(U.col(j).norm() - 1.0));
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------

BoundaryState BoundaryState::product(const DensityField& psi_f, const DensityField& psi_i) {
  return {psi_f.grid, psi_i.grid, psi_f.values.conjugate() * psi_i.values.transpose()};
}

BoundaryState BoundaryState::position(const Grid& grid_f, int j_f, const Grid& grid_i, int j_i) {
  if (j_f < 0 || j_f >= grid_f.size() || j_i < 0 || j_i >= grid_i.size())
    throw ShapeMismatch("position index outside the grid");
  BoundaryState s{grid_f, grid_i, Eigen::MatrixXcd::Zero(grid_f.size(), grid_i.size())};
  s.W(j_f, j_i) = 1.0 / (grid_f.cell_volume() * grid_i.cell_volume());
  return s;
}

BoundaryState BoundaryState::from_kernel(const KernelMatrix& k) { return {k.grid, k.grid, k.K.conjugate()}; }

int BoundaryState::numerical_rank(double rel_tol) const {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(W);
  const Eigen::VectorXd s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s[0]).count());
}

BoundaryState BoundaryOperator::apply(const BoundaryState& s) const {
  if (end == BoundaryEnd::Final) {
    if (!(op.grid == s.grid_f)) throw ShapeMismatch("operator grid differs from the final grid");
    return {s.grid_f, s.grid_i, op.matrix.conjugate() * s.W};
  }
  if (!(op.grid == s.grid_i)) throw ShapeMismatch("operator grid differs from the initial grid");
  return {s.grid_f, s.grid_i, s.W * op.matrix.transpose()};
}

Eigen::MatrixXcd BoundaryOperator::product_matrix(const Grid& grid_f, const Grid& grid_i) const {
  if (end == BoundaryEnd::Final) {
    if (!(op.grid == grid_f)) throw ShapeMismatch("operator grid differs from the final grid");
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(grid_i.size(), grid_i.size());
    return Eigen::kroneckerProduct(Eigen::MatrixXcd(op.matrix.conjugate()), I).eval();
  }
  if (!(op.grid == grid_i)) throw ShapeMismatch("operator grid differs from the initial grid");
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(grid_f.size(), grid_f.size());
  return Eigen::kroneckerProduct(I, op.matrix).eval();
}

BoundaryOperator lift_observable(const GridOperator& A, BoundaryEnd end) { return {end, A}; }

cplx amplitude(const KernelMatrix& phys, const BoundaryState& state) {
  if (!(phys.grid == state.grid_f) || !(phys.grid == state.grid_i))
    throw ShapeMismatch("state and kernel live on different grids");
  return phys.K.cwiseProduct(state.W).sum() * state.grid_f.cell_volume() * state.grid_i.cell_volume();
}

// ---------------------------------------------------------------------------

NaturalSystem natural_system(const SystemSpec& spec, const std::vector<ChartPoint>& samples) {
  const int n = spec.dim;
  if (depends_on(spec.lagrangian, 2 * n)) throw NonNaturalLagrangian("lagrangian depends explicitly on t");
  const std::vector<double> params = spec.parameters.values;
  const Expr L = spec.lagrangian;

  auto derivs_at = [n, L, params](const ChartPoint& x, const Eigen::VectorXd& v) {
    std::vector<double> vars(2 * n + 1, 0.0);
    for (int k = 0; k < n; ++k) {
      vars[k] = x[k];
      vars[n + k] = v[k];
    }
    return eval_derivs(L, EvalEnv{vars, params});
  };

  NaturalSystem sys;
  sys.dim = n;
  if (spec.metric) {
    sys.g = MetricField::from_exprs(*spec.metric, params);
  } else {
    sys.g = MetricField::from_function(n, [n, derivs_at](const ChartPoint& x) -> Eigen::MatrixXd {
      return derivs_at(x, Eigen::VectorXd::Zero(n)).hessian.block(n, n, n, n);
    });
  }
  if (spec.potential) {
    sys.V = ScalarField::from_expr(*spec.potential, params, n);
  } else {
    sys.V = ScalarField::from_function(n, [n, derivs_at](const ChartPoint& x) {
      return -derivs_at(x, Eigen::VectorXd::Zero(n)).value;
    });
  }

  try {
    for (const auto& x : samples) {
      const Derivs d0 = derivs_at(x, Eigen::VectorXd::Zero(n));
      const double scale = 1.0 + std::abs(d0.value);
      if (d0.gradient.segment(n, n).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw NonNaturalLagrangian("lagrangian has terms linear in the velocity");
      const Eigen::MatrixXd g = sys.g(x);
      const double V = sys.V(x);
      if ((d0.hessian.block(n, n, n, n) - g).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + g.cwiseAbs().maxCoeff()))
        throw NonNaturalLagrangian("metric field differs from the velocity Hessian of the lagrangian");
      for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v[k] = std::sin(1.7 * (k + 1) + 2.3 * trial) * (1.0 + trial);
        const double want = 0.5 * v.dot(g * v) - V;
        const double got = derivs_at(x, v).value;
        if (std::abs(got - want) > 1e-8 * (1.0 + std::abs(got) + std::abs(want)))
          throw NonNaturalLagrangian("lagrangian is not of the form 1/2 v.g.v - V");
      }
    }
  } catch (const DomainError& e) {
    throw NonNaturalLagrangian(std::string("lagrangian cannot be evaluated at v = 0: ") + e.what());
  }
  return sys;
}

SparseC hamiltonian(const NaturalSystem& sys, const Grid& grid) {
  SparseC H = 0.5 * op_K_sparse(sys.g, 0.0, grid);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int j = 0; j < grid.size(); ++j) t.emplace_back(j, j, sys.V(grid.point(j)));
  SparseC Vm(grid.size(), grid.size());
  Vm.setFromTriplets(t.begin(), t.end());
  H += Vm;
  H.makeCompressed();
  return H;
}

namespace {

Eigen::MatrixXcd crank_nicolson(const NaturalSystem& sys, double T, const Grid& grid, const PropagatorOptions& opt) {
  const int N = grid.size();
  const SparseC H = hamiltonian(sys, grid);
  SparseC Id(N, N);
  Id.setIdentity();
  const double tau = T / opt.slices;
  const SparseC A = Id + cplx(0.0, 0.5 * tau) * H;
  const SparseC B = Id - cplx(0.0, 0.5 * tau) * H;
  Eigen::SparseLU<SparseC> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw Instability("Crank-Nicolson matrix is singular");

  Eigen::MatrixXcd U(N, N);
  parallel_for(N, opt.threads, [&](int b, int e) {
    Eigen::MatrixXcd X = Eigen::MatrixXcd::Identity(N, N).middleCols(b, e - b);
    for (int s = 0; s < opt.slices; ++s) {
      const Eigen::MatrixXcd rhs = B * X;
      X = lu.solve(rhs);
    }
    U.middleCols(b, e - b) = X;
  });
  return U;
}

Eigen::MatrixXcd trotter(const NaturalSystem& sys, double T, const Grid& grid, const PropagatorOptions& opt) {
  const int N = grid.size(), n = grid.dim();
  const Eigen::MatrixXd g0 = sys.g(grid.point(0));
  for (int j = 1; j < N; ++j)
    if ((sys.g(grid.point(j)) - g0).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + g0.cwiseAbs().maxCoeff()))
      throw Error("trotter method needs a constant metric");
  Eigen::LLT<Eigen::MatrixXd> llt(g0);
  if (llt.info() != Eigen::Success) throw SingularMetric("metric is not positive-definite");
  const Eigen::MatrixXd ginv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double tau = T / opt.slices;

  // Wavenumbers of the periodic continuation, Nyquist as +pi/h.
  std::vector<Eigen::VectorXd> k(N, Eigen::VectorXd(n));
  for (int m = 0; m < N; ++m)
    for (int d = 0; d < n; ++d) {
      const Axis& ax = grid.axis(d);
      const int i = grid.coordinate_index(m, d);
      const int s = i <= ax.M / 2 ? i : i - ax.M;
      k[m][d] = 2 * std::numbers::pi * s / (ax.M * ax.h);
    }
  Eigen::VectorXcd symbol(N);
  for (int m = 0; m < N; ++m) symbol[m] = std::exp(cplx(0.0, -0.5 * tau * k[m].dot(ginv * k[m])));

  // Free kernel depends on the index difference only.
  Eigen::VectorXcd c(N);
  for (int r = 0; r < N; ++r) {
    Eigen::VectorXd dx(n);
    for (int d = 0; d < n; ++d) dx[d] = grid.coordinate_index(r, d) * grid.axis(d).h;
    cplx acc = 0;
    for (int m = 0; m < N; ++m) acc += symbol[m] * std::exp(I1 * k[m].dot(dx));
    c[r] = acc / static_cast<double>(N);
  }

  Eigen::MatrixXcd S(N, N);
  parallel_for(N, opt.threads, [&](int b, int e) {
    for (int j = b; j < e; ++j) {
      const ChartPoint xj = grid.point(j);
      for (int l = 0; l < N; ++l) {
        int r = 0;
        ChartPoint mid = xj;
        for (int d = 0; d < n; ++d) {
          const Axis& ax = grid.axis(d);
          const int dj = ((grid.coordinate_index(j, d) - grid.coordinate_index(l, d)) % ax.M + ax.M) % ax.M;
          r += dj * grid.stride(d);
          const double P = ax.M * ax.h;
          double delta = (grid.coordinate_index(l, d) - grid.coordinate_index(j, d)) * ax.h;
          delta -= P * std::round(delta / P);
          mid[d] += 0.5 * delta;
        }
        S(j, l) = c[r] * std::exp(cplx(0.0, -tau * sys.V(mid)));
      }
    }
  });

  Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(N, N);
  Eigen::MatrixXcd base = S;
  for (int p = opt.slices; p > 0; p >>= 1) {
    if (p & 1) U = (U * base).eval();
    if (p > 1) base = (base * base).eval();
  }
  return U;
}

}  // namespace

KernelMatrix phys_state(const SystemSpec& spec, double T, const Grid& grid, const PropagatorOptions& opt) {
  if (grid.dim() != spec.dim) throw ShapeMismatch("grid dimension differs from the system dimension");
  std::vector<ChartPoint> samples;
  const int stride = std::max(1, grid.size() / 7);
  for (int j = 0; j < grid.size(); j += stride) samples.push_back(grid.point(j));
  return phys_state(natural_system(spec, samples), T, grid, opt);
}

KernelMatrix phys_state(const NaturalSystem& sys, double T, const Grid& grid, const PropagatorOptions& opt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("propagation time must be positive");
  if (opt.slices < 1) throw DomainError("need at least one time slice");
  if (grid.dim() != sys.dim) throw ShapeMismatch("grid dimension differs from the system dimension");
  const Eigen::MatrixXcd U =
      opt.method == PropagatorMethod::CrankNicolson ? crank_nicolson(sys, T, grid, opt) : trotter(sys, T, grid, opt);
  if (!U.allFinite()) throw Instability("propagator has non-finite entries");
  KernelMatrix k;
  k.grid = grid;
  k.T = T;
  k.norm_drift = column_drift(U);
  if (k.norm_drift > opt.drift_tolerance)
    throw Instability("propagator column norms drift by " + std::to_string(k.norm_drift));
  k.K = U / grid.cell_volume();
  return k;
}

// ---------------------------------------------------------------------------

cplx GaussianPacket::operator()(double x) const {
  const double u = x - center;
  return std::pow(2 * std::numbers::pi * sigma * sigma, -0.25) *
         std::exp(cplx(-u * u / (4 * sigma * sigma), momentum * x));
}

QuadraticKernel QuadraticKernel::free(double mass, double T) {
  if (!(mass > 0.0) || !(T > 0.0)) throw DomainError("free kernel needs positive mass and time");
  QuadraticKernel q;
  q.norm = std::sqrt(mass / (2 * std::numbers::pi * T)) * std::exp(cplx(0.0, -std::numbers::pi / 4));
  q.alpha = q.beta = mass / (2 * T);
  q.delta = -mass / (2 * T);
  return q;
}

QuadraticKernel QuadraticKernel::mehler(double mass, double omega, double T) {
  const double wt = omega * T;
  if (!(mass > 0.0) || !(wt > 0.0) || !(wt < std::numbers::pi))
    throw DomainError("oscillator kernel needs 0 < omega T < pi");
  const double s = std::sin(wt), c = std::cos(wt);
  QuadraticKernel q;
  q.norm = std::sqrt(mass * omega / (2 * std::numbers::pi * s)) * std::exp(cplx(0.0, -std::numbers::pi / 4));
  q.alpha = q.beta = mass * omega * c / (2 * s);
  q.delta = -mass * omega / (2 * s);
  return q;
}

cplx QuadraticKernel::operator()(double x_f, double x_i) const {
  return norm * std::exp(I1 * (alpha * x_f * x_f + beta * x_i * x_i + 2 * delta * x_f * x_i));
}

cplx QuadraticKernel::evolve(const GaussianPacket& psi, double x) const {
  // psi(y) = exp(a y^2 + b y + c0)
  const double s2 = psi.sigma * psi.sigma;
  const cplx a = -1.0 / (4 * s2);
  const cplx b = cplx(psi.center / (2 * s2), psi.momentum);
  const cplx c0 = -psi.center * psi.center / (4 * s2) - 0.25 * std::log(2 * std::numbers::pi * s2);
  const cplx z = I1 * beta + a;
  const cplx lin = 2.0 * I1 * delta * x + b;
  return norm * std::sqrt(std::numbers::pi / (-z)) * std::exp(I1 * alpha * x * x + c0 - lin * lin / (4.0 * z));
}

namespace {

Eigen::VectorXcd sample_packet(const Grid& grid, const GaussianPacket& p) {
  Eigen::VectorXcd v(grid.size());
  for (int j = 0; j < grid.size(); ++j) v[j] = p(grid.point(j)[0]);
  return v;
}

}  // namespace

double kernel_packet_error(const KernelMatrix& k, const QuadraticKernel& oracle,
                           const std::vector<GaussianPacket>& packets) {
  if (k.grid.dim() != 1) throw ShapeMismatch("packet comparison needs a one-dimensional grid");
  const Eigen::MatrixXcd U = k.evolution();
  double worst = 0.0;
  for (const auto& p : packets) {
    const Eigen::VectorXcd got = U * sample_packet(k.grid, p);
    Eigen::VectorXcd want(k.grid.size());
    for (int j = 0; j < k.grid.size(); ++j) want[j] = oracle.evolve(p, k.grid.point(j)[0]);
    worst = std::max(worst, (got - want).norm() / want.norm());
  }
  return worst;
}

double kernel_packet_distance(const KernelMatrix& a, const KernelMatrix& b,
                              const std::vector<GaussianPacket>& packets) {
  if (!(a.grid == b.grid)) throw ShapeMismatch("kernels live on different grids");
  if (a.grid.dim() != 1) throw ShapeMismatch("packet comparison needs a one-dimensional grid");
  const Eigen::MatrixXcd Ua = a.evolution(), Ub = b.evolution();
  double worst = 0.0;
  for (const auto& p : packets) {
    const Eigen::VectorXcd psi = sample_packet(a.grid, p);
    const Eigen::VectorXcd ya = Ua * psi, yb = Ub * psi;
    worst = std::max(worst, (ya - yb).norm() / yb.norm());
  }
  return worst;
}

// ---------------------------------------------------------------------------

ActionEvaluator classical_evaluator(const SystemSpec& spec, double T, int slices) {
  const TimeGrid tg(0.0, T, slices);
  return [spec, tg](const ChartPoint& x_f, const ChartPoint& x_i) {
    return classical_action_derivs(spec, x_f, x_i, tg);
  };
}

SemiclassicalResult semiclassical_measure(const KernelMatrix& phys, const ActionEvaluator& S,
                                          const std::vector<VectorField>& fields,
                                          const SemiclassicalOptions& opt) {
  const Grid& grid = phys.grid;
  const int n = grid.dim();
  for (const auto& a : fields)
    if (a.dim() != 2 * n) throw ShapeMismatch("constraint fields live on the product of both ends");

  std::vector<int> win;
  for (int j = 0; j < grid.size(); ++j) {
    const ChartPoint x = grid.point(j);
    if ((x.array() < opt.window_lo).any() || (x.array() > opt.window_hi).any()) continue;
    for (int d = 0; d < n; ++d) {
      const int i = grid.coordinate_index(j, d);
      if (!grid.axis(d).periodic && (i == 0 || i == grid.axis(d).M - 1))
        throw ShapeMismatch("semiclassical window touches the grid edge");
    }
    win.push_back(j);
  }
  if (win.empty()) throw ShapeMismatch("semiclassical window contains no grid points");

  const Eigen::MatrixXcd P = band_limit_projector(grid, opt.cutoff);
  const Eigen::MatrixXcd Kb = P * phys.K * P.transpose();
  std::vector<Eigen::MatrixXcd> dF(n), dI(n);
  for (int d = 0; d < n; ++d) {
    const SparseC D = difference_matrix(grid, d);
    dF[d] = D * Kb;
    dI[d] = (D * Kb.transpose()).transpose();
  }

  const int W = static_cast<int>(win.size());
  const int nf = static_cast<int>(fields.size());
  SemiclassicalResult res;
  res.rows = res.cols = win;
  res.measure.resize(W, W);
  res.action.resize(W, W);
  std::vector<Eigen::MatrixXcd> r(nf, Eigen::MatrixXcd(W, W));
  const cplx alpha(0.5, -opt.gamma);

  parallel_for(W, opt.threads, [&](int b, int e) {
    for (int p = b; p < e; ++p) {
      const int f = win[p];
      const ChartPoint xf = grid.point(f);
      for (int q = 0; q < W; ++q) {
        const int i = win[q];
        const ChartPoint xi = grid.point(i);
        const ActionDerivs s = S(xf, xi);
        const cplx k = Kb(f, i);
        res.action(p, q) = s.action;
        res.measure(p, q) = k * std::exp(cplx(0.0, -s.action));
        Eigen::VectorXd z(2 * n), gradS(2 * n);
        Eigen::VectorXcd gradK(2 * n);
        z << xf, xi;
        gradS << s.grad_f, s.grad_i;
        for (int d = 0; d < n; ++d) {
          gradK[d] = dF[d](f, i);
          gradK[n + d] = dI[d](f, i);
        }
        for (int m = 0; m < nf; ++m) {
          const Eigen::VectorXd av = fields[m](z);
          const cplx lie = av.cast<cplx>().dot(gradK) + alpha * fields[m].divergence(z) * k;
          r[m](p, q) = I1 * lie + av.dot(gradS) * k;
        }
      }
    }
  });

  res.mean = res.measure.mean();
  res.max_rel_variation = (res.measure.array() - res.mean).abs().maxCoeff() / std::abs(res.mean);
  double knorm = 0.0;
  for (int p = 0; p < W; ++p)
    for (int q = 0; q < W; ++q) knorm += std::norm(Kb(win[p], win[q]));
  knorm = std::sqrt(knorm);
  const double rms = knorm / W;
  for (int m = 0; m < nf; ++m) {
    res.residuals.push_back(r[m].norm() / knorm);
    res.residual_fields.push_back(r[m].cwiseAbs() / rms);
  }
  return res;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw ShapeMismatch("order fit needs at least two samples");
  const int m = static_cast<int>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace bmech
