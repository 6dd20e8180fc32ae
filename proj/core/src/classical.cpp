#include "bmech/classical.hpp"

#include <cmath>
#include <numbers>

namespace bmech {

TimeGrid::TimeGrid(double ti, double tf, int slices) : t_i(ti), t_f(tf), N(slices) {
  if (!std::isfinite(ti) || !std::isfinite(tf) || !(ti < tf))
    throw Error("time grid needs t_i < t_f");
  if (slices < 2) throw Error("time grid needs at least 2 slices");
}

DiscreteHistory DiscreteHistory::straight_line(const ChartPoint& x_i, const ChartPoint& x_f, int N) {
  DiscreteHistory h;
  h.x.resize(x_i.size(), N + 1);
  for (int k = 0; k <= N; ++k) {
    const double s = static_cast<double>(k) / N;
    h.x.col(k) = (1 - s) * x_i + s * x_f;
  }
  return h;
}

// ---------------------------------------------------------------------------

DiscreteLagrangian::DiscreteLagrangian(const SystemSpec& spec)
    : dim_(spec.dim), lagrangian_(spec.lagrangian), params_(spec.parameters.values) {}

double DiscreteLagrangian::lagrangian(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) const {
  std::vector<double> vars(2 * dim_ + 1);
  for (int i = 0; i < dim_; ++i) {
    vars[i] = x[i];
    vars[dim_ + i] = v[i];
  }
  vars[2 * dim_] = t;
  return eval(lagrangian_, EvalEnv{vars, params_});
}

Jet2 DiscreteLagrangian::jet(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) const {
  const int k = 2 * dim_;
  std::vector<Jet2> vars;
  vars.reserve(k + 1);
  for (int i = 0; i < dim_; ++i) vars.push_back(Jet2::variable(x[i], i, k));
  for (int i = 0; i < dim_; ++i) vars.push_back(Jet2::variable(v[i], dim_ + i, k));
  vars.emplace_back(t);
  return eval_jet(lagrangian_, vars, params_);
}

double DiscreteLagrangian::value(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t_mid,
                                 double tau) const {
  return tau * lagrangian(0.5 * (a + b), (b - a) / tau, t_mid);
}

SliceDerivatives DiscreteLagrangian::derivatives(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                                 double t_mid, double tau) const {
  const int n = dim_;
  const Jet2 j = jet(0.5 * (a + b), (b - a) / tau, t_mid);
  const Eigen::VectorXd g = j.gradient(2 * n);
  const Eigen::MatrixXd H = j.hessian(2 * n);

  Eigen::MatrixXd Ja(2 * n, n), Jb(2 * n, n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Ja << 0.5 * I, -I / tau;
  Jb << 0.5 * I, I / tau;

  SliceDerivatives s;
  s.value = tau * j.v;
  s.d_a = tau * Ja.transpose() * g;
  s.d_b = tau * Jb.transpose() * g;
  s.aa = tau * Ja.transpose() * H * Ja;
  s.ab = tau * Ja.transpose() * H * Jb;
  s.bb = tau * Jb.transpose() * H * Jb;
  return s;
}

double DiscreteLagrangian::mass_scale(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t_mid,
                                      double tau) const {
  const int n = dim_;
  const Eigen::MatrixXd Lvv = jet(0.5 * (a + b), (b - a) / tau, t_mid).hessian(2 * n).bottomRightCorner(n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Lvv, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

// ---------------------------------------------------------------------------

double discrete_action(const SystemSpec& spec, const DiscreteHistory& h, const TimeGrid& grid) {
  if (h.dim() != spec.dim || h.slices() != grid.N) throw ShapeMismatch("history does not match grid");
  const DiscreteLagrangian Ld(spec);
  double s = 0;
  for (int k = 0; k < grid.N; ++k) s += Ld.value(h.x.col(k), h.x.col(k + 1), grid.t_mid(k), grid.tau());
  return s;
}

ActionDerivatives action_gradient_hessian(const SystemSpec& spec, const DiscreteHistory& h,
                                          const TimeGrid& grid) {
  if (h.dim() != spec.dim || h.slices() != grid.N) throw ShapeMismatch("history does not match grid");
  const int n = spec.dim, N = grid.N;
  const DiscreteLagrangian Ld(spec);
  ActionDerivatives out;
  out.gradient = Eigen::MatrixXd::Zero(n, N + 1);
  out.hessian = BlockTridiagonal(N + 1, n);
  out.slices.reserve(N);
  for (int k = 0; k < N; ++k) {
    SliceDerivatives s = Ld.derivatives(h.x.col(k), h.x.col(k + 1), grid.t_mid(k), grid.tau());
    out.action += s.value;
    out.gradient.col(k) += s.d_a;
    out.gradient.col(k + 1) += s.d_b;
    out.hessian.diag[k] += s.aa;
    out.hessian.diag[k + 1] += s.bb;
    out.hessian.upper[k] = s.ab;
    out.slices.push_back(std::move(s));
  }
  out.p_f = out.gradient.col(N);
  out.p_i = -out.gradient.col(0);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd interior_residual(const ActionDerivatives& d) {
  const int n = static_cast<int>(d.gradient.rows());
  const int N = static_cast<int>(d.gradient.cols()) - 1;
  return Eigen::Map<const Eigen::VectorXd>(d.gradient.data() + n, n * (N - 1));
}

double inf_norm(const Eigen::VectorXd& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

namespace {

ClassicalSolution newton_solve(const SystemSpec& spec, const ChartPoint& x_f, const ChartPoint& x_i,
                               const TimeGrid& grid, const std::optional<DiscreteHistory>& init,
                               const SolveOptions& options) {
  const int n = spec.dim, N = grid.N;

  DiscreteHistory h = init ? *init : DiscreteHistory::straight_line(x_i, x_f, N);
  if (h.dim() != n || h.slices() != N) throw ShapeMismatch("initial history does not match grid");
  h.x.col(0) = x_i;
  h.x.col(N) = x_f;

  const double tol = options.tolerance_factor * n * N;
  ClassicalSolution sol;
  sol.grid = grid;
  ActionDerivatives d = action_gradient_hessian(spec, h, grid);
  Eigen::VectorXd r = interior_residual(d);
  double rn = inf_norm(r);
  bool polished = false;

  int it = 0;
  for (;; ++it) {
    if (rn <= tol && (polished || rn == 0.0)) break;
    if (it >= options.max_iterations) {
      if (rn <= tol) break;
      throw NoConvergence(it, rn);
    }
    const BlockTridiagonal Hii = d.hessian.slice(1, N - 1);
    const BlockTridiagonalLU lu(Hii);
    if (!lu.ok()) throw SingularHessian("second variation is singular during Newton iteration");
    const Eigen::VectorXd step = -lu.solve(r);
    if (!step.allFinite()) throw SingularHessian("Newton step is not finite");

    // Once the tolerance is met one more full step is taken to reach round-off.
    const bool polishing = rn <= tol;
    const double phi0 = r.squaredNorm();
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      DiscreteHistory trial = h;
      Eigen::Map<Eigen::VectorXd>(trial.x.data() + n, n * (N - 1)) += alpha * step;
      try {
        ActionDerivatives dt = action_gradient_hessian(spec, trial, grid);
        Eigen::VectorXd rt = interior_residual(dt);
        const double phi = rt.squaredNorm();
        if (polishing ? phi <= phi0 : phi <= (1.0 - 2e-4 * alpha) * phi0) {
          h = std::move(trial);
          d = std::move(dt);
          r = std::move(rt);
          rn = inf_norm(r);
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
      }
      if (polishing) break;
      alpha *= 0.5;
    }
    if (polishing) {
      polished = true;
      continue;
    }
    if (!accepted) throw NoConvergence(it + 1, rn);
  }

  sol.history = h;
  sol.action = d.action;
  sol.p_f = d.p_f;
  sol.p_i = d.p_i;
  sol.converged = true;
  sol.residual_norm = rn;
  sol.iterations = it;

  const BlockTridiagonalLU lu(d.hessian.slice(1, N - 1));
  if (!lu.ok()) throw SingularHessian("second variation is singular at the solution");
  if (options.check_caustic) {
    const DiscreteLagrangian Ld(spec);
    double m_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < N; ++k)
      m_min = std::min(m_min, Ld.mass_scale(h.x.col(k), h.x.col(k + 1), grid.t_mid(k), grid.tau()));
    const double s = std::sin(std::numbers::pi / (2.0 * N));
    const double lambda_ref = m_min * 4.0 / grid.tau() * s * s;
    if (lambda_ref > 0) {
      sol.conditioning = lu.smallest_eigenvalue_magnitude() / lambda_ref;
      if (sol.conditioning < 4.0 / (static_cast<double>(N) * N))
        throw SingularHessian("boundary times are at a conjugate point (relative smallest eigenvalue " +
                              std::to_string(sol.conditioning) + ")");
    } else {
      sol.conditioning = std::numeric_limits<double>::infinity();
    }
  }
  sol.derivatives = std::move(d);
  return sol;
}

}  // namespace

ClassicalSolution solve_classical(const SystemSpec& spec, const ChartPoint& x_f, const ChartPoint& x_i,
                                  const TimeGrid& grid, const std::optional<DiscreteHistory>& init,
                                  const SolveOptions& options) {
  if (x_f.size() != spec.dim || x_i.size() != spec.dim)
    throw ShapeMismatch("boundary point dimension differs from spec");
  if (!x_f.allFinite() || !x_i.allFinite()) throw DomainError("boundary point is not finite");
  try {
    return newton_solve(spec, x_f, x_i, grid, init, options);
  } catch (const NoConvergence&) {
    if (init) throw;
  }

  // Continuation in the elapsed time: short intervals are dominated by the
  // kinetic term, where the straight line is a good guess.
  SolveOptions inner = options;
  inner.check_caustic = false;
  const double T = grid.t_f - grid.t_i;
  std::optional<DiscreteHistory> guess;
  double s = 0.0, ds = 0.125;
  while (s < 1.0) {
    const double s_next = std::min(1.0, s + ds);
    const TimeGrid g(grid.t_i, grid.t_i + s_next * T, grid.N);
    try {
      const bool last = s_next == 1.0;
      ClassicalSolution r = newton_solve(spec, x_f, x_i, g, guess, last ? options : inner);
      if (last) return r;
      guess = std::move(r.history);
      s = s_next;
      ds = std::min(2 * ds, 0.25);
    } catch (const NoConvergence&) {
      ds *= 0.5;
      if (ds < 1e-3) throw;
    }
  }
  throw NoConvergence(options.max_iterations, std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------

ActionDerivs classical_action_derivs(const ClassicalSolution& sol) {
  const ActionDerivatives& d = sol.derivatives;
  const int n = sol.history.dim(), N = sol.history.slices();
  const BlockTridiagonalLU lu(d.hessian.slice(1, N - 1));
  if (!lu.ok()) throw SingularHessian("second variation is singular");

  // Columns [0, n) couple to x_f, [n, 2n) to x_i.
  Eigen::MatrixXd HIB = Eigen::MatrixXd::Zero(n * (N - 1), 2 * n);
  HIB.block((N - 2) * n, 0, n, n) += d.hessian.upper[N - 1];
  HIB.block(0, n, n, n) += d.hessian.upper[0].transpose();
  const Eigen::MatrixXd Z = lu.solve(HIB);

  ActionDerivs out;
  out.action = sol.action;
  out.grad_f = sol.p_f;
  out.grad_i = -sol.p_i;
  const Eigen::MatrixXd& Uf = d.hessian.upper[N - 1];  // rows node N-1, cols node N
  const Eigen::MatrixXd& Ui = d.hessian.upper[0];      // rows node 0, cols node 1
  out.Hff = d.hessian.diag[N] - Uf.transpose() * Z.block((N - 2) * n, 0, n, n);
  out.Hfi = -Uf.transpose() * Z.block((N - 2) * n, n, n, n);
  out.Hif = -Ui * Z.block(0, 0, n, n);
  out.Hii = d.hessian.diag[0] - Ui * Z.block(0, n, n, n);
  return out;
}

ActionDerivs classical_action_derivs(const SystemSpec& spec, const ChartPoint& x_f, const ChartPoint& x_i,
                                     const TimeGrid& grid) {
  return classical_action_derivs(solve_classical(spec, x_f, x_i, grid));
}

BoundaryGreens boundary_greens(const ActionDerivs& d) {
  const int n = static_cast<int>(d.Hfi.rows());
  BoundaryGreens g;
  g.Hff = d.Hff;
  g.Hfi = d.Hfi;
  g.Hif = d.Hif;
  g.Hii = d.Hii;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(d.Hfi);
  if (!lu.isInvertible()) throw SingularHessian("mixed Hessian block of the classical action is singular");
  g.gFif = lu.inverse();
  g.gFfi = g.gFif.transpose();
  g.gFC = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  g.gFC.topRightCorner(n, n) = -g.gFfi;
  g.gFC.bottomLeftCorner(n, n) = g.gFif;
  return g;
}

// ---------------------------------------------------------------------------

JacobiFields::JacobiFields(const ClassicalSolution& sol)
    : n_(sol.history.dim()), N_(sol.history.slices()) {
  for (const auto& s : sol.derivatives.slices) {
    A_.push_back(s.aa);
    B_.push_back(s.ab);
    C_.push_back(s.bb);
  }
  interior_ = sol.derivatives.hessian.slice(1, N_ - 1);
}

Eigen::MatrixXd JacobiFields::dirichlet(const Eigen::VectorXd& dx_f, const Eigen::VectorXd& dx_i) const {
  const BlockTridiagonalLU lu(interior_);
  if (!lu.ok()) throw SingularHessian("second variation is singular");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ * (N_ - 1));
  rhs.segment(0, n_) -= B_[0].transpose() * dx_i;
  rhs.segment((N_ - 2) * n_, n_) -= B_[N_ - 1] * dx_f;
  const Eigen::VectorXd inner = lu.solve(rhs);
  Eigen::MatrixXd dh(n_, N_ + 1);
  dh.col(0) = dx_i;
  dh.col(N_) = dx_f;
  for (int k = 1; k < N_; ++k) dh.col(k) = inner.segment((k - 1) * n_, n_);
  return dh;
}

Eigen::MatrixXd JacobiFields::cauchy(int k, const Eigen::VectorXd& dx, const Eigen::VectorXd& dp) const {
  Eigen::MatrixXd dh(n_, N_ + 1);
  dh.col(k) = dx;
  Eigen::VectorXd p = dp;
  for (int j = k; j < N_; ++j) {
    dh.col(j + 1) = -B_[j].partialPivLu().solve(p + A_[j] * dh.col(j));
    p = B_[j].transpose() * dh.col(j) + C_[j] * dh.col(j + 1);
  }
  p = dp;
  for (int j = k; j > 0; --j) {
    dh.col(j - 1) = B_[j - 1].transpose().partialPivLu().solve(p - C_[j - 1] * dh.col(j));
    p = -(A_[j - 1] * dh.col(j - 1) + B_[j - 1] * dh.col(j));
  }
  return dh;
}

Eigen::VectorXd JacobiFields::momentum(const Eigen::MatrixXd& dh, int k) const {
  if (k < N_) return -(A_[k] * dh.col(k) + B_[k] * dh.col(k + 1));
  return B_[N_ - 1].transpose() * dh.col(N_ - 1) + C_[N_ - 1] * dh.col(N_);
}

Eigen::MatrixXd JacobiFields::cauchy_project(const Eigen::MatrixXd& dh, int k) const {
  return cauchy(k, dh.col(k), momentum(dh, k));
}

Eigen::VectorXd JacobiFields::wronskian(const Eigen::MatrixXd& dh1, const Eigen::MatrixXd& dh2) const {
  Eigen::VectorXd w(N_ + 1);
  for (int k = 0; k <= N_; ++k)
    w[k] = momentum(dh1, k).dot(dh2.col(k)) - momentum(dh2, k).dot(dh1.col(k));
  return w;
}

Eigen::MatrixXd JacobiFields::residual(const Eigen::MatrixXd& dh) const {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n_, N_ + 1);
  for (int k = 1; k < N_; ++k)
    r.col(k) = B_[k - 1].transpose() * dh.col(k - 1) + (C_[k - 1] + A_[k]) * dh.col(k) + B_[k] * dh.col(k + 1);
  return r;
}

}  // namespace bmech
