#include "bmech/symplectic.hpp"

#include <cmath>

namespace bmech {

namespace {

constexpr double kFdStep = 1e-5;

// Signed permutation from packed (x_f, p_f, x_i, p_i) slots to z = (q, p).
struct SlotMap {
  std::vector<int> z_index;
  std::vector<double> sign;
};

SlotMap packed_to_z(int n) {
  SlotMap m;
  m.z_index.resize(4 * n);
  m.sign.assign(4 * n, 1.0);
  for (int a = 0; a < n; ++a) {
    m.z_index[a] = a;                      // x_f
    m.z_index[n + a] = 2 * n + a;          // p_f -> -p_q
    m.sign[n + a] = -1.0;
    m.z_index[2 * n + a] = n + a;          // x_i
    m.z_index[3 * n + a] = 3 * n + a;      // p_i
  }
  return m;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& z) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd y = z;
  for (int i = 0; i < z.size(); ++i) {
    y[i] = z[i] + kFdStep;
    const double fp = f(y);
    y[i] = z[i] - kFdStep;
    const double fm = f(y);
    y[i] = z[i];
    g[i] = (fp - fm) / (2 * kFdStep);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                            const Eigen::VectorXd& z) {
  Eigen::MatrixXd H(z.size(), z.size());
  Eigen::VectorXd y = z;
  for (int i = 0; i < z.size(); ++i) {
    y[i] = z[i] + kFdStep;
    const Eigen::VectorXd gp = g(y);
    y[i] = z[i] - kFdStep;
    const Eigen::VectorXd gm = g(y);
    y[i] = z[i];
    H.col(i) = (gp - gm) / (2 * kFdStep);
  }
  return 0.5 * (H + H.transpose());
}

struct EndDerivs {
  Eigen::VectorXd xf, pf, xi, pi;
};

// Derivatives with respect to the stored end momenta p_f, p_i.
EndDerivs end_derivs(const Eigen::VectorXd& gz, int n) {
  return {gz.segment(0, n), -gz.segment(2 * n, n), gz.segment(n, n), gz.segment(3 * n, n)};
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::VectorXd BoundaryPhasePoint::q() const {
  Eigen::VectorXd v(2 * dim());
  v << x_f, x_i;
  return v;
}

Eigen::VectorXd BoundaryPhasePoint::p() const {
  Eigen::VectorXd v(2 * dim());
  v << -p_f, p_i;
  return v;
}

Eigen::VectorXd BoundaryPhasePoint::z() const {
  Eigen::VectorXd v(4 * dim());
  v << x_f, x_i, -p_f, p_i;
  return v;
}

Eigen::VectorXd BoundaryPhasePoint::packed() const {
  Eigen::VectorXd v(4 * dim());
  v << x_f, p_f, x_i, p_i;
  return v;
}

BoundaryPhasePoint BoundaryPhasePoint::from_z(const Eigen::VectorXd& z) {
  const int n = static_cast<int>(z.size()) / 4;
  return {z.segment(0, n), -z.segment(2 * n, n), z.segment(n, n), z.segment(3 * n, n)};
}

BoundaryPhasePoint BoundaryPhasePoint::from_packed(const Eigen::VectorXd& w) {
  const int n = static_cast<int>(w.size()) / 4;
  return {w.segment(0, n), w.segment(n, n), w.segment(2 * n, n), w.segment(3 * n, n)};
}

// ---------------------------------------------------------------------------

Observable Observable::F(ScalarField f) {
  Observable o;
  o.kind_ = Kind::F;
  o.n_ = f.dim() / 2;
  o.f_ = std::move(f);
  return o;
}

Observable Observable::G(VectorField a) {
  Observable o;
  o.kind_ = Kind::G;
  o.n_ = a.dim() / 2;
  o.a_ = std::move(a);
  return o;
}

Observable Observable::from_expr(Expr e, std::vector<double> params, int n) {
  Observable o;
  o.kind_ = Kind::General;
  o.n_ = n;
  o.expr_ = std::move(e);
  o.params_ = std::move(params);
  return o;
}

Observable Observable::from_function(int n, std::function<double(const BoundaryPhasePoint&)> fn) {
  Observable o;
  o.kind_ = Kind::General;
  o.n_ = n;
  o.value_ = [fn](const Eigen::VectorXd& z) { return fn(BoundaryPhasePoint::from_z(z)); };
  auto value = o.value_;
  o.grad_ = [value](const Eigen::VectorXd& z) { return fd_gradient(value, z); };
  auto grad = o.grad_;
  o.hess_ = [grad](const Eigen::VectorXd& z) { return fd_jacobian(grad, z); };
  return o;
}

double Observable::operator()(const BoundaryPhasePoint& pt) const {
  switch (kind_) {
    case Kind::F: return f_(pt.q());
    case Kind::G: return a_(pt.q()).dot(pt.p());
    case Kind::General: break;
  }
  if (expr_) {
    const Eigen::VectorXd w = pt.packed();
    return eval(expr_, EvalEnv{std::span<const double>(w.data(), w.size()), params_});
  }
  return value_(pt.z());
}

Eigen::VectorXd Observable::gradient(const BoundaryPhasePoint& pt) const {
  const int m = 2 * n_;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * m);
  switch (kind_) {
    case Kind::F: g.head(m) = f_.gradient(pt.q()); return g;
    case Kind::G: {
      const Eigen::VectorXd q = pt.q();
      g.head(m) = a_.jacobian(q).transpose() * pt.p();
      g.tail(m) = a_(q);
      return g;
    }
    case Kind::General: break;
  }
  if (expr_) {
    const Eigen::VectorXd w = pt.packed();
    std::vector<Jet2> vars;
    for (int i = 0; i < w.size(); ++i) vars.push_back(Jet2::variable(w[i], i, static_cast<int>(w.size())));
    const Eigen::VectorXd gw = eval_jet(expr_, vars, params_).gradient(static_cast<int>(w.size()));
    const SlotMap map = packed_to_z(n_);
    for (int i = 0; i < gw.size(); ++i) g[map.z_index[i]] = map.sign[i] * gw[i];
    return g;
  }
  return grad_(pt.z());
}

Eigen::MatrixXd Observable::hessian(const BoundaryPhasePoint& pt) const {
  const int m = 2 * n_;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  switch (kind_) {
    case Kind::F: H.topLeftCorner(m, m) = f_.hessian(pt.q()); return H;
    case Kind::G: {
      const Eigen::VectorXd q = pt.q(), p = pt.p();
      for (int k = 0; k < m; ++k) H.topLeftCorner(m, m) += p[k] * a_.component(k).hessian(q);
      const Eigen::MatrixXd J = a_.jacobian(q);
      H.topRightCorner(m, m) = J.transpose();
      H.bottomLeftCorner(m, m) = J;
      return H;
    }
    case Kind::General: break;
  }
  if (expr_) {
    const Eigen::VectorXd w = pt.packed();
    const int k = static_cast<int>(w.size());
    std::vector<Jet2> vars;
    for (int i = 0; i < k; ++i) vars.push_back(Jet2::variable(w[i], i, k));
    const Eigen::MatrixXd hw = eval_jet(expr_, vars, params_).hessian(k);
    const SlotMap map = packed_to_z(n_);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) H(map.z_index[i], map.z_index[j]) = map.sign[i] * map.sign[j] * hw(i, j);
    return H;
  }
  return hess_(pt.z());
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd boundary_poisson_tensor(int n) {
  const int m = 2 * n;
  Eigen::MatrixXd Pi = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  Pi.topRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  Pi.bottomLeftCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  return Pi;
}

double poisson_boundary_generic(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt) {
  if (A.dim() != B.dim() || A.dim() != pt.dim()) throw ShapeMismatch("observables live on different spaces");
  const int m = 2 * pt.dim();
  const Eigen::VectorXd gA = A.gradient(pt), gB = B.gradient(pt);
  return gA.tail(m).dot(gB.head(m)) - gA.head(m).dot(gB.tail(m));
}

double poisson_boundary(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt) {
  using K = Observable::Kind;
  if (A.dim() != B.dim() || A.dim() != pt.dim()) throw ShapeMismatch("observables live on different spaces");
  const Eigen::VectorXd q = pt.q();
  if (A.kind() == K::F && B.kind() == K::F) return 0.0;
  if (A.kind() == K::F && B.kind() == K::G) return -B.a()(q).dot(A.f().gradient(q));
  if (A.kind() == K::G && B.kind() == K::F) return A.a()(q).dot(B.f().gradient(q));
  if (A.kind() == K::G && B.kind() == K::G) return pt.p().dot(lie_bracket(A.a(), B.a(), q));
  return poisson_boundary_generic(A, B, pt);
}

Observable bracket_observable(const Observable& A, const Observable& B) {
  Observable o;
  o.kind_ = Observable::Kind::General;
  o.n_ = A.dim();
  const Eigen::MatrixXd Pi = boundary_poisson_tensor(A.dim());
  o.value_ = [A, B, Pi](const Eigen::VectorXd& z) {
    const auto pt = BoundaryPhasePoint::from_z(z);
    return A.gradient(pt).dot(Pi * B.gradient(pt));
  };
  o.grad_ = [A, B, Pi](const Eigen::VectorXd& z) {
    const auto pt = BoundaryPhasePoint::from_z(z);
    const Eigen::VectorXd gA = A.gradient(pt), gB = B.gradient(pt);
    return Eigen::VectorXd(A.hessian(pt) * (Pi * gB) - B.hessian(pt) * (Pi * gA));
  };
  auto grad = o.grad_;
  o.hess_ = [grad](const Eigen::VectorXd& z) { return fd_jacobian(grad, z); };
  return o;
}

Observable product(const Observable& A, const Observable& B) {
  Observable o;
  o.kind_ = Observable::Kind::General;
  o.n_ = A.dim();
  o.value_ = [A, B](const Eigen::VectorXd& z) {
    const auto pt = BoundaryPhasePoint::from_z(z);
    return A(pt) * B(pt);
  };
  o.grad_ = [A, B](const Eigen::VectorXd& z) {
    const auto pt = BoundaryPhasePoint::from_z(z);
    return Eigen::VectorXd(A(pt) * B.gradient(pt) + B(pt) * A.gradient(pt));
  };
  o.hess_ = [A, B](const Eigen::VectorXd& z) {
    const auto pt = BoundaryPhasePoint::from_z(z);
    const Eigen::VectorXd gA = A.gradient(pt), gB = B.gradient(pt);
    return Eigen::MatrixXd(A(pt) * B.hessian(pt) + B(pt) * A.hessian(pt) + gA * gB.transpose() +
                           gB * gA.transpose());
  };
  return o;
}

// ---------------------------------------------------------------------------

double off_shell_violation(const BoundaryPhasePoint& pt, const ActionDerivs& S) {
  const double vf = (S.grad_f - pt.p_f).cwiseAbs().maxCoeff();
  const double vi = (S.grad_i + pt.p_i).cwiseAbs().maxCoeff();
  return std::max(vf, vi);
}

double on_shell_tolerance(const BoundaryPhasePoint& pt) {
  return 1e-6 * (1.0 + pt.p().cwiseAbs().maxCoeff());
}

BoundaryPhasePoint on_shell_point(const ActionDerivs& S, const Eigen::VectorXd& x_f, const Eigen::VectorXd& x_i) {
  return {x_f, S.grad_f, x_i, -S.grad_i};
}

double poisson_covariant(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt,
                         const ActionDerivs& S, const BoundaryGreens& g) {
  const int n = pt.dim();
  const double violation = off_shell_violation(pt, S);
  const double tol = on_shell_tolerance(pt);
  if (!(violation <= tol)) throw OffShell(violation, tol);

  const EndDerivs a = end_derivs(A.gradient(pt), n);
  const EndDerivs b = end_derivs(B.gradient(pt), n);
  const Eigen::MatrixXd& Gif = g.gFif;
  const Eigen::MatrixXd& Gfi = g.gFfi;

  Eigen::VectorXd ax(2 * n), bx(2 * n);
  ax << a.xf, a.xi;
  bx << b.xf, b.xi;

  double r = a.pf.dot(b.xf) - a.xf.dot(b.pf) + a.pi.dot(b.xi) - a.xi.dot(b.pi);
  r += ax.dot(g.gFC * bx);
  r += a.pf.dot((g.Hff * Gfi * g.Hii - g.Hfi) * b.pi);
  r -= a.pi.dot((g.Hii * Gif * g.Hff - g.Hif) * b.pf);
  r += a.xi.dot(Gif * g.Hff * b.pf) - a.pf.dot(g.Hff * Gfi * b.xi);
  r += a.xf.dot(Gfi * g.Hii * b.pi) - a.pi.dot(g.Hii * Gif * b.xf);
  return r;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd canonical_symplectic_matrix(int m) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  w.topRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  w.bottomLeftCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  return w;
}

Eigen::VectorXd canonical_vector_field(const Eigen::VectorXd& grad_H, const Eigen::MatrixXd& omega) {
  if (omega.rows() != omega.cols() || omega.rows() != grad_H.size() || omega.rows() % 2 != 0)
    throw Degenerate("symplectic matrix has the wrong shape");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(omega);
  if (!lu.isInvertible()) throw Degenerate("symplectic matrix is degenerate");
  const Eigen::MatrixXd Pi = -lu.inverse();
  return Pi.transpose() * grad_H;
}

Eigen::VectorXd canonical_vector_field(const ScalarField& H, const Eigen::MatrixXd& omega, const Eigen::VectorXd& z) {
  return canonical_vector_field(H.gradient(z), omega);
}

ConnectionField product_connection(const ConnectionField& gamma_q) {
  const int n = gamma_q.dim();
  return ConnectionField(2 * n, [gamma_q, n](const ChartPoint& q) {
    Tensor3 G = zero_tensor3(2 * n);
    const Tensor3 Gf = gamma_q(q.head(n));
    const Tensor3 Gi = gamma_q(q.tail(n));
    for (int a = 0; a < n; ++a) {
      G[a].topLeftCorner(n, n) = Gf[a];
      G[n + a].bottomRightCorner(n, n) = Gi[a];
    }
    return G;
  });
}

ConnectionCheck connection_invariance_check(const Observable& A, const Observable& B, const BoundaryPhasePoint& pt,
                                            const ConnectionField& g1, const ConnectionField& g2) {
  const int m = 2 * pt.dim();
  const Eigen::VectorXd q = pt.q(), p = pt.p();
  const Eigen::VectorXd gA = A.gradient(pt), gB = B.gradient(pt);
  auto bracket = [&](const ConnectionField& conn) {
    const Tensor3 G = conn(q);
    // (Gamma^c_ab p_c)_ab
    Eigen::MatrixXd Gp = Eigen::MatrixXd::Zero(m, m);
    for (int c = 0; c < m; ++c) Gp += p[c] * G[c];
    const Eigen::VectorXd hA = gA.head(m) + Gp * gA.tail(m);
    const Eigen::VectorXd hB = gB.head(m) + Gp * gB.tail(m);
    return gA.tail(m).dot(hB) - hA.dot(gB.tail(m));
  };
  ConnectionCheck c;
  c.bracket1 = bracket(g1);
  c.bracket2 = bracket(g2);
  c.diff = std::abs(c.bracket1 - c.bracket2);
  return c;
}

}  // namespace bmech
