#include <algorithm>
#include <cmath>

#include "bmech/geometry.hpp"

namespace bmech {

namespace {

double scale_of(const ChartPoint& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

// Second differences lose two digits per decade of h; they get a larger step.
double fd_step2(const ChartPoint& x) { return std::max(1e-4, 1e-5 * scale_of(x)); }

std::vector<Jet2> seed(const ChartPoint& x) {
  const int k = static_cast<int>(x.size());
  std::vector<Jet2> v;
  v.reserve(k);
  for (int i = 0; i < k; ++i) v.push_back(Jet2::variable(x[i], i, k));
  return v;
}

}  // namespace

Tensor3 zero_tensor3(int n) { return Tensor3(n, Eigen::MatrixXd::Zero(n, n)); }

double fd_step(const ChartPoint& x) { return std::max(1e-5, 1e-7 * scale_of(x)); }

// ---------------------------------------------------------------------------

ScalarField ScalarField::from_expr(Expr e, std::vector<double> params, int dim) {
  ScalarField f;
  f.dim_ = dim;
  f.expr_ = std::move(e);
  f.params_ = std::move(params);
  return f;
}

ScalarField ScalarField::from_function(int dim, Fn fn) {
  ScalarField f;
  f.dim_ = dim;
  f.fn_ = std::move(fn);
  return f;
}

ScalarField ScalarField::constant(int dim, double c) {
  ScalarField f;
  f.dim_ = dim;
  f.is_const_ = true;
  f.const_value_ = c;
  return f;
}

double ScalarField::operator()(const ChartPoint& x) const {
  if (is_const_) return const_value_;
  if (expr_) return eval(expr_, EvalEnv{std::span<const double>(x.data(), x.size()), params_});
  return fn_(x);
}

Eigen::VectorXd ScalarField::gradient(const ChartPoint& x) const {
  if (is_const_) return Eigen::VectorXd::Zero(dim_);
  if (expr_) return eval_jet(expr_, seed(x), params_).gradient(dim_);
  const double h = fd_step(x);
  Eigen::VectorXd g(dim_);
  ChartPoint y = x;
  for (int i = 0; i < dim_; ++i) {
    y[i] = x[i] + h;
    const double fp = fn_(y);
    y[i] = x[i] - h;
    const double fm = fn_(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

Eigen::MatrixXd ScalarField::hessian(const ChartPoint& x) const {
  if (is_const_) return Eigen::MatrixXd::Zero(dim_, dim_);
  if (expr_) return eval_jet(expr_, seed(x), params_).hessian(dim_);
  const double h = fd_step2(x);
  Eigen::MatrixXd H(dim_, dim_);
  const double f0 = fn_(x);
  ChartPoint y = x;
  for (int i = 0; i < dim_; ++i) {
    y[i] = x[i] + h;
    const double fp = fn_(y);
    y[i] = x[i] - h;
    const double fm = fn_(y);
    y[i] = x[i];
    H(i, i) = (fp - 2 * f0 + fm) / (h * h);
    for (int j = 0; j < i; ++j) {
      double s = 0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          y[i] = x[i] + si * h;
          y[j] = x[j] + sj * h;
          s += si * sj * fn_(y);
        }
      y[i] = x[i];
      y[j] = x[j];
      H(i, j) = H(j, i) = s / (4 * h * h);
    }
  }
  return H;
}

// ---------------------------------------------------------------------------

VectorField::VectorField(std::vector<ScalarField> components) : comp_(std::move(components)) {}

VectorField VectorField::constant(const Eigen::VectorXd& a) {
  std::vector<ScalarField> c;
  const int n = static_cast<int>(a.size());
  for (int k = 0; k < n; ++k) c.push_back(ScalarField::constant(n, a[k]));
  return VectorField(std::move(c));
}

Eigen::VectorXd VectorField::operator()(const ChartPoint& x) const {
  Eigen::VectorXd v(dim());
  for (int k = 0; k < dim(); ++k) v[k] = comp_[k](x);
  return v;
}

Eigen::MatrixXd VectorField::jacobian(const ChartPoint& x) const {
  Eigen::MatrixXd J(dim(), dim());
  for (int k = 0; k < dim(); ++k) J.row(k) = comp_[k].gradient(x).transpose();
  return J;
}

double VectorField::divergence(const ChartPoint& x) const { return jacobian(x).trace(); }

Eigen::VectorXd lie_bracket(const VectorField& a, const VectorField& b, const ChartPoint& x) {
  return b.jacobian(x) * a(x) - a.jacobian(x) * b(x);
}

// ---------------------------------------------------------------------------

MetricField MetricField::from_exprs(const std::vector<std::vector<Expr>>& g,
                                    std::vector<double> params) {
  MetricField m;
  m.dim_ = static_cast<int>(g.size());
  m.comp_.resize(m.dim_);
  for (int a = 0; a < m.dim_; ++a)
    for (int b = 0; b < m.dim_; ++b)
      m.comp_[a].push_back(ScalarField::from_expr(g[a][b], params, m.dim_));
  return m;
}

MetricField MetricField::from_function(int dim, Fn g) {
  MetricField m;
  m.dim_ = dim;
  m.fn_ = std::move(g);
  return m;
}

MetricField MetricField::identity(int dim) {
  MetricField m;
  m.dim_ = dim;
  m.comp_.resize(dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) m.comp_[a].push_back(ScalarField::constant(dim, a == b ? 1.0 : 0.0));
  return m;
}

bool MetricField::is_constant() const {
  if (fn_) return false;
  for (const auto& row : comp_)
    for (const auto& c : row)
      if (!c.is_constant()) return false;
  return true;
}

Eigen::MatrixXd MetricField::operator()(const ChartPoint& x) const {
  if (fn_) return fn_(x);
  Eigen::MatrixXd g(dim_, dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b) g(a, b) = comp_[a][b](x);
  return g;
}

Tensor3 MetricField::derivative(const ChartPoint& x) const {
  Tensor3 dg = zero_tensor3(dim_);
  if (!fn_) {
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) {
        const Eigen::VectorXd gr = comp_[a][b].gradient(x);
        for (int c = 0; c < dim_; ++c) dg[c](a, b) = gr[c];
      }
    return dg;
  }
  const double h = fd_step(x);
  ChartPoint y = x;
  for (int c = 0; c < dim_; ++c) {
    y[c] = x[c] + h;
    const Eigen::MatrixXd gp = fn_(y);
    y[c] = x[c] - h;
    const Eigen::MatrixXd gm = fn_(y);
    y[c] = x[c];
    dg[c] = (gp - gm) / (2 * h);
  }
  return dg;
}

std::vector<Eigen::MatrixXd> MetricField::second_derivative(const ChartPoint& x) const {
  const int n = dim_;
  std::vector<Eigen::MatrixXd> ddg(n * n, Eigen::MatrixXd::Zero(n, n));
  if (!fn_) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Eigen::MatrixXd H = comp_[a][b].hessian(x);
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) ddg[c * n + d](a, b) = H(c, d);
      }
    return ddg;
  }
  const double h = fd_step2(x);
  const Eigen::MatrixXd g0 = fn_(x);
  ChartPoint y = x;
  for (int c = 0; c < n; ++c) {
    y[c] = x[c] + h;
    const Eigen::MatrixXd gp = fn_(y);
    y[c] = x[c] - h;
    const Eigen::MatrixXd gm = fn_(y);
    y[c] = x[c];
    ddg[c * n + c] = (gp - 2 * g0 + gm) / (h * h);
    for (int d = 0; d < c; ++d) {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
      for (int sc : {1, -1})
        for (int sd : {1, -1}) {
          y[c] = x[c] + sc * h;
          y[d] = x[d] + sd * h;
          s += (sc * sd) * fn_(y);
        }
      y[c] = x[c];
      y[d] = x[d];
      ddg[c * n + d] = ddg[d * n + c] = s / (4 * h * h);
    }
  }
  return ddg;
}

void MetricField::check_positive_definite(const std::vector<ChartPoint>& points) const {
  for (const auto& x : points) {
    const Eigen::MatrixXd g = (*this)(x);
    if (!g.allFinite() || (g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + g.cwiseAbs().maxCoeff()))
      throw SingularMetric("metric is not symmetric at a sample point");
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw SingularMetric("metric is not positive-definite at a sample point");
  }
}

}  // namespace bmech
