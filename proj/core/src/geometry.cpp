#include <cmath>
#include <numbers>

#include "bmech/geometry.hpp"

namespace bmech {

namespace {

Eigen::MatrixXd inverse_metric(const Eigen::MatrixXd& g) {
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (!g.allFinite() || llt.info() != Eigen::Success)
    throw SingularMetric("metric is singular or not positive-definite");
  const Eigen::MatrixXd gi = llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
  if (!gi.allFinite()) throw SingularMetric("metric inverse is not finite");
  return gi;
}

// K[d](b, c) = d_b g_dc + d_c g_db - d_d g_bc
Tensor3 lowered(const Tensor3& dg, int n) {
  Tensor3 K = zero_tensor3(n);
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) K[d](b, c) = dg[b](d, c) + dg[c](d, b) - dg[d](b, c);
  return K;
}

Tensor3 raise(const Eigen::MatrixXd& gi, const Tensor3& K, int n) {
  Tensor3 G = zero_tensor3(n);
  for (int a = 0; a < n; ++a)
    for (int d = 0; d < n; ++d)
      if (gi(a, d) != 0.0) G[a] += 0.5 * gi(a, d) * K[d];
  return G;
}

}  // namespace

Tensor3 christoffel(const MetricField& g, const ChartPoint& x) {
  const int n = g.dim();
  return raise(inverse_metric(g(x)), lowered(g.derivative(x), n), n);
}

Curvature christoffel_curvature(const MetricField& g, const ChartPoint& x) {
  const int n = g.dim();
  const Eigen::MatrixXd gi = inverse_metric(g(x));
  const Tensor3 dg = g.derivative(x);
  const auto ddg = g.second_derivative(x);
  const Tensor3 K = lowered(dg, n);

  Curvature out;
  out.christoffel = raise(gi, K, n);
  const Tensor3& G = out.christoffel;

  // dG[e][a](b, c) = d_e Gamma^a_bc
  std::vector<Tensor3> dG(n, zero_tensor3(n));
  for (int e = 0; e < n; ++e) {
    const Eigen::MatrixXd dgi = -gi * dg[e] * gi;
    Tensor3 dK = zero_tensor3(n);
    for (int d = 0; d < n; ++d)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          dK[d](b, c) = ddg[e * n + b](d, c) + ddg[e * n + c](d, b) - ddg[e * n + d](b, c);
    for (int a = 0; a < n; ++a)
      for (int d = 0; d < n; ++d) dG[e][a] += 0.5 * (dgi(a, d) * K[d] + gi(a, d) * dK[d]);
  }

  // R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb ; Ric_bd = R^a_bad
  out.ricci = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double r = 0;
      for (int a = 0; a < n; ++a) {
        r += dG[a][a](d, b) - dG[d][a](a, b);
        for (int e = 0; e < n; ++e) r += G[a](a, e) * G[e](d, b) - G[a](d, e) * G[e](a, b);
      }
      out.ricci(b, d) = r;
    }
  out.scalar = (gi.cwiseProduct(out.ricci)).sum();
  return out;
}

// ---------------------------------------------------------------------------

ConnectionField ConnectionField::flat(int dim) {
  return ConnectionField(dim, [dim](const ChartPoint&) { return zero_tensor3(dim); });
}

ConnectionField ConnectionField::levi_civita(const MetricField& g) {
  return ConnectionField(g.dim(), [g](const ChartPoint& x) { return christoffel(g, x); });
}

ConnectionField ConnectionField::perturbed(Fn s) const {
  Fn base = fn_;
  return ConnectionField(dim_, [base, s](const ChartPoint& x) {
    Tensor3 G = base(x);
    const Tensor3 S = s(x);
    for (std::size_t a = 0; a < G.size(); ++a) G[a] += S[a];
    return G;
  });
}

// ---------------------------------------------------------------------------

cplx lie_derivative_density(const Eigen::VectorXd& a, double div_a, cplx psi,
                            const Eigen::VectorXcd& grad_psi, cplx alpha) {
  return a.cast<cplx>().dot(grad_psi) + alpha * div_a * psi;
}

cplx lie_derivative_density(const VectorField& a, const ScalarField& psi, cplx alpha,
                            const ChartPoint& x) {
  return lie_derivative_density(a(x), a.divergence(x), psi(x), psi.gradient(x).cast<cplx>(), alpha);
}

DensityValue DensityValue::pow(double beta) const {
  return {std::pow(value, beta), weight * beta};
}

DensityValue operator*(const DensityValue& a, const DensityValue& b) {
  return {a.value * b.value, a.weight + b.weight};
}

DensityValue operator/(const DensityValue& a, const DensityValue& b) {
  return {a.value / b.value, a.weight - b.weight};
}

DensityValue operator+(const DensityValue& a, const DensityValue& b) {
  if (a.weight != b.weight) throw WeightMismatch("cannot add densities of different weight");
  return {a.value + b.value, a.weight};
}

DensityValue volume_element(const Eigen::MatrixXd& g) {
  if (g.rows() != g.cols()) throw Degenerate("metric must be square");
  const double det = g.determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-300) throw Degenerate("metric determinant vanishes");
  return {std::sqrt(std::abs(det)), 1.0};
}

DensityValue volume_element(const MetricField& g, const ChartPoint& x) { return volume_element(g(x)); }

DensityValue liouville_volume(const Eigen::MatrixXd& omega) {
  const auto n = omega.rows();
  if (n != omega.cols() || n % 2 != 0 || n == 0) throw Degenerate("symplectic form must be even-dimensional");
  if ((omega + omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + omega.cwiseAbs().maxCoeff()))
    throw Degenerate("symplectic form must be antisymmetric");
  const Eigen::MatrixXd w = omega / (2 * std::numbers::pi);
  const double det = w.determinant();
  const double scale = std::pow(w.cwiseAbs().maxCoeff(), static_cast<double>(n));
  if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale) throw Degenerate("symplectic form is degenerate");
  return {std::sqrt(std::abs(det)), 1.0};
}

}  // namespace bmech
