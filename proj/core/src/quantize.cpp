#include "bmech/quantize.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

namespace bmech {

namespace {

using Triplet = Eigen::Triplet<cplx>;
constexpr cplx I1{0.0, 1.0};

// Flat index of the neighbour `offset` steps along axis d, or -1 past a
// non-periodic edge.
int neighbour(const Grid& grid, int flat, int d, int offset) {
  const Axis& ax = grid.axis(d);
  const int i = grid.coordinate_index(flat, d);
  int j = i + offset;
  if (ax.periodic) {
    j = ((j % ax.M) + ax.M) % ax.M;
  } else if (j < 0 || j >= ax.M) {
    return -1;
  }
  return flat + (j - i) * grid.stride(d);
}

// Fourier wavenumbers of an M-point periodic axis; the Nyquist mode is +pi/h.
Eigen::VectorXd wavenumbers(const Axis& ax) {
  Eigen::VectorXd k(ax.M);
  const double L = ax.M * ax.h;
  for (int m = 0; m < ax.M; ++m) {
    int s = m <= ax.M / 2 ? m : m - ax.M;
    k[m] = 2 * std::numbers::pi * s / L;
  }
  return k;
}

// Matrix of the 1D Fourier multiplier with symbol `sym` on a uniform axis.
Eigen::MatrixXcd fourier_multiplier(const Axis& ax, const std::function<cplx(double)>& sym) {
  const int M = ax.M;
  const Eigen::VectorXd k = wavenumbers(ax);
  Eigen::VectorXcd s(M), c(M);
  for (int m = 0; m < M; ++m) s[m] = sym(k[m]);
  for (int r = 0; r < M; ++r) {
    cplx acc = 0;
    for (int m = 0; m < M; ++m) acc += s[m] * std::exp(I1 * k[m] * (r * ax.h));
    c[r] = acc / static_cast<double>(M);
  }
  // Circulant: T(j, l) depends on (j - l) mod M only.
  Eigen::MatrixXcd T(M, M);
  for (int j = 0; j < M; ++j)
    for (int l = 0; l < M; ++l) T(j, l) = c[((j - l) % M + M) % M];
  return T;
}

// Embeds per-axis matrices into the full grid: sum_d kron(..., T_d, ...).
Eigen::MatrixXcd kron_sum(const Grid& grid, const std::vector<Eigen::MatrixXcd>& per_axis) {
  const int N = grid.size();
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(N, N);
  for (int d = 0; d < grid.dim(); ++d) {
    if (per_axis[d].size() == 0) continue;
    const int M = grid.axis(d).M;
    for (int j = 0; j < N; ++j) {
      const int i = grid.coordinate_index(j, d);
      const int base = j - i * grid.stride(d);
      for (int l = 0; l < M; ++l) G(j, base + l * grid.stride(d)) += per_axis[d](i, l);
    }
  }
  return G;
}

Eigen::MatrixXcd kron_product(const Grid& grid, const std::vector<Eigen::MatrixXcd>& per_axis) {
  const int N = grid.size();
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(N, N);
  for (int d = 0; d < grid.dim(); ++d) {
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(N, N);
    const int M = grid.axis(d).M;
    for (int j = 0; j < N; ++j) {
      const int i = grid.coordinate_index(j, d);
      const int base = j - i * grid.stride(d);
      for (int l = 0; l < M; ++l) E(j, base + l * grid.stride(d)) = per_axis[d](i, l);
    }
    P = E * P;
  }
  return P;
}

}  // namespace

GridOperator op_F(const ScalarField& f, const Grid& grid) {
  return op_F([&f](const ChartPoint& x) { return cplx(f(x)); }, grid);
}

GridOperator op_F(const std::function<cplx(const ChartPoint&)>& f, const Grid& grid) {
  GridOperator op{grid, Eigen::MatrixXcd::Zero(grid.size(), grid.size()), std::nullopt};
  for (int j = 0; j < grid.size(); ++j) op.matrix(j, j) = f(grid.point(j));
  return op;
}

SparseC difference_matrix(const Grid& grid, int d) {
  const Axis& ax = grid.axis(d);
  std::vector<Triplet> t;
  t.reserve(3 * grid.size());
  const double c = 1.0 / (2 * ax.h);
  for (int j = 0; j < grid.size(); ++j) {
    const int i = grid.coordinate_index(j, d);
    if (ax.periodic || (i > 0 && i < ax.M - 1)) {
      t.emplace_back(j, neighbour(grid, j, d, 1), c);
      t.emplace_back(j, neighbour(grid, j, d, -1), -c);
    } else if (i == 0) {
      t.emplace_back(j, j, -3 * c);
      t.emplace_back(j, neighbour(grid, j, d, 1), 4 * c);
      t.emplace_back(j, neighbour(grid, j, d, 2), -c);
    } else {
      t.emplace_back(j, j, 3 * c);
      t.emplace_back(j, neighbour(grid, j, d, -1), -4 * c);
      t.emplace_back(j, neighbour(grid, j, d, -2), c);
    }
  }
  SparseC D(grid.size(), grid.size());
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

Eigen::VectorXd discrete_divergence(const VectorField& a, const Grid& grid, const std::optional<ScalarField>& mu) {
  if (a.dim() != grid.dim()) throw ShapeMismatch("vector field dimension differs from grid");
  const int N = grid.size();
  Eigen::VectorXd div = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd muv = Eigen::VectorXd::Ones(N);
  if (mu)
    for (int j = 0; j < N; ++j) muv[j] = (*mu)(grid.point(j));
  for (int d = 0; d < grid.dim(); ++d) {
    Eigen::VectorXd ad(N);
    for (int j = 0; j < N; ++j) ad[j] = a.component(d)(grid.point(j));
    const SparseC D = difference_matrix(grid, d);
    const Eigen::VectorXd Da = (D * ad.cast<cplx>()).real();
    div += Da;
    if (mu) div += (ad.array() * (D * muv.cast<cplx>()).real().array() / muv.array()).matrix();
  }
  return div;
}

SparseC op_G_sparse(const VectorField& a, double gamma, const Grid& grid, const std::optional<ScalarField>& mu) {
  if (a.dim() != grid.dim()) throw ShapeMismatch("vector field dimension differs from grid");
  const int N = grid.size();
  SparseC G(N, N);
  for (int d = 0; d < grid.dim(); ++d) {
    Eigen::VectorXcd ad(N);
    for (int j = 0; j < N; ++j) ad[j] = a.component(d)(grid.point(j));
    if (ad.cwiseAbs().maxCoeff() == 0.0) continue;
    const SparseC D = difference_matrix(grid, d);
    const SparseC AD = ad.asDiagonal() * D;
    const SparseC DA = D * ad.asDiagonal();
    G += cplx(0.0, -0.5) * (AD + DA);
  }
  if (gamma != 0.0) {
    const Eigen::VectorXd div = discrete_divergence(a, grid, mu);
    SparseC Dg(N, N);
    std::vector<Triplet> t;
    for (int j = 0; j < N; ++j) t.emplace_back(j, j, gamma * div[j]);
    Dg.setFromTriplets(t.begin(), t.end());
    G += Dg;
  }
  G.makeCompressed();
  return G;
}

GridOperator op_G(const VectorField& a, double gamma, const Grid& grid, const std::optional<ScalarField>& mu) {
  return GridOperator{grid, Eigen::MatrixXcd(op_G_sparse(a, gamma, grid, mu)), wave_weight(gamma)};
}

bool is_lattice_translation(const VectorField& a, const Grid& grid) {
  if (a.dim() != grid.dim()) return false;
  for (int d = 0; d < a.dim(); ++d) {
    if (!a.component(d).is_constant()) return false;
    const double v = a.component(d)(grid.point(0));
    if (v != 0.0 && !grid.axis(d).periodic) return false;
  }
  return true;
}

Eigen::MatrixXcd translation_generator(const Eigen::VectorXd& a, const Grid& grid) {
  std::vector<Eigen::MatrixXcd> per_axis(grid.dim());
  for (int d = 0; d < grid.dim(); ++d) {
    if (a[d] == 0.0) continue;
    if (!grid.axis(d).periodic) throw ShapeMismatch("lattice translation needs a periodic axis");
    const double ad = a[d];
    per_axis[d] = fourier_multiplier(grid.axis(d), [ad](double k) { return cplx(ad * k); });
  }
  return kron_sum(grid, per_axis);
}

GridOperator shift_operator(const VectorField& a, double eps, const Grid& grid) {
  const int N = grid.size();
  GridOperator U{grid, Eigen::MatrixXcd::Identity(N, N), wave_weight(0.0)};
  if (eps == 0.0) return U;
  Eigen::MatrixXcd G;
  if (is_lattice_translation(a, grid))
    G = translation_generator(a(grid.point(0)), grid);
  else
    G = Eigen::MatrixXcd(op_G_sparse(a, 0.0, grid));
  const Eigen::MatrixXcd X = cplx(0.0, -eps) * G;
  U.matrix = X.exp();
  return U;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd inverse_pd(const Eigen::MatrixXd& g) {
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (!g.allFinite() || llt.info() != Eigen::Success) throw SingularMetric("metric is not positive-definite on the grid");
  return llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
}

}  // namespace

Eigen::VectorXd scalar_curvature_on(const MetricField& g, const Grid& grid) {
  Eigen::VectorXd R(grid.size());
  for (int j = 0; j < grid.size(); ++j) R[j] = christoffel_curvature(g, grid.point(j)).scalar;
  return R;
}

SparseC op_K_sparse(const MetricField& g, double xi, const Grid& grid) {
  if (g.dim() != grid.dim()) throw ShapeMismatch("metric dimension differs from grid");
  const int N = grid.size(), n = grid.dim();
  // sqrt|g| g^ab at the nodes and sqrt|g| g^aa at forward half-steps.
  std::vector<Eigen::MatrixXd> S(N);
  Eigen::MatrixXd Sh(N, n);
  Eigen::VectorXd sqrtg(N);
  for (int j = 0; j < N; ++j) {
    const ChartPoint x = grid.point(j);
    const Eigen::MatrixXd gx = g(x);
    const Eigen::MatrixXd gi = inverse_pd(gx);
    sqrtg[j] = std::sqrt(gx.determinant());
    S[j] = sqrtg[j] * gi;
    for (int a = 0; a < n; ++a) {
      ChartPoint xm = x;
      xm[a] += 0.5 * grid.axis(a).h;
      const Eigen::MatrixXd gm = g(xm);
      Sh(j, a) = std::sqrt(gm.determinant()) * inverse_pd(gm)(a, a);
    }
  }

  // A = sum_a D_a S^aa D_a (conservative) + sum_{a != b} D_a S^ab D_b (central)
  std::vector<Triplet> t;
  for (int j = 0; j < N; ++j) {
    for (int a = 0; a < n; ++a) {
      const double h2 = grid.axis(a).h * grid.axis(a).h;
      const int jp = neighbour(grid, j, a, 1), jm = neighbour(grid, j, a, -1);
      const double sp = Sh(j, a);
      // Backward half-step value belongs to the previous node; at a
      // non-periodic lower edge it is evaluated directly.
      double sm;
      if (jm >= 0) {
        sm = Sh(jm, a);
      } else {
        ChartPoint xm = grid.point(j);
        xm[a] -= 0.5 * grid.axis(a).h;
        const Eigen::MatrixXd gm = g(xm);
        sm = std::sqrt(gm.determinant()) * inverse_pd(gm)(a, a);
      }
      t.emplace_back(j, j, -(sp + sm) / h2);
      if (jp >= 0) t.emplace_back(j, jp, sp / h2);
      if (jm >= 0) t.emplace_back(j, jm, sm / h2);
      for (int b = 0; b < n; ++b) {
        if (b == a) continue;
        const double c = 1.0 / (4 * grid.axis(a).h * grid.axis(b).h);
        for (int sa : {1, -1}) {
          const int k = neighbour(grid, j, a, sa);
          if (k < 0) continue;
          const double s = S[k](a, b);
          if (s == 0.0) continue;
          for (int sb : {1, -1}) {
            const int l = neighbour(grid, k, b, sb);
            if (l < 0) continue;
            t.emplace_back(j, l, sa * sb * s * c);
          }
        }
      }
    }
  }
  SparseC A(N, N);
  A.setFromTriplets(t.begin(), t.end());

  // K = -|g|^(-1/4) A |g|^(-1/4) + xi R
  const Eigen::VectorXcd w = sqrtg.array().sqrt().inverse().matrix().cast<cplx>();
  SparseC K = -(w.asDiagonal() * A * w.asDiagonal());
  if (xi != 0.0) {
    const Eigen::VectorXd R = scalar_curvature_on(g, grid);
    std::vector<Triplet> d;
    for (int j = 0; j < N; ++j) d.emplace_back(j, j, xi * R[j]);
    SparseC Rm(N, N);
    Rm.setFromTriplets(d.begin(), d.end());
    K += Rm;
  }
  K.makeCompressed();
  return K;
}

GridOperator op_K(const MetricField& g, double xi, const Grid& grid) {
  return GridOperator{grid, Eigen::MatrixXcd(op_K_sparse(g, xi, grid)), std::nullopt};
}

Eigen::MatrixXcd band_limit_projector(const Grid& grid, std::optional<double> cutoff) {
  std::vector<Eigen::MatrixXcd> per_axis(grid.dim());
  for (int d = 0; d < grid.dim(); ++d) {
    const double lo = cutoff ? *cutoff : std::numbers::pi / (3 * grid.axis(d).h);
    per_axis[d] = fourier_multiplier(grid.axis(d), [lo](double k) {
      const double ak = std::abs(k), hi = 2 * lo;
      if (ak <= lo) return cplx(1.0);
      if (ak >= hi) return cplx(0.0);
      // C-infinity step so the taper adds no algebraic tails in position.
      const double t = (ak - lo) / (hi - lo);
      const double a = std::exp(-1.0 / (1.0 - t)), b = std::exp(-1.0 / t);
      return cplx(a / (a + b));
    });
  }
  return kron_product(grid, per_axis);
}

std::vector<Eigen::MatrixXcd> commutant_basis(const std::vector<GridOperator>& ops, double tol) {
  if (ops.empty()) return {};
  const int N = static_cast<int>(ops.front().matrix.rows());
  const int N2 = N * N;
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(N2 * static_cast<int>(ops.size()), N2);
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(N, N);
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const Eigen::MatrixXcd& A = ops[k].matrix;
    // vec(X A - A X) = (A^T kron I - I kron A) vec(X)
    for (int c = 0; c < N; ++c) {
      for (int r = 0; r < N; ++r) L.block(k * N2 + c * N, r * N, N, N) += A(r, c) * I;
      L.block(k * N2 + c * N, c * N, N, N) -= A;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(L, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  std::vector<Eigen::MatrixXcd> basis;
  for (int i = 0; i < N2; ++i) {
    const double si = i < s.size() ? s[i] : 0.0;
    if (si <= tol * std::max(1.0, smax)) {
      const Eigen::VectorXcd v = svd.matrixV().col(i);
      basis.push_back(Eigen::Map<const Eigen::MatrixXcd>(v.data(), N, N));
    }
  }
  return basis;
}

}  // namespace bmech
