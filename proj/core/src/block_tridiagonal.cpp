#include "bmech/block_tridiagonal.hpp"

#include <cmath>

namespace bmech {

BlockTridiagonal::BlockTridiagonal(int blocks, int n)
    : diag(blocks, Eigen::MatrixXd::Zero(n, n)),
      upper(blocks > 0 ? blocks - 1 : 0, Eigen::MatrixXd::Zero(n, n)),
      n_(n) {}

Eigen::VectorXd BlockTridiagonal::multiply(const Eigen::VectorXd& x) const {
  const int m = blocks();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(size());
  for (int k = 0; k < m; ++k) {
    y.segment(k * n_, n_) += diag[k] * x.segment(k * n_, n_);
    if (k + 1 < m) {
      y.segment(k * n_, n_) += upper[k] * x.segment((k + 1) * n_, n_);
      y.segment((k + 1) * n_, n_) += upper[k].transpose() * x.segment(k * n_, n_);
    }
  }
  return y;
}

Eigen::MatrixXd BlockTridiagonal::dense() const {
  const int m = blocks();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size(), size());
  for (int k = 0; k < m; ++k) {
    a.block(k * n_, k * n_, n_, n_) = diag[k];
    if (k + 1 < m) {
      a.block(k * n_, (k + 1) * n_, n_, n_) = upper[k];
      a.block((k + 1) * n_, k * n_, n_, n_) = upper[k].transpose();
    }
  }
  return a;
}

BlockTridiagonal BlockTridiagonal::slice(int first, int count) const {
  BlockTridiagonal s(count, n_);
  for (int k = 0; k < count; ++k) {
    s.diag[k] = diag[first + k];
    if (k + 1 < count) s.upper[k] = upper[first + k];
  }
  return s;
}

// ---------------------------------------------------------------------------

BlockTridiagonalLU::BlockTridiagonalLU(const BlockTridiagonal& a)
    : upper_(a.upper), n_(a.block_size()) {
  const int m = a.blocks();
  pivots_.reserve(m);
  l_.resize(m > 0 ? m - 1 : 0);
  Eigen::MatrixXd s = m > 0 ? a.diag[0] : Eigen::MatrixXd();
  for (int k = 0; k < m; ++k) {
    pivots_.emplace_back(s);
    const auto& lu = pivots_.back();
    const double scale = s.cwiseAbs().maxCoeff();
    const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
    if (!s.allFinite() || scale == 0.0 || piv.minCoeff() <= 1e-14 * scale) {
      ok_ = false;
      return;
    }
    if (k + 1 < m) {
      // l = U_k^T S_k^-1
      l_[k] = lu.solve(a.upper[k]).transpose();
      s = a.diag[k + 1] - l_[k] * a.upper[k];
    }
  }
}

Eigen::VectorXd BlockTridiagonalLU::solve(const Eigen::VectorXd& b) const {
  return solve(Eigen::MatrixXd(b)).col(0);
}

Eigen::MatrixXd BlockTridiagonalLU::solve(const Eigen::MatrixXd& b) const {
  const int m = static_cast<int>(pivots_.size());
  Eigen::MatrixXd y = b;
  for (int k = 1; k < m; ++k) y.middleRows(k * n_, n_) -= l_[k - 1] * y.middleRows((k - 1) * n_, n_);
  for (int k = m - 1; k >= 0; --k) {
    Eigen::MatrixXd r = y.middleRows(k * n_, n_);
    if (k + 1 < m) r -= upper_[k] * y.middleRows((k + 1) * n_, n_);
    y.middleRows(k * n_, n_) = pivots_[k].solve(r);
  }
  return y;
}

double BlockTridiagonalLU::smallest_eigenvalue_magnitude(int iterations) const {
  const int size = static_cast<int>(pivots_.size()) * n_;
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v[i] = 1.0 + 0.1 * std::sin(1.7 * i + 0.3);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = solve(v);
    const double nw = w.norm();
    if (!std::isfinite(nw) || nw == 0.0) return 0.0;
    const double next = 1.0 / nw;
    w /= nw;
    const bool settled = it > 3 && std::abs(next - lambda) <= 1e-10 * next;
    lambda = next;
    v = w;
    if (settled) break;
  }
  return lambda;
}

}  // namespace bmech
