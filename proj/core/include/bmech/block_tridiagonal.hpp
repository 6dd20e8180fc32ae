#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bmech {

// Symmetric block-tridiagonal matrix with m diagonal blocks of size n:
// row k holds lower(k-1)^T, diag(k), upper(k).
class BlockTridiagonal {
 public:
  BlockTridiagonal() = default;
  BlockTridiagonal(int blocks, int n);

  int blocks() const { return static_cast<int>(diag.size()); }
  int block_size() const { return n_; }
  int size() const { return blocks() * n_; }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;
  // Principal sub-matrix over blocks [first, first + count).
  BlockTridiagonal slice(int first, int count) const;

  std::vector<Eigen::MatrixXd> diag;   // m blocks
  std::vector<Eigen::MatrixXd> upper;  // m-1 blocks coupling k to k+1

 private:
  int n_ = 0;
};

// Block LU without inter-block pivoting. Suitable for the symmetric second
// variation away from conjugate points.
class BlockTridiagonalLU {
 public:
  explicit BlockTridiagonalLU(const BlockTridiagonal& a);

  // False when a pivot block is numerically singular.
  bool ok() const { return ok_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  // Smallest |eigenvalue| of the (symmetric) matrix by inverse iteration.
  double smallest_eigenvalue_magnitude(int iterations = 60) const;

 private:
  std::vector<Eigen::MatrixXd> upper_;
  int n_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> pivots_;
  std::vector<Eigen::MatrixXd> l_;  // l_[k] = lower(k)^T * pivot(k)^-1
  bool ok_ = true;
};

}  // namespace bmech
