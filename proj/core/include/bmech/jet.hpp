#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace bmech {

// Second-order truncated Taylor number: value, gradient and Hessian with
// respect to a fixed set of k independent variables. An empty gradient marks
// a constant (all derivatives zero) so literals stay allocation-free.
struct Jet2 {
  double v = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;

  Jet2() = default;
  Jet2(double value) : v(value) {}  // NOLINT: implicit from constants is intended
  Jet2(double value, Eigen::VectorXd grad, Eigen::MatrixXd hess)
      : v(value), g(std::move(grad)), h(std::move(hess)) {}

  // Independent variable number `index` out of `k`.
  static Jet2 variable(double value, int index, int k) {
    Jet2 j(value, Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, k));
    j.g[index] = 1.0;
    return j;
  }

  bool is_constant() const { return g.size() == 0; }
  int size() const { return static_cast<int>(g.size()); }

  Eigen::VectorXd gradient(int k) const { return is_constant() ? Eigen::VectorXd::Zero(k) : g; }
  Eigen::MatrixXd hessian(int k) const { return is_constant() ? Eigen::MatrixXd::Zero(k, k) : h; }
};

// Chain rule for a scalar function with f(u), f'(u), f''(u) already evaluated.
inline Jet2 chain(const Jet2& u, double f0, double f1, double f2) {
  if (u.is_constant()) return Jet2(f0);
  Eigen::MatrixXd hess = f1 * u.h;
  hess.noalias() += f2 * u.g * u.g.transpose();
  return Jet2(f0, f1 * u.g, std::move(hess));
}

inline Jet2 operator-(const Jet2& a) {
  if (a.is_constant()) return Jet2(-a.v);
  return Jet2(-a.v, -a.g, -a.h);
}

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  if (a.is_constant()) return b.is_constant() ? Jet2(a.v + b.v) : Jet2(a.v + b.v, b.g, b.h);
  if (b.is_constant()) return Jet2(a.v + b.v, a.g, a.h);
  return Jet2(a.v + b.v, a.g + b.g, a.h + b.h);
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) { return a + (-b); }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  if (a.is_constant() && b.is_constant()) return Jet2(a.v * b.v);
  if (a.is_constant()) return Jet2(a.v * b.v, a.v * b.g, a.v * b.h);
  if (b.is_constant()) return Jet2(a.v * b.v, b.v * a.g, b.v * a.h);
  Eigen::MatrixXd hess = a.v * b.h + b.v * a.h;
  hess.noalias() += a.g * b.g.transpose();
  hess.noalias() += b.g * a.g.transpose();
  return Jet2(a.v * b.v, a.v * b.g + b.v * a.g, std::move(hess));
}

inline Jet2 reciprocal(const Jet2& b) {
  const double r = 1.0 / b.v;
  return chain(b, r, -r * r, 2.0 * r * r * r);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
  if (b.is_constant()) {
    if (a.is_constant()) return Jet2(a.v / b.v);
    return Jet2(a.v / b.v, a.g / b.v, a.h / b.v);
  }
  return a * reciprocal(b);
}

inline Jet2 sin(const Jet2& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, s, c, -s);
}
inline Jet2 cos(const Jet2& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, c, -s, -c);
}
inline Jet2 exp(const Jet2& u) {
  const double e = std::exp(u.v);
  return chain(u, e, e, e);
}
inline Jet2 log(const Jet2& u) { return chain(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v)); }
inline Jet2 sqrt(const Jet2& u) {
  const double s = std::sqrt(u.v);
  return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
inline Jet2 abs(const Jet2& u) {
  const double sgn = u.v > 0 ? 1.0 : (u.v < 0 ? -1.0 : 0.0);
  return chain(u, std::abs(u.v), sgn, 0.0);
}
// Integer power; valid for negative bases.
inline Jet2 powi(const Jet2& u, int n) {
  if (n == 0) return Jet2(1.0);
  const double f0 = std::pow(u.v, n);
  const double f1 = n * std::pow(u.v, n - 1);
  const double f2 = n == 1 ? 0.0 : n * (n - 1) * std::pow(u.v, n - 2);
  return chain(u, f0, f1, f2);
}
// Real power with a positive base.
inline Jet2 pow(const Jet2& base, const Jet2& expo) {
  if (expo.is_constant()) {
    const double p = expo.v;
    const double f0 = std::pow(base.v, p);
    return chain(base, f0, p * std::pow(base.v, p - 1), p * (p - 1) * std::pow(base.v, p - 2));
  }
  return exp(expo * log(base));
}

}  // namespace bmech
