#pragma once

#include <cmath>

#include "ganreg/kernels.hpp"

namespace ganreg {

/// Truncated Taylor jet (f, f', f'') of a scalar function of one variable.
///
/// Arithmetic propagates first and second derivatives exactly, so evaluating
/// an expression on Jet2::variable(x) yields its value and both derivatives at
/// x to rounding error. Used to obtain Laplacians and gradients of 1D
/// statistics without hand-deriving them.
struct Jet2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  constexpr Jet2() = default;
  constexpr Jet2(double value) : v(value) {}  // NOLINT: constants convert implicitly
  constexpr Jet2(double value, double first, double second) : v(value), d1(first), d2(second) {}

  static constexpr Jet2 variable(double x) { return {x, 1.0, 0.0}; }

  Jet2& operator+=(const Jet2& o) { return *this = *this + o; }
  Jet2& operator-=(const Jet2& o) { return *this = *this - o; }
  Jet2& operator*=(const Jet2& o) { return *this = *this * o; }

  friend constexpr Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
  friend constexpr Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
  friend constexpr Jet2 operator-(const Jet2& a) { return {-a.v, -a.d1, -a.d2}; }
  friend constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
  }
  friend Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

  // Composition rule: (g o u)'' = g''(u) u'^2 + g'(u) u''.
  static constexpr Jet2 compose(const Jet2& u, double g0, double g1, double g2) {
    return {g0, g1 * u.d1, g2 * u.d1 * u.d1 + g1 * u.d2};
  }

  friend Jet2 reciprocal(const Jet2& u) {
    const double r = 1.0 / u.v;
    return compose(u, r, -r * r, 2.0 * r * r * r);
  }
  friend Jet2 exp(const Jet2& u) {
    const double e = std::exp(u.v);
    return compose(u, e, e, e);
  }
  friend Jet2 expm1(const Jet2& u) {
    const double e = std::exp(u.v);
    return compose(u, std::expm1(u.v), e, e);
  }
  friend Jet2 log(const Jet2& u) {
    const double r = 1.0 / u.v;
    return compose(u, std::log(u.v), r, -r * r);
  }
  friend Jet2 log1p(const Jet2& u) {
    const double r = 1.0 / (1.0 + u.v);
    return compose(u, std::log1p(u.v), r, -r * r);
  }
  friend Jet2 sqrt(const Jet2& u) {
    const double s = std::sqrt(u.v);
    return compose(u, s, 0.5 / s, -0.25 / (s * u.v));
  }
  friend Jet2 sin(const Jet2& u) {
    const double s = std::sin(u.v);
    const double c = std::cos(u.v);
    return compose(u, s, c, -s);
  }
  friend Jet2 cos(const Jet2& u) {
    const double s = std::sin(u.v);
    const double c = std::cos(u.v);
    return compose(u, c, -s, -c);
  }
  friend Jet2 tanh(const Jet2& u) {
    const double t = std::tanh(u.v);
    const double s = 1.0 - t * t;
    return compose(u, t, s, -2.0 * t * s);
  }
};

// Stable logistic helpers, usable for double and Jet2 alike.
inline double softplus(double t) { return kernels::softplus(t); }
inline double logistic(double t) { return kernels::sigmoid(t); }

inline Jet2 softplus(const Jet2& u) {
  const double s = kernels::sigmoid(u.v);
  return Jet2::compose(u, kernels::softplus(u.v), s, s * kernels::sigmoid(-u.v));
}
inline Jet2 logistic(const Jet2& u) {
  const double s = kernels::sigmoid(u.v);
  const double sm = kernels::sigmoid(-u.v);
  return Jet2::compose(u, s, s * sm, s * sm * (sm - s));
}

/// ln(e^a + e^b) without overflow.
inline double log_add_exp(double a, double b) {
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}
inline Jet2 log_add_exp(const Jet2& a, const Jet2& b) {
  // ln(e^a + e^b) = a + softplus(b - a)
  return a.v >= b.v ? a + softplus(b - a) : b + softplus(a - b);
}

}  // namespace ganreg
