#pragma once

#include <Eigen/Core>
#include <bit>
#include <cmath>
#include <cstdint>

namespace ganreg {

/// Dense row-major matrix of doubles. Batches are stored one sample per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

namespace kernels {

// Numerical kernels shared by the tape and by the plain forward passes, so the
// two evaluation routes produce bit-identical results.
//
// matmul accumulates every output element as fma(a[i,0], b[0,j], 0), then
// fma(a[i,1], b[1,j], acc), ... in increasing k. The result for a row therefore
// does not depend on the other rows of the batch, nor on the batch size.

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

/// a + broadcast(row) where row is 1 x cols.
Mat add_row(const Mat& a, const Mat& row);

/// Branch-free tanh (within a few ulp of std::tanh) so that map loops
/// vectorize. tanh|x| = m / (m + 2) with m = expm1(2|x|), and expm1 is
/// evaluated as 2^k (1 + p(r)) - 1 after reduction by ln 2.
inline double tanh(double x) {
  const double a = std::fabs(x);
  const double ax = a < 20.0 ? a : 20.0;
  const double t = 2.0 * ax;
  const double shift = 0x1.8p52;
  const double kd = t * 0x1.71547652b82fep0 + shift;
  const auto kbits = std::bit_cast<std::uint64_t>(kd);
  const double k = kd - shift;
  const double r = (t - k * 0x1.62e42fee00000p-1) - k * 0x1.a39ef35793c76p-33;
  // r in [-ln2/2, ln2/2]; Taylor series of expm1(r) to degree 13.
  double p = 1.0 / 6227020800.0;
  p = std::fma(p, r, 1.0 / 479001600.0);
  p = std::fma(p, r, 1.0 / 39916800.0);
  p = std::fma(p, r, 1.0 / 3628800.0);
  p = std::fma(p, r, 1.0 / 362880.0);
  p = std::fma(p, r, 1.0 / 40320.0);
  p = std::fma(p, r, 1.0 / 5040.0);
  p = std::fma(p, r, 1.0 / 720.0);
  p = std::fma(p, r, 1.0 / 120.0);
  p = std::fma(p, r, 1.0 / 24.0);
  p = std::fma(p, r, 1.0 / 6.0);
  p = std::fma(p, r, 0.5);
  const double em1_r = std::fma(p * r, r, r);
  const double scale = std::bit_cast<double>((kbits + 1023) << 52);
  const double m = std::fma(scale, em1_r, scale - 1.0);
  const double y = std::copysign(m / (m + 2.0), x);
  return x == x ? y : x;
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// ln(1 + e^t) without overflow.
inline double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

/// ln sigma(t) = -softplus(-t).
inline double log_sigmoid(double t) { return -softplus(-t); }

inline double leaky_relu(double t, double slope) { return t >= 0.0 ? t : slope * t; }

/// Derivative of leaky_relu; at t == 0 the right derivative (1) is used.
inline double leaky_relu_slope(double t, double slope) { return t >= 0.0 ? 1.0 : slope; }

template <class F>
Mat map(const Mat& a, F f) {
  Mat out(a.rows(), a.cols());
  const double* src = a.data();
  double* dst = out.data();
  const Index n = a.size();
  for (Index i = 0; i < n; ++i) dst[i] = f(src[i]);
  return out;
}

inline bool all_finite(const Mat& a) {
  const double* p = a.data();
  std::uint64_t bad = 0;
  for (Index i = 0; i < a.size(); ++i)
    bad |= static_cast<std::uint64_t>(((std::bit_cast<std::uint64_t>(p[i]) >> 52) & 0x7ff) == 0x7ff);
  return bad == 0;
}

}  // namespace kernels
}  // namespace ganreg
