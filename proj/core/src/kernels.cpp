#include "ganreg/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <memory>

#include "ganreg/error.hpp"

namespace ganreg::kernels {
namespace {

constexpr Index kTileRows = 4;
constexpr Index kTileCols = 32;

// Columns left over by the 32-wide tiles (and narrow products such as the
// n x 1 logit layer). A block of rows of `a` is packed column-major so the
// accumulation vectorizes across rows; each element is still the fma chain
// over k in increasing order, identical to the tiled path.
template <int W>
void tail_block(const double* a, const double* b, double* c, Index rows, Index inner, Index j, Index lda,
                Index ldb, Index ldc) {
  constexpr Index kRows = 32;
  Index i = 0;
  std::unique_ptr<double[]> pack;
  if (rows >= kRows) pack.reset(new double[static_cast<std::size_t>(inner * kRows)]);
  for (; i + kRows <= rows; i += kRows) {
    for (Index r = 0; r < kRows; ++r)
      for (Index p = 0; p < inner; ++p) pack[static_cast<std::size_t>(p * kRows + r)] = a[(i + r) * lda + p];
    alignas(64) double acc[W][kRows] = {};
    for (Index p = 0; p < inner; ++p) {
      const double* col = pack.get() + p * kRows;
      const double* brow = b + p * ldb + j;
      for (int q = 0; q < W; ++q) {
        const double bv = brow[q];
        for (Index r = 0; r < kRows; ++r) acc[q][r] = std::fma(col[r], bv, acc[q][r]);
      }
    }
    for (Index r = 0; r < kRows; ++r)
      for (int q = 0; q < W; ++q) c[(i + r) * ldc + j + q] = acc[q][r];
  }
  for (; i < rows; ++i) {
    double acc[W] = {};
    for (Index p = 0; p < inner; ++p) {
      const double av = a[i * lda + p];
      for (int q = 0; q < W; ++q) acc[q] = std::fma(av, b[p * ldb + j + q], acc[q]);
    }
    for (int q = 0; q < W; ++q) c[i * ldc + j + q] = acc[q];
  }
}

void matmul_tail(const double* a, const double* b, double* c, Index rows, Index inner, Index cols,
                 Index col_begin, Index lda, Index ldb, Index ldc) {
  Index j = col_begin;
  for (; j + 8 <= cols; j += 8) tail_block<8>(a, b, c, rows, inner, j, lda, ldb, ldc);
  switch (cols - j) {
    case 7: tail_block<7>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 6: tail_block<6>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 5: tail_block<5>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 4: tail_block<4>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 3: tail_block<3>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 2: tail_block<2>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    case 1: tail_block<1>(a, b, c, rows, inner, j, lda, ldb, ldc); break;
    default: break;
  }
}

}  // namespace

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  const Index n = a.rows();
  const Index k = a.cols();
  const Index m = b.cols();
  Mat c(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();

  const Index tiled = m - m % kTileCols;
  Index i = 0;
  for (; i + kTileRows <= n; i += kTileRows) {
    for (Index j = 0; j < tiled; j += kTileCols) {
      double acc[kTileRows][kTileCols] = {};
      for (Index p = 0; p < k; ++p) {
        const double* brow = pb + p * m + j;
        for (Index r = 0; r < kTileRows; ++r) {
          const double av = pa[(i + r) * k + p];
          for (Index q = 0; q < kTileCols; ++q) acc[r][q] = std::fma(av, brow[q], acc[r][q]);
        }
      }
      for (Index r = 0; r < kTileRows; ++r)
        std::memcpy(pc + (i + r) * m + j, acc[r], sizeof(acc[r]));
    }
  }
  if (i < n && tiled > 0) matmul_tail(pa + i * k, pb, pc + i * m, n - i, k, tiled, 0, k, m, m);
  if (tiled < m) matmul_tail(pa, pb, pc, n, k, m, tiled, k, m, m);
  return c;
}

Mat transpose(const Mat& a) {
  const Index n = a.rows();
  const Index m = a.cols();
  Mat t(m, n);
  const double* src = a.data();
  double* dst = t.data();
  constexpr Index kBlock = 16;
  for (Index i0 = 0; i0 < n; i0 += kBlock) {
    const Index i1 = std::min(n, i0 + kBlock);
    for (Index j0 = 0; j0 < m; j0 += kBlock) {
      const Index j1 = std::min(m, j0 + kBlock);
      for (Index i = i0; i < i1; ++i)
        for (Index j = j0; j < j1; ++j) dst[j * n + i] = src[i * m + j];
    }
  }
  return t;
}

Mat add_row(const Mat& a, const Mat& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: expected a 1 x " + std::to_string(a.cols()) + " row");
  Mat out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + row(0, j);
  return out;
}

}  // namespace ganreg::kernels
