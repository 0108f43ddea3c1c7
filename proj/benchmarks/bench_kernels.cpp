#include <benchmark/benchmark.h>

#include "ganreg/kernels.hpp"
#include "ganreg/rng.hpp"

using namespace ganreg;

namespace {

Mat random_mat(Index r, Index c, Rng& rng) {
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const Index n = state.range(0), k = state.range(1), m = state.range(2);
  Rng rng(1);
  const Mat a = random_mat(n, k, rng);
  const Mat b = random_mat(k, m, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * k * m);
}
BENCHMARK(BM_Matmul)->Args({64, 3, 128})->Args({64, 128, 128})->Args({512, 128, 128})->Args({512, 128, 1});

void BM_Tanh(benchmark::State& state) {
  Rng rng(2);
  const Mat a = random_mat(512, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::map(a, [](double x) { return kernels::tanh(x); }));
  state.SetItemsProcessed(state.iterations() * a.size());
}
BENCHMARK(BM_Tanh);

}  // namespace
