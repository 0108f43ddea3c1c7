#include <benchmark/benchmark.h>

#include "ganreg/mixture.hpp"

using namespace ganreg;

namespace {

void BM_KdeEval(benchmark::State& state) {
  const Index n = state.range(0);
  const mixture::MixtureSpec mix;
  Rng rng(3);
  const auto kde = mixture::kde_fit(mixture::sample_mixture(mix, n, rng));
  const Mat query = mixture::sample_mixture(mix, 256, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mixture::kde_eval(kde, query));
  state.SetItemsProcessed(state.iterations() * n * query.rows());
}
BENCHMARK(BM_KdeEval)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace
