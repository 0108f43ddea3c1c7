#include <benchmark/benchmark.h>

#include "ganreg/mixture.hpp"
#include "ganreg/networks.hpp"
#include "ganreg/training.hpp"

using namespace ganreg;

namespace {

// Cost of one discriminator step with (gamma > 0) and without the gradient-norm penalty.
void BM_DiscriminatorStep(benchmark::State& state) {
  const Index batch = state.range(0);
  const double gamma = state.range(1) ? 0.1 : 0.0;
  const mixture::MixtureSpec mix;
  Rng rng(7);
  const Mat real = mixture::sample_mixture(mix, batch, rng);
  const Mat fake = mixture::sample_mixture(mix, batch, rng).array() + 0.1;
  const auto spec = nn::default_discriminator_spec(3, 1);
  nn::Params disc = nn::init_params(spec);
  auto adam = train::make_adam(disc.size(), 1e-3, 0.9, 0.999, 1e-8);
  for (auto _ : state) benchmark::DoNotOptimize(train::discriminator_step(spec, disc, adam, real, fake, gamma));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DiscriminatorStep)->ArgsProduct({{64, 512}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_GeneratorStep(benchmark::State& state) {
  const Index batch = state.range(0);
  Rng rng(8);
  const Mat z = mixture::latent_sample(batch, 2, rng);
  const auto gspec = nn::default_generator_spec(2, 3, 1);
  const auto dspec = nn::default_discriminator_spec(3, 2);
  nn::Params gen = nn::init_params(gspec);
  const nn::Params disc = nn::init_params(dspec);
  auto adam = train::make_adam(gen.size(), 1e-3, 0.9, 0.999, 1e-8);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        train::generator_step(gspec, gen, adam, dspec, disc, z, train::GenLoss::Alternative));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GeneratorStep)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond);

}  // namespace
