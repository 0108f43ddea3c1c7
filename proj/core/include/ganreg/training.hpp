#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ganreg/kernels.hpp"
#include "ganreg/mixture.hpp"
#include "ganreg/networks.hpp"
#include "ganreg/rng.hpp"

namespace ganreg::train {

enum class GenLoss { Saturating, Alternative };
enum class NoiseMode { Off, DiscAndGen, DiscOnly };
enum class Direction { Ascent, Descent };

std::string_view to_string(GenLoss g);
GenLoss parse_gen_loss(std::string_view s);
std::string_view to_string(NoiseMode m);
NoiseMode parse_noise_mode(std::string_view s);

struct TrainConfig {
  // Regularization
  double gamma0 = 2.0;
  double alpha = 0.01;
  bool annealing = true;
  double gamma_fixed = 0.1;

  // Loop
  int disc_steps = 1;
  Index batch_size = 64;
  long total_iters = 1000;
  GenLoss gen_loss = GenLoss::Alternative;
  NoiseMode noise_mode = NoiseMode::Off;
  Index nsr = 1;

  // Adam
  double disc_lr = 1e-3;
  double gen_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Architecture
  Index latent_dim = 2;
  Index hidden_width = 128;
  int hidden_layers = 2;
  nn::Activation gen_activation = nn::Activation::Tanh;
  nn::Activation disc_activation = nn::Activation::LeakyRelu;
  nn::Init init = nn::Init::XavierUniform;

  // Bookkeeping
  std::uint64_t seed = 0;
  long checkpoint_every = 1000;
  Index coverage_samples = 2000;
  bool record_wall_time = false;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  nn::MLPSpec generator_spec(Index ambient_dim) const;
  nn::MLPSpec discriminator_spec(Index ambient_dim) const;
  /// gamma_t for outer iteration t (1-based).
  double gamma_at(long t) const;
};

/// Mixture-experiment preset: lr 1e-3 for both networks, beta1 0.9, beta2 0.999, eps 1e-8, batch 512.
TrainConfig mixture_preset();
/// Image-style preset: lr 2e-4, beta1 0.5.
TrainConfig image_preset();

/// gamma0 * alpha^(t/T).
double anneal_gamma(long t, long total, double gamma0, double alpha);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::size_t size, double lr, double beta1, double beta2, double eps);

/// One bias-corrected Adam update; ascent adds the step, descent subtracts it.
void adam_step(AdamState& state, nn::Params& params, const std::vector<double>& grads, Direction direction);

/// Objective of the discriminator, F - (gamma/2) Omega_JS, and its parameter gradient.
struct DiscEval {
  double F = 0.0;
  double omega = 0.0;  // NaN when not computed
  double objective = 0.0;
  std::vector<double> grad;
};

/// Fake points are constants. Omega is part of the objective when gamma > 0;
/// with gamma == 0 it is evaluated only if `want_omega`, and never differentiated.
DiscEval discriminator_objective(const nn::MLPSpec& spec, const nn::Params& disc, const Mat& real, const Mat& fake,
                                 double gamma, bool want_omega);

struct GenEval {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Noise added to the generator's outputs: each output row is repeated `nsr`
/// times consecutively, then `noise` (rows * nsr x d) is added.
struct OutputNoise {
  Index nsr = 1;
  Mat noise;
};

/// Saturating: mean ln(1 - D(G(z))). Alternative: -mean ln D(G(z)).
GenEval generator_objective(const nn::MLPSpec& gen_spec, const nn::Params& gen, const nn::MLPSpec& disc_spec,
                            const nn::Params& disc, const Mat& z, GenLoss loss, const OutputNoise* noise = nullptr);

/// Ascent step on F - (gamma/2) Omega. Returns the pre-update evaluation.
DiscEval discriminator_step(const nn::MLPSpec& spec, nn::Params& disc, AdamState& adam, const Mat& real,
                            const Mat& fake, double gamma, bool want_omega = false);

/// Descent step on the generator loss. Returns the pre-update evaluation.
GenEval generator_step(const nn::MLPSpec& gen_spec, nn::Params& gen, AdamState& adam, const nn::MLPSpec& disc_spec,
                       const nn::Params& disc, const Mat& z, GenLoss loss, const OutputNoise* noise = nullptr);

/// Repeats each base row nsr times consecutively and adds N(0, gamma I) noise.
Mat make_noisy_batch(const Mat& base, Index nsr, double gamma, Rng& rng);
/// Noise matrix only (rows x cols of N(0, gamma) draws, row by row).
Mat gaussian_noise(Index rows, Index cols, double gamma, Rng& rng);

struct TraceRecord {
  long iter = 0;
  double gamma = 0.0;
  double F = 0.0;
  double omega = 0.0;
  double gen_loss = 0.0;
  int coverage = 0;
  double wall_ms = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
};

void write_trace_csv(std::ostream& os, const TrainTrace& trace);

struct TrainResult {
  nn::MLPSpec gen_spec;
  nn::Params gen;
  nn::MLPSpec disc_spec;
  nn::Params disc;
  TrainTrace trace;
  long iterations_done = 0;
  bool diverged = false;
  std::string divergence_reason;
};

inline constexpr double kDivergenceBound = 1e6;

using ProgressFn = std::function<void(const TraceRecord&)>;
/// Called after each trace record with the current parameters.
using CheckpointFn = std::function<void(const TraceRecord&, const TrainResult&)>;

/// Full training loop. Per outer iteration t: gamma_t, then disc_steps
/// discriminator steps, then one generator step; a trace record is written
/// every checkpoint_every iterations and at t == T.
///
/// Draw order on the training stream (seed): per discriminator step the real
/// batch (mode index, two normals per point), the latent batch, then noise for
/// the real and the fake batch when noise is on; per generator step the latent
/// batch, then its noise in disc_and_gen mode. Initialization and coverage
/// snapshots use separate derived streams.
///
/// On |F| > 1e6 or a non-finite value the loop stops, sets `diverged` and
/// returns the last parameters.
TrainResult train(const TrainConfig& config, const mixture::MixtureSpec& mixture, const ProgressFn& progress = {},
                  const CheckpointFn& on_checkpoint = {});

// Derived stream ids.
inline constexpr std::uint64_t kGenInitStream = 1;
inline constexpr std::uint64_t kDiscInitStream = 2;
inline constexpr std::uint64_t kCoverageStream = 3;

}  // namespace ganreg::train
