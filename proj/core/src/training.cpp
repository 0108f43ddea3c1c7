#include "ganreg/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "ganreg/csv.hpp"
#include "ganreg/divergences.hpp"
#include "ganreg/error.hpp"
#include "ganreg/protocol.hpp"
#include "ganreg/tape.hpp"

namespace ganreg::train {

std::string_view to_string(GenLoss g) { return g == GenLoss::Saturating ? "saturating" : "alternative"; }

GenLoss parse_gen_loss(std::string_view s) {
  if (s == "saturating") return GenLoss::Saturating;
  if (s == "alternative") return GenLoss::Alternative;
  throw ConfigError("gen_loss", "expected saturating|alternative, got '" + std::string(s) + "'");
}

std::string_view to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::Off: return "off";
    case NoiseMode::DiscAndGen: return "disc_and_gen";
    case NoiseMode::DiscOnly: return "disc_only";
  }
  return "?";
}

NoiseMode parse_noise_mode(std::string_view s) {
  if (s == "off") return NoiseMode::Off;
  if (s == "disc_and_gen") return NoiseMode::DiscAndGen;
  if (s == "disc_only") return NoiseMode::DiscOnly;
  throw ConfigError("noise_mode", "expected off|disc_and_gen|disc_only, got '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (annealing) {
    if (!(gamma0 > 0.0)) throw ConfigError("gamma0", "must be > 0 when annealing");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1]");
  }
  if (!(gamma_fixed >= 0.0)) throw ConfigError("gamma", "must be >= 0");
  if (disc_steps < 1) throw ConfigError("disc_steps", "must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (total_iters < 1) throw ConfigError("iters", "must be >= 1");
  if (nsr != 1 && nsr != 2 && nsr != 4 && nsr != 8) throw ConfigError("nsr", "must be one of 1, 2, 4, 8");
  if (batch_size % nsr != 0) throw ConfigError("nsr", "must divide batch_size");
  if (!(disc_lr > 0.0)) throw ConfigError("disc_lr", "must be > 0");
  if (!(gen_lr > 0.0)) throw ConfigError("gen_lr", "must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be > 0");
  if (latent_dim < 1) throw ConfigError("latent_dim", "must be >= 1");
  if (hidden_width < 1) throw ConfigError("hidden_width", "must be >= 1");
  if (hidden_layers < 0) throw ConfigError("hidden_layers", "must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every", "must be >= 1");
  if (coverage_samples < 1) throw ConfigError("coverage_samples", "must be >= 1");
}

nn::MLPSpec TrainConfig::generator_spec(Index ambient_dim) const {
  nn::MLPSpec s;
  s.input_dim = latent_dim;
  s.layer_widths.assign(static_cast<std::size_t>(hidden_layers), hidden_width);
  s.activations.assign(static_cast<std::size_t>(hidden_layers), gen_activation);
  s.layer_widths.push_back(ambient_dim);
  s.activations.push_back(nn::Activation::Linear);
  s.init = init;
  s.seed = Rng::derive(seed, kGenInitStream);
  return s;
}

nn::MLPSpec TrainConfig::discriminator_spec(Index ambient_dim) const {
  nn::MLPSpec s;
  s.input_dim = ambient_dim;
  s.layer_widths.assign(static_cast<std::size_t>(hidden_layers), hidden_width);
  s.activations.assign(static_cast<std::size_t>(hidden_layers), disc_activation);
  s.layer_widths.push_back(1);
  s.activations.push_back(nn::Activation::Linear);
  s.init = init;
  s.seed = Rng::derive(seed, kDiscInitStream);
  return s;
}

double TrainConfig::gamma_at(long t) const {
  return annealing ? anneal_gamma(t, total_iters, gamma0, alpha) : gamma_fixed;
}

TrainConfig mixture_preset() {
  TrainConfig c;
  c.batch_size = 512;
  c.disc_lr = 1e-3;
  c.gen_lr = 1e-3;
  c.adam_beta1 = 0.9;
  c.adam_beta2 = 0.999;
  c.adam_eps = 1e-8;
  return c;
}

TrainConfig image_preset() {
  TrainConfig c;
  c.disc_lr = 2e-4;
  c.gen_lr = 2e-4;
  c.adam_beta1 = 0.5;
  c.adam_beta2 = 0.999;
  return c;
}

double anneal_gamma(long t, long total, double gamma0, double alpha) {
  return gamma0 * std::pow(alpha, static_cast<double>(t) / static_cast<double>(total));
}

AdamState make_adam(std::size_t size, double lr, double beta1, double beta2, double eps) {
  AdamState s;
  s.m.assign(size, 0.0);
  s.v.assign(size, 0.0);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(AdamState& state, nn::Params& params, const std::vector<double>& grads, Direction direction) {
  auto& theta = params.values();
  if (grads.size() != theta.size() || state.m.size() != theta.size() || state.v.size() != theta.size())
    throw ShapeError("adam_step: gradient, state and parameter sizes differ");
  for (double g : grads)
    if (!std::isfinite(g)) throw NonFiniteError("adam_step: non-finite gradient");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double sign = direction == Direction::Ascent ? 1.0 : -1.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g);
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] += sign * (state.lr * mhat / (std::sqrt(vhat) + state.eps));
  }
}

DiscEval discriminator_objective(const nn::MLPSpec& spec, const nn::Params& disc, const Mat& real, const Mat& fake,
                                 double gamma, bool want_omega) {
  if (real.cols() != spec.input_dim || fake.cols() != spec.input_dim)
    throw ShapeError("discriminator_objective: batch width does not match the discriminator");
  diff::Tape tape;
  const nn::TapeParams placed = nn::place_params(tape, disc);
  const diff::Var xp = tape.variable(real, "x_real");
  const diff::Var xq = tape.variable(fake, "x_fake");
  const diff::Var lp = nn::forward(placed, spec, xp);
  const diff::Var lq = nn::forward(placed, spec, xq);
  const diff::Var F = div::js_objective(lp, lq);

  DiscEval out;
  out.omega = std::numeric_limits<double>::quiet_NaN();
  diff::Var objective = F;
  if (gamma > 0.0 || want_omega) {
    const diff::Var gp = diff::input_grad_sq_norm(lp, xp);
    const diff::Var gq = diff::input_grad_sq_norm(lq, xq);
    const diff::Var omega = div::omega_js(lp, gp, lq, gq);
    out.omega = omega.scalar();
    if (gamma > 0.0) objective = F - (0.5 * gamma) * omega;
  }
  out.F = F.scalar();
  out.objective = objective.scalar();
  const std::vector<diff::Var> wrt = placed.all();
  const diff::GradMap grads = tape.backward(objective, wrt);
  out.grad = nn::flatten_grads(grads, placed, disc);
  return out;
}

GenEval generator_objective(const nn::MLPSpec& gen_spec, const nn::Params& gen, const nn::MLPSpec& disc_spec,
                            const nn::Params& disc, const Mat& z, GenLoss loss, const OutputNoise* noise) {
  diff::Tape tape;
  const nn::TapeParams g = nn::place_params(tape, gen);
  const nn::TapeParams d = nn::place_params(tape, disc, /*as_constants=*/true);
  diff::Var x = nn::forward(g, gen_spec, tape.constant(z));
  if (noise) {
    const Index base = z.rows();
    const Index rows = base * noise->nsr;
    if (noise->noise.rows() != rows || noise->noise.cols() != x.cols())
      throw ShapeError("generator_objective: noise matrix has the wrong shape");
    if (noise->nsr > 1) {
      Mat rep = Mat::Zero(rows, base);
      for (Index i = 0; i < rows; ++i) rep(i, i / noise->nsr) = 1.0;
      x = diff::matmul(tape.constant(std::move(rep)), x);
    }
    x = x + tape.constant(noise->noise);
  }
  const diff::Var logits = nn::forward(d, disc_spec, x);
  const diff::Var value = loss == GenLoss::Saturating ? diff::mean(diff::log_sigmoid(-logits))
                                                      : -diff::mean(diff::log_sigmoid(logits));
  GenEval out;
  out.loss = value.scalar();
  const std::vector<diff::Var> wrt = g.all();
  out.grad = nn::flatten_grads(tape.backward(value, wrt), g, gen);
  return out;
}

DiscEval discriminator_step(const nn::MLPSpec& spec, nn::Params& disc, AdamState& adam, const Mat& real,
                            const Mat& fake, double gamma, bool want_omega) {
  DiscEval e = discriminator_objective(spec, disc, real, fake, gamma, want_omega);
  adam_step(adam, disc, e.grad, Direction::Ascent);
  return e;
}

GenEval generator_step(const nn::MLPSpec& gen_spec, nn::Params& gen, AdamState& adam, const nn::MLPSpec& disc_spec,
                       const nn::Params& disc, const Mat& z, GenLoss loss, const OutputNoise* noise) {
  GenEval e = generator_objective(gen_spec, gen, disc_spec, disc, z, loss, noise);
  adam_step(adam, gen, e.grad, Direction::Descent);
  return e;
}

Mat gaussian_noise(Index rows, Index cols, double gamma, Rng& rng) {
  if (gamma < 0.0) throw DomainError("noise variance must be >= 0");
  const double sd = std::sqrt(gamma);
  Mat n(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) n(i, j) = sd * rng.normal();
  return n;
}

Mat make_noisy_batch(const Mat& base, Index nsr, double gamma, Rng& rng) {
  if (nsr < 1) throw ConfigError("nsr", "must be >= 1");
  const Index rows = base.rows() * nsr;
  const Mat noise = gaussian_noise(rows, base.cols(), gamma, rng);
  Mat out(rows, base.cols());
  for (Index i = 0; i < rows; ++i) out.row(i) = base.row(i / nsr) + noise.row(i);
  return out;
}

void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
  csv::Writer w(os, {"iter", "gamma", "F", "Omega", "gen_loss", "coverage", "wall_ms"});
  for (const TraceRecord& r : trace.records) w.row(r.iter, r.gamma, r.F, r.omega, r.gen_loss, r.coverage, r.wall_ms);
}

namespace {

bool params_finite(const nn::Params& p) {
  for (double v : p.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TrainResult train(const TrainConfig& config, const mixture::MixtureSpec& mixture, const ProgressFn& progress,
                  const CheckpointFn& on_checkpoint) {
  config.validate();
  mixture.validate();
  const Index d = mixture.ambient_dim();

  TrainResult res;
  res.gen_spec = config.generator_spec(d);
  res.disc_spec = config.discriminator_spec(d);
  res.gen = nn::init_params(res.gen_spec);
  res.disc = nn::init_params(res.disc_spec);

  AdamState disc_adam = make_adam(res.disc.size(), config.disc_lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  AdamState gen_adam = make_adam(res.gen.size(), config.gen_lr, config.adam_beta1, config.adam_beta2, config.adam_eps);

  Rng rng(config.seed);
  Rng coverage_rng(Rng::derive(config.seed, kCoverageStream));
  const bool noisy = config.noise_mode != NoiseMode::Off;
  const Index m = config.batch_size;
  const Index base = noisy ? m / config.nsr : m;
  const auto start = std::chrono::steady_clock::now();

  for (long t = 1; t <= config.total_iters; ++t) {
    const double gamma_t = config.gamma_at(t);
    const double reg_gamma = noisy ? 0.0 : gamma_t;
    const bool checkpoint = t % config.checkpoint_every == 0 || t == config.total_iters;
    DiscEval last_disc;
    GenEval last_gen;
    try {
      for (int k = 0; k < config.disc_steps; ++k) {
        Mat real = mixture::sample_mixture(mixture, base, rng);
        const Mat z = mixture::latent_sample(base, config.latent_dim, rng);
        Mat fake = nn::generator_forward(res.gen, res.gen_spec, z);
        if (noisy) {
          real = make_noisy_batch(real, config.nsr, gamma_t, rng);
          fake = make_noisy_batch(fake, config.nsr, gamma_t, rng);
        }
        const bool want_omega = checkpoint && k + 1 == config.disc_steps;
        last_disc = discriminator_step(res.disc_spec, res.disc, disc_adam, real, fake, reg_gamma, want_omega);
        if (!std::isfinite(last_disc.F) || std::abs(last_disc.F) > kDivergenceBound)
          throw NonFiniteError("discriminator objective left the bound |F| <= 1e6");
      }
      if (config.noise_mode == NoiseMode::DiscAndGen) {
        const Mat z = mixture::latent_sample(base, config.latent_dim, rng);
        OutputNoise noise{config.nsr, gaussian_noise(m, d, gamma_t, rng)};
        last_gen = generator_step(res.gen_spec, res.gen, gen_adam, res.disc_spec, res.disc, z, config.gen_loss, &noise);
      } else {
        const Mat z = mixture::latent_sample(m, config.latent_dim, rng);
        last_gen = generator_step(res.gen_spec, res.gen, gen_adam, res.disc_spec, res.disc, z, config.gen_loss);
      }
      if (!params_finite(res.gen) || !params_finite(res.disc)) throw NonFiniteError("non-finite parameters");
    } catch (const NonFiniteError& e) {
      res.diverged = true;
      res.divergence_reason = "iteration " + std::to_string(t) + ": " + e.what();
      res.iterations_done = t - 1;
      return res;
    }
    res.iterations_done = t;

    if (checkpoint) {
      TraceRecord r;
      r.iter = t;
      r.gamma = gamma_t;
      r.F = last_disc.F;
      r.omega = last_disc.omega;
      r.gen_loss = last_gen.loss;
      const Mat zc = mixture::latent_sample(config.coverage_samples, config.latent_dim, coverage_rng);
      r.coverage = eval::mode_coverage(nn::generator_forward(res.gen, res.gen_spec, zc), mixture).covered;
      if (config.record_wall_time)
        r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      res.trace.records.push_back(r);
      if (progress) progress(r);
      if (on_checkpoint) on_checkpoint(r, res);
    }
  }
  return res;
}

}  // namespace ganreg::train
