#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ganreg/error.hpp"
#include "ganreg/kernels.hpp"
#include "ganreg/training.hpp"
#include "reference.hpp"

using namespace ganreg;

namespace {

Mat random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

nn::MLPSpec small_disc(nn::Activation act, std::uint64_t seed) {
  return nn::MLPSpec{3, {12, 12, 1}, {act, act, nn::Activation::Linear}, nn::Init::XavierUniform, seed};
}

nn::MLPSpec small_gen(std::uint64_t seed) {
  return nn::MLPSpec{2, {10, 3}, {nn::Activation::Tanh, nn::Activation::Linear}, nn::Init::XavierUniform, seed};
}

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.hidden_width = 16;
  c.batch_size = 32;
  c.total_iters = 20;
  c.checkpoint_every = 5;
  c.coverage_samples = 100;
  c.seed = 3;
  return c;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Anneal, ClosedForms) {
  EXPECT_NEAR(train::anneal_gamma(0, 1000, 2.0, 0.01), 2.0, 1e-15);
  EXPECT_NEAR(train::anneal_gamma(1000, 1000, 2.0, 0.01), 0.02, 1e-15);
  EXPECT_NEAR(train::anneal_gamma(500, 1000, 2.0, 0.01), 0.2, 1e-15);
  for (long t = 1; t < 100; ++t) EXPECT_LT(train::anneal_gamma(t + 1, 100, 2.0, 0.5), train::anneal_gamma(t, 100, 2.0, 0.5));
  EXPECT_EQ(train::anneal_gamma(7, 100, 2.0, 1.0), 2.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  const auto spec = small_gen(1);
  auto p = nn::init_params(spec);
  const auto before = p;
  auto st = train::make_adam(p.size(), 1e-3, 0.9, 0.999, 1e-8);
  train::adam_step(st, p, std::vector<double>(p.size(), 0.0), train::Direction::Descent);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepHasLearningRateSize) {
  const nn::MLPSpec spec{1, {1}, {nn::Activation::Linear}};
  nn::Params p(spec);
  auto st = train::make_adam(p.size(), 1e-3, 0.9, 0.999, 1e-8);
  train::adam_step(st, p, {2.0, 2.0}, train::Direction::Descent);
  EXPECT_NEAR(p.values()[0], -1e-3 * 2.0 / (2.0 + 1e-8), 1e-18);
  EXPECT_NEAR(p.values()[0], -1e-3, 1e-11);
  train::adam_step(st, p, {2.0, 2.0}, train::Direction::Ascent);
  EXPECT_NEAR(p.values()[0], 0.0, 1e-11);
}

TEST(Adam, MatchesReferenceOverTenSteps) {
  const auto spec = small_disc(nn::Activation::Tanh, 2);
  auto p = nn::init_params(spec);
  std::vector<double> theta = p.values();
  auto st = train::make_adam(p.size(), 1e-3, 0.9, 0.999, 1e-8);
  oracle::RefAdam ref(p.size(), 1e-3, 0.9, 0.999, 1e-8);
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> g(p.size());
    for (double& v : g) v = rng.normal() * (k % 3 == 0 ? 1e-4 : 10.0);
    const auto dir = k % 2 == 0 ? train::Direction::Ascent : train::Direction::Descent;
    train::adam_step(st, p, g, dir);
    ref.step(theta, g, dir == train::Direction::Ascent ? 1.0 : -1.0);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) worst = std::max(worst, std::abs(theta[i] - p.values()[i]));
  EXPECT_LT(worst, 1e-12);
}

TEST(Adam, Errors) {
  const nn::MLPSpec spec{1, {1}, {nn::Activation::Linear}};
  nn::Params p(spec);
  auto st = train::make_adam(p.size(), 1e-3, 0.9, 0.999, 1e-8);
  EXPECT_THROW(train::adam_step(st, p, {1.0}, train::Direction::Ascent), ShapeError);
  EXPECT_THROW(train::adam_step(st, p, {1.0, std::nan("")}, train::Direction::Ascent), NonFiniteError);
}

TEST(DiscriminatorStep, ZeroGammaIsThePlainStep) {
  const auto spec = small_disc(nn::Activation::LeakyRelu, 4);
  Rng rng(5);
  const Mat real = random_mat(16, 3, rng), fake = random_mat(16, 3, rng);
  const auto p0 = nn::init_params(spec);
  const auto e = train::discriminator_objective(spec, p0, real, fake, 0.0, false);
  EXPECT_TRUE(std::isnan(e.omega));
  EXPECT_EQ(e.objective, e.F);
  const auto r = oracle::RefMlp::from_spec(spec);
  EXPECT_NEAR(e.F, oracle::ref_disc_values(r, p0.values(), real, fake).F, 1e-14);

  auto p1 = p0, p2 = p0;
  auto a1 = train::make_adam(p0.size(), 1e-3, 0.9, 0.999, 1e-8);
  auto a2 = a1;
  const auto with_omega = train::discriminator_step(spec, p1, a1, real, fake, 0.0, true);
  train::adam_step(a2, p2, e.grad, train::Direction::Ascent);
  EXPECT_EQ(p1, p2);
  EXPECT_GE(with_omega.omega, 0.0);
  EXPECT_EQ(with_omega.grad, e.grad);
}

TEST(DiscriminatorStep, LinearSingletonGradientByHand) {
  const nn::MLPSpec spec{3, {1}, {nn::Activation::Linear}};
  nn::Params p(spec);
  p.values() = {0.3, -0.2, 0.5, 0.1};
  Mat xr(1, 3), xf(1, 3);
  xr << 1.0, 2.0, -1.0;
  xf << -0.5, 0.4, 2.0;
  const double gamma = 0.7;
  const Eigen::Vector3d w(0.3, -0.2, 0.5);
  const double b = 0.1;
  const double lr_ = w.dot(Eigen::Vector3d(xr.row(0).transpose())) + b;
  const double lf = w.dot(Eigen::Vector3d(xf.row(0).transpose())) + b;
  const double sr = sig(lr_), sf = sig(lf), w2 = w.squaredNorm();
  const double F = std::log(sr) + std::log(1.0 - sf);
  const double omega = ((1.0 - sr) * (1.0 - sr) + sf * sf) * w2;
  std::vector<double> g(4);
  for (int j = 0; j < 3; ++j) {
    const double dF = (1.0 - sr) * xr(0, j) - sf * xf(0, j);
    const double dO = w2 * (-2.0 * sr * (1.0 - sr) * (1.0 - sr) * xr(0, j) + 2.0 * sf * sf * (1.0 - sf) * xf(0, j)) +
                      2.0 * w(j) * ((1.0 - sr) * (1.0 - sr) + sf * sf);
    g[j] = dF - 0.5 * gamma * dO;
  }
  g[3] = (1.0 - sr) - sf - 0.5 * gamma * w2 * (-2.0 * sr * (1.0 - sr) * (1.0 - sr) + 2.0 * sf * sf * (1.0 - sf));

  const auto e = train::discriminator_objective(spec, p, xr, xf, gamma, false);
  EXPECT_NEAR(e.F, F, 1e-15);
  EXPECT_NEAR(e.omega, omega, 1e-15);
  EXPECT_NEAR(e.objective, F - 0.5 * gamma * omega, 1e-15);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(e.grad[j], g[j], 1e-15) << j;

  // First Adam step moves each parameter by lr g / (|g| + eps), upward.
  auto q = p;
  auto adam = train::make_adam(4, 1e-3, 0.9, 0.999, 1e-8);
  train::discriminator_step(spec, q, adam, xr, xf, gamma);
  for (int j = 0; j < 4; ++j)
    EXPECT_NEAR(q.values()[j] - p.values()[j], 1e-3 * g[j] / (std::abs(g[j]) + 1e-8), 1e-15) << j;
}

TEST(DiscriminatorStep, GradientMatchesFiniteDifferences) {
  for (auto act : {nn::Activation::Tanh, nn::Activation::LeakyRelu}) {
    const auto spec = small_disc(act, 6);
    const auto p = nn::init_params(spec);
    const auto ref = oracle::RefMlp::from_spec(spec);
    Rng rng(7);
    const Mat real = random_mat(8, 3, rng), fake = random_mat(8, 3, rng);
    const double gamma = 0.5;
    const auto e = train::discriminator_objective(spec, p, real, fake, gamma, false);
    for (int k = 0; k < 10; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform_index(p.size()));
      const double h = 1e-6;
      auto th = p.values();
      th[i] += h;
      const double up = oracle::ref_penalized_objective(ref, th, real, fake, gamma);
      th[i] -= 2.0 * h;
      const double dn = oracle::ref_penalized_objective(ref, th, real, fake, gamma);
      EXPECT_LT(oracle::rel_error(e.grad[i], (up - dn) / (2.0 * h)), 1e-4) << nn::to_string(act) << " " << i;
    }
  }
}

TEST(GeneratorStep, FlatDiscriminatorGivesNoUpdate) {
  const auto gs = small_gen(8);
  const auto ds = small_disc(nn::Activation::LeakyRelu, 9);
  auto g = nn::init_params(gs);
  const auto before = g;
  const nn::Params d(ds);
  Rng rng(1);
  auto adam = train::make_adam(g.size(), 1e-3, 0.9, 0.999, 1e-8);
  for (auto loss : {train::GenLoss::Saturating, train::GenLoss::Alternative}) {
    const auto e = train::generator_step(gs, g, adam, ds, d, random_mat(16, 2, rng), loss);
    for (double v : e.grad) EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(g, before);
  EXPECT_NEAR(train::generator_objective(gs, g, ds, d, random_mat(4, 2, rng), train::GenLoss::Alternative).loss,
              std::log(2.0), 1e-15);
}

TEST(GeneratorStep, LossesMatchFiniteDifferences) {
  const auto gs = small_gen(10);
  const auto ds = small_disc(nn::Activation::Tanh, 11);
  const auto g = nn::init_params(gs);
  const auto d = nn::init_params(ds);
  Rng rng(12);
  const Mat z = random_mat(12, 2, rng);
  for (auto loss : {train::GenLoss::Saturating, train::GenLoss::Alternative}) {
    auto value = [&](const std::vector<double>& th) {
      nn::Params q = g;
      q.values() = th;
      const Mat l = nn::discriminator_forward(d, ds, nn::generator_forward(q, gs, z));
      double s = 0.0;
      for (Index i = 0; i < l.rows(); ++i)
        s += loss == train::GenLoss::Saturating ? kernels::log_sigmoid(-l(i, 0)) : -kernels::log_sigmoid(l(i, 0));
      return s / static_cast<double>(l.rows());
    };
    const auto e = train::generator_objective(gs, g, ds, d, z, loss);
    EXPECT_NEAR(e.loss, value(g.values()), 1e-14);
    const auto fd = oracle::central_difference(value, g.values(), 1e-6);
    EXPECT_LT(oracle::max_rel_error(e.grad, fd), 1e-6) << train::to_string(loss);
  }
}

TEST(GeneratorStep, LeavesTheDiscriminatorAlone) {
  const auto gs = small_gen(13);
  const auto ds = small_disc(nn::Activation::LeakyRelu, 14);
  auto g = nn::init_params(gs);
  const auto d = nn::init_params(ds);
  const auto d_copy = d;
  Rng rng(15);
  auto adam = train::make_adam(g.size(), 1e-3, 0.9, 0.999, 1e-8);
  train::generator_step(gs, g, adam, ds, d, random_mat(16, 2, rng), train::GenLoss::Alternative);
  EXPECT_EQ(d, d_copy);
  EXPECT_FALSE(g == nn::init_params(gs));
}

TEST(GeneratorStep, OutputNoiseShape) {
  const auto gs = small_gen(16);
  const auto ds = small_disc(nn::Activation::LeakyRelu, 17);
  const auto g = nn::init_params(gs);
  const auto d = nn::init_params(ds);
  Rng rng(18);
  const Mat z = random_mat(4, 2, rng);
  train::OutputNoise zero{2, Mat::Zero(8, 3)};
  // Zero noise with replication only repeats each sample.
  EXPECT_NEAR(train::generator_objective(gs, g, ds, d, z, train::GenLoss::Alternative, &zero).loss,
              train::generator_objective(gs, g, ds, d, z, train::GenLoss::Alternative).loss, 1e-15);
  train::OutputNoise bad{2, Mat::Zero(4, 3)};
  EXPECT_THROW(train::generator_objective(gs, g, ds, d, z, train::GenLoss::Alternative, &bad), ShapeError);
}

TEST(Noise, ZeroVarianceCopies) {
  Rng rng(19);
  const Mat base = random_mat(5, 3, rng);
  const Mat out = train::make_noisy_batch(base, 4, 0.0, rng);
  ASSERT_EQ(out.rows(), 20);
  for (Index i = 0; i < 20; ++i) EXPECT_EQ(out.row(i), base.row(i / 4));
  EXPECT_EQ(train::make_noisy_batch(base, 1, 0.3, rng).rows(), 5);
  EXPECT_THROW(train::make_noisy_batch(base, 0, 0.3, rng), ConfigError);
  EXPECT_THROW(train::make_noisy_batch(base, 1, -0.1, rng), DomainError);
}

TEST(Noise, CovarianceIsGammaIdentity) {
  Rng rng(20);
  const double gamma = 0.25;
  const Mat base = Mat::Ones(250000, 2);
  const Mat out = train::make_noisy_batch(base, 4, gamma, rng);
  const Mat e = out - Mat::Ones(1000000, 2);
  const double n = 1e6;
  const double se_var = gamma * std::sqrt(2.0 / n), se_cov = gamma / std::sqrt(n);
  EXPECT_NEAR(e.col(0).squaredNorm() / n, gamma, 3.0 * se_var);
  EXPECT_NEAR(e.col(1).squaredNorm() / n, gamma, 3.0 * se_var);
  EXPECT_NEAR(e.col(0).dot(e.col(1)) / n, 0.0, 3.0 * se_cov);
}

TEST(Train, SingleIteration) {
  auto c = tiny_config();
  c.total_iters = 1;
  const auto r = train::train(c, mixture::MixtureSpec{});
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].iter, 1);
  EXPECT_EQ(r.iterations_done, 1);
  EXPECT_FALSE(r.diverged);
  EXPECT_FALSE(r.gen == nn::init_params(r.gen_spec));
  EXPECT_FALSE(r.disc == nn::init_params(r.disc_spec));
}

TEST(Train, RunsAreBitIdentical) {
  auto c = tiny_config();
  c.noise_mode = train::NoiseMode::DiscAndGen;
  c.nsr = 4;
  for (int pass = 0; pass < 2; ++pass) {
    const auto a = train::train(c, mixture::MixtureSpec{});
    const auto b = train::train(c, mixture::MixtureSpec{});
    std::ostringstream sa, sb;
    train::write_trace_csv(sa, a.trace);
    train::write_trace_csv(sb, b.trace);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.gen, b.gen);
    EXPECT_EQ(a.disc, b.disc);
    c.noise_mode = train::NoiseMode::Off;
  }
}

TEST(Train, GammaColumnFollowsTheSchedule) {
  auto c = tiny_config();
  c.checkpoint_every = 1;
  const auto r = train::train(c, mixture::MixtureSpec{});
  ASSERT_EQ(r.trace.records.size(), 20u);
  for (const auto& rec : r.trace.records) {
    EXPECT_EQ(rec.gamma, train::anneal_gamma(rec.iter, 20, 2.0, 0.01));
    EXPECT_GE(rec.omega, 0.0);
    EXPECT_EQ(rec.wall_ms, 0.0);
  }
  c.annealing = false;
  c.gamma_fixed = 0.1;
  for (const auto& rec : train::train(c, mixture::MixtureSpec{}).trace.records) EXPECT_EQ(rec.gamma, 0.1);
}

TEST(Train, CheckpointsAndCallbacks) {
  auto c = tiny_config();
  c.total_iters = 12;
  int seen = 0;
  const auto r = train::train(c, mixture::MixtureSpec{}, [&](const train::TraceRecord&) { ++seen; });
  ASSERT_EQ(r.trace.records.size(), 3u);
  EXPECT_EQ(r.trace.records[0].iter, 5);
  EXPECT_EQ(r.trace.records[1].iter, 10);
  EXPECT_EQ(r.trace.records[2].iter, 12);
  EXPECT_EQ(seen, 3);
}

TEST(Train, DivergenceStopsTheLoop) {
  auto c = tiny_config();
  c.annealing = false;
  c.gamma_fixed = 0.0;
  c.disc_lr = 1e6;
  c.gen_lr = 1e6;
  c.total_iters = 200;
  const auto r = train::train(c, mixture::MixtureSpec{});
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.iterations_done, 200);
  EXPECT_FALSE(r.divergence_reason.empty());
}

TEST(Train, ConfigValidationNamesTheKey) {
  auto expect_key = [](train::TrainConfig c, const std::string& key) {
    try {
      c.validate();
      ADD_FAILURE() << "accepted bad " << key;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), key);
    }
  };
  auto c = tiny_config();
  c.alpha = 0.0;
  expect_key(c, "alpha");
  c = tiny_config();
  c.nsr = 3;
  expect_key(c, "nsr");
  c = tiny_config();
  c.batch_size = 30;
  c.nsr = 4;
  expect_key(c, "nsr");
  c = tiny_config();
  c.total_iters = 0;
  expect_key(c, "iters");
  c = tiny_config();
  c.disc_steps = 0;
  expect_key(c, "disc_steps");
  EXPECT_EQ(train::parse_gen_loss("saturating"), train::GenLoss::Saturating);
  EXPECT_EQ(train::parse_noise_mode("disc_only"), train::NoiseMode::DiscOnly);
  EXPECT_THROW(train::parse_noise_mode("loud"), ConfigError);
}

TEST(Train, Presets) {
  const auto m = train::mixture_preset();
  EXPECT_EQ(m.disc_lr, 1e-3);
  EXPECT_EQ(m.adam_beta1, 0.9);
  const auto i = train::image_preset();
  EXPECT_EQ(i.disc_lr, 2e-4);
  EXPECT_EQ(i.adam_beta1, 0.5);
}
