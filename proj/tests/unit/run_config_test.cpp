#include <gtest/gtest.h>

#include <sstream>

#include "ganreg/cli/run_config.hpp"
#include "ganreg/error.hpp"

using namespace ganreg;

namespace {

cli::RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return cli::read_run_config(is);
}

std::string error_key(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

}  // namespace

TEST(RunConfig, Defaults) {
  const cli::RunConfig c;
  EXPECT_EQ(c.train.gamma0, 2.0);
  EXPECT_EQ(c.train.alpha, 0.01);
  EXPECT_TRUE(c.train.annealing);
  EXPECT_EQ(c.train.disc_steps, 1);
  EXPECT_EQ(c.train.disc_lr, 1e-3);
  EXPECT_EQ(c.train.adam_beta1, 0.9);
  EXPECT_EQ(c.mixture.n_modes, 7);
  EXPECT_EQ(c.mixture.mode_std, 0.01);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, ReadsSectionsAndKeys) {
  const auto c = parse(
      "; comment\n"
      "[train]\n"
      "gamma0 = 1.5\n"
      "anneal = false\n"
      "gen_loss = saturating\n"
      "noise_mode = disc_only\n"
      "nsr = 4\n"
      "iters = 300\n"
      "[mixture]\n"
      "n_modes = 5\n"
      "translation = 0, 0, 2\n"
      "[verify]\n"
      "mc_draws = 5000\n"
      "[sample]\n"
      "count = 17\n");
  EXPECT_EQ(c.train.gamma0, 1.5);
  EXPECT_FALSE(c.train.annealing);
  EXPECT_EQ(c.train.gen_loss, train::GenLoss::Saturating);
  EXPECT_EQ(c.train.noise_mode, train::NoiseMode::DiscOnly);
  EXPECT_EQ(c.train.nsr, 4);
  EXPECT_EQ(c.train.total_iters, 300);
  EXPECT_EQ(c.mixture.n_modes, 5);
  EXPECT_EQ(c.mixture.translation(2), 2.0);
  EXPECT_EQ(c.verify.mc_draws, 5000);
  EXPECT_EQ(c.sample_count, 17);
}

TEST(RunConfig, RejectionsNameTheKey) {
  EXPECT_EQ(error_key("[train]\nlearning_rate = 0.1\n"), "train.learning_rate");
  EXPECT_EQ(error_key("[optimizer]\nlr = 0.1\n"), "optimizer");
  EXPECT_EQ(error_key("[train]\niters = many\n"), "train.iters");
  EXPECT_EQ(error_key("[train]\nanneal = maybe\n"), "train.anneal");
  EXPECT_EQ(error_key("[train]\ngen_loss = hinge\n"), "train.gen_loss");
  EXPECT_EQ(error_key("[mixture]\ntranslation = 1, 2\n"), "mixture.translation");
  EXPECT_EQ(error_key("[train]\ngamma0 = 1\ngamma0 = 2\n"), "");
}

TEST(RunConfig, WriteReadRoundTrip) {
  cli::RunConfig c;
  c.train.gamma0 = 0.1 + 0.2;
  c.train.seed = 18446744073709551615ull;
  c.train.disc_activation = nn::Activation::Tanh;
  c.mixture.rotation_angle = 1.0 / 3.0;
  c.verify.grid_lo = -9.5;
  c.sample_count = 99;
  std::ostringstream os;
  cli::write_run_config(os, c);
  const auto back = parse(os.str());
  for (const auto& key : cli::config_keys())
    EXPECT_EQ(cli::get_config_value(back, key), cli::get_config_value(c, key)) << key;
  std::ostringstream again;
  cli::write_run_config(again, back);
  EXPECT_EQ(again.str(), os.str());
}

TEST(RunConfig, SetAndValidate) {
  cli::RunConfig c;
  cli::set_config_value(c, "train.batch_size", "30");
  cli::set_config_value(c, "train.nsr", "4");
  try {
    c.validate();
    FAIL() << "nsr 4 does not divide 30";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "nsr");
  }
  EXPECT_THROW(cli::set_config_value(c, "train.nope", "1"), ConfigError);
  EXPECT_THROW(cli::get_config_value(c, "nope"), ConfigError);
  EXPECT_THROW(cli::load_run_config("/nonexistent/config.ini"), IoError);
}
