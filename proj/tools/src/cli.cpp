#include "ganreg/cli/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>

#include "ganreg/cli/run_config.hpp"
#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"
#include "ganreg/mixture.hpp"
#include "ganreg/networks.hpp"
#include "ganreg/protocol.hpp"
#include "ganreg/training.hpp"
#include "ganreg/verify.hpp"

namespace ganreg::cli {
namespace {

namespace fs = std::filesystem;

// Stream for the final sample dump of `train`.
constexpr std::uint64_t kSampleStream = 4;

struct GlobalOptions {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
};

struct TrainFlags {
  std::optional<double> gamma0;
  std::optional<double> alpha;
  bool anneal = false;
  std::optional<double> gamma;
  std::optional<std::string> noise_mode;
  std::optional<long long> nsr;
  std::optional<long long> iters;
  std::optional<long long> batch_size;
  std::optional<long long> disc_steps;
  std::optional<std::string> gen_loss;
  std::optional<double> lr;
  std::optional<long long> checkpoint_every;
  bool timing = false;
};

struct VerifyFlags {
  bool all = false;
  std::vector<std::string> checks;
  std::optional<int> grid_nodes;
  std::optional<long long> mc_draws;
};

struct CrossFlags {
  std::string a;
  std::string b;
  long long n = 1000;
  double threshold = 0.5;
};

struct SampleFlags {
  std::string model;
  long long n = 1000;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

RunConfig base_config(const GlobalOptions& g) { return g.config ? load_run_config(*g.config) : RunConfig{}; }

template <class T>
void override_key(RunConfig& c, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>)
    set_config_value(c, key, *v);
  else if constexpr (std::is_floating_point_v<T>)
    set_config_value(c, key, csv::format_double(*v));
  else
    set_config_value(c, key, std::to_string(*v));
}

void write_samples_csv(std::ostream& os, const Mat& points, const Vec& density) {
  static const char* const kAxes[] = {"x", "y", "z"};
  std::vector<std::string> header;
  for (Index j = 0; j < points.cols(); ++j)
    header.push_back(points.cols() <= 3 ? kAxes[j] : "x" + std::to_string(j));
  header.push_back("kde_density");
  csv::Writer w(os, header);
  std::vector<std::string> row(header.size());
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < points.cols(); ++j) row[static_cast<std::size_t>(j)] = csv::format_double(points(i, j));
    row.back() = csv::format_double(density(i));
    w.row_strings(row);
  }
}

/// n generator samples with the Scott-rule KDE of the same samples as density.
void dump_samples(const std::string& path, const nn::MLPSpec& spec, const nn::Params& gen, Index n, Rng& rng,
                  int threads) {
  if (n < 2) throw ConfigError("n", "at least two samples are required for the density column");
  const Mat z = mixture::latent_sample(n, spec.input_dim, rng);
  const Mat x = nn::generator_forward(gen, spec, z);
  const auto kde = mixture::kde_fit(x);
  const Vec dens = mixture::kde_eval(kde, x, threads);
  auto os = open_output(path);
  write_samples_csv(os, x, dens);
}

void save_model(const fs::path& dir, const train::TrainResult& r) {
  make_dirs(dir);
  nn::save_mlp((dir / "generator.mlp").string(), r.gen_spec, r.gen);
  nn::save_mlp((dir / "discriminator.mlp").string(), r.disc_spec, r.disc);
}

eval::Model load_model(const std::string& dir) {
  eval::Model m;
  m.name = fs::path(dir).lexically_normal().generic_string();
  while (m.name.size() > 1 && m.name.back() == '/') m.name.pop_back();
  std::tie(m.gen_spec, m.gen) = nn::load_mlp((fs::path(dir) / "generator.mlp").string());
  std::tie(m.disc_spec, m.disc) = nn::load_mlp((fs::path(dir) / "discriminator.mlp").string());
  return m;
}

int cmd_train(const GlobalOptions& g, const TrainFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = base_config(g);
  override_key(c, "train.gamma0", f.gamma0);
  override_key(c, "train.alpha", f.alpha);
  if (f.anneal) c.train.annealing = true;
  if (f.gamma) {
    c.train.annealing = false;
    override_key(c, "train.gamma", f.gamma);
  }
  override_key(c, "train.noise_mode", f.noise_mode);
  override_key(c, "train.nsr", f.nsr);
  override_key(c, "train.iters", f.iters);
  override_key(c, "train.batch_size", f.batch_size);
  override_key(c, "train.disc_steps", f.disc_steps);
  override_key(c, "train.gen_loss", f.gen_loss);
  override_key(c, "train.disc_lr", f.lr);
  override_key(c, "train.gen_lr", f.lr);
  override_key(c, "train.checkpoint_every", f.checkpoint_every);
  if (f.timing) c.train.record_wall_time = true;
  if (g.seed) c.train.seed = *g.seed;
  c.validate();

  const fs::path dir = g.out.value_or("run");
  make_dirs(dir / "checkpoints");
  save_run_config((dir / "config.txt").string(), c);

  const int modes = c.mixture.n_modes;
  auto progress = [&](const train::TraceRecord& r) {
    out << "iter " << r.iter << "  gamma " << csv::format_double(r.gamma) << "  F " << csv::format_double(r.F)
        << "  Omega " << csv::format_double(r.omega) << "  coverage " << r.coverage << "/" << modes << std::endl;
  };
  auto checkpoint = [&](const train::TraceRecord& r, const train::TrainResult& state) {
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%07ld", r.iter);
    save_model(dir / "checkpoints" / name, state);
  };
  const train::TrainResult res = train::train(c.train, c.mixture, progress, checkpoint);

  {
    auto os = open_output((dir / "trace.csv").string());
    train::write_trace_csv(os, res.trace);
  }
  save_model(dir / "model", res);
  save_run_config((dir / "model" / "config.txt").string(), c);

  if (res.diverged) {
    err << "training diverged at " << res.divergence_reason << "; last parameters written to "
        << (dir / "model").string() << "\n";
    return kExitDiverged;
  }
  Rng rng(Rng::derive(c.train.seed, kSampleStream));
  dump_samples((dir / "samples.csv").string(), res.gen_spec, res.gen, c.sample_count, rng, g.threads);
  out << "done: " << res.iterations_done << " iterations, output in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_verify(const GlobalOptions& g, const VerifyFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = base_config(g);
  override_key(c, "verify.grid_nodes", f.grid_nodes);
  override_key(c, "verify.mc_draws", f.mc_draws);
  if (g.seed) c.verify.seed = *g.seed;
  c.validate();

  const auto& known = verify::check_names();
  std::vector<std::string> selected = f.checks;
  if (f.all || selected.empty()) selected = known;
  for (const auto& name : selected)
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      err << "error: unknown check '" << name << "'\n";
      return kExitUsage;
    }

  std::vector<verify::CheckResult> rows;
  for (const auto& name : selected) {
    auto r = verify::run_check(name, c.verify);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  bool all_pass = true;
  for (const auto& r : rows) all_pass = all_pass && r.pass;

  if (g.out) {
    auto os = open_output(*g.out);
    verify::write_report_csv(os, rows);
    for (const auto& r : rows) out << (r.pass ? "PASS " : "FAIL ") << r.check << "\n";
  } else {
    verify::write_report_csv(out, rows);
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_cross_test(const GlobalOptions& g, const CrossFlags& f, std::ostream& out, std::ostream& err) {
  if (f.n < 1) {
    err << "error: n must be >= 1 (empty evaluation set)\n";
    return kExitUsage;
  }
  const eval::Model a = load_model(f.a);
  const eval::Model b = load_model(f.b);
  RunConfig c;
  if (g.config)
    c = load_run_config(*g.config);
  else if (fs::exists(fs::path(f.a) / "config.txt"))
    c = load_run_config((fs::path(f.a) / "config.txt").string());
  c.mixture.validate();

  Rng rng(g.seed.value_or(0));
  const Mat real = mixture::sample_mixture(c.mixture, f.n, rng);
  const auto report = eval::cross_test(a, b, real, f.n, rng, f.threshold);
  if (g.out) {
    auto os = open_output(*g.out);
    eval::write_cross_test_csv(os, report);
  } else {
    eval::write_cross_test_csv(out, report);
  }
  return kExitOk;
}

int cmd_sample(const GlobalOptions& g, const SampleFlags& f, std::ostream& out) {
  const eval::Model m = load_model(f.model);
  Rng rng(g.seed.value_or(0));
  const std::string path = g.out.value_or("samples.csv");
  dump_samples(path, m.gen_spec, m.gen, f.n, rng, g.threads);
  out << "wrote " << f.n << " samples to " << path << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-norm regularized f-GAN training and verification"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "INI config file ([train], [mixture], [verify], [sample])");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory (train) or CSV path (verify, cross-test, sample)");
  app.add_option("--threads", g.threads, "Worker threads for density evaluation")->check(CLI::PositiveNumber);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Run the training loop");
  train_cmd->fallthrough();
  train_cmd->add_option("--gamma0", tf.gamma0, "Initial regularization strength (annealed runs)");
  train_cmd->add_option("--alpha", tf.alpha, "Annealing decay: gamma_t = gamma0 * alpha^(t/T)");
  auto* anneal = train_cmd->add_flag("--anneal", tf.anneal, "Anneal gamma from gamma0");
  train_cmd->add_option("--gamma", tf.gamma, "Fixed regularization strength (disables annealing)")->excludes(anneal);
  train_cmd->add_option("--noise-mode", tf.noise_mode, "off, disc_and_gen or disc_only");
  train_cmd->add_option("--nsr", tf.nsr, "Noise replicas per base sample (1, 2, 4, 8)");
  train_cmd->add_option("--iters", tf.iters, "Generator iterations T");
  train_cmd->add_option("--batch-size", tf.batch_size, "Batch size m");
  train_cmd->add_option("--disc-steps", tf.disc_steps, "Discriminator steps per generator step");
  train_cmd->add_option("--gen-loss", tf.gen_loss, "saturating or alternative");
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate for both networks");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every, "Iterations between trace records");
  train_cmd->add_flag("--timing", tf.timing, "Record wall time in the trace (output no longer reproducible)");

  VerifyFlags vf;
  auto* verify_cmd = app.add_subcommand("verify", "Run the analytic verification checks");
  verify_cmd->fallthrough();
  verify_cmd->add_flag("--all", vf.all, "Run every check (default)");
  verify_cmd->add_option("--check", vf.checks, "Run only the named check (repeatable)");
  verify_cmd->add_option("--grid-nodes", vf.grid_nodes, "Quadrature nodes");
  verify_cmd->add_option("--mc-draws", vf.mc_draws, "Monte-Carlo draws for the convolution check");

  CrossFlags cf;
  auto* cross_cmd = app.add_subcommand("cross-test", "Cross-test two trained models");
  cross_cmd->fallthrough();
  cross_cmd->add_option("--a", cf.a, "First model directory")->required();
  cross_cmd->add_option("--b", cf.b, "Second model directory")->required();
  cross_cmd->add_option("--n", cf.n, "Real test points and generated points per model");
  cross_cmd->add_option("--threshold", cf.threshold, "Probability above which a point is classified real");

  SampleFlags sf;
  auto* sample_cmd = app.add_subcommand("sample", "Draw generator samples with a density column");
  sample_cmd->fallthrough();
  sample_cmd->add_option("--model", sf.model, "Model directory")->required();
  sample_cmd->add_option("--n", sf.n, "Number of samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(g, tf, out, err);
    if (*verify_cmd) return cmd_verify(g, vf, out, err);
    if (*cross_cmd) return cmd_cross_test(g, cf, out, err);
    if (*sample_cmd) return cmd_sample(g, sf, out);
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ganreg::cli
