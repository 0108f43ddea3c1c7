#include "ganreg/cli/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"

namespace ganreg::cli {
namespace {

using mixture::Vec3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(trim(v));
  } catch (const Error&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  Vec3 out;
  std::stringstream ss(v);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) throw ConfigError(key, "expected three comma-separated numbers");
    out(i++) = to_double(key, part);
  }
  if (i != 3) throw ConfigError(key, "expected three comma-separated numbers");
  return out;
}

// Library parse functions report their own errors; rename them to the key.
template <class F>
auto parse_token(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(trim(v));
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

std::string fmt(double v) { return csv::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const Vec3& v) { return fmt(v(0)) + ", " + fmt(v(1)) + ", " + fmt(v(2)); }

struct Field {
  std::string name;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  using C = RunConfig;
  using S = const std::string&;
  static const std::vector<Field> table = {
      {"train.gamma0", [](C& c, S k, S v) { c.train.gamma0 = to_double(k, v); },
       [](const C& c) { return fmt(c.train.gamma0); }},
      {"train.alpha", [](C& c, S k, S v) { c.train.alpha = to_double(k, v); },
       [](const C& c) { return fmt(c.train.alpha); }},
      {"train.anneal", [](C& c, S k, S v) { c.train.annealing = to_bool(k, v); },
       [](const C& c) { return fmt(c.train.annealing); }},
      {"train.gamma", [](C& c, S k, S v) { c.train.gamma_fixed = to_double(k, v); },
       [](const C& c) { return fmt(c.train.gamma_fixed); }},
      {"train.disc_steps", [](C& c, S k, S v) { c.train.disc_steps = static_cast<int>(to_integer(k, v)); },
       [](const C& c) { return std::to_string(c.train.disc_steps); }},
      {"train.batch_size", [](C& c, S k, S v) { c.train.batch_size = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.batch_size); }},
      {"train.iters", [](C& c, S k, S v) { c.train.total_iters = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.total_iters); }},
      {"train.gen_loss", [](C& c, S k, S v) { c.train.gen_loss = parse_token(k, v, train::parse_gen_loss); },
       [](const C& c) { return std::string(train::to_string(c.train.gen_loss)); }},
      {"train.noise_mode", [](C& c, S k, S v) { c.train.noise_mode = parse_token(k, v, train::parse_noise_mode); },
       [](const C& c) { return std::string(train::to_string(c.train.noise_mode)); }},
      {"train.nsr", [](C& c, S k, S v) { c.train.nsr = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.nsr); }},
      {"train.disc_lr", [](C& c, S k, S v) { c.train.disc_lr = to_double(k, v); },
       [](const C& c) { return fmt(c.train.disc_lr); }},
      {"train.gen_lr", [](C& c, S k, S v) { c.train.gen_lr = to_double(k, v); },
       [](const C& c) { return fmt(c.train.gen_lr); }},
      {"train.adam_beta1", [](C& c, S k, S v) { c.train.adam_beta1 = to_double(k, v); },
       [](const C& c) { return fmt(c.train.adam_beta1); }},
      {"train.adam_beta2", [](C& c, S k, S v) { c.train.adam_beta2 = to_double(k, v); },
       [](const C& c) { return fmt(c.train.adam_beta2); }},
      {"train.adam_eps", [](C& c, S k, S v) { c.train.adam_eps = to_double(k, v); },
       [](const C& c) { return fmt(c.train.adam_eps); }},
      {"train.latent_dim", [](C& c, S k, S v) { c.train.latent_dim = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.latent_dim); }},
      {"train.hidden_width", [](C& c, S k, S v) { c.train.hidden_width = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.hidden_width); }},
      {"train.hidden_layers", [](C& c, S k, S v) { c.train.hidden_layers = static_cast<int>(to_integer(k, v)); },
       [](const C& c) { return std::to_string(c.train.hidden_layers); }},
      {"train.gen_activation",
       [](C& c, S k, S v) { c.train.gen_activation = parse_token(k, v, nn::parse_activation); },
       [](const C& c) { return std::string(nn::to_string(c.train.gen_activation)); }},
      {"train.disc_activation",
       [](C& c, S k, S v) { c.train.disc_activation = parse_token(k, v, nn::parse_activation); },
       [](const C& c) { return std::string(nn::to_string(c.train.disc_activation)); }},
      {"train.init", [](C& c, S k, S v) { c.train.init = parse_token(k, v, nn::parse_init); },
       [](const C& c) { return std::string(nn::to_string(c.train.init)); }},
      {"train.seed", [](C& c, S k, S v) { c.train.seed = to_seed(k, v); },
       [](const C& c) { return std::to_string(c.train.seed); }},
      {"train.checkpoint_every", [](C& c, S k, S v) { c.train.checkpoint_every = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.checkpoint_every); }},
      {"train.coverage_samples", [](C& c, S k, S v) { c.train.coverage_samples = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.train.coverage_samples); }},
      {"train.timing", [](C& c, S k, S v) { c.train.record_wall_time = to_bool(k, v); },
       [](const C& c) { return fmt(c.train.record_wall_time); }},
      {"mixture.n_modes", [](C& c, S k, S v) { c.mixture.n_modes = static_cast<int>(to_integer(k, v)); },
       [](const C& c) { return std::to_string(c.mixture.n_modes); }},
      {"mixture.mode_std", [](C& c, S k, S v) { c.mixture.mode_std = to_double(k, v); },
       [](const C& c) { return fmt(c.mixture.mode_std); }},
      {"mixture.circle_radius", [](C& c, S k, S v) { c.mixture.circle_radius = to_double(k, v); },
       [](const C& c) { return fmt(c.mixture.circle_radius); }},
      {"mixture.rotation_axis", [](C& c, S k, S v) { c.mixture.rotation_axis = to_vec3(k, v); },
       [](const C& c) { return fmt(c.mixture.rotation_axis); }},
      {"mixture.rotation_angle", [](C& c, S k, S v) { c.mixture.rotation_angle = to_double(k, v); },
       [](const C& c) { return fmt(c.mixture.rotation_angle); }},
      {"mixture.translation", [](C& c, S k, S v) { c.mixture.translation = to_vec3(k, v); },
       [](const C& c) { return fmt(c.mixture.translation); }},
      {"mixture.embedded", [](C& c, S k, S v) { c.mixture.embedded = to_bool(k, v); },
       [](const C& c) { return fmt(c.mixture.embedded); }},
      {"verify.grid_nodes", [](C& c, S k, S v) { c.verify.grid_nodes = static_cast<int>(to_integer(k, v)); },
       [](const C& c) { return std::to_string(c.verify.grid_nodes); }},
      {"verify.grid_lo", [](C& c, S k, S v) { c.verify.grid_lo = to_double(k, v); },
       [](const C& c) { return fmt(c.verify.grid_lo); }},
      {"verify.grid_hi", [](C& c, S k, S v) { c.verify.grid_hi = to_double(k, v); },
       [](const C& c) { return fmt(c.verify.grid_hi); }},
      {"verify.mc_draws", [](C& c, S k, S v) { c.verify.mc_draws = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.verify.mc_draws); }},
      {"verify.seed", [](C& c, S k, S v) { c.verify.seed = to_seed(k, v); },
       [](const C& c) { return std::to_string(c.verify.seed); }},
      {"sample.count", [](C& c, S k, S v) { c.sample_count = to_integer(k, v); },
       [](const C& c) { return std::to_string(c.sample_count); }},
  };
  return table;
}

const Field& find_field(const std::string& name) {
  for (const Field& f : fields())
    if (f.name == name) return f;
  throw ConfigError(name, "unknown key");
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  mixture.validate();
  if (verify.grid_nodes < 3) throw ConfigError("verify.grid_nodes", "must be >= 3");
  if (!(verify.grid_lo < verify.grid_hi)) throw ConfigError("verify.grid_lo", "must be below verify.grid_hi");
  if (verify.mc_draws < 2) throw ConfigError("verify.mc_draws", "must be >= 2");
  if (sample_count < 2) throw ConfigError("sample.count", "must be >= 2");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.name);
  return out;
}

void set_config_value(RunConfig& config, const std::string& qualified_key, const std::string& value) {
  find_field(qualified_key).set(config, qualified_key, value);
}

std::string get_config_value(const RunConfig& config, const std::string& qualified_key) {
  return find_field(qualified_key).get(config);
}

RunConfig read_run_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", "malformed config (line " + std::to_string(e.line()) + "): " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (section != "train" && section != "mixture" && section != "verify" && section != "sample")
      throw ConfigError(section, "unknown section or key outside a section");
    for (const auto& [key, value] : body) set_config_value(config, section + "." + key, value.data());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return read_run_config(in);
}

void write_run_config(std::ostream& os, const RunConfig& config) {
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.name.find('.');
    const std::string s = f.name.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << f.name.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
}

void save_run_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_run_config(out, config);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ganreg::cli
