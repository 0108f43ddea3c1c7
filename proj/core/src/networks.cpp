#include "ganreg/networks.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"

namespace ganreg::nn {
namespace {

Mat activate(const Mat& a, Activation act) {
  switch (act) {
    case Activation::Tanh:
      return kernels::map(a, [](double t) { return kernels::tanh(t); });
    case Activation::Relu:
      return kernels::map(a, [](double t) { return kernels::leaky_relu(t, 0.0); });
    case Activation::LeakyRelu:
      return kernels::map(a, [](double t) { return kernels::leaky_relu(t, kLeakySlope); });
    case Activation::Linear:
      return a;
  }
  return a;
}

diff::Var activate(diff::Var a, Activation act) {
  switch (act) {
    case Activation::Tanh: return diff::tanh(a);
    case Activation::Relu: return diff::relu(a);
    case Activation::LeakyRelu: return diff::leaky_relu(a, kLeakySlope);
    case Activation::Linear: return a;
  }
  return a;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

Index parse_index(const std::string& s, const char* what) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError(std::string("mlp header: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view token) {
  if (token == "tanh") return Activation::Tanh;
  if (token == "relu") return Activation::Relu;
  if (token == "leaky_relu") return Activation::LeakyRelu;
  if (token == "linear") return Activation::Linear;
  throw ConfigError("activation", "unknown activation '" + std::string(token) + "'");
}

std::string_view to_string(Init i) { return i == Init::XavierUniform ? "xavier_uniform" : "he_normal"; }

Init parse_init(std::string_view token) {
  if (token == "xavier_uniform") return Init::XavierUniform;
  if (token == "he_normal") return Init::HeNormal;
  throw ConfigError("init", "unknown initialization '" + std::string(token) + "'");
}

std::size_t MLPSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_widths.size(); ++l)
    n += static_cast<std::size_t>(fan_in(l) * layer_widths[l] + layer_widths[l]);
  return n;
}

void MLPSpec::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim", "must be >= 1");
  if (layer_widths.empty()) throw ConfigError("layer_widths", "at least one layer is required");
  for (Index w : layer_widths)
    if (w < 1) throw ConfigError("layer_widths", "widths must be >= 1");
  if (activations.size() != layer_widths.size())
    throw ConfigError("activations", "need one activation per layer (" + std::to_string(layer_widths.size()) + ")");
}

MLPSpec default_generator_spec(Index latent_dim, Index ambient_dim, std::uint64_t seed) {
  return MLPSpec{latent_dim,
                 {128, 128, ambient_dim},
                 {Activation::Tanh, Activation::Tanh, Activation::Linear},
                 Init::XavierUniform,
                 seed};
}

MLPSpec default_discriminator_spec(Index ambient_dim, std::uint64_t seed) {
  return MLPSpec{ambient_dim,
                 {128, 128, 1},
                 {Activation::LeakyRelu, Activation::LeakyRelu, Activation::Linear},
                 Init::XavierUniform,
                 seed};
}

Params::Params(const MLPSpec& spec) {
  spec.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    Slot s;
    s.in = spec.fan_in(l);
    s.out = spec.layer_widths[l];
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(s.in * s.out);
    s.bias_offset = offset;
    offset += static_cast<std::size_t>(s.out);
    slots_.push_back(s);
  }
  values_.assign(offset, 0.0);
}

Params::MatMap Params::weight(std::size_t layer) {
  const Slot& s = slots_.at(layer);
  return MatMap(values_.data() + s.weight_offset, s.in, s.out);
}
Params::ConstMatMap Params::weight(std::size_t layer) const {
  const Slot& s = slots_.at(layer);
  return ConstMatMap(values_.data() + s.weight_offset, s.in, s.out);
}
Params::MatMap Params::bias(std::size_t layer) {
  const Slot& s = slots_.at(layer);
  return MatMap(values_.data() + s.bias_offset, 1, s.out);
}
Params::ConstMatMap Params::bias(std::size_t layer) const {
  const Slot& s = slots_.at(layer);
  return ConstMatMap(values_.data() + s.bias_offset, 1, s.out);
}

Params init_params(const MLPSpec& spec, Rng& rng) {
  Params p(spec);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const auto& s = p.slot(l);
    auto w = p.weight(l);
    const double fan_in = static_cast<double>(s.in);
    const double fan_out = static_cast<double>(s.out);
    if (spec.init == Init::XavierUniform) {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (Index i = 0; i < s.in; ++i)
        for (Index j = 0; j < s.out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    } else {
      const double sd = std::sqrt(2.0 / fan_in);
      for (Index i = 0; i < s.in; ++i)
        for (Index j = 0; j < s.out; ++j) w(i, j) = sd * rng.normal();
    }
  }
  return p;
}

Params init_params(const MLPSpec& spec) {
  Rng rng(spec.seed);
  return init_params(spec, rng);
}

Mat forward(const Params& params, const MLPSpec& spec, const Mat& x) {
  if (x.cols() != spec.input_dim)
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(spec.input_dim));
  if (params.layer_count() != spec.layer_count()) throw ShapeError("forward: parameters do not match the spec");
  Mat h = x;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Mat w = params.weight(l);
    const Mat b = params.bias(l);
    h = activate(kernels::add_row(kernels::matmul(h, w), b), spec.activations[l]);
  }
  if (!kernels::all_finite(h)) throw NonFiniteError("forward: non-finite network output");
  return h;
}

Mat generator_forward(const Params& params, const MLPSpec& spec, const Mat& z) { return forward(params, spec, z); }

Mat discriminator_forward(const Params& params, const MLPSpec& spec, const Mat& x) {
  if (spec.output_dim() != 1) throw ShapeError("discriminator must have a single output");
  return forward(params, spec, x);
}

std::vector<diff::Var> TapeParams::all() const {
  std::vector<diff::Var> out;
  out.reserve(weights.size() * 2);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

TapeParams place_params(diff::Tape& tape, const Params& params, bool as_constants) {
  TapeParams placed;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    Mat w = params.weight(l);
    Mat b = params.bias(l);
    if (as_constants) {
      placed.weights.push_back(tape.constant(std::move(w)));
      placed.biases.push_back(tape.constant(std::move(b)));
    } else {
      placed.weights.push_back(tape.variable(std::move(w), "W" + std::to_string(l)));
      placed.biases.push_back(tape.variable(std::move(b), "b" + std::to_string(l)));
    }
  }
  return placed;
}

void append_bindings(diff::Bindings& bindings, const TapeParams& placed, const Params& params) {
  for (std::size_t l = 0; l < placed.weights.size(); ++l) {
    bindings.emplace_back(placed.weights[l], Mat(params.weight(l)));
    bindings.emplace_back(placed.biases[l], Mat(params.bias(l)));
  }
}

diff::Var forward(const TapeParams& placed, const MLPSpec& spec, diff::Var x) {
  if (x.cols() != spec.input_dim) throw ShapeError("forward: input width does not match the network");
  diff::Var h = x;
  for (std::size_t l = 0; l < spec.layer_count(); ++l)
    h = activate(diff::affine(h, placed.weights[l], placed.biases[l]), spec.activations[l]);
  return h;
}

std::vector<double> flatten_grads(const diff::GradMap& grads, const TapeParams& placed, const Params& layout) {
  std::vector<double> flat(layout.size(), 0.0);
  for (std::size_t l = 0; l < placed.weights.size(); ++l) {
    const auto& s = layout.slot(l);
    const Mat& gw = grads.value(placed.weights[l]);
    const Mat& gb = grads.value(placed.biases[l]);
    std::copy(gw.data(), gw.data() + gw.size(), flat.begin() + static_cast<std::ptrdiff_t>(s.weight_offset));
    std::copy(gb.data(), gb.data() + gb.size(), flat.begin() + static_cast<std::ptrdiff_t>(s.bias_offset));
  }
  return flat;
}

void write_mlp(std::ostream& os, const MLPSpec& spec, const Params& params) {
  if (params.size() != spec.parameter_count()) throw ShapeError("write_mlp: parameters do not match the spec");
  os << "mlp v1 " << spec.input_dim;
  for (Index w : spec.layer_widths) os << ' ' << w;
  for (Activation a : spec.activations) os << ' ' << to_string(a);
  os << ' ' << spec.seed << '\n';
  for (double v : params.values()) os << csv::format_double(v) << '\n';
}

std::pair<MLPSpec, Params> read_mlp(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("mlp: missing header");
  const auto tok = split_ws(line);
  if (tok.size() < 6 || tok[0] != "mlp" || tok[1] != "v1") throw IoError("mlp: bad header '" + line + "'");
  const std::size_t rest = tok.size() - 3;  // widths + activations + seed
  if (rest % 2 != 1) throw IoError("mlp: header has an inconsistent token count");
  const std::size_t layers = (rest - 1) / 2;

  MLPSpec spec;
  spec.input_dim = parse_index(tok[2], "input_dim");
  for (std::size_t l = 0; l < layers; ++l) spec.layer_widths.push_back(parse_index(tok[3 + l], "width"));
  try {
    for (std::size_t l = 0; l < layers; ++l) spec.activations.push_back(parse_activation(tok[3 + layers + l]));
  } catch (const ConfigError& e) {
    throw IoError(std::string("mlp: ") + e.what());
  }
  const std::string& seed_tok = tok.back();
  const auto [ptr, ec] = std::from_chars(seed_tok.data(), seed_tok.data() + seed_tok.size(), spec.seed);
  if (ec != std::errc() || ptr != seed_tok.data() + seed_tok.size()) throw IoError("mlp: bad seed '" + seed_tok + "'");
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("mlp: ") + e.what());
  }

  Params params(spec);
  for (double& v : params.values()) {
    if (!std::getline(is, line)) throw IoError("mlp: truncated parameter list");
    v = csv::parse_double(line);
  }
  while (std::getline(is, line))
    if (!line.empty()) throw IoError("mlp: trailing data after parameters");
  return {std::move(spec), std::move(params)};
}

void save_mlp(const std::string& path, const MLPSpec& spec, const Params& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_mlp(os, spec, params);
  if (!os) throw IoError("write failed for '" + path + "'");
}

std::pair<MLPSpec, Params> load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_mlp(is);
}

}  // namespace ganreg::nn
