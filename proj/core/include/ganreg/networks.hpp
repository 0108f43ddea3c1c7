#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ganreg/kernels.hpp"
#include "ganreg/rng.hpp"
#include "ganreg/tape.hpp"

namespace ganreg::nn {

enum class Activation { Tanh, Relu, LeakyRelu, Linear };
enum class Init { XavierUniform, HeNormal };

inline constexpr double kLeakySlope = 0.2;

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view token);
std::string_view to_string(Init i);
Init parse_init(std::string_view token);

/// Fully-connected network: input_dim -> layer_widths[0] -> ... -> layer_widths.back().
/// activations[l] is applied after layer l; the last one is the output map.
struct MLPSpec {
  Index input_dim = 0;
  std::vector<Index> layer_widths;
  std::vector<Activation> activations;
  Init init = Init::XavierUniform;
  std::uint64_t seed = 0;

  Index output_dim() const { return layer_widths.empty() ? 0 : layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size(); }
  Index fan_in(std::size_t layer) const { return layer == 0 ? input_dim : layer_widths[layer - 1]; }
  std::size_t parameter_count() const;
  /// Throws ConfigError on an inconsistent spec.
  void validate() const;
};

/// z (latent_dim) -> 128 -> 128 -> ambient_dim, tanh hidden, linear output.
MLPSpec default_generator_spec(Index latent_dim = 2, Index ambient_dim = 3, std::uint64_t seed = 0);
/// x (ambient_dim) -> 128 -> 128 -> 1, leaky-relu(0.2) hidden, linear logit.
MLPSpec default_discriminator_spec(Index ambient_dim = 3, std::uint64_t seed = 0);

/// Flat parameter storage. Layer l owns a fan_in x fan_out row-major weight
/// block followed by its bias; forward computes x W + b.
class Params {
 public:
  struct Slot {
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    Index in = 0;
    Index out = 0;
  };
  using MatMap = Eigen::Map<Mat>;
  using ConstMatMap = Eigen::Map<const Mat>;

  Params() = default;
  /// Zero-filled parameters laid out for `spec`.
  explicit Params(const MLPSpec& spec);

  std::size_t size() const { return values_.size(); }
  std::size_t layer_count() const { return slots_.size(); }
  const Slot& slot(std::size_t layer) const { return slots_[layer]; }

  MatMap weight(std::size_t layer);
  ConstMatMap weight(std::size_t layer) const;
  MatMap bias(std::size_t layer);
  ConstMatMap bias(std::size_t layer) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const Params& a, const Params& b) { return a.values_ == b.values_; }

 private:
  std::vector<double> values_;
  std::vector<Slot> slots_;
};

Params init_params(const MLPSpec& spec, Rng& rng);
/// Initializes from spec.seed.
Params init_params(const MLPSpec& spec);

/// Plain forward pass of a batch (one sample per row).
Mat forward(const Params& params, const MLPSpec& spec, const Mat& x);
Mat generator_forward(const Params& params, const MLPSpec& spec, const Mat& z);
/// n x 1 logits.
Mat discriminator_forward(const Params& params, const MLPSpec& spec, const Mat& x);

/// Parameters placed on a tape, as differentiable variables or as constants.
struct TapeParams {
  std::vector<diff::Var> weights;
  std::vector<diff::Var> biases;

  /// All parameter nodes in storage order (w0, b0, w1, b1, ...).
  std::vector<diff::Var> all() const;
};

TapeParams place_params(diff::Tape& tape, const Params& params, bool as_constants = false);
/// Rebinds variable parameters to new values, for replaying a recorded tape.
void append_bindings(diff::Bindings& bindings, const TapeParams& placed, const Params& params);
diff::Var forward(const TapeParams& placed, const MLPSpec& spec, diff::Var x);

/// Copies gradient nodes into a flat vector laid out like `layout`.
std::vector<double> flatten_grads(const diff::GradMap& grads, const TapeParams& placed, const Params& layout);

// Text model format:
//   mlp v1 <input_dim> <widths...> <activations...> <seed>
//   one shortest round-trip decimal per line, in storage order.
void write_mlp(std::ostream& os, const MLPSpec& spec, const Params& params);
std::pair<MLPSpec, Params> read_mlp(std::istream& is);
void save_mlp(const std::string& path, const MLPSpec& spec, const Params& params);
std::pair<MLPSpec, Params> load_mlp(const std::string& path);

}  // namespace ganreg::nn
