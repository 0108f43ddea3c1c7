#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ganreg/jet.hpp"
#include "ganreg/kernels.hpp"
#include "ganreg/tape.hpp"

namespace ganreg::div {

/// Open interval (lo, hi); infinite ends mean unbounded.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double t) const { return t > lo && t < hi; }
};

/// An f-divergence, described through its generator f and Fenchel conjugate f*.
///
/// The variational objective uses f* and its derivatives on the statistic psi;
/// f' maps a density ratio p/q to the optimal statistic. The *_jet members are
/// the same functions written over Jet2, so their derivatives can be taken
/// automatically.
struct FDivergence {
  std::string name;
  std::function<double(double)> generator;             // f(u)
  std::function<double(double)> generator_derivative;  // f'(u)
  std::function<double(double)> conjugate;             // f*(t)
  std::function<double(double)> conjugate_d1;          // f*'(t)
  std::function<double(double)> conjugate_d2;          // f*''(t)
  std::function<double(double)> conjugate_d3;          // f*'''(t)
  std::function<Jet2(const Jet2&)> conjugate_jet;
  std::function<Jet2(const Jet2&)> generator_derivative_jet;
  Interval statistic_domain;   // admissible psi values
  Interval generator_domain;   // admissible u for f

  bool in_domain(double t) const { return statistic_domain.contains(t); }
  /// f*(t), throwing DomainError outside the statistic domain.
  double conjugate_checked(double t) const;
};

/// Jensen-Shannon (GAN form): f*(t) = -ln(1 - e^t) on t < 0.
FDivergence js_fdivergence();
FDivergence kl_fdivergence();
FDivergence reverse_kl_fdivergence();
FDivergence pearson_chi2_fdivergence();
FDivergence squared_hellinger_fdivergence();

std::vector<FDivergence> catalog();
/// Looks a divergence up by name ("js", "kl", "reverse_kl", "pearson_chi2", "squared_hellinger").
FDivergence find_fdivergence(std::string_view name);

/// E_P[psi] - E_Q[f* o psi] over sample values of the statistic.
double fgan_objective(std::span<const double> psi_p, std::span<const double> psi_q, const FDivergence& div);

/// Omega_f = E_Q[f*''(psi) ||grad psi||^2].
double omega_f(std::span<const double> psi_q, std::span<const double> gradsq_q, const FDivergence& div);

/// E_P[ln sigma(l)] + E_Q[ln(1 - sigma(l))] from discriminator logits.
double js_objective(std::span<const double> logits_p, std::span<const double> logits_q);

/// Omega_JS = E_P[(1 - D)^2 ||grad l||^2] + E_Q[D^2 ||grad l||^2] with D = sigma(l).
double omega_js(std::span<const double> logits_p, std::span<const double> gradsq_p,
                std::span<const double> logits_q, std::span<const double> gradsq_q);

// Tape versions; logits and gradsq are n x 1 columns.
diff::Var js_objective(diff::Var logits_p, diff::Var logits_q);
diff::Var omega_js(diff::Var logits_p, diff::Var gradsq_p, diff::Var logits_q, diff::Var gradsq_q);

/// Maps an unconstrained network output into the JS statistic domain (t < 0).
inline constexpr double kJsGuardEpsilon = 1e-6;
inline double js_statistic_guard(double raw) { return -kernels::softplus(-raw) - kJsGuardEpsilon; }

using Density = std::function<double(double)>;

/// psi*(x) = f'(p(x) / q(x)), the maximizer of the variational objective.
std::function<double(double)> optimal_statistic(Density p, Density q, const FDivergence& div);

/// Optimal discriminator probability p / (p + q) of the logit parametrization.
std::function<double(double)> optimal_js_probability(Density p, Density q);

/// Optimal logit ln p - ln q.
std::function<double(double)> optimal_js_logit(Density p, Density q);

enum class Origin { Data, Generated };

/// A batch of points (one per row) tagged with where it came from.
struct Batch {
  Mat points;
  Origin origin = Origin::Data;

  Index size() const { return points.rows(); }
};

/// Validates (n >= 1, finite entries) and wraps a batch.
Batch make_batch(Mat points, Origin origin);

}  // namespace ganreg::div
