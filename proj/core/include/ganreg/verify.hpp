#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ganreg/divergences.hpp"
#include "ganreg/jet.hpp"
#include "ganreg/rng.hpp"

namespace ganreg::verify {

/// Closed-form 1D Gaussian mixture.
class Analytic1D {
 public:
  struct Component {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
  };

  explicit Analytic1D(std::vector<Component> components);
  static Analytic1D gaussian(double mean, double sd);

  double pdf(double x) const;
  /// ln p with its first two derivatives.
  Jet2 log_pdf(const Jet2& x) const;
  double log_pdf(double x) const { return log_pdf(Jet2(x)).v; }
  double sample(Rng& rng) const;

  /// P * N(0, gamma): component variances grow by gamma.
  Analytic1D convolve(double gamma) const;

  double mean() const;
  double variance() const;
  const std::vector<Component>& components() const { return components_; }

 private:
  std::vector<Component> components_;
};

enum class Rule { Trapezoid, GaussLegendre };

/// Nodes and weights on [a, b].
class QuadGrid {
 public:
  static QuadGrid trapezoid(double a, double b, int nodes);
  static QuadGrid gauss_legendre(double a, double b, int nodes);
  /// [-12, 12] with 20001 trapezoid nodes.
  static QuadGrid standard(int nodes = 20001) { return trapezoid(-12.0, 12.0, nodes); }

  double a() const { return a_; }
  double b() const { return b_; }
  Rule rule() const { return rule_; }
  std::size_t size() const { return x_.size(); }
  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& weights() const { return w_; }

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * f(x_[i]);
    return s;
  }

  /// Throws DomainError unless every component mean +- 8 sd lies inside [a, b].
  void require_coverage(const Analytic1D& dist) const;

 private:
  double a_ = 0.0;
  double b_ = 0.0;
  Rule rule_ = Rule::Trapezoid;
  std::vector<double> x_;
  std::vector<double> w_;
};

inline constexpr double kCoverageSds = 8.0;

/// A statistic with value, first and second derivative.
using Statistic = std::function<Jet2(const Jet2&)>;

/// psi*(x) = f'(p/q) evaluated on jets of the log densities.
Statistic optimal_statistic_jet(const Analytic1D& p, const Analytic1D& q, const div::FDivergence& d);
/// ln p/(p+q), the JS optimum in closed form.
Statistic js_optimal_log_probability(const Analytic1D& p, const Analytic1D& q);

/// F(P, Q; psi) = E_P[psi] - E_Q[f* o psi] by quadrature.
double fgan_quadrature(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const Statistic& psi,
                       const QuadGrid& grid);
/// D_f(P || Q) = E_Q[f(p/q)] by quadrature.
double f_divergence_quadrature(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q,
                               const QuadGrid& grid);
/// Omega_f(Q; psi) = E_Q[f*''(psi) psi'^2] by quadrature.
double omega_quadrature(const div::FDivergence& d, const Analytic1D& q, const Statistic& psi, const QuadGrid& grid);

struct ConvolutionReport {
  double quadrature = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  bool pass = false;  // |quadrature - mc_mean| <= 3 mc_se
};

/// E_{P*N(0,gamma)}[psi] by quadrature vs. E_P E_xi[psi(x + xi)] by Monte Carlo.
ConvolutionReport verify_convolution_identity(const Analytic1D& p, const std::function<double(double)>& psi,
                                              double gamma, const QuadGrid& grid, long n_mc, Rng& rng);

/// max |(f* o psi)'' - [f*''(psi) psi'^2 + f*'(psi) psi'']| over the grid nodes.
double verify_chain_rule(const div::FDivergence& d, const Statistic& psi, const QuadGrid& grid);

/// max over h of |E_P[h] - E_Q[f*'(psi*) h]|.
double verify_optimality(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const QuadGrid& grid,
                         const std::vector<std::function<double(double)>>& test_functions);
/// {1, x, x^2, sin x}
std::vector<std::function<double(double)>> default_test_functions();

enum class SlopeVariant {
  Omega,      // R = F_gamma - [F - gamma/2 Omega_f]
  Laplacian,  // R = F_gamma - F - gamma/2 (E_P[psi''] - E_Q[(f* o psi)''])
  NoOmega,    // R = F_gamma - F
};

struct SlopeReport {
  double slope = 0.0;
  std::vector<double> gammas;     // points kept in the fit
  std::vector<double> residuals;  // |R(gamma)|
};

inline constexpr double kResidualFloor = 1e-14;

/// Least-squares slope of log|R| against log gamma. Points with |R| < 1e-14 are dropped.
SlopeReport residual_slope(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const Statistic& psi,
                           const std::vector<double>& gammas, const QuadGrid& grid, SlopeVariant variant);

/// n geometric points from lo to hi inclusive.
std::vector<double> geometric_points(double lo, double hi, int n);

/// max pointwise |f*''(ln phi) (ln phi)'^2 q - (ln phi)'^2 p - (ln(1-phi))'^2 q| with phi = p/(p+q).
double verify_parametrization_equivalence(const Analytic1D& p, const Analytic1D& q, const QuadGrid& grid);

struct LimitReport {
  double omega0 = 0.0;
  std::vector<double> eps;
  std::vector<double> omega;
  std::vector<double> rel_diff;  // |Omega_eps - Omega_0| / |Omega_0|
  bool monotone = false;         // rel_diff decreasing over eps <= 1e-2
};

LimitReport verify_regularizer_limit(const div::FDivergence& d, const Analytic1D& q, const Statistic& psi,
                                     const std::vector<double>& eps, const QuadGrid& grid);

struct CheckResult {
  std::string check;
  std::string parameter;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  int grid_nodes = 20001;
  double grid_lo = -12.0;
  double grid_hi = 12.0;
  long mc_draws = 1000000;
  std::uint64_t seed = 0;
};

/// Names accepted by run_check.
const std::vector<std::string>& check_names();
std::vector<CheckResult> run_check(std::string_view name, const VerifyOptions& options);
std::vector<CheckResult> run_all(const VerifyOptions& options);

void write_report_csv(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace ganreg::verify
