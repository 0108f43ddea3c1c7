#include "ganreg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"

namespace ganreg::verify {
namespace {

Jet2 log_add_exp_all(const std::vector<Jet2>& terms) {
  Jet2 acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = log_add_exp(acc, terms[i]);
  return acc;
}

void require_in_domain(const div::FDivergence& d, double t, double x) {
  if (!d.in_domain(t)) {
    std::ostringstream ss;
    ss << d.name << ": statistic " << t << " at x = " << x << " is outside the conjugate domain";
    throw DomainError(ss.str());
  }
}

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Analytic1D

Analytic1D::Analytic1D(std::vector<Component> components) : components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("components", "mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw ConfigError("weight", "component weights must be > 0");
    if (!(c.variance > 0.0)) throw ConfigError("variance", "component variances must be > 0");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

Analytic1D Analytic1D::gaussian(double mean, double sd) { return Analytic1D({{1.0, mean, sd * sd}}); }

double Analytic1D::pdf(double x) const {
  double s = 0.0;
  for (const auto& c : components_) {
    const double z = x - c.mean;
    s += c.weight * std::exp(-0.5 * z * z / c.variance) / std::sqrt(2.0 * std::numbers::pi * c.variance);
  }
  return s;
}

Jet2 Analytic1D::log_pdf(const Jet2& x) const {
  std::vector<Jet2> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    const Jet2 z = x - Jet2(c.mean);
    const double constant = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance);
    terms.push_back(Jet2(constant) - z * z * Jet2(0.5 / c.variance));
  }
  return log_add_exp_all(terms);
}

double Analytic1D::sample(Rng& rng) const {
  const double u = rng.uniform();
  double cum = 0.0;
  const Component* pick = &components_.back();
  for (const auto& c : components_) {
    cum += c.weight;
    if (u < cum) {
      pick = &c;
      break;
    }
  }
  return pick->mean + std::sqrt(pick->variance) * rng.normal();
}

Analytic1D Analytic1D::convolve(double gamma) const {
  if (gamma < 0.0) throw DomainError("convolve: gamma must be >= 0");
  auto comps = components_;
  for (auto& c : comps) c.variance += gamma;
  return Analytic1D(std::move(comps));
}

double Analytic1D::mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double Analytic1D::variance() const {
  const double m = mean();
  double s = 0.0;
  for (const auto& c : components_) s += c.weight * (c.variance + (c.mean - m) * (c.mean - m));
  return s;
}

// ---------------------------------------------------------------------------
// QuadGrid

QuadGrid QuadGrid::trapezoid(double a, double b, int nodes) {
  if (nodes < 2 || !(b > a)) throw ConfigError("grid_nodes", "trapezoid grid needs >= 2 nodes and b > a");
  QuadGrid g;
  g.a_ = a;
  g.b_ = b;
  g.rule_ = Rule::Trapezoid;
  const double h = (b - a) / (nodes - 1);
  g.x_.resize(static_cast<std::size_t>(nodes));
  g.w_.assign(static_cast<std::size_t>(nodes), h);
  for (int i = 0; i < nodes; ++i) g.x_[static_cast<std::size_t>(i)] = a + i * h;
  g.x_.back() = b;
  g.w_.front() = 0.5 * h;
  g.w_.back() = 0.5 * h;
  return g;
}

QuadGrid QuadGrid::gauss_legendre(double a, double b, int nodes) {
  if (nodes < 1 || !(b > a)) throw ConfigError("grid_nodes", "Gauss-Legendre grid needs >= 1 node and b > a");
  QuadGrid g;
  g.a_ = a;
  g.b_ = b;
  g.rule_ = Rule::GaussLegendre;
  const int n = nodes;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  g.x_.resize(static_cast<std::size_t>(n));
  g.w_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n from the standard cosine guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    const double w = 2.0 * half / ((1.0 - z * z) * pp * pp);
    g.x_[static_cast<std::size_t>(i)] = mid - half * z;
    g.x_[static_cast<std::size_t>(n - 1 - i)] = mid + half * z;
    g.w_[static_cast<std::size_t>(i)] = w;
    g.w_[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return g;
}

void QuadGrid::require_coverage(const Analytic1D& dist) const {
  for (const auto& c : dist.components()) {
    const double sd = std::sqrt(c.variance);
    if (c.mean - kCoverageSds * sd < a_ || c.mean + kCoverageSds * sd > b_) {
      std::ostringstream ss;
      ss << "grid [" << a_ << ", " << b_ << "] does not cover component N(" << c.mean << ", " << c.variance
         << ") to +-" << kCoverageSds << " sd";
      throw DomainError(ss.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics and expectations

Statistic optimal_statistic_jet(const Analytic1D& p, const Analytic1D& q, const div::FDivergence& d) {
  return [p, q, d](const Jet2& x) {
    const Jet2 ratio = exp(p.log_pdf(x) - q.log_pdf(x));
    return d.generator_derivative_jet(ratio);
  };
}

Statistic js_optimal_log_probability(const Analytic1D& p, const Analytic1D& q) {
  return [p, q](const Jet2& x) {
    const Jet2 lp = p.log_pdf(x);
    const Jet2 lq = q.log_pdf(x);
    return lp - log_add_exp(lp, lq);
  };
}

double fgan_quadrature(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const Statistic& psi,
                       const QuadGrid& grid) {
  return grid.integrate([&](double x) {
    const double t = psi(Jet2(x)).v;
    require_in_domain(d, t, x);
    return t * p.pdf(x) - d.conjugate(t) * q.pdf(x);
  });
}

double f_divergence_quadrature(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q,
                               const QuadGrid& grid) {
  return grid.integrate([&](double x) {
    const double qx = q.pdf(x);
    if (qx == 0.0) return 0.0;
    return qx * d.generator(std::exp(p.log_pdf(x) - q.log_pdf(x)));
  });
}

double omega_quadrature(const div::FDivergence& d, const Analytic1D& q, const Statistic& psi, const QuadGrid& grid) {
  return grid.integrate([&](double x) {
    const Jet2 t = psi(Jet2::variable(x));
    require_in_domain(d, t.v, x);
    return d.conjugate_d2(t.v) * t.d1 * t.d1 * q.pdf(x);
  });
}

// ---------------------------------------------------------------------------
// Checks

ConvolutionReport verify_convolution_identity(const Analytic1D& p, const std::function<double(double)>& psi,
                                              double gamma, const QuadGrid& grid, long n_mc, Rng& rng) {
  if (n_mc < 2) throw ConfigError("mc_draws", "need at least two Monte-Carlo draws");
  const Analytic1D pg = p.convolve(gamma);
  grid.require_coverage(pg);
  ConvolutionReport r;
  r.quadrature = grid.integrate([&](double x) { return psi(x) * pg.pdf(x); });

  // Welford running mean and variance of psi(x + xi).
  const double sd = std::sqrt(gamma);
  double mean = 0.0;
  double m2 = 0.0;
  for (long i = 1; i <= n_mc; ++i) {
    const double x = p.sample(rng);
    const double v = psi(x + sd * rng.normal());
    const double delta = v - mean;
    mean += delta / static_cast<double>(i);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_mc - 1);
  r.mc_mean = mean;
  r.mc_se = std::sqrt(var / static_cast<double>(n_mc));
  r.pass = std::abs(r.quadrature - r.mc_mean) <= 3.0 * r.mc_se;
  return r;
}

double verify_chain_rule(const div::FDivergence& d, const Statistic& psi, const QuadGrid& grid) {
  double worst = 0.0;
  for (double x : grid.nodes()) {
    const Jet2 t = psi(Jet2::variable(x));
    require_in_domain(d, t.v, x);
    const double lhs = d.conjugate_jet(t).d2;
    const double rhs = d.conjugate_d2(t.v) * t.d1 * t.d1 + d.conjugate_d1(t.v) * t.d2;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

std::vector<std::function<double(double)>> default_test_functions() {
  return {[](double) { return 1.0; }, [](double x) { return x; }, [](double x) { return x * x; },
          [](double x) { return std::sin(x); }};
}

double verify_optimality(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const QuadGrid& grid,
                         const std::vector<std::function<double(double)>>& test_functions) {
  grid.require_coverage(p);
  grid.require_coverage(q);
  const auto psi_star =
      div::optimal_statistic([&p](double x) { return p.pdf(x); }, [&q](double x) { return q.pdf(x); }, d);
  // psi* is evaluated once per node and reused for every h.
  std::vector<double> weight_q(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.nodes()[i];
    const double t = psi_star(x);
    require_in_domain(d, t, x);
    weight_q[i] = d.conjugate_d1(t) * q.pdf(x);
  }
  double worst = 0.0;
  for (const auto& h : test_functions) {
    double ep = 0.0;
    double eq = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid.nodes()[i];
      const double w = grid.weights()[i];
      ep += w * h(x) * p.pdf(x);
      eq += w * h(x) * weight_q[i];
    }
    worst = std::max(worst, std::abs(ep - eq));
  }
  return worst;
}

std::vector<double> geometric_points(double lo, double hi, int n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("gammas", "need n >= 2 and 0 < lo < hi");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  out.back() = hi;
  return out;
}

SlopeReport residual_slope(const div::FDivergence& d, const Analytic1D& p, const Analytic1D& q, const Statistic& psi,
                           const std::vector<double>& gammas, const QuadGrid& grid, SlopeVariant variant) {
  grid.require_coverage(p);
  grid.require_coverage(q);
  // A statistic touching the edge of the conjugate domain makes f* blow up.
  constexpr double kMargin = 1e-3;
  for (double x : grid.nodes()) {
    const double t = psi(Jet2(x)).v;
    if (!(t < d.statistic_domain.hi - kMargin) || !(t > d.statistic_domain.lo + kMargin))
      throw DomainError("residual_slope: statistic within 1e-3 of the domain boundary at x = " + std::to_string(x));
  }

  const double F = fgan_quadrature(d, p, q, psi, grid);
  double correction = 0.0;  // first-order term divided by gamma/2
  if (variant == SlopeVariant::Omega) {
    correction = -omega_quadrature(d, q, psi, grid);
  } else if (variant == SlopeVariant::Laplacian) {
    correction = grid.integrate([&](double x) {
      const Jet2 t = psi(Jet2::variable(x));
      return t.d2 * p.pdf(x) - d.conjugate_jet(t).d2 * q.pdf(x);
    });
  }

  SlopeReport rep;
  for (double g : gammas) {
    const Analytic1D pg = p.convolve(g);
    const Analytic1D qg = q.convolve(g);
    grid.require_coverage(pg);
    grid.require_coverage(qg);
    const double Fg = fgan_quadrature(d, pg, qg, psi, grid);
    const double R = Fg - (F + 0.5 * g * correction);
    if (std::abs(R) < kResidualFloor) continue;
    rep.gammas.push_back(g);
    rep.residuals.push_back(std::abs(R));
  }
  const std::size_t n = rep.gammas.size();
  if (n < 2) throw Error("residual_slope: fewer than two residuals above the quadrature noise floor");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(rep.gammas[i]);
    const double ly = std::log(rep.residuals[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  rep.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  return rep;
}

double verify_parametrization_equivalence(const Analytic1D& p, const Analytic1D& q, const QuadGrid& grid) {
  const div::FDivergence js = div::js_fdivergence();
  double worst = 0.0;
  for (double x : grid.nodes()) {
    const Jet2 X = Jet2::variable(x);
    const Jet2 lp = p.log_pdf(X);
    const Jet2 lq = q.log_pdf(X);
    const Jet2 lse = log_add_exp(lp, lq);
    const Jet2 log_phi = lp - lse;
    const Jet2 log_one_minus_phi = lq - lse;
    const double px = p.pdf(x);
    const double qx = q.pdf(x);
    const double g1 = log_phi.d1 * log_phi.d1;
    const double g2 = log_one_minus_phi.d1 * log_one_minus_phi.d1;
    double lhs = 0.0;
    if (log_phi.v < 0.0) lhs = js.conjugate_d2(log_phi.v) * g1 * qx;
    const double rhs = g1 * px + g2 * qx;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

LimitReport verify_regularizer_limit(const div::FDivergence& d, const Analytic1D& q, const Statistic& psi,
                                     const std::vector<double>& eps, const QuadGrid& grid) {
  LimitReport r;
  grid.require_coverage(q);
  r.omega0 = omega_quadrature(d, q, psi, grid);
  for (double e : eps) {
    const Analytic1D qe = q.convolve(e);
    grid.require_coverage(qe);
    const double om = e == 0.0 ? r.omega0 : omega_quadrature(d, qe, psi, grid);
    r.eps.push_back(e);
    r.omega.push_back(om);
    r.rel_diff.push_back(r.omega0 != 0.0 ? std::abs(om - r.omega0) / std::abs(r.omega0) : std::abs(om - r.omega0));
  }
  // Monotone: ordered by decreasing eps, the gap shrinks at every step once eps <= 1e-2.
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < r.eps.size(); ++i)
    if (r.eps[i] <= 1e-2 && r.eps[i] > 0.0) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.eps[a] > r.eps[b]; });
  r.monotone = true;
  for (std::size_t k = 1; k < idx.size(); ++k)
    if (!(r.rel_diff[idx[k]] < r.rel_diff[idx[k - 1]])) r.monotone = false;
  return r;
}

// ---------------------------------------------------------------------------
// Named checks

namespace {

const Analytic1D kP = Analytic1D::gaussian(0.0, 1.0);
const Analytic1D kQ = Analytic1D::gaussian(0.5, 1.2);

Jet2 neg_softplus(const Jet2& x) { return -softplus(x); }

QuadGrid default_grid(const VerifyOptions& o) { return QuadGrid::trapezoid(o.grid_lo, o.grid_hi, o.grid_nodes); }

CheckResult make(std::string check, std::string parameter, double residual, double threshold, bool pass) {
  return CheckResult{std::move(check), std::move(parameter), residual, threshold, pass};
}

CheckResult slope_check(const std::string& name, SlopeVariant variant, double expected, double tol,
                        const VerifyOptions& o) {
  const auto js = div::js_fdivergence();
  Statistic psi = js_optimal_log_probability(kP, kQ);
  std::string psi_name = "psi*";
  if (variant == SlopeVariant::Laplacian) {
    Statistic base = psi;
    psi = [base](const Jet2& x) { return base(x) + Jet2(0.05) * exp(-(x * x)); };
    psi_name = "psi*+0.05exp(-x^2)";
  }
  const auto rep = residual_slope(js, kP, kQ, psi, geometric_points(1e-4, 1e-1, 5), default_grid(o), variant);
  const double r = std::abs(rep.slope - expected);
  return make(name, "psi=" + psi_name + ";slope=" + fmt(rep.slope) + ";expected=" + fmt(expected), r, tol, r <= tol);
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "convolution-identity", "chain-rule",          "optimality",
      "variational-bound",    "residual-slope",      "residual-slope-laplacian",
      "residual-slope-control", "parametrization-equivalence", "regularizer-limit"};
  return names;
}

std::vector<CheckResult> run_check(std::string_view name, const VerifyOptions& o) {
  const auto js = div::js_fdivergence();
  if (name == "convolution-identity") {
    Rng rng(o.seed);
    const auto r = verify_convolution_identity(kP, [](double x) { return x * x; }, 0.1, default_grid(o), o.mc_draws,
                                               rng);
    return {make("convolution-identity",
                 "psi=x^2;gamma=0.1;quadrature=" + fmt(r.quadrature) + ";mc=" + fmt(r.mc_mean),
                 std::abs(r.quadrature - r.mc_mean), 3.0 * r.mc_se, r.pass)};
  }
  if (name == "chain-rule") {
    const QuadGrid g = QuadGrid::trapezoid(-5.0, 5.0, o.grid_nodes);
    const double r = verify_chain_rule(js, neg_softplus, g);
    return {make("chain-rule", "psi=-softplus(x);interval=[-5;5]", r, 1e-8, r < 1e-8)};
  }
  if (name == "optimality") {
    const double r = verify_optimality(js, kP, kQ, default_grid(o), default_test_functions());
    return {make("optimality", "h={1;x;x^2;sin x}", r, 1e-6, r < 1e-6)};
  }
  if (name == "variational-bound") {
    const QuadGrid g = default_grid(o);
    const double bound = fgan_quadrature(js, kP, kQ, js_optimal_log_probability(kP, kQ), g);
    const double exact = f_divergence_quadrature(js, kP, kQ, g);
    const double r = std::abs(bound - exact);
    return {make("variational-bound", "F(psi*)=" + fmt(bound) + ";D_f=" + fmt(exact), r, 1e-6, r < 1e-6)};
  }
  if (name == "residual-slope") return {slope_check("residual-slope", SlopeVariant::Omega, 2.0, 0.2, o)};
  if (name == "residual-slope-laplacian")
    return {slope_check("residual-slope-laplacian", SlopeVariant::Laplacian, 2.0, 0.2, o)};
  if (name == "residual-slope-control")
    return {slope_check("residual-slope-control", SlopeVariant::NoOmega, 1.0, 0.1, o)};
  if (name == "parametrization-equivalence") {
    const double r = verify_parametrization_equivalence(Analytic1D::gaussian(0.0, 1.0), Analytic1D::gaussian(1.0, 1.0),
                                                        default_grid(o));
    return {make("parametrization-equivalence", "P=N(0;1);Q=N(1;1)", r, 1e-10, r < 1e-10)};
  }
  if (name == "regularizer-limit") {
    // Q must not be symmetric about 0: E_Q[sigma(-x)] is then exactly 1/2 for every eps.
    const auto rep = verify_regularizer_limit(js, kQ, neg_softplus,
                                              {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}, default_grid(o));
    double at_1e4 = 0.0;
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
      if (rep.eps[i] == 1e-4) at_1e4 = rep.rel_diff[i];
    return {make("regularizer-limit",
                 "Q=N(0.5;1.2);psi=-softplus(x);eps=1e-4;monotone=" + std::string(rep.monotone ? "1" : "0"), at_1e4, 0.01,
                 at_1e4 < 0.01 && rep.monotone)};
  }
  throw ConfigError("check", "unknown check '" + std::string(name) + "'");
}

std::vector<CheckResult> run_all(const VerifyOptions& options) {
  std::vector<CheckResult> out;
  for (const auto& n : check_names()) {
    auto rows = run_check(n, options);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

void write_report_csv(std::ostream& os, const std::vector<CheckResult>& results) {
  csv::Writer w(os, {"check", "parameter", "residual", "threshold", "pass"});
  for (const auto& r : results) w.row(r.check, r.parameter, r.residual, r.threshold, r.pass ? 1 : 0);
}

}  // namespace ganreg::verify
