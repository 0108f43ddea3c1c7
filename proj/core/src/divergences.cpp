#include "ganreg/divergences.hpp"

#include <cmath>

#include "ganreg/error.hpp"

namespace ganreg::div {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Each conjugate (and f') is written once as a template so the double and Jet2
// versions cannot drift apart.
struct Js {
  template <class T>
  static T conjugate(const T& t) {
    using std::expm1;
    using std::log;
    return -log(-expm1(t));
  }
  template <class T>
  static T generator_derivative(const T& u) {
    using std::log1p;
    return -log1p(T(1.0) / u);
  }
};

struct Kl {
  template <class T>
  static T conjugate(const T& t) {
    using std::exp;
    return exp(t - T(1.0));
  }
  template <class T>
  static T generator_derivative(const T& u) {
    using std::log;
    return T(1.0) + log(u);
  }
};

struct ReverseKl {
  template <class T>
  static T conjugate(const T& t) {
    using std::log;
    return T(-1.0) - log(-t);
  }
  template <class T>
  static T generator_derivative(const T& u) {
    return -(T(1.0) / u);
  }
};

struct PearsonChi2 {
  template <class T>
  static T conjugate(const T& t) {
    return T(0.25) * t * t + t;
  }
  template <class T>
  static T generator_derivative(const T& u) {
    return T(2.0) * (u - T(1.0));
  }
};

struct SquaredHellinger {
  template <class T>
  static T conjugate(const T& t) {
    return t / (T(1.0) - t);
  }
  template <class T>
  static T generator_derivative(const T& u) {
    using std::sqrt;
    return T(1.0) - T(1.0) / sqrt(u);
  }
};

template <class Traits>
void attach_templates(FDivergence& d) {
  d.conjugate = [](double t) { return Traits::conjugate(t); };
  d.conjugate_jet = [](const Jet2& t) { return Traits::conjugate(t); };
  d.generator_derivative = [](double u) { return Traits::generator_derivative(u); };
  d.generator_derivative_jet = [](const Jet2& u) { return Traits::generator_derivative(u); };
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                               std::to_string(b) + ")");
}

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw ShapeError(std::string(what) + ": empty batch");
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

double FDivergence::conjugate_checked(double t) const {
  if (!in_domain(t))
    throw DomainError(name + ": statistic " + std::to_string(t) + " outside the conjugate domain");
  return conjugate(t);
}

FDivergence js_fdivergence() {
  FDivergence d;
  d.name = "js";
  attach_templates<Js>(d);
  d.generator = [](double u) {
    if (u == 0.0) return 0.0;
    return u * std::log(u) - (u + 1.0) * std::log1p(u);
  };
  d.conjugate_d1 = [](double t) { return 1.0 / std::expm1(-t); };
  d.conjugate_d2 = [](double t) {
    const double m = std::expm1(t);
    return std::exp(t) / (m * m);
  };
  d.conjugate_d3 = [](double t) {
    const double e = std::exp(t);
    const double m = std::expm1(t);
    return -e * (1.0 + e) / (m * m * m);
  };
  d.statistic_domain = {-kInf, 0.0};
  d.generator_domain = {0.0, kInf};
  return d;
}

FDivergence kl_fdivergence() {
  FDivergence d;
  d.name = "kl";
  attach_templates<Kl>(d);
  d.generator = [](double u) { return u == 0.0 ? 0.0 : u * std::log(u); };
  d.conjugate_d1 = [](double t) { return std::exp(t - 1.0); };
  d.conjugate_d2 = [](double t) { return std::exp(t - 1.0); };
  d.conjugate_d3 = [](double t) { return std::exp(t - 1.0); };
  d.statistic_domain = {-kInf, kInf};
  d.generator_domain = {0.0, kInf};
  return d;
}

FDivergence reverse_kl_fdivergence() {
  FDivergence d;
  d.name = "reverse_kl";
  attach_templates<ReverseKl>(d);
  d.generator = [](double u) { return -std::log(u); };
  d.conjugate_d1 = [](double t) { return -1.0 / t; };
  d.conjugate_d2 = [](double t) { return 1.0 / (t * t); };
  d.conjugate_d3 = [](double t) { return -2.0 / (t * t * t); };
  d.statistic_domain = {-kInf, 0.0};
  d.generator_domain = {0.0, kInf};
  return d;
}

FDivergence pearson_chi2_fdivergence() {
  FDivergence d;
  d.name = "pearson_chi2";
  attach_templates<PearsonChi2>(d);
  d.generator = [](double u) { return (u - 1.0) * (u - 1.0); };
  d.conjugate_d1 = [](double t) { return 0.5 * t + 1.0; };
  d.conjugate_d2 = [](double) { return 0.5; };
  d.conjugate_d3 = [](double) { return 0.0; };
  d.statistic_domain = {-kInf, kInf};
  d.generator_domain = {-kInf, kInf};
  return d;
}

FDivergence squared_hellinger_fdivergence() {
  FDivergence d;
  d.name = "squared_hellinger";
  attach_templates<SquaredHellinger>(d);
  d.generator = [](double u) {
    const double s = std::sqrt(u) - 1.0;
    return s * s;
  };
  d.conjugate_d1 = [](double t) { return 1.0 / ((1.0 - t) * (1.0 - t)); };
  d.conjugate_d2 = [](double t) { return 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t)); };
  d.conjugate_d3 = [](double t) {
    const double s = 1.0 - t;
    return 6.0 / (s * s * s * s);
  };
  d.statistic_domain = {-kInf, 1.0};
  d.generator_domain = {0.0, kInf};
  return d;
}

std::vector<FDivergence> catalog() {
  return {js_fdivergence(), kl_fdivergence(), reverse_kl_fdivergence(), pearson_chi2_fdivergence(),
          squared_hellinger_fdivergence()};
}

FDivergence find_fdivergence(std::string_view name) {
  for (auto& d : catalog())
    if (d.name == name) return d;
  throw Error("unknown f-divergence '" + std::string(name) + "'");
}

double fgan_objective(std::span<const double> psi_p, std::span<const double> psi_q, const FDivergence& div) {
  require_nonempty(psi_p.size(), "fgan_objective");
  require_nonempty(psi_q.size(), "fgan_objective");
  double conj_sum = 0.0;
  for (double t : psi_q) conj_sum += div.conjugate_checked(t);
  return mean(psi_p) - conj_sum / static_cast<double>(psi_q.size());
}

double omega_f(std::span<const double> psi_q, std::span<const double> gradsq_q, const FDivergence& div) {
  require_same_length(psi_q.size(), gradsq_q.size(), "omega_f");
  require_nonempty(psi_q.size(), "omega_f");
  double s = 0.0;
  for (std::size_t i = 0; i < psi_q.size(); ++i) {
    if (!div.in_domain(psi_q[i]))
      throw DomainError("omega_f: statistic " + std::to_string(psi_q[i]) + " outside the domain of " + div.name);
    if (gradsq_q[i] < 0.0) throw DomainError("omega_f: negative squared gradient norm");
    s += div.conjugate_d2(psi_q[i]) * gradsq_q[i];
  }
  return s / static_cast<double>(psi_q.size());
}

double js_objective(std::span<const double> logits_p, std::span<const double> logits_q) {
  require_nonempty(logits_p.size(), "js_objective");
  require_nonempty(logits_q.size(), "js_objective");
  double sp = 0.0;
  double sq = 0.0;
  for (double l : logits_p) sp += kernels::log_sigmoid(l);
  for (double l : logits_q) sq += kernels::log_sigmoid(-l);
  const double value = sp / static_cast<double>(logits_p.size()) + sq / static_cast<double>(logits_q.size());
  if (!std::isfinite(value)) throw NonFiniteError("js_objective: non-finite logits");
  return value;
}

double omega_js(std::span<const double> logits_p, std::span<const double> gradsq_p, std::span<const double> logits_q,
                std::span<const double> gradsq_q) {
  require_same_length(logits_p.size(), gradsq_p.size(), "omega_js");
  require_same_length(logits_q.size(), gradsq_q.size(), "omega_js");
  require_nonempty(logits_p.size(), "omega_js");
  require_nonempty(logits_q.size(), "omega_js");
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < logits_p.size(); ++i) {
    if (gradsq_p[i] < 0.0) throw DomainError("omega_js: negative squared gradient norm");
    const double w = kernels::sigmoid(-logits_p[i]);
    sp += w * w * gradsq_p[i];
  }
  for (std::size_t i = 0; i < logits_q.size(); ++i) {
    if (gradsq_q[i] < 0.0) throw DomainError("omega_js: negative squared gradient norm");
    const double w = kernels::sigmoid(logits_q[i]);
    sq += w * w * gradsq_q[i];
  }
  return sp / static_cast<double>(logits_p.size()) + sq / static_cast<double>(logits_q.size());
}

diff::Var js_objective(diff::Var logits_p, diff::Var logits_q) {
  return diff::mean(diff::log_sigmoid(logits_p)) + diff::mean(diff::log_sigmoid(-logits_q));
}

diff::Var omega_js(diff::Var logits_p, diff::Var gradsq_p, diff::Var logits_q, diff::Var gradsq_q) {
  const diff::Var wp = diff::square(diff::sigmoid(-logits_p));
  const diff::Var wq = diff::square(diff::sigmoid(logits_q));
  return diff::mean(wp * gradsq_p) + diff::mean(wq * gradsq_q);
}

std::function<double(double)> optimal_statistic(Density p, Density q, const FDivergence& div) {
  return [p = std::move(p), q = std::move(q), div](double x) {
    const double ratio = p(x) / q(x);
    if (!(ratio > 0.0) || !std::isfinite(ratio))
      throw DomainError("optimal_statistic: density ratio " + std::to_string(ratio) + " outside the range of f*'");
    return div.generator_derivative(ratio);
  };
}

std::function<double(double)> optimal_js_probability(Density p, Density q) {
  return [p = std::move(p), q = std::move(q)](double x) {
    const double pv = p(x);
    const double qv = q(x);
    if (!(pv > 0.0) || !(qv > 0.0)) throw DomainError("optimal_js_probability: densities must be positive");
    return pv / (pv + qv);
  };
}

std::function<double(double)> optimal_js_logit(Density p, Density q) {
  return [p = std::move(p), q = std::move(q)](double x) {
    const double pv = p(x);
    const double qv = q(x);
    if (!(pv > 0.0) || !(qv > 0.0)) throw DomainError("optimal_js_logit: densities must be positive");
    return std::log(pv) - std::log(qv);
  };
}

Batch make_batch(Mat points, Origin origin) {
  if (points.rows() < 1) throw ShapeError("batch must contain at least one point");
  if (!kernels::all_finite(points)) throw NonFiniteError("batch contains non-finite entries");
  return Batch{std::move(points), origin};
}

}  // namespace ganreg::div
