#include "ganreg/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "ganreg/error.hpp"

namespace ganreg::mixture {

void MixtureSpec::validate() const {
  if (n_modes < 1) throw ConfigError("n_modes", "must be >= 1");
  if (!(mode_std > 0.0)) throw ConfigError("mode_std", "must be > 0");
  if (!(circle_radius >= 0.0)) throw ConfigError("circle_radius", "must be >= 0");
  if (std::abs(rotation_axis.norm() - 1.0) > 1e-12) throw ConfigError("rotation_axis", "must be unit-norm");
}

Mat3 rotation_matrix(const MixtureSpec& spec) {
  const Vec3& k = spec.rotation_axis;
  Mat3 K;
  K << 0.0, -k.z(), k.y(),
       k.z(), 0.0, -k.x(),
       -k.y(), k.x(), 0.0;
  const double s = std::sin(spec.rotation_angle);
  const double c = std::cos(spec.rotation_angle);
  return Mat3::Identity() + s * K + (1.0 - c) * (K * K);
}

Vec3 plane_normal(const MixtureSpec& spec) { return rotation_matrix(spec).col(2); }

Mat mode_centers_planar(const MixtureSpec& spec) {
  Mat c(spec.n_modes, 2);
  for (int k = 0; k < spec.n_modes; ++k) {
    const double a = 2.0 * std::numbers::pi * k / spec.n_modes;
    c(k, 0) = spec.circle_radius * std::cos(a);
    c(k, 1) = spec.circle_radius * std::sin(a);
  }
  return c;
}

Mat mode_centers(const MixtureSpec& spec) {
  const Mat planar = mode_centers_planar(spec);
  return spec.embedded ? embed(spec, planar) : planar;
}

Mat embed(const MixtureSpec& spec, const Mat& planar) {
  if (planar.cols() != 2) throw ShapeError("embed: expected n x 2 plane coordinates");
  const Mat3 r = rotation_matrix(spec);
  const Vec3& t = spec.translation;
  Mat out(planar.rows(), 3);
  for (Index i = 0; i < planar.rows(); ++i) {
    const double u = planar(i, 0);
    const double v = planar(i, 1);
    for (int j = 0; j < 3; ++j) out(i, j) = (r(j, 0) * u + r(j, 1) * v) + t(j);
  }
  return out;
}

Mat to_plane(const MixtureSpec& spec, const Mat& points, Vec* off_plane) {
  if (points.cols() != 3) throw ShapeError("to_plane: expected n x 3 points");
  const Mat3 r = rotation_matrix(spec);
  const Vec3& t = spec.translation;
  Mat out(points.rows(), 2);
  if (off_plane) off_plane->resize(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    const Vec3 d(points(i, 0) - t(0), points(i, 1) - t(1), points(i, 2) - t(2));
    out(i, 0) = r.col(0).dot(d);
    out(i, 1) = r.col(1).dot(d);
    if (off_plane) (*off_plane)(i) = r.col(2).dot(d);
  }
  return out;
}

Mat sample_mixture(const MixtureSpec& spec, Index n, Rng& rng) {
  if (n < 1) throw ShapeError("sample_mixture: n must be >= 1");
  const Mat centers = mode_centers_planar(spec);
  Mat planar(n, 2);
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(spec.n_modes)));
    const double e0 = rng.normal();
    const double e1 = rng.normal();
    planar(i, 0) = centers(k, 0) + spec.mode_std * e0;
    planar(i, 1) = centers(k, 1) + spec.mode_std * e1;
  }
  return spec.embedded ? embed(spec, planar) : planar;
}

double mixture_density_planar(const MixtureSpec& spec, double u, double v) {
  const Mat centers = mode_centers_planar(spec);
  const double var = spec.mode_std * spec.mode_std;
  const double norm = 1.0 / (2.0 * std::numbers::pi * var);
  double s = 0.0;
  for (int k = 0; k < spec.n_modes; ++k) {
    const double du = u - centers(k, 0);
    const double dv = v - centers(k, 1);
    s += norm * std::exp(-0.5 * (du * du + dv * dv) / var);
  }
  return s / spec.n_modes;
}

double mixture_density_inplane(const MixtureSpec& spec, const Vec3& x) {
  Mat p(1, 3);
  p << x(0), x(1), x(2);
  Vec off;
  const Mat q = to_plane(spec, p, &off);
  if (std::abs(off(0)) > kOffPlaneTolerance) return 0.0;
  return mixture_density_planar(spec, q(0, 0), q(0, 1));
}

KDEModel kde_fit(const Mat& samples, BandwidthRule rule) {
  const Index n = samples.rows();
  const Index d = samples.cols();
  if (n < 2) throw ShapeError("kde_fit: at least two samples are required");
  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  KDEModel m;
  m.samples = samples;
  m.factor = rule == BandwidthRule::Scott ? std::pow(nd, -1.0 / (dd + 4.0))
                                          : std::pow(nd * (dd + 2.0) / 4.0, -1.0 / (dd + 4.0));
  m.bandwidth.resize(d);
  for (Index j = 0; j < d; ++j) {
    double mean = 0.0;
    for (Index i = 0; i < n; ++i) mean += samples(i, j);
    mean /= nd;
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double e = samples(i, j) - mean;
      ss += e * e;
    }
    const double sd = std::sqrt(ss / (nd - 1.0));
    m.bandwidth(j) = std::max(m.factor * sd, kBandwidthFloor);
  }
  return m;
}

double kde_eval(const KDEModel& model, const double* x) {
  const Index n = model.samples.rows();
  const Index d = model.dim();
  double log_norm = 0.0;
  for (Index j = 0; j < d; ++j) log_norm -= std::log(model.bandwidth(j)) + 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> inv_h(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) inv_h[static_cast<std::size_t>(j)] = 1.0 / model.bandwidth(j);
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double* row = model.samples.data() + i * d;
    double q = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double z = (x[j] - row[j]) * inv_h[static_cast<std::size_t>(j)];
      q += z * z;
    }
    s += std::exp(log_norm - 0.5 * q);
  }
  return s / static_cast<double>(n);
}

Vec kde_eval(const KDEModel& model, const Mat& x, int threads) {
  if (x.cols() != model.dim()) throw ShapeError("kde_eval: dimension mismatch");
  Vec out(x.rows());
  auto work = [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) out(i) = kde_eval(model, x.data() + i * x.cols());
  };
  const Index n = x.rows();
  if (threads <= 1 || n < 2) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const Index chunk = (n + threads - 1) / threads;
  for (Index b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
  for (auto& t : pool) t.join();
  return out;
}

Mat latent_sample(Index n, Index dim, Rng& rng) {
  if (dim < 1) throw ShapeError("latent_sample: dim must be >= 1");
  Mat z(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) z(i, j) = rng.normal();
  return z;
}

}  // namespace ganreg::mixture
