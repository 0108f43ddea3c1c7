#pragma once

#include <Eigen/Core>

#include "ganreg/kernels.hpp"
#include "ganreg/rng.hpp"

namespace ganreg::mixture {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Gaussians equally spaced on a circle in the (x, y) plane, optionally
/// embedded in 3D as (x, y, 0), rotated about `rotation_axis` and translated.
struct MixtureSpec {
  int n_modes = 7;
  double mode_std = 0.01;
  double circle_radius = 1.0;
  Vec3 rotation_axis = Vec3(1.0, -1.0, 0.0).normalized();
  double rotation_angle = 0.7853981633974483;  // pi / 4
  Vec3 translation = Vec3(1.0, 1.0, 1.0).normalized();
  bool embedded = true;

  Index ambient_dim() const { return embedded ? 3 : 2; }
  /// Throws ConfigError when the spec is unusable.
  void validate() const;
};

/// Rodrigues rotation R = I + sin(a) K + (1 - cos(a)) K^2.
Mat3 rotation_matrix(const MixtureSpec& spec);
/// Unit normal of the embedded plane, R e_z.
Vec3 plane_normal(const MixtureSpec& spec);

/// Mode centers in plane coordinates, n_modes x 2.
Mat mode_centers_planar(const MixtureSpec& spec);
/// Mode centers in ambient coordinates.
Mat mode_centers(const MixtureSpec& spec);

/// Maps plane coordinates (n x 2) to ambient points (n x 3).
Mat embed(const MixtureSpec& spec, const Mat& planar);
/// Inverse of embed for points near the plane; off_plane (optional) receives
/// the signed distance of each point from the plane.
Mat to_plane(const MixtureSpec& spec, const Mat& points, Vec* off_plane = nullptr);

/// Draws n points. Per sample: mode index, then two standard normals.
Mat sample_mixture(const MixtureSpec& spec, Index n, Rng& rng);

/// Mixture pdf in plane coordinates.
double mixture_density_planar(const MixtureSpec& spec, double u, double v);
/// Planar pdf at the projection of x; 0 when x is more than 1e-6 off the plane.
double mixture_density_inplane(const MixtureSpec& spec, const Vec3& x);

inline constexpr double kOffPlaneTolerance = 1e-6;

/// Product Gaussian kernel density estimate with a diagonal bandwidth.
struct KDEModel {
  Mat samples;
  Vec bandwidth;  // per dimension
  double factor = 0.0;

  Index dim() const { return samples.cols(); }
};

enum class BandwidthRule { Scott, Silverman };

inline constexpr double kBandwidthFloor = 1e-8;

/// Bandwidth = factor x per-dimension sample std (floored at 1e-8).
/// Scott: n^(-1/(d+4)); Silverman: (n (d+2) / 4)^(-1/(d+4)).
KDEModel kde_fit(const Mat& samples, BandwidthRule rule = BandwidthRule::Scott);
double kde_eval(const KDEModel& model, const double* x);
/// Densities at each row of x. Rows are independent, so `threads` > 1 gives
/// the same numbers.
Vec kde_eval(const KDEModel& model, const Mat& x, int threads = 1);

/// n x dim standard normal latent codes, filled row by row.
Mat latent_sample(Index n, Index dim, Rng& rng);

}  // namespace ganreg::mixture
