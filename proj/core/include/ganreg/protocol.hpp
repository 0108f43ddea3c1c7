#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ganreg/kernels.hpp"
#include "ganreg/mixture.hpp"
#include "ganreg/networks.hpp"
#include "ganreg/rng.hpp"

namespace ganreg::eval {

/// Classification rates with "real" as the positive condition. Each column is
/// normalized by its true condition: tp + fn = 1 and fp + tn = 1.
struct ConfusionMatrix {
  double tp = 0.0;
  double fn = 0.0;
  double fp = 0.0;
  double tn = 0.0;
};

/// Predicted real iff sigmoid(logit) > threshold.
ConfusionMatrix confusion_from_logits(const Mat& real_logits, const Mat& fake_logits, double threshold = 0.5);
ConfusionMatrix confusion_matrix(const nn::MLPSpec& disc_spec, const nn::Params& disc, const Mat& real,
                                 const Mat& fake, double threshold = 0.5);

/// Fraction of logits classified as real.
double predicted_real_rate(const Mat& logits, double threshold = 0.5);

struct CoverageReport {
  std::vector<Index> counts;  // samples within radius of each mode
  int covered = 0;
  double radius = 0.0;
  double threshold = 0.0;  // minimum count for a mode to be covered
  Index total = 0;
  double max_off_plane = 0.0;
  double mean_off_plane = 0.0;
};

inline constexpr double kDefaultRadiusStds = 5.0;
inline constexpr double kDefaultMinFrac = 0.1;

/// Counts samples whose in-plane distance to a mode center is below `radius`
/// (nearest mode only). A mode is covered when its count reaches
/// min_frac * n / n_modes.
CoverageReport mode_coverage(const Mat& samples, const mixture::MixtureSpec& spec, double radius, double min_frac);
/// Defaults: radius 5 mode_std, min_frac 0.1.
CoverageReport mode_coverage(const Mat& samples, const mixture::MixtureSpec& spec);

inline constexpr double kDensityFloor = 1e-12;

/// Mean of ln max(kde(x), 1e-12) over the samples.
double sample_quality(const Mat& samples, const mixture::KDEModel& reference, int threads = 1);

struct Model {
  std::string name;
  nn::MLPSpec gen_spec;
  nn::Params gen;
  nn::MLPSpec disc_spec;
  nn::Params disc;
};

struct CrossTestRow {
  std::string model;
  ConfusionMatrix own;
  double cross_fp = 0.0;  // the other model's fakes classified real by this discriminator
  double cross_tn = 0.0;  // 1 - cross_fp
  double cross_fn = 0.0;  // real test samples classified fake by this discriminator
};

struct CrossTestReport {
  CrossTestRow a;
  CrossTestRow b;
};

/// Draws one set of n latent codes, generates fakes with both generators and
/// classifies every fake set with both discriminators.
CrossTestReport cross_test(const Model& a, const Model& b, const Mat& real_test, Index n, Rng& rng,
                           double threshold = 0.5);

void write_cross_test_csv(std::ostream& os, const CrossTestReport& report);

}  // namespace ganreg::eval
