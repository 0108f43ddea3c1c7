#include "ganreg/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"

namespace ganreg::eval {
namespace {

Index count_real(const Mat& logits, double threshold) {
  Index c = 0;
  for (Index i = 0; i < logits.rows(); ++i)
    if (kernels::sigmoid(logits(i, 0)) > threshold) ++c;
  return c;
}

void require_logits(const Mat& logits, const char* what) {
  if (logits.rows() == 0) throw ShapeError(std::string(what) + ": empty set");
  if (logits.cols() != 1) throw ShapeError(std::string(what) + ": logits must be n x 1");
}

}  // namespace

double predicted_real_rate(const Mat& logits, double threshold) {
  require_logits(logits, "predicted_real_rate");
  return static_cast<double>(count_real(logits, threshold)) / static_cast<double>(logits.rows());
}

ConfusionMatrix confusion_from_logits(const Mat& real_logits, const Mat& fake_logits, double threshold) {
  require_logits(real_logits, "confusion_matrix (real set)");
  require_logits(fake_logits, "confusion_matrix (fake set)");
  const Index nr = real_logits.rows();
  const Index nf = fake_logits.rows();
  const Index tp = count_real(real_logits, threshold);
  const Index fp = count_real(fake_logits, threshold);
  ConfusionMatrix m;
  m.tp = static_cast<double>(tp) / static_cast<double>(nr);
  m.fn = static_cast<double>(nr - tp) / static_cast<double>(nr);
  m.fp = static_cast<double>(fp) / static_cast<double>(nf);
  m.tn = static_cast<double>(nf - fp) / static_cast<double>(nf);
  return m;
}

ConfusionMatrix confusion_matrix(const nn::MLPSpec& disc_spec, const nn::Params& disc, const Mat& real,
                                 const Mat& fake, double threshold) {
  if (real.rows() == 0 || fake.rows() == 0) throw ShapeError("confusion_matrix: empty set");
  return confusion_from_logits(nn::discriminator_forward(disc, disc_spec, real),
                               nn::discriminator_forward(disc, disc_spec, fake), threshold);
}

CoverageReport mode_coverage(const Mat& samples, const mixture::MixtureSpec& spec, double radius, double min_frac) {
  if (samples.rows() == 0) throw ShapeError("mode_coverage: empty sample set");
  if (!(radius > 0.0)) throw ConfigError("radius", "must be > 0");
  if (!(min_frac > 0.0 && min_frac < 1.0)) throw ConfigError("min_frac", "must lie in (0, 1)");

  Mat planar;
  CoverageReport r;
  if (samples.cols() == 3) {
    Vec off;
    planar = mixture::to_plane(spec, samples, &off);
    double sum = 0.0;
    for (Index i = 0; i < off.size(); ++i) {
      r.max_off_plane = std::max(r.max_off_plane, std::abs(off(i)));
      sum += std::abs(off(i));
    }
    r.mean_off_plane = sum / static_cast<double>(off.size());
  } else if (samples.cols() == 2) {
    planar = samples;
  } else {
    throw ShapeError("mode_coverage: samples must have 2 or 3 columns");
  }

  const Mat centers = mixture::mode_centers_planar(spec);
  const Index n = planar.rows();
  r.counts.assign(static_cast<std::size_t>(spec.n_modes), 0);
  r.radius = radius;
  r.total = n;
  r.threshold = min_frac * static_cast<double>(n) / spec.n_modes;
  const double r2 = radius * radius;
  for (Index i = 0; i < n; ++i) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < spec.n_modes; ++k) {
      const double du = planar(i, 0) - centers(k, 0);
      const double dv = planar(i, 1) - centers(k, 1);
      const double d2 = du * du + dv * dv;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    if (best_d2 <= r2) ++r.counts[static_cast<std::size_t>(best)];
  }
  for (Index c : r.counts)
    if (static_cast<double>(c) >= r.threshold) ++r.covered;
  return r;
}

CoverageReport mode_coverage(const Mat& samples, const mixture::MixtureSpec& spec) {
  return mode_coverage(samples, spec, kDefaultRadiusStds * spec.mode_std, kDefaultMinFrac);
}

double sample_quality(const Mat& samples, const mixture::KDEModel& reference, int threads) {
  if (samples.rows() == 0) throw ShapeError("sample_quality: empty sample set");
  const Vec dens = mixture::kde_eval(reference, samples, threads);
  double s = 0.0;
  for (Index i = 0; i < dens.size(); ++i) s += std::log(std::max(dens(i), kDensityFloor));
  return s / static_cast<double>(dens.size());
}

CrossTestReport cross_test(const Model& a, const Model& b, const Mat& real_test, Index n, Rng& rng,
                           double threshold) {
  if (n < 1) throw ShapeError("cross_test: n must be >= 1");
  if (real_test.rows() == 0) throw ShapeError("cross_test: empty real test set");
  if (a.gen_spec.input_dim != b.gen_spec.input_dim) throw ShapeError("cross_test: latent dimensions differ");

  const Mat z = mixture::latent_sample(n, a.gen_spec.input_dim, rng);
  const Mat fake_a = nn::generator_forward(a.gen, a.gen_spec, z);
  const Mat fake_b = nn::generator_forward(b.gen, b.gen_spec, z);

  auto row = [&](const Model& self, const Mat& own_fake, const Mat& other_fake) {
    const Mat real_logits = nn::discriminator_forward(self.disc, self.disc_spec, real_test);
    const Mat own_logits = nn::discriminator_forward(self.disc, self.disc_spec, own_fake);
    const Mat other_logits = nn::discriminator_forward(self.disc, self.disc_spec, other_fake);
    CrossTestRow r;
    r.model = self.name;
    r.own = confusion_from_logits(real_logits, own_logits, threshold);
    const ConfusionMatrix cross = confusion_from_logits(real_logits, other_logits, threshold);
    r.cross_fp = cross.fp;
    r.cross_tn = cross.tn;
    r.cross_fn = cross.fn;
    return r;
  };
  return CrossTestReport{row(a, fake_a, fake_b), row(b, fake_b, fake_a)};
}

void write_cross_test_csv(std::ostream& os, const CrossTestReport& report) {
  csv::Writer w(os, {"model", "tp", "fn", "fp", "tn", "cross_fp", "cross_fn"});
  for (const CrossTestRow* r : {&report.a, &report.b})
    w.row(r->model, r->own.tp, r->own.fn, r->own.fp, r->own.tn, r->cross_fp, r->cross_fn);
}

}  // namespace ganreg::eval
