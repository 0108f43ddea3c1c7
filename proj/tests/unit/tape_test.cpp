#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "ganreg/error.hpp"
#include "ganreg/networks.hpp"
#include "ganreg/rng.hpp"
#include "ganreg/tape.hpp"
#include "reference.hpp"

using namespace ganreg;
using diff::Tape;
using diff::Var;

namespace {

Mat scalar_mat(double v) { return Mat::Constant(1, 1, v); }

Mat random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Central difference of the scalar `out` w.r.t. every entry of `v` by replaying the tape.
Mat tape_fd(Tape& tape, Var out, Var v, const Mat& at, double h) {
  Mat g(at.rows(), at.cols());
  for (Index i = 0; i < at.rows(); ++i)
    for (Index j = 0; j < at.cols(); ++j) {
      Mat p = at;
      p(i, j) += h;
      tape.evaluate({{v, p}});
      const double up = out.scalar();
      p(i, j) = at(i, j) - h;
      tape.evaluate({{v, p}});
      const double dn = out.scalar();
      g(i, j) = (up - dn) / (2.0 * h);
    }
  tape.evaluate({{v, at}});
  return g;
}

double max_rel(const Mat& a, const Mat& b, double floor = 1e-8) {
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i) m = std::max(m, oracle::rel_error(a.data()[i], b.data()[i], floor));
  return m;
}

nn::MLPSpec tanh_spec(Index in, std::vector<Index> hidden, std::uint64_t seed) {
  nn::MLPSpec s;
  s.input_dim = in;
  for (Index w : hidden) {
    s.layer_widths.push_back(w);
    s.activations.push_back(nn::Activation::Tanh);
  }
  s.layer_widths.push_back(1);
  s.activations.push_back(nn::Activation::Linear);
  s.seed = seed;
  return s;
}

nn::Params random_params(const nn::MLPSpec& spec, Rng& rng, double scale = 0.7) {
  nn::Params p(spec);
  for (double& v : p.values()) v = scale * rng.normal();
  return p;
}

}  // namespace

TEST(Tape, IdentityAndSquare) {
  Tape t;
  const Var x = t.variable(scalar_mat(3.0), "x");
  EXPECT_EQ(x.scalar(), 3.0);
  const Var y = diff::square(x);
  EXPECT_EQ(y.scalar(), 9.0);
  const auto g = t.backward(y, {x});
  EXPECT_EQ(g.value(x)(0, 0), 6.0);
}

TEST(Tape, TwoLayerTanhForwardMatchesStraightLineLoop) {
  Rng rng(17);
  nn::MLPSpec spec = tanh_spec(3, {8, 5}, 0);
  spec.layer_widths.back() = 2;
  const nn::Params p = random_params(spec, rng);
  const Mat x = random_mat(6, 3, rng);
  Tape t;
  const auto placed = nn::place_params(t, p);
  const Var out = nn::forward(placed, spec, t.variable(x));
  const auto ref = oracle::RefMlp::from_spec(spec);
  // Normwise: an output entry that nearly cancels has no meaningful elementwise relative error.
  const double scale = out.value().cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const auto y = ref.forward(p.values(), oracle::row(x, i));
    for (Index j = 0; j < 2; ++j) worst = std::max(worst, std::abs(out.value()(i, j) - y[j]) / scale);
  }
  EXPECT_LE(worst, 1e-15);
}

TEST(Tape, LinearMapGradient) {
  Tape t;
  Mat wv(3, 1);
  wv << 1.5, -2.0, 0.25;
  const Var w = t.variable(wv);
  const Var x = t.variable(Mat::Constant(1, 3, 0.5));
  const Var y = diff::matmul(x, w);
  const auto g = t.backward(y, {x});
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(g.value(x)(0, j), wv(j, 0));
}

TEST(Tape, UnreachableAndConstantGradientsAreZero) {
  Tape t;
  const Var x = t.variable(Mat::Constant(2, 2, 1.0));
  const Var unused = t.variable(Mat::Constant(3, 1, 2.0));
  const Var c = t.constant(5.0);
  const auto g = t.backward(c, {x, unused});
  EXPECT_EQ(g.size(), 2u);
  EXPECT_TRUE(g.value(x).isZero(0.0));
  EXPECT_EQ(g.value(unused).rows(), 3);
  EXPECT_TRUE(g.value(unused).isZero(0.0));
  EXPECT_TRUE(g.contains(x));
  EXPECT_FALSE(g.contains(c));
  EXPECT_THROW(g[c], Error);
}

TEST(Tape, ThreeLayerNetMatchesFiniteDifferences) {
  Rng rng(23);
  const nn::MLPSpec spec = tanh_spec(3, {7, 6}, 0);
  const nn::Params p = random_params(spec, rng);
  const Mat x = random_mat(5, 3, rng);
  Tape t;
  const auto placed = nn::place_params(t, p);
  const Var xv = t.variable(x);
  const Var out = diff::sum(nn::forward(placed, spec, xv));
  const auto vars = placed.all();
  const auto g = t.backward(out, vars);
  for (const Var& v : vars) {
    const Mat at = v.value();
    const Mat fd = tape_fd(t, out, v, at, 1e-5);
    EXPECT_LT(max_rel(g.value(v), fd), 1e-6);
  }
  EXPECT_LT(max_rel(t.backward(out, {xv}).value(xv), tape_fd(t, out, xv, x, 1e-5)), 1e-6);
}

TEST(Tape, PrimitivesMatchFiniteDifferences) {
  struct Probe {
    const char* name;
    std::function<Var(Var)> f;
    std::function<double(Rng&)> draw;
  };
  auto wide = [](Rng& r) { return 3.0 * r.normal(); };
  auto positive = [](Rng& r) { return 0.2 + 3.0 * r.uniform(); };
  auto off_zero = [](Rng& r) {
    const double v = 0.05 + 2.0 * r.uniform();
    return r.uniform() < 0.5 ? -v : v;
  };
  const std::vector<Probe> probes = {
      {"tanh", [](Var a) { return diff::tanh(a); }, wide},
      {"sigmoid", [](Var a) { return diff::sigmoid(a); }, wide},
      {"softplus", [](Var a) { return diff::softplus(a); }, wide},
      {"log_sigmoid", [](Var a) { return diff::log_sigmoid(a); }, wide},
      {"exp", [](Var a) { return diff::exp(a); }, wide},
      {"log", [](Var a) { return diff::log(a); }, positive},
      {"square", [](Var a) { return diff::square(a); }, wide},
      {"reciprocal", [](Var a) { return diff::reciprocal(a); }, off_zero},
      {"relu", [](Var a) { return diff::relu(a); }, off_zero},
      {"leaky_relu", [](Var a) { return diff::leaky_relu(a, 0.2); }, off_zero},
      {"mul", [](Var a) { return a * diff::tanh(a); }, wide},
      {"neg_scale_shift", [](Var a) { return 2.5 - (3.0 * (-a) + 1.0); }, wide},
      {"transpose_matmul", [](Var a) { return diff::matmul(diff::transpose(a), a + 1.0); }, wide},
  };
  Rng rng(31);
  for (const auto& p : probes) {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Mat x0 = scalar_mat(p.draw(rng));
      Tape t;
      const Var x = t.variable(x0);
      const Var y = diff::sum(p.f(x));
      const double ad = t.backward(y, {x}).value(x)(0, 0);
      const double fd = tape_fd(t, y, x, x0, 1e-5)(0, 0);
      worst = std::max(worst, oracle::rel_error(ad, fd));
    }
    EXPECT_LT(worst, 1e-6) << p.name;
  }
}

TEST(Tape, ReductionsAndBroadcastsMatchFiniteDifferences) {
  Rng rng(37);
  const Mat a0 = random_mat(4, 3, rng);
  Tape t;
  const Var a = t.variable(a0);
  const Var r = diff::broadcast_rows(diff::sum_rows(a), 4);
  const Var c = diff::broadcast_cols(diff::sum_cols(a), 3);
  const Var s = diff::broadcast_scalar(diff::mean(a), 4, 3);
  const Var y = diff::sum(diff::tanh(r * a) + diff::square(c) * s) + diff::sum(diff::row_sq_norm(a));
  const auto g = t.backward(y, {a});
  EXPECT_LT(max_rel(g.value(a), tape_fd(t, y, a, a0, 1e-5)), 1e-6);
}

TEST(Tape, InputGradSqNormOfLinearLogit) {
  Tape t;
  Mat wv(2, 1);
  wv << 3.0, 4.0;
  const Var w = t.variable(wv);
  const Var x = t.variable(Mat::Constant(1, 2, 0.7));
  const Var logit = diff::matmul(x, w) + 1.0;
  const Var g = diff::input_grad_sq_norm(logit, x);
  EXPECT_EQ(g.scalar(), 25.0);
  // d/dw ||w||^2 = 2w
  const auto gw = t.backward(diff::sum(g), {w});
  EXPECT_EQ(gw.value(w)(0, 0), 6.0);
  EXPECT_EQ(gw.value(w)(1, 0), 8.0);
}

TEST(Tape, InputGradSqNormOfConstantLogitIsZero) {
  Tape t;
  const Var x = t.variable(Mat::Constant(3, 2, 0.7));
  const Var logit = diff::sum_cols(x) * 0.0 + 2.0;
  EXPECT_TRUE(diff::input_grad_sq_norm(logit, x).value().isZero(0.0));
}

TEST(Tape, InputGradSqNormMatchesFiniteDifferencesOfTheLogit) {
  Rng rng(41);
  const nn::MLPSpec spec = tanh_spec(3, {9}, 0);
  const nn::Params p = random_params(spec, rng);
  const Mat x = random_mat(6, 3, rng);
  Tape t;
  const Var xv = t.variable(x);
  const Var g = diff::input_grad_sq_norm(nn::forward(nn::place_params(t, p), spec, xv), xv);
  const auto ref = oracle::RefMlp::from_spec(spec);
  for (Index i = 0; i < x.rows(); ++i) {
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& xi) { return ref.forward(p.values(), xi)[0]; }, oracle::row(x, i), 1e-5);
    double sq = 0.0;
    for (double d : fd) sq += d * d;
    EXPECT_LT(oracle::rel_error(g.value()(i, 0), sq), 1e-6);
  }
}

TEST(Tape, DoubleBackwardMatchesFiniteDifferences) {
  for (int trial = 0; trial < 6; ++trial) {
    Rng rng(50 + static_cast<std::uint64_t>(trial));
    nn::MLPSpec spec = tanh_spec(3, trial < 3 ? std::vector<Index>{10} : std::vector<Index>{6, 5}, 0);
    const bool relu = trial % 2 == 1;
    if (relu)
      for (std::size_t l = 0; l + 1 < spec.activations.size(); ++l) spec.activations[l] = nn::Activation::Relu;
    const auto ref = oracle::RefMlp::from_spec(spec);
    nn::Params p(spec);
    Mat x;
    for (;;) {
      p = random_params(spec, rng);
      x = random_mat(4, 3, rng);
      double kink = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < 4; ++i) kink = std::min(kink, ref.min_kink_distance(p.values(), oracle::row(x, i)));
      if (kink >= 1e-3) break;
    }
    Tape t;
    const auto placed = nn::place_params(t, p);
    const Var xv = t.variable(x);
    const Var pen = diff::sum(diff::input_grad_sq_norm(nn::forward(placed, spec, xv), xv));
    const auto ad = nn::flatten_grads(t.backward(pen, placed.all()), placed, p);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& th) {
          double s = 0.0;
          for (Index i = 0; i < 4; ++i)
            for (double g : ref.input_gradient(th, oracle::row(x, i))) s += g * g;
          return s;
        },
        p.values(), 1e-5);
    EXPECT_LT(oracle::max_rel_error(ad, fd), 1e-4) << "trial " << trial;
  }
}

TEST(Tape, GradientsAreDifferentiableAgain) {
  Tape t;
  const Var x = t.variable(scalar_mat(0.3));
  const Var y = diff::sum(diff::tanh(x) * x);
  const Var dy = t.backward(y, {x})[x];
  const Var d2y = t.backward(diff::sum(dy), {x})[x];
  const double th = std::tanh(0.3);
  const double s = 1.0 - th * th;
  EXPECT_NEAR(dy.scalar(), s * 0.3 + th, 1e-15);
  EXPECT_NEAR(d2y.scalar(), 2.0 * s - 2.0 * th * s * 0.3, 1e-14);
}

TEST(Tape, LinearityOfBackwardIsExact) {
  // Scale factors are powers of two, so scaling commutes with rounding. Each
  // of f and g reads x once, so the combined adjoint is a single addition.
  Rng rng(61);
  const Mat x0 = random_mat(3, 4, rng);
  auto grads = [&](double a, double b) {
    Tape t;
    const Var x = t.variable(x0);
    const Var f = diff::sum(diff::tanh(x));
    const Var g = diff::sum(diff::softplus(x));
    return Mat(t.backward(a * f + b * g, {x}).value(x));
  };
  const Mat combined = grads(2.0, -0.5);
  const Mat gf = grads(1.0, 0.0);
  const Mat gg = grads(0.0, 1.0);
  for (Index i = 0; i < combined.size(); ++i)
    EXPECT_EQ(combined.data()[i], 2.0 * gf.data()[i] + -0.5 * gg.data()[i]);
}

TEST(Tape, LinearityOfBackwardWithSharedInputs) {
  // When x is read several times the adjoint contributions are summed in tape
  // order, so only rounding-level agreement is possible.
  Rng rng(62);
  const Mat x0 = random_mat(3, 4, rng);
  auto grads = [&](double a, double b) {
    Tape t;
    const Var x = t.variable(x0);
    const Var f = diff::sum(diff::tanh(x) * x);
    const Var g = diff::sum(diff::softplus(x) * x);
    return Mat(t.backward(a * f + b * g, {x}).value(x));
  };
  const Mat combined = grads(0.3, -1.7);
  const Mat expect = 0.3 * grads(1.0, 0.0) + -1.7 * grads(0.0, 1.0);
  for (Index i = 0; i < combined.size(); ++i)
    EXPECT_NEAR(combined.data()[i], expect.data()[i], 1e-15 * (1.0 + std::abs(expect.data()[i])));
}

TEST(Tape, EvaluationIsDeterministic) {
  Rng rng(67);
  const nn::MLPSpec spec = tanh_spec(3, {16, 16}, 0);
  const nn::Params p = random_params(spec, rng);
  const Mat x = random_mat(20, 3, rng);
  auto run = [&] {
    Tape t;
    const auto placed = nn::place_params(t, p);
    const Var xv = t.variable(x);
    const Var y = diff::mean(diff::input_grad_sq_norm(nn::forward(placed, spec, xv), xv));
    return std::make_pair(y.scalar(), nn::flatten_grads(t.backward(y, placed.all()), placed, p));
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Tape, ReplayWithNewBindingsMatchesFreshRecording) {
  Tape t;
  const Var x = t.variable(1, 2, "x");
  const Var y = diff::sum(diff::square(x) + diff::exp(x));
  Mat v(1, 2);
  v << 0.5, -1.0;
  t.evaluate({{x, v}});
  Tape fresh;
  const Var fx = fresh.variable(v);
  const Var fy = diff::sum(diff::square(fx) + diff::exp(fx));
  EXPECT_EQ(y.scalar(), fy.scalar());
}

TEST(Tape, Errors) {
  {
    Tape t;
    const Var x = t.variable(1, 1, "x");
    const Var y = diff::square(x);
    EXPECT_THROW(t.evaluate(), UnboundVariableError);
    EXPECT_THROW(y.value(), UnboundVariableError);
  }
  {
    Tape t;
    const Var a = t.variable(Mat::Zero(2, 3));
    const Var b = t.variable(Mat::Zero(2, 2));
    EXPECT_THROW(a + b, ShapeError);
    EXPECT_THROW(diff::matmul(a, b), ShapeError);
    EXPECT_THROW(t.bind(a, Mat::Zero(3, 3)), ShapeError);
    EXPECT_THROW(t.backward(a, {a}), ShapeError);
    EXPECT_THROW(diff::input_grad_sq_norm(a, a), ShapeError);
  }
  {
    Tape t;
    const Var x = t.variable(scalar_mat(-1.0));
    EXPECT_THROW(diff::log(x), NonFiniteError);
    EXPECT_THROW(t.variable(scalar_mat(std::numeric_limits<double>::infinity())), NonFiniteError);
  }
  {
    Tape t1, t2;
    const Var a = t1.variable(scalar_mat(1.0));
    const Var b = t2.variable(scalar_mat(1.0));
    EXPECT_THROW(a + b, Error);
  }
}

TEST(Tape, ReluUsesTheRightDerivativeAtZero) {
  Tape t;
  const Var x = t.variable(Mat::Zero(1, 1));
  EXPECT_EQ(t.backward(diff::sum(diff::relu(x)), {x}).value(x)(0, 0), 1.0);
  EXPECT_EQ(t.backward(diff::sum(diff::leaky_relu(x, 0.2)), {x}).value(x)(0, 0), 1.0);
}
