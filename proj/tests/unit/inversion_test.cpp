#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "stylemix/errors.hpp"
#include "stylemix/inversion.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::tiny_generator;

namespace {

double flat_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(PyramidMse, HandComputedFourByFour) {
  // Channel c holds (c + 1) times the listed 4x4 grid, so every scale term scales by 1, 4, 9 per channel.
  const double ga[16] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  const double gb[16] = {0, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 20};
  Image a(4, 4), b(4, 4);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 16; ++i) {
      a.at(c, i / 4, i % 4) = ga[i] * (c + 1);
      b.at(c, i / 4, i % 4) = gb[i] * (c + 1);
    }
  // Per channel unit grid: a - b is +1 at (0,0) and -4 at (3,3).
  // Scale 0: (1 + 16) / 16.  Scale 1 (2x2 means): diffs 1/4 and -1 -> (1/16 + 1) / 4.
  // Scale 2 (1x1 mean): diff (1 - 4) / 16 -> 9 / 256.
  const double per_unit = 17.0 / 16.0 + (1.0 / 16.0 + 1.0) / 4.0 + 9.0 / 256.0;
  const double channel_weight = (1.0 + 4.0 + 9.0) / 3.0;
  PyramidMseLoss loss;
  EXPECT_NEAR(loss.value(a, b), per_unit * channel_weight, 1e-12);
  EXPECT_EQ(loss.value(a, a), 0.0);
  EXPECT_EQ(loss.name(), "pyramid-mse");
}

TEST(PyramidMse, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Image a(stylemix::testing::random_tensor(rng, 1, 3, 6, 6));
  const Image b(stylemix::testing::random_tensor(rng, 1, 3, 6, 6));
  PyramidMseLoss loss;
  Tensor4 g;
  const double v = loss.value_and_grad(a, b, g);
  EXPECT_DOUBLE_EQ(v, loss.value(a, b));
  for (int idx : {0, 7, 50, 107}) {
    Image p = a, m = a;
    p.tensor().values()[idx] += 1e-6;
    m.tensor().values()[idx] -= 1e-6;
    EXPECT_NEAR(g.values()[idx], (loss.value(p, b) - loss.value(m, b)) / 2e-6, 1e-7);
  }
}

TEST(PerceptualProvider, RegistryAndNull) {
  EXPECT_EQ(make_perceptual_loss("pyramid-mse")->name(), "pyramid-mse");
  EXPECT_THROW(make_perceptual_loss("vgg"), ConfigError);
  const Image a(2, 2);
  EXPECT_THROW(perceptual_loss(nullptr, a, a), ConfigError);
  EXPECT_THROW(PyramidMseLoss(0), ConfigError);
}

TEST(InversionConfig, DefaultsAndValidation) {
  const InversionConfig cfg;
  EXPECT_EQ(cfg.steps, 3000);
  EXPECT_EQ(cfg.step_size, 0.01);
  EXPECT_EQ(cfg.prior_weight, 0.1);
  EXPECT_NO_THROW(cfg.validate());
  InversionConfig bad;
  bad.step_size = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = InversionConfig{};
  bad.mse_weight = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Inversion, AnalyticGradientMatchesFiniteDifferences) {
  const auto& g = tiny_generator();
  const auto fit = fit_sigma_gaussian(g, 64, 2);
  const auto target = g.synthesize(stylemix::testing::random_stack(g, 9)).image;
  const auto sigma = sample_sigma(fit, 5);
  InversionConfig cfg;
  PyramidMseLoss perceptual;
  StyleCoeffs grad;
  inversion_objective(g, sigma, target, fit, cfg, perceptual, &grad);
  const auto analytic = grad.flattened();
  const auto x = sigma.flattened();
  std::vector<double> fd(x.size());
  const double eps = 1e-5;
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto p = x, m = x;
    p[k] += eps;
    m[k] -= eps;
    fd[k] = (inversion_objective(g, StyleCoeffs::unflatten(p, sigma), target, fit, cfg, perceptual, nullptr).total -
             inversion_objective(g, StyleCoeffs::unflatten(m, sigma), target, fit, cfg, perceptual, nullptr).total) /
            (2 * eps);
  }
  std::vector<double> diff(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) diff[k] = analytic[k] - fd[k];
  EXPECT_LT(flat_norm(diff) / flat_norm(fd), 1e-3);
}

TEST(Inversion, TraceShapeAndBestSoFar) {
  const auto& g = tiny_generator();
  const auto fit = fit_sigma_gaussian(g, 64, 2);
  const auto target = g.synthesize(stylemix::testing::random_stack(g, 9)).image;
  InversionConfig cfg;
  cfg.steps = 40;
  cfg.step_size = 0.05;
  PyramidMseLoss perceptual;
  const auto res = invert(g, target, fit, cfg, perceptual);
  ASSERT_EQ(res.loss_trace.size(), 41u);
  double best = res.loss_trace.front().total;
  for (std::size_t t = 0; t < res.loss_trace.size(); ++t) {
    EXPECT_EQ(res.loss_trace[t].step, static_cast<int>(t));
    const double next = std::min(best, res.loss_trace[t].total);
    EXPECT_LE(next, best);
    best = next;
  }
  EXPECT_EQ(res.loss_trace[res.best_step].total, best);
  EXPECT_LT(best, res.loss_trace.front().total);
  EXPECT_TRUE(bitwise_equal(res.final_image, g.synthesize(res.sigma).image));
  EXPECT_EQ(res.loss_trace.front().prior, 0.0);

  const auto again = invert(g, target, fit, cfg, perceptual);
  EXPECT_EQ(again.sigma, res.sigma);

  const auto csv = loss_trace_csv(res.loss_trace);
  EXPECT_EQ(csv.rfind("step,total,mse,perceptual,prior\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 42);
}

TEST(Inversion, NonFiniteLossCarriesTrace) {
  const auto& g = tiny_generator();
  const auto fit = fit_sigma_gaussian(g, 16, 2);
  Image target(g.output_resolution(), g.output_resolution());
  target.at(0, 0, 0) = std::numeric_limits<double>::infinity();
  InversionConfig cfg;
  cfg.steps = 3;
  try {
    invert(g, target, fit, cfg, PyramidMseLoss{});
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.trace().size(), 1u);
  }
}

TEST(Inversion, RejectsMismatchedTarget) {
  const auto& g = tiny_generator();
  const auto fit = fit_sigma_gaussian(g, 16, 2);
  InversionConfig cfg;
  cfg.steps = 1;
  EXPECT_THROW(invert(g, Image(3, 3), fit, cfg, PyramidMseLoss{}), DomainError);
}
