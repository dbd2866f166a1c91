#include <gtest/gtest.h>

#include <random>

#include "stylemix/errors.hpp"
#include "stylemix/latent_tools.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::desk_generator;
using stylemix::testing::random_stack;
using stylemix::testing::adjacent_energy;
using stylemix::testing::random_sequence;

namespace {
// Dense smoothing matrix built from scratch: Gaussian weights over mirrored indices.
std::vector<StyleVector> smoothing_oracle(const std::vector<StyleVector>& seq, double sigma) {
  const int n = static_cast<int>(seq.size());
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<StyleVector> out(seq.size());
  for (int j = 0; j < n; ++j) {
    std::vector<double> acc(seq[0].values.size(), 0.0);
    double norm = 0.0;
    for (int d = -r; d <= r; ++d) {
      int i = j + d;
      while (n > 1 && (i < 0 || i >= n)) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
      }
      if (n == 1) i = 0;
      const double w = std::exp(-d * d / (2 * sigma * sigma));
      norm += w;
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * seq[i].values[k];
    }
    for (double& v : acc) v /= norm;
    out[j].values = acc;
  }
  return out;
}

}  // namespace

TEST(Smoothing, ConstantSequenceIsFixedPoint) {
  std::mt19937_64 rng(1);
  const auto one = random_sequence(rng, 1, 16)[0];
  const std::vector<StyleVector> seq(9, one);
  for (double sigma : {0.5, 1.0, 2.0, 7.0}) EXPECT_EQ(smooth_latents(seq, sigma), seq);
}

TEST(Smoothing, MatchesDenseOracle) {
  std::mt19937_64 rng(2);
  for (int n : {1, 2, 3, 6, 15}) {
    const auto seq = random_sequence(rng, n, 5);
    for (double sigma : {0.7, 2.0, 4.5}) {
      const auto got = smooth_latents(seq, sigma);
      const auto want = smoothing_oracle(seq, sigma);
      for (int j = 0; j < n; ++j) EXPECT_LT(stylemix::testing::max_abs_diff(got[j].values, want[j].values), 1e-12);
    }
  }
}

TEST(Smoothing, AdjacentEnergyNonIncreasing) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = random_sequence(rng, 4 + trial, 8);
    const auto sm = smooth_latents(seq, 1.0 + 0.1 * trial);
    EXPECT_LE(adjacent_energy(sm), adjacent_energy(seq) + 1e-12);
  }
}

TEST(Smoothing, IsLinear) {
  std::mt19937_64 rng(4);
  const auto a = random_sequence(rng, 10, 6);
  const auto b = random_sequence(rng, 10, 6);
  const double alpha = 0.3;
  const double beta = -1.7;
  std::vector<StyleVector> mix(10);
  for (int j = 0; j < 10; ++j) {
    mix[j].values.resize(6);
    for (int k = 0; k < 6; ++k) mix[j].values[k] = alpha * a[j].values[k] + beta * b[j].values[k];
  }
  const auto sa = smooth_latents(a, 2.0);
  const auto sb = smooth_latents(b, 2.0);
  const auto sm = smooth_latents(mix, 2.0);
  for (int j = 0; j < 10; ++j)
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(sm[j].values[k], alpha * sa[j].values[k] + beta * sb[j].values[k], 1e-6);
}

TEST(Smoothing, TinySigmaAndErrors) {
  std::mt19937_64 rng(5);
  const auto seq = random_sequence(rng, 5, 3);
  EXPECT_EQ(smooth_latents(seq, 1e-4), seq);
  EXPECT_THROW(smooth_latents(seq, 0.0), DomainError);
  EXPECT_THROW(smooth_latents({}, 1.0), DomainError);
  const auto k = gaussian_kernel(1.0);
  EXPECT_EQ(k.size(), 7u);
  double s = 0.0;
  for (double v : k) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(SigmaGaussian, MatchesTwoPassStatistics) {
  const auto& g = desk_generator();
  const int n = 64;
  const auto fit = fit_sigma_gaussian(g, n, 9);
  EXPECT_EQ(fit.sample_count, n);
  const auto zs = sigma_fit_latents(g, n, 9);
  std::vector<std::vector<double>> flat;
  for (const auto& z : zs) flat.push_back(g.styles_to_coeffs(expand_to_stack(g.map_latent(z), 8)).flattened());
  const auto mean = fit.mean.flattened();
  const auto var = fit.variance.flattened();
  for (std::size_t k = 0; k < mean.size(); ++k) {
    double m = 0.0;
    for (const auto& f : flat) m += f[k];
    m /= n;
    double v = 0.0;
    for (const auto& f : flat) v += (f[k] - m) * (f[k] - m);
    v = std::max(v / n, kVarianceFloor);
    EXPECT_NEAR(mean[k], m, 1e-12);
    EXPECT_NEAR(var[k], v, 1e-10 * std::max(1.0, v));
  }
}

TEST(SigmaGaussian, PriorLossOracle) {
  const auto& g = desk_generator();
  const auto fit = fit_sigma_gaussian(g, 32, 1);
  EXPECT_EQ(gaussian_prior_loss(fit.mean, fit), 0.0);
  const auto s = g.styles_to_coeffs(random_stack(g, 44));
  const auto sf = s.flattened();
  const auto mf = fit.mean.flattened();
  const auto vf = fit.variance.flattened();
  double want = 0.0;
  for (std::size_t k = 0; k < sf.size(); ++k) want += (sf[k] - mf[k]) * (sf[k] - mf[k]) / vf[k];
  want /= static_cast<double>(sf.size());
  EXPECT_NEAR(gaussian_prior_loss(s, fit), want, 1e-12 * want);

  // Gradient against central differences on a handful of coordinates.
  const auto grad = gaussian_prior_grad(s, fit).flattened();
  for (std::size_t k : {0ul, 17ul, sf.size() - 1}) {
    auto p = sf;
    auto m = sf;
    p[k] += 1e-5;
    m[k] -= 1e-5;
    const double fd = (gaussian_prior_loss(StyleCoeffs::unflatten(p, s), fit) -
                       gaussian_prior_loss(StyleCoeffs::unflatten(m, s), fit)) /
                      2e-5;
    EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SigmaGaussian, AuxRoundTripAndSampling) {
  const auto& g = stylemix::testing::tiny_generator();
  const auto fit = fit_sigma_gaussian(g, 16, 3);
  const auto back = sigma_gaussian_from_aux(sigma_gaussian_to_aux(fit));
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->sample_count, 16);
  const auto a = fit.mean.flattened();
  const auto b = back->mean.flattened();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(b[k], static_cast<double>(static_cast<float>(a[k])));
  EXPECT_FALSE(sigma_gaussian_from_aux({}).has_value());
  EXPECT_EQ(sample_sigma(fit, 4), sample_sigma(fit, 4));
  EXPECT_NE(sample_sigma(fit, 4), sample_sigma(fit, 5));
  EXPECT_THROW(fit_sigma_gaussian(g, 1, 0), DomainError);
}

TEST(PoseAlign, EndpointsRowsAndIdempotence) {
  const auto& g = desk_generator();
  const auto src = random_stack(g, 1);
  const auto ref = random_stack(g, 2);
  const int d = g.config().latent_dim;
  const int total = g.num_layers() * d;
  EXPECT_EQ(pose_align(src, ref, 0), src);
  EXPECT_EQ(pose_align(src, ref, total), ref);
  const auto two = pose_align(src, ref, 2 * d);
  for (int i = 0; i < g.num_layers(); ++i) EXPECT_EQ(two.row(i), i < 2 ? ref.row(i) : src.row(i));
  for (int k : {0, 5, d, 3 * d + 7, total}) {
    const auto once = pose_align(src, ref, k);
    EXPECT_EQ(pose_align(once, ref, k), once);
  }
  EXPECT_THROW(pose_align(src, ref, total + 1), RangeError);
  EXPECT_THROW(pose_align(src, ref, -1), RangeError);
  EXPECT_EQ(default_pose_dims(d), 4 * d);
}

TEST(Distances, MeanAdjacentDistance) {
  std::vector<StyleVector> seq{{{0.0, 0.0}}, {{3.0, 4.0}}, {{3.0, 5.0}}};
  EXPECT_DOUBLE_EQ(mean_adjacent_distance(seq), 3.0);
  EXPECT_EQ(mean_adjacent_distance({seq[0]}), 0.0);
}
