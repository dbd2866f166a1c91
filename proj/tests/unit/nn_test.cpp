#include <gtest/gtest.h>

#include <random>

#include "stylemix/nn.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::random_tensor;

namespace {

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

// Direct definition: y[o,y,x] = sum_c sum_k w[o,c,ky,kx] * x[c, y+ky-p, x+kx-p], zero outside.
Tensor4 naive_conv(const Tensor4& x, const std::vector<double>& w, int cout, int k) {
  const int p = k / 2;
  Tensor4 y(x.batch(), cout, x.height(), x.width());
  for (int b = 0; b < x.batch(); ++b)
    for (int o = 0; o < cout; ++o)
      for (int yy = 0; yy < x.height(); ++yy)
        for (int xx = 0; xx < x.width(); ++xx) {
          double acc = 0.0;
          for (int c = 0; c < x.channels(); ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = yy + ky - p;
                const int sx = xx + kx - p;
                if (sy < 0 || sy >= x.height() || sx < 0 || sx >= x.width()) continue;
                acc += w[((o * x.channels() + c) * k + ky) * k + kx] * x.at(b, c, sy, sx);
              }
          y.at(b, o, yy, xx) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv2d, MatchesDirectSummation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int cin = 1 + trial % 3;
    const int cout = 1 + (trial + 1) % 4;
    const int k = trial % 2 == 0 ? 3 : 1;
    const Tensor4 x = random_tensor(rng, 2, cin, 3 + trial % 4, 2 + trial % 5);
    const Tensor4 wt = random_tensor(rng, 1, 1, 1, cout * cin * k * k);
    const std::vector<double> w(wt.values().begin(), wt.values().end());
    const Tensor4 got = nn::conv2d(x, w, cout, k);
    const Tensor4 want = naive_conv(x, w, cout, k);
    EXPECT_LT(stylemix::testing::max_abs_diff(got.values(), want.values()), 1e-12);
  }
}

TEST(Conv2d, GradientsAreAdjoints) {
  std::mt19937_64 rng(5);
  const Tensor4 x = random_tensor(rng, 1, 3, 5, 6);
  const Tensor4 wt = random_tensor(rng, 1, 1, 1, 4 * 3 * 9);
  const std::vector<double> w(wt.values().begin(), wt.values().end());
  const Tensor4 dy = random_tensor(rng, 1, 4, 5, 6);

  // <conv(x), dy> = <x, conv^T(dy)>
  const Tensor4 dx = nn::conv2d_grad_input(dy, w, 3, 3);
  EXPECT_NEAR(dot(nn::conv2d(x, w, 4, 3), dy), dot(x, dx), 1e-9);

  // <conv_w(x), dy> is linear in w, so its gradient is the weight adjoint.
  std::vector<double> dw(w.size(), 0.0);
  nn::conv2d_grad_weights(x, dy, 3, dw);
  const Tensor4 dwt = random_tensor(rng, 1, 1, 1, static_cast<int>(w.size()));
  const std::vector<double> v(dwt.values().begin(), dwt.values().end());
  double lhs = dot(nn::conv2d(x, v, 4, 3), dy);
  double rhs = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) rhs += v[i] * dw[i];
  EXPECT_NEAR(lhs, rhs, 1e-9);
}

TEST(Resampling, UpsampleAndPoolAdjoints) {
  std::mt19937_64 rng(9);
  const Tensor4 x = random_tensor(rng, 1, 2, 3, 4);
  const Tensor4 u = nn::upsample_nearest2x(x);
  ASSERT_EQ(u.height(), 6);
  ASSERT_EQ(u.width(), 8);
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 8; ++xx) EXPECT_EQ(u.at(0, 1, y, xx), x.at(0, 1, y / 2, xx / 2));
  const Tensor4 du = random_tensor(rng, 1, 2, 6, 8);
  EXPECT_NEAR(dot(u, du), dot(x, nn::upsample_nearest2x_grad(du)), 1e-12);

  const Tensor4 big = random_tensor(rng, 1, 2, 5, 7);
  const Tensor4 p = nn::avg_pool2x(big);
  ASSERT_EQ(p.height(), 2);
  ASSERT_EQ(p.width(), 3);
  EXPECT_DOUBLE_EQ(p.at(0, 0, 1, 2),
                   (big.at(0, 0, 2, 4) + big.at(0, 0, 2, 5) + big.at(0, 0, 3, 4) + big.at(0, 0, 3, 5)) / 4.0);
  const Tensor4 dp = random_tensor(rng, 1, 2, 2, 3);
  EXPECT_NEAR(dot(p, dp), dot(big, nn::avg_pool2x_grad(dp, 5, 7)), 1e-12);
}

TEST(Activation, LeakyReluWithGain) {
  Tensor4 t(1, 1, 1, 3);
  t.values()[0] = -2.0;
  t.values()[1] = 0.0;
  t.values()[2] = 3.0;
  const Tensor4 pre = t;
  nn::leaky_relu_inplace(t, 2.0);
  EXPECT_DOUBLE_EQ(t.values()[0], -0.8);
  EXPECT_DOUBLE_EQ(t.values()[1], 0.0);
  EXPECT_DOUBLE_EQ(t.values()[2], 6.0);
  Tensor4 g(1, 1, 1, 3, 1.0);
  nn::leaky_relu_grad_inplace(pre, g, 2.0);
  EXPECT_DOUBLE_EQ(g.values()[0], 0.4);
  EXPECT_DOUBLE_EQ(g.values()[2], 2.0);
}

TEST(Activation, SoftplusIsStable) {
  EXPECT_NEAR(nn::softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(nn::softplus(100.0), 100.0);
  EXPECT_GT(nn::softplus(-100.0), 0.0);
  EXPECT_NEAR(nn::sigmoid(0.0), 0.5, 1e-15);
}
