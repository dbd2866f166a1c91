#include <gtest/gtest.h>

#include <random>

#include "stylemix/blend.hpp"
#include "stylemix/errors.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::desk_generator;
using stylemix::testing::random_stack;
using stylemix::testing::random_tensor;

namespace {

AlphaMask random_mask(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane p(h, w);
  for (double& v : p.data) v = u(rng);
  return AlphaMask(p);
}

BlendSpec spec_with(std::set<int> layers, AlphaMask mask, BlendMode mode = BlendMode::two_image) {
  BlendSpec s;
  s.layer_set = std::move(layers);
  s.mask = std::move(mask);
  s.mode = mode;
  return s;
}

}  // namespace

TEST(BlendValue, EndpointsAndBounds) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    const double y = n(rng);
    const double a = u(rng);
    EXPECT_EQ(blend_value(x, y, 0.0), x);
    EXPECT_EQ(blend_value(x, y, 1.0), y);
    EXPECT_EQ(blend_value(x, x, a), x);
    const double v = blend_value(x, y, a);
    EXPECT_GE(v, std::min(x, y));
    EXPECT_LE(v, std::max(x, y));
    EXPECT_NEAR(v, (1 - a) * x + a * y, 1e-12);
  }
}

TEST(Masks, ConstructorValidatesRange) {
  EXPECT_THROW(AlphaMask(Plane(2, 2, 1.5)), RangeError);
  EXPECT_THROW(AlphaMask(Plane(2, 2, -0.1)), RangeError);
  EXPECT_NO_THROW(AlphaMask(Plane(2, 2, 1.0)));
}

TEST(Masks, LinearRampOracle) {
  const auto m = make_linear_mask(3, 11, MaskAxis::horizontal, 0.2, 0.7, ramp_exponent(RampSpeed::fast));
  for (int x = 0; x < 11; ++x) {
    const double u = x / 10.0;
    double r = (u - 0.2) / 0.5;
    r = r < 0 ? 0 : (r > 1 ? 1 : r);
    EXPECT_NEAR(m.at(1, x), r * r * r, 1e-12);
    EXPECT_EQ(m.at(0, x), m.at(2, x));
  }
  const auto v = make_linear_mask(5, 2, MaskAxis::vertical, 0.0, 1.0);
  EXPECT_EQ(v.at(0, 1), 0.0);
  EXPECT_EQ(v.at(4, 0), 1.0);
  EXPECT_THROW(make_linear_mask(3, 3, MaskAxis::horizontal, 0.5, 0.5), DomainError);
}

TEST(Masks, BoxFeatherOracle) {
  const auto m = make_box_mask(10, 10, Box{3, 3, 6, 5}, 2);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      int dx = 0;
      if (x < 3) dx = 3 - x;
      if (x > 5) dx = x - 5;
      int dy = 0;
      if (y < 3) dy = 3 - y;
      if (y > 4) dy = y - 4;
      const int d = std::max(dx, dy);
      const double want = d == 0 ? 1.0 : (d <= 2 ? 1.0 - d / 3.0 : 0.0);
      EXPECT_NEAR(m.at(y, x), want, 1e-15) << y << "," << x;
    }
  EXPECT_THROW(make_box_mask(10, 10, Box{2, 2, 2, 5}, 0), DomainError);
  EXPECT_THROW(make_box_mask(10, 10, Box{2, 2, 11, 5}, 0), RangeError);
}

TEST(BlendSpec, Validation) {
  BlendSpec s;
  s.layer_set = {0, 9};
  s.mask = AlphaMask::constant(2, 2, 0.5);
  EXPECT_THROW(s.validate(8), DomainError);
  s.layer_set = {0};
  EXPECT_NO_THROW(s.validate(8));
  s.mask.reset();
  EXPECT_THROW(s.validate(8), DomainError);
  s.mode = BlendMode::constant;
  EXPECT_THROW(s.validate(8), DomainError);
  s.constant_alpha = 1.2;
  EXPECT_THROW(s.validate(8), RangeError);
  s.constant_alpha = 0.3;
  EXPECT_NO_THROW(s.validate(8));
  EXPECT_EQ(blend_mode_from_string("cross-generator"), BlendMode::cross_generator);
  EXPECT_THROW(blend_mode_from_string("mix"), DomainError);
}

TEST(InterpolateFeatures, ConstantAlphaOracle) {
  std::mt19937_64 rng(8);
  const FeatureMap a{3, random_tensor(rng, 1, 4, 8, 8)};
  const FeatureMap b{3, random_tensor(rng, 1, 4, 8, 8)};
  const auto out = interpolate_features(a, b, AlphaMask::constant(32, 32, 0.25));
  for (std::size_t i = 0; i < out.data.size(); ++i)
    EXPECT_NEAR(out.data.values()[i], 0.75 * a.data.values()[i] + 0.25 * b.data.values()[i], 1e-12);
  EXPECT_TRUE(bitwise_equal(interpolate_features(a, a, random_mask(rng, 5, 5)).data, a.data));
  const FeatureMap c{3, random_tensor(rng, 1, 3, 8, 8)};
  EXPECT_THROW(interpolate_features(a, c, AlphaMask::constant(8, 8, 0.5)), DomainError);
}

TEST(BlendRender, EndpointIdentitiesTwoImage) {
  const auto& g = desk_generator();
  std::mt19937_64 rng(12);
  const std::vector<std::set<int>> layer_sets{all_layers(8), layers_up_to(3), {5}, {}};
  for (int pair = 0; pair < 4; ++pair) {
    const auto a = random_stack(g, 100 + pair);
    const auto b = random_stack(g, 200 + pair);
    const auto ra = g.synthesize(a).image;
    const auto rb = g.synthesize(b).image;
    for (const auto& ls : layer_sets) {
      EXPECT_TRUE(bitwise_equal(render_two_image_blend(g, a, b, spec_with(ls, AlphaMask::constant(32, 32, 0.0))), ra));
      EXPECT_TRUE(bitwise_equal(render_two_image_blend(g, a, b, spec_with(ls, AlphaMask::constant(32, 32, 1.0))), rb));
    }
    EXPECT_TRUE(bitwise_equal(render_two_image_blend(g, a, a, spec_with(all_layers(8), random_mask(rng, 32, 32))), ra));
  }
}

TEST(BlendRender, EndpointIdentitiesCrossGeneratorAndConstant) {
  const auto& ga = desk_generator();
  const auto gb = stylemix::testing::sibling_generator(ga, 41);
  const auto s = random_stack(ga, 7);
  const auto ra = ga.synthesize(s).image;
  const auto rb = gb.synthesize(s).image;
  for (const auto& ls : {all_layers(8), layers_up_to(2)}) {
    EXPECT_TRUE(bitwise_equal(
        render_cross_generator_blend(ga, gb, s, spec_with(ls, AlphaMask::constant(8, 8, 0.0), BlendMode::cross_generator)),
        ra));
    EXPECT_TRUE(bitwise_equal(
        render_cross_generator_blend(ga, gb, s, spec_with(ls, AlphaMask::constant(8, 8, 1.0), BlendMode::cross_generator)),
        rb));
    BlendSpec c;
    c.layer_set = ls;
    c.mode = BlendMode::constant;
    c.constant_alpha = 0.0;
    EXPECT_TRUE(bitwise_equal(render_cross_generator_blend(ga, gb, s, c), ra));
    c.constant_alpha = 1.0;
    EXPECT_TRUE(bitwise_equal(render_cross_generator_blend(ga, gb, s, c), rb));
  }
  auto cfg = ga.config();
  cfg.mapping_layers = 2;
  EXPECT_THROW(render_cross_generator_blend(ga, Generator(cfg), s, spec_with({0}, AlphaMask::constant(2, 2, 0.5))),
               ConfigError);
}

TEST(BlendRender, EmptyLayerSetCompositesOutputs) {
  const auto& g = desk_generator();
  const auto a = random_stack(g, 1);
  const auto b = random_stack(g, 2);
  Plane p(32, 32, 0.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 16; x < 32; ++x) p.at(y, x) = 1.0;
  const auto out = render_two_image_blend(g, a, b, spec_with({}, AlphaMask(p)));
  const auto ra = g.synthesize(a).image;
  const auto rb = g.synthesize(b).image;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y) {
      EXPECT_EQ(out.at(c, y, 3), ra.at(c, y, 3));
      EXPECT_EQ(out.at(c, y, 28), rb.at(c, y, 28));
    }
}

TEST(ShiftBlend, ZeroMaskIsIdentity) {
  std::mt19937_64 rng(13);
  const FeatureMap f{2, random_tensor(rng, 1, 5, 8, 8)};
  const auto out = shift_blend(f, AlphaMask::constant(8, 8, 0.0), ShiftSpec{2, -3});
  EXPECT_TRUE(bitwise_equal(out.data, f.data));
}

TEST(ShiftBlend, BinaryPatchIsCopiedToShiftedLocation) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> pos(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap f{2, random_tensor(rng, 1, 3, 10, 10)};
    int x0 = pos(rng), x1 = pos(rng), y0 = pos(rng), y1 = pos(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    Plane m(10, 10, 0.0);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m.at(y, x) = 1.0;
    const ShiftSpec sh{pos(rng) - 5, pos(rng) - 5};
    const auto out = shift_blend(f, AlphaMask(m), sh);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
          const int sy = y - sh.dy;
          const int sx = x - sh.dx;
          const bool from_patch = sy >= y0 && sy <= y1 && sx >= x0 && sx <= x1;
          const double want = from_patch ? f.data.at(0, c, sy, sx) : f.data.at(0, c, y, x);
          EXPECT_EQ(out.data.at(0, c, y, x), want);
        }
  }
}

TEST(ShiftBlend, RejectsShiftBeyondMap) {
  const FeatureMap f{2, Tensor4(1, 1, 4, 4)};
  EXPECT_THROW(shift_blend(f, AlphaMask::constant(4, 4, 1.0), ShiftSpec{0, 4}), RangeError);
}
