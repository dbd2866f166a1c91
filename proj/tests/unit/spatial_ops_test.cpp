#include <gtest/gtest.h>

#include <random>

#include "stylemix/errors.hpp"
#include "stylemix/spatial_ops.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace stylemix;
using namespace stylemix::testing;

TEST(PadFeatures, MatchesIndexOracleAllModes) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(2, 7);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = dim(rng);
    const int w = dim(rng);
    const FeatureMap f{2, random_tensor(rng, 1, 3, h, w)};
    for (PadMode mode : {PadMode::replicate, PadMode::reflect, PadMode::circular, PadMode::zero}) {
      std::uniform_int_distribution<int> ah(0, mode == PadMode::reflect ? h - 1 : 2 * h);
      std::uniform_int_distribution<int> aw(0, mode == PadMode::reflect ? w - 1 : 2 * w);
      const PadSpec spec{mode, aw(rng), aw(rng), ah(rng), ah(rng)};
      const auto got = pad_features(f, spec);
      EXPECT_EQ(got.layer_index, 2);
      EXPECT_TRUE(bitwise_equal(got.data, oracle_pad(f.data, spec))) << to_string(mode) << " trial " << trial;
    }
  }
}

TEST(PadFeatures, InteriorIsCopiedExactly) {
  std::mt19937_64 rng(1);
  const auto t = random_tensor(rng, 1, 2, 4, 5);
  const auto p = pad_tensor(t, PadSpec{PadMode::circular, 3, 1, 2, 2});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_EQ(p.at(0, 1, y + 2, x + 3), t.at(0, 1, y, x));
}

TEST(PadFeatures, RejectsBadAmounts) {
  const Tensor4 t(1, 1, 4, 4);
  EXPECT_THROW(pad_tensor(t, PadSpec{PadMode::reflect, 4, 0, 0, 0}), RangeError);
  EXPECT_THROW(pad_tensor(t, PadSpec{PadMode::zero, -1, 0, 0, 0}), RangeError);
  EXPECT_NO_THROW(pad_tensor(t, PadSpec{PadMode::replicate, 9, 0, 0, 0}));
  EXPECT_THROW(pad_mode_from_string("mirror"), DomainError);
}

TEST(ResizeFeatures, NearestMatchesOracle) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_tensor(rng, 1, 2, dim(rng), dim(rng));
    const int oh = dim(rng) + 1;
    const int ow = dim(rng) + 1;
    ResizeSpec spec;
    spec.target = std::make_pair(oh, ow);
    spec.method = ResizeMethod::nearest;
    const auto got = resize_features(FeatureMap{1, t}, spec);
    EXPECT_TRUE(bitwise_equal(got.data, oracle_nearest(t, oh, ow))) << trial;
  }
}

TEST(ResizeFeatures, BilinearMatchesOracle) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_tensor(rng, 1, 2, dim(rng), dim(rng));
    const int oh = dim(rng) + 1;
    const int ow = dim(rng) + 1;
    ResizeSpec spec;
    spec.target = std::make_pair(oh, ow);
    const auto got = resize_features(FeatureMap{1, t}, spec);
    EXPECT_LT(stylemix::testing::max_abs_diff(got.data.values(), oracle_bilinear(t, oh, ow).values()), 1e-6)
        << trial;
  }
}

TEST(ResizeFeatures, ScaleAndIdentity) {
  std::mt19937_64 rng(2);
  const auto t = random_tensor(rng, 1, 1, 4, 6);
  ResizeSpec spec;
  spec.scale_num = 3;
  spec.scale_den = 2;
  const auto r = resize_features(FeatureMap{0, t}, spec);
  EXPECT_EQ(r.data.height(), 6);
  EXPECT_EQ(r.data.width(), 9);
  spec.scale_num = 1;
  spec.scale_den = 1;
  EXPECT_TRUE(bitwise_equal(resize_features(FeatureMap{0, t}, spec).data, t));
  spec.scale_num = 0;
  EXPECT_THROW(resize_features(FeatureMap{0, t}, spec), RangeError);
}

TEST(ResizeFeatures, ConstantStaysConstant) {
  const Tensor4 t(1, 1, 3, 5, 0.3);
  const auto r = resize_tensor(t, 7, 11, ResizeMethod::bilinear);
  for (double v : r.values()) EXPECT_EQ(v, 0.3);
  const Plane p(2, 2, 1.0);
  for (double v : resize_plane(p, 9, 9).data) EXPECT_EQ(v, 1.0);
}

TEST(FullyConvolutional, ReflectPaddingLayerTwoDoublesWidth) {
  const auto& g = stylemix::testing::desk_generator();
  const auto s = stylemix::testing::random_stack(g, 31);
  const int w2 = g.config().layer_resolution(kDefaultSpatialLayer);
  HookSet hooks;
  hooks.transform = [&](int layer, Tensor4& f) {
    if (layer == kDefaultSpatialLayer) f = pad_tensor(f, PadSpec{PadMode::reflect, w2 / 2, w2 / 2, 0, 0});
  };
  const auto img = g.synthesize(s, hooks).image;
  EXPECT_EQ(img.height(), g.output_resolution());
  EXPECT_EQ(img.width(), 2 * g.output_resolution());
}
