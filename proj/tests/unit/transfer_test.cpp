#include <gtest/gtest.h>

#include "stylemix/errors.hpp"
#include "stylemix/finetune.hpp"
#include "stylemix/latent_tools.hpp"
#include "stylemix/transfer.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::desk_generator;
using stylemix::testing::random_stack;
using stylemix::testing::random_style;

namespace {

TransferRequest make_request(const Generator& g, std::uint64_t seed) {
  TransferRequest req;
  req.src_styles = random_stack(g, seed);
  req.ref_styles = random_stack(g, seed + 100);
  req.box = Box{8, 6, 20, 18};
  req.feather = 2;
  return req;
}

// Per-row mixture so the stack is not in W and pose alignment has rows to rewrite.
StyleStack mixed_stack(const Generator& g, std::uint64_t seed) {
  std::vector<StyleVector> rows;
  for (int i = 0; i < g.num_layers(); ++i) rows.push_back(random_style(g, seed * 31 + i));
  return StyleStack(rows);
}

}  // namespace

TEST(TransferRequest, DefaultLayerCutScalesFourteenLayerRule) {
  EXPECT_EQ(default_layer_cut(14), 12);
  EXPECT_EQ(default_layer_cut(8), 7);
  EXPECT_EQ(default_layer_cut(7), 6);
  EXPECT_EQ(default_layer_cut(2), 1);
  EXPECT_EQ(default_layer_cut(1), 0);
  EXPECT_THROW(default_layer_cut(0), ConfigError);
}

TEST(TransferRequest, Validation) {
  const auto& g = desk_generator();
  auto req = make_request(g, 1);
  EXPECT_NO_THROW(req.validate(g));
  req.box = Box{0, 0, 33, 10};
  EXPECT_THROW(req.validate(g), RangeError);
  req = make_request(g, 1);
  req.layer_cut = 8;
  EXPECT_THROW(req.validate(g), RangeError);
  req = make_request(g, 1);
  req.alpha_exponent = 0.5;
  EXPECT_THROW(req.validate(g), RangeError);
  req = make_request(g, 1);
  req.feather = -1;
  EXPECT_THROW(req.validate(g), RangeError);
  req = make_request(g, 1);
  req.pose_k_dims = 8 * 64 + 1;
  EXPECT_THROW(req.validate(g), RangeError);
  req = make_request(g, 1);
  req.ref_styles = StyleStack({random_style(g, 3)});
  EXPECT_THROW(req.validate(g), DomainError);
}

TEST(TransferAttributes, EmptyBoxIsSourceRender) {
  const auto& g = desk_generator();
  for (int cut : {0, 3, 7}) {
    auto req = make_request(g, 2);
    req.box = Box{};
    req.feather = 0;
    req.layer_cut = cut;
    EXPECT_TRUE(bitwise_equal(transfer_attributes(g, req), g.synthesize(req.src_styles).image)) << cut;
  }
}

TEST(TransferAttributes, IdenticalStylesGiveSourceRender) {
  const auto& g = desk_generator();
  auto req = make_request(g, 3);
  req.ref_styles = req.src_styles;
  for (const Box& box : {Box{0, 0, 32, 32}, Box{4, 4, 9, 30}, Box{10, 10, 11, 11}}) {
    req.box = box;
    EXPECT_TRUE(bitwise_equal(transfer_attributes(g, req), g.synthesize(req.src_styles).image));
  }
}

TEST(TransferAttributes, FullFrameAllLayersIsAlignedReference) {
  const auto& g = desk_generator();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TransferRequest req;
    req.src_styles = mixed_stack(g, seed);
    req.ref_styles = mixed_stack(g, seed + 50);
    req.box = Box{0, 0, 32, 32};
    req.feather = 0;
    req.layer_cut = g.num_layers() - 1;
    req.alpha_exponent = 2.5;
    const auto aligned = pose_align(req.ref_styles, req.src_styles, default_pose_dims(64));
    EXPECT_TRUE(bitwise_equal(transfer_attributes(g, req), g.synthesize(aligned).image));
  }
}

TEST(TransferAttributes, PoseAlignmentRewritesOnlyReference) {
  const auto& g = desk_generator();
  TransferRequest req;
  req.src_styles = mixed_stack(g, 4);
  req.ref_styles = mixed_stack(g, 5);
  req.box = Box{2, 2, 12, 12};
  req.pose_k_dims = 2 * 64 + 10;
  const auto src_before = req.src_styles;
  const auto aligned = aligned_reference(g, req);
  const auto a = aligned.flattened();
  const auto s = req.src_styles.flattened();
  const auto r = req.ref_styles.flattened();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], k < 138 ? s[k] : r[k]);
  transfer_attributes(g, req);
  EXPECT_EQ(req.src_styles, src_before);
}

TEST(TransferAttributes, MaskIsFeatheredBoxToThePower) {
  const auto& g = desk_generator();
  auto req = make_request(g, 6);
  req.alpha_exponent = 3.0;
  const auto mask = transfer_mask(g, req);
  const auto box = make_box_mask(32, 32, req.box, req.feather);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) EXPECT_DOUBLE_EQ(mask.at(y, x), std::pow(box.at(y, x), 3.0));
}

TEST(Variations, EmptyRecipeIsPlainRender) {
  const auto& g = desk_generator();
  const auto w = random_style(g, 7);
  EXPECT_TRUE(bitwise_equal(single_image_variations(g, w, {}), g.synthesize(expand_to_stack(w, 8)).image));
}

TEST(Variations, ReflectPadLeftWidensByHalfWithMirroredMargin) {
  const auto& g = desk_generator();
  const auto w = random_style(g, 8);
  const int w2 = g.config().layer_resolution(2);
  const std::vector<VariationStep> recipe{PadStep{2, PadSpec{PadMode::reflect, w2 / 2, 0, 0, 0}}};
  const auto img = single_image_variations(g, w, recipe);
  EXPECT_EQ(img.height(), 32);
  EXPECT_EQ(img.width(), 48);

  HookSet capture;
  capture.capture = {2};
  const auto f2 = g.synthesize(expand_to_stack(w, 8), capture).captured.at(2).data;
  Tensor4 padded = f2;
  apply_variation_step(recipe[0], padded);
  ASSERT_EQ(padded.width(), w2 + w2 / 2);
  for (int c = 0; c < f2.channels(); ++c)
    for (int y = 0; y < f2.height(); ++y) {
      for (int j = 0; j < w2 / 2; ++j) EXPECT_EQ(padded.at(0, c, y, j), f2.at(0, c, y, w2 / 2 - j));
      for (int x = 0; x < w2; ++x) EXPECT_EQ(padded.at(0, c, y, x + w2 / 2), f2.at(0, c, y, x));
    }

  HookSet inject;
  inject.inject[2] = FeatureMap{2, padded};
  EXPECT_TRUE(bitwise_equal(img, g.synthesize(expand_to_stack(w, 8), inject).image));
}

TEST(Variations, DeterministicAndJsonRoundTrip) {
  const auto& g = desk_generator();
  const auto w = random_style(g, 9);
  const auto recipe = recipe_from_json(R"([
    {"op": "shift_blend", "layer": 2, "dx": 3, "dy": -1,
     "mask": {"box": [4, 4, 16, 16], "feather": 2, "height": 32, "width": 32}},
    {"op": "pad", "layer": 2, "mode": "circular", "right": 4},
    {"op": "resize", "layer": 4, "height": 20, "width": 24, "method": "nearest"}
  ])");
  ASSERT_EQ(recipe.size(), 3u);
  const auto a = single_image_variations(g, w, recipe);
  EXPECT_TRUE(bitwise_equal(a, single_image_variations(g, w, recipe)));
  EXPECT_EQ(a.height(), 40);
  EXPECT_EQ(a.width(), 48);
  const auto back = recipe_from_json(recipe_to_json(recipe));
  EXPECT_TRUE(bitwise_equal(a, single_image_variations(g, w, back)));
  EXPECT_FALSE(bitwise_equal(a, g.synthesize(expand_to_stack(w, 8)).image));
}

TEST(Variations, RejectsBadRecipes) {
  const auto& g = desk_generator();
  const auto w = random_style(g, 1);
  EXPECT_THROW(single_image_variations(g, w, {PadStep{8, PadSpec{}}}), RangeError);
  EXPECT_THROW(recipe_from_json(R"([{"op": "rotate"}])"), DomainError);
  EXPECT_THROW(recipe_from_json(R"({"op": "pad"})"), DomainError);
  EXPECT_THROW(recipe_from_json(R"([{"op": "shift_blend", "mask": {"constant": 0.5}}])"), DomainError);
  EXPECT_THROW(recipe_from_json("not json"), DomainError);
}

TEST(TranslationSweep, EndpointsAndMonotoneDistanceForFinetunedPair) {
  const auto& a = desk_generator();
  for (std::uint64_t k = 0; k < 4; ++k) {
    FinetuneConfig cfg;
    cfg.steps = 4;
    cfg.seed = k;
    const auto b = finetune_frozen(a, toy_image_dataset(4, 32, 1000 + k), FreezeSpec{}, cfg).generator;
    const auto s = random_stack(a, 40 + k);
    const auto imgs = continuous_translation_sweep(a, b, s, {0.0, 0.5, 1.0});
    ASSERT_EQ(imgs.size(), 3u);
    const auto ra = a.synthesize(s).image;
    EXPECT_TRUE(bitwise_equal(imgs[0], ra));
    EXPECT_TRUE(bitwise_equal(imgs[2], b.synthesize(s).image));
    EXPECT_LE(squared_distance(imgs[0], ra), squared_distance(imgs[1], ra));
    EXPECT_LE(squared_distance(imgs[1], ra), squared_distance(imgs[2], ra));
  }
  EXPECT_TRUE(continuous_translation_sweep(a, a, random_stack(a, 1), {}).empty());
  EXPECT_THROW(continuous_translation_sweep(a, a, random_stack(a, 1), {1.5}), RangeError);
  EXPECT_THROW(continuous_translation_sweep(a, stylemix::testing::tiny_generator(), random_stack(a, 1), {0.0}),
               ConfigError);
}
