#include <gtest/gtest.h>

#include <filesystem>

#include "stylemix/checkpoint.hpp"
#include "stylemix/errors.hpp"
#include "stylemix/image_io.hpp"
#include "test_support.hpp"

using namespace stylemix;
using stylemix::testing::tiny_generator;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stylemix_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const Generator g(GeneratorConfig::desk());
  ParameterSet aux;
  aux["aux.extra"] = Parameter{{2}, {1.5f, -0.25f}};
  const auto bytes = encode_checkpoint(g, aux);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.generator.config(), g.config());
  for (const auto& [name, p] : g.parameters())
    EXPECT_TRUE(stylemix::testing::parameters_bitwise_equal(p, back.generator.parameter(name))) << name;
  EXPECT_EQ(back.aux, aux);
  EXPECT_EQ(encode_checkpoint(back.generator, back.aux), bytes);

  const auto s = stylemix::testing::random_stack(g, 3);
  EXPECT_TRUE(bitwise_equal(g.synthesize(s).image, back.generator.synthesize(s).image));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = scratch_dir("ckpt");
  const auto& g = tiny_generator();
  save_checkpoint(g, dir / "g.smix");
  EXPECT_EQ(load_checkpoint(dir / "g.smix").parameters(), g.parameters());
  EXPECT_THROW(load_checkpoint(dir / "missing.smix"), IoError);
}

TEST(Checkpoint, DetectsCorruption) {
  const auto bytes = encode_checkpoint(tiny_generator());

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), IntegrityError);
  EXPECT_THROW(decode_checkpoint(std::span(bytes).first(10)), IntegrityError);

  auto flipped = bytes;
  flipped.back() ^= 0x01;
  EXPECT_THROW(decode_checkpoint(flipped), IntegrityError);

  auto version = bytes;
  version[8] = 2;
  try {
    decode_checkpoint(version);
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), IntegrityError);
}

TEST(Checkpoint, AuxNamesNeedPrefix) {
  ParameterSet aux;
  aux["extra"] = Parameter{{1}, {1.0f}};
  EXPECT_THROW(encode_checkpoint(tiny_generator(), aux), DomainError);
}

TEST(ImageBytes, EndpointsAndRounding) {
  EXPECT_EQ(to_byte(-1.0), 0);
  EXPECT_EQ(to_byte(1.0), 255);
  EXPECT_EQ(to_byte(-5.0), 0);
  EXPECT_EQ(to_byte(5.0), 255);
  // (v + 1) * 127.5 = 127.5 rounds half to even.
  EXPECT_EQ(to_byte(0.0), 128);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(to_byte(from_byte(static_cast<std::uint8_t>(b))), b);
}

TEST(Png, RgbRoundTrip) {
  Image img(5, 7);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x) img.at(c, y, x) = from_byte(static_cast<std::uint8_t>((c * 50 + y * 13 + x * 7) % 256));
  const auto png = encode_png_rgb(img);
  const auto back = decode_png_rgb(png);
  EXPECT_EQ(back, img);
  EXPECT_EQ(encode_png_rgb(back), png);
}

TEST(Png, GrayRoundTripAndFullFrame) {
  Plane p(4, 6);
  for (int i = 0; i < 24; ++i) p.data[i] = (i * 11 % 256) / 255.0;
  const auto png = encode_png_gray(p);
  const auto back = decode_png_gray(png);
  EXPECT_EQ(encode_png_gray(back), png);
  for (int i = 0; i < 24; ++i) EXPECT_NEAR(back.data[i], p.data[i], 1e-12);

  const auto full = decode_png_gray(encode_png_gray(Plane(3, 3, 1.0)));
  for (double v : full.data) EXPECT_EQ(v, 1.0);
}

TEST(Png, RejectsGarbage) {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(decode_png_rgb(junk), IoError);
  auto png = encode_png_rgb(Image(4, 4));
  png.resize(png.size() / 2);
  EXPECT_THROW(decode_png_rgb(png), IoError);
}

TEST(Png, FileRoundTrip) {
  const auto dir = scratch_dir("png");
  const auto img = tiny_generator().synthesize(stylemix::testing::random_stack(tiny_generator(), 1)).image;
  write_png(dir / "a.png", img);
  const auto back = read_png(dir / "a.png");
  EXPECT_EQ(to_rgb8(back), to_rgb8(img));
}
