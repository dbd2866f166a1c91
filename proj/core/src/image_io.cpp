#include "stylemix/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstring>

#include "stylemix/checkpoint.hpp"
#include "stylemix/errors.hpp"

namespace stylemix {

namespace {

std::uint8_t quantize(double v01) {
  // std::nearbyint honours the default FE_TONEAREST mode: ties go to even.
  const double scaled = std::nearbyint(std::clamp(v01, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

struct WriteBuffer {
  std::vector<std::uint8_t> bytes;
};

void write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.insert(buf->bytes.end(), data, data + len);
}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

[[noreturn]] void error_cb(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void warning_cb(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> pixels, int height, int width, int color_type,
                                 int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  WriteBuffer buf;
  try {
    png_set_write_fn(png, &buf, write_cb, nullptr);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
      png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return std::move(buf.bytes);
}

/// Decodes to 8-bit with the requested channel count (1 = gray, 3 = RGB).
std::vector<std::uint8_t> decode(std::span<const std::uint8_t> data, int want_channels, int& height, int& width) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw IoError("not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{data, 0};
  std::vector<std::uint8_t> out;
  try {
    png_set_read_fn(png, &cur, read_cb);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
    if (want_channels == 3 && is_gray) png_set_gray_to_rgb(png);
    if (want_channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<std::size_t>(width) * want_channels) throw IoError("unexpected PNG row layout");
    out.resize(rowbytes * height);
    for (int y = 0; y < height; ++y) png_read_row(png, out.data() + rowbytes * y, nullptr);
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

std::uint8_t to_byte(double v) { return quantize((v + 1.0) * 0.5); }
double from_byte(std::uint8_t b) { return static_cast<double>(b) / 255.0 * 2.0 - 1.0; }

std::vector<std::uint8_t> to_rgb8(const Image& img) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.height()) * img.width() * 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * img.width() + x) * 3 + c] = to_byte(img.at(c, y, x));
  return rgb;
}

Image from_rgb8(std::span<const std::uint8_t> rgb, int height, int width) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) throw DomainError("rgb buffer size mismatch");
  Image img(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = from_byte(rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]);
  return img;
}

std::vector<std::uint8_t> encode_png_rgb(const Image& img) {
  return encode(to_rgb8(img), img.height(), img.width(), PNG_COLOR_TYPE_RGB, 3);
}

Image decode_png_rgb(std::span<const std::uint8_t> png) {
  int h = 0;
  int w = 0;
  const auto rgb = decode(png, 3, h, w);
  return from_rgb8(rgb, h, w);
}

std::vector<std::uint8_t> encode_png_gray(const Plane& plane) {
  std::vector<std::uint8_t> px(plane.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize(plane.data[i]);
  return encode(px, plane.height, plane.width, PNG_COLOR_TYPE_GRAY, 1);
}

Plane decode_png_gray(std::span<const std::uint8_t> png) {
  int h = 0;
  int w = 0;
  const auto px = decode(png, 1, h, w);
  Plane plane(h, w);
  for (std::size_t i = 0; i < px.size(); ++i) plane.data[i] = static_cast<double>(px[i]) / 255.0;
  return plane;
}

void write_png(const std::filesystem::path& path, const Image& img) { write_file_bytes(path, encode_png_rgb(img)); }

Image read_png(const std::filesystem::path& path) { return decode_png_rgb(read_file_bytes(path)); }

}  // namespace stylemix
