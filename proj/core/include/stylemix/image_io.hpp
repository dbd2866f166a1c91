#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stylemix/tensor.hpp"

namespace stylemix {

/// [-1, 1] -> [0, 255] with round-half-even; values outside the range clamp.
std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// Interleaved RGB8 buffer of an image.
std::vector<std::uint8_t> to_rgb8(const Image& img);
Image from_rgb8(std::span<const std::uint8_t> rgb, int height, int width);

std::vector<std::uint8_t> encode_png_rgb(const Image& img);
Image decode_png_rgb(std::span<const std::uint8_t> png);

/// Grayscale planes map linearly [0, 1] <-> [0, 255] (round-half-even).
std::vector<std::uint8_t> encode_png_gray(const Plane& plane);
Plane decode_png_gray(std::span<const std::uint8_t> png);

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

}  // namespace stylemix
