#pragma once

#include <optional>
#include <string>

#include "stylemix/tensor.hpp"

namespace stylemix {

/// Spatial operations default to f_2.
inline constexpr int kDefaultSpatialLayer = 2;

enum class PadMode { replicate, reflect, circular, zero };

struct PadSpec {
  PadMode mode = PadMode::reflect;
  int left = 0;
  int right = 0;
  int top = 0;
  int bottom = 0;
};

enum class ResizeMethod { nearest, bilinear };

struct ResizeSpec {
  /// Either an explicit (height, width) target or a rational scale num/den.
  std::optional<std::pair<int, int>> target;
  int scale_num = 1;
  int scale_den = 1;
  ResizeMethod method = ResizeMethod::bilinear;
};

PadMode pad_mode_from_string(const std::string& s);
std::string to_string(PadMode m);
ResizeMethod resize_method_from_string(const std::string& s);

/// Source index for output index `i` of an axis of length n padded by `before`.
/// Returns -1 for zero padding outside the input.
int pad_source_index(PadMode mode, int i, int before, int n);

/// Grows H by top+bottom and W by left+right; the interior is copied exactly.
/// Reflect mirrors without repeating the border and needs amounts < dimension.
Tensor4 pad_tensor(const Tensor4& t, const PadSpec& spec);
FeatureMap pad_features(const FeatureMap& f, const PadSpec& spec);

/// Nearest uses floor(dst * in / out); bilinear uses the half-pixel
/// (align_corners = false) convention with edge clamping.
Tensor4 resize_tensor(const Tensor4& t, int out_h, int out_w, ResizeMethod method);
FeatureMap resize_features(const FeatureMap& f, const ResizeSpec& spec);

/// Bilinear (align_corners = false) resampling of a plane.
Plane resize_plane(const Plane& p, int out_h, int out_w);

}  // namespace stylemix
