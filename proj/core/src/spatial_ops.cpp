#include "stylemix/spatial_ops.hpp"

#include <algorithm>
#include <cmath>

#include "stylemix/errors.hpp"

namespace stylemix {

namespace {

struct Tap {
  int i0;
  int i1;
  double t;
};

Tap bilinear_tap(int dst, int in_n, int out_n) {
  double src = (dst + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  src = std::max(src, 0.0);
  int i0 = static_cast<int>(std::floor(src));
  i0 = std::min(i0, in_n - 1);
  const int i1 = std::min(i0 + 1, in_n - 1);
  return {i0, i1, src - i0};
}

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

PadMode pad_mode_from_string(const std::string& s) {
  if (s == "replicate") return PadMode::replicate;
  if (s == "reflect") return PadMode::reflect;
  if (s == "circular") return PadMode::circular;
  if (s == "zero") return PadMode::zero;
  throw DomainError("unknown pad mode '" + s + "'");
}

std::string to_string(PadMode m) {
  switch (m) {
    case PadMode::replicate: return "replicate";
    case PadMode::reflect: return "reflect";
    case PadMode::circular: return "circular";
    case PadMode::zero: return "zero";
  }
  return "?";
}

ResizeMethod resize_method_from_string(const std::string& s) {
  if (s == "nearest") return ResizeMethod::nearest;
  if (s == "bilinear") return ResizeMethod::bilinear;
  throw DomainError("unknown resize method '" + s + "'");
}

int pad_source_index(PadMode mode, int i, int before, int n) {
  const int s = i - before;
  if (s >= 0 && s < n) return s;
  switch (mode) {
    case PadMode::zero: return -1;
    case PadMode::replicate: return std::clamp(s, 0, n - 1);
    case PadMode::circular: return ((s % n) + n) % n;
    case PadMode::reflect: return s < 0 ? -s : 2 * (n - 1) - s;
  }
  return -1;
}

Tensor4 pad_tensor(const Tensor4& t, const PadSpec& spec) {
  if (spec.left < 0 || spec.right < 0 || spec.top < 0 || spec.bottom < 0)
    throw RangeError("pad amounts must be non-negative");
  const int h = t.height();
  const int w = t.width();
  if (h == 0 || w == 0) throw RangeError("cannot pad an empty feature map");
  if (spec.mode == PadMode::reflect &&
      (spec.left >= w || spec.right >= w || spec.top >= h || spec.bottom >= h))
    throw RangeError("reflect padding amount must be smaller than the padded dimension");

  Tensor4 out(t.batch(), t.channels(), h + spec.top + spec.bottom, w + spec.left + spec.right);
  for (int b = 0; b < t.batch(); ++b)
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < out.height(); ++y) {
        const int sy = pad_source_index(spec.mode, y, spec.top, h);
        for (int x = 0; x < out.width(); ++x) {
          const int sx = pad_source_index(spec.mode, x, spec.left, w);
          out.at(b, c, y, x) = (sy < 0 || sx < 0) ? 0.0 : t.at(b, c, sy, sx);
        }
      }
  return out;
}

FeatureMap pad_features(const FeatureMap& f, const PadSpec& spec) {
  return FeatureMap{f.layer_index, pad_tensor(f.data, spec)};
}

Tensor4 resize_tensor(const Tensor4& t, int out_h, int out_w, ResizeMethod method) {
  if (out_h < 1 || out_w < 1) throw RangeError("resize target dimensions must be at least 1");
  if (out_h == t.height() && out_w == t.width()) return t;
  const int h = t.height();
  const int w = t.width();
  Tensor4 out(t.batch(), t.channels(), out_h, out_w);
  if (method == ResizeMethod::nearest) {
    for (int b = 0; b < t.batch(); ++b)
      for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < out_h; ++y) {
          const int sy = std::min(static_cast<int>(static_cast<long long>(y) * h / out_h), h - 1);
          for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(static_cast<int>(static_cast<long long>(x) * w / out_w), w - 1);
            out.at(b, c, y, x) = t.at(b, c, sy, sx);
          }
        }
    return out;
  }
  for (int b = 0; b < t.batch(); ++b)
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < out_h; ++y) {
        const Tap ty = bilinear_tap(y, h, out_h);
        for (int x = 0; x < out_w; ++x) {
          const Tap tx = bilinear_tap(x, w, out_w);
          const double top = lerp(t.at(b, c, ty.i0, tx.i0), t.at(b, c, ty.i0, tx.i1), tx.t);
          const double bot = lerp(t.at(b, c, ty.i1, tx.i0), t.at(b, c, ty.i1, tx.i1), tx.t);
          out.at(b, c, y, x) = lerp(top, bot, ty.t);
        }
      }
  return out;
}

FeatureMap resize_features(const FeatureMap& f, const ResizeSpec& spec) {
  int out_h = 0;
  int out_w = 0;
  if (spec.target) {
    out_h = spec.target->first;
    out_w = spec.target->second;
  } else {
    if (spec.scale_num <= 0 || spec.scale_den <= 0) throw RangeError("resize scale must be positive");
    out_h = static_cast<int>(static_cast<long long>(f.data.height()) * spec.scale_num / spec.scale_den);
    out_w = static_cast<int>(static_cast<long long>(f.data.width()) * spec.scale_num / spec.scale_den);
  }
  return FeatureMap{f.layer_index, resize_tensor(f.data, out_h, out_w, spec.method)};
}

Plane resize_plane(const Plane& p, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw RangeError("resize target dimensions must be at least 1");
  if (p.height == out_h && p.width == out_w) return p;
  Plane out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const Tap ty = bilinear_tap(y, p.height, out_h);
    for (int x = 0; x < out_w; ++x) {
      const Tap tx = bilinear_tap(x, p.width, out_w);
      const double top = lerp(p.at(ty.i0, tx.i0), p.at(ty.i0, tx.i1), tx.t);
      const double bot = lerp(p.at(ty.i1, tx.i0), p.at(ty.i1, tx.i1), tx.t);
      out.at(y, x) = lerp(top, bot, ty.t);
    }
  }
  return out;
}

}  // namespace stylemix
