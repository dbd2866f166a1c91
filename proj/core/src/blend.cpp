#include "stylemix/blend.hpp"

#include <algorithm>
#include <cmath>

#include "stylemix/errors.hpp"
#include "stylemix/spatial_ops.hpp"

namespace stylemix {

AlphaMask::AlphaMask(Plane data) : data_(std::move(data)) {
  for (double v : data_.data)
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("alpha mask values must lie in [0, 1]");
}

AlphaMask AlphaMask::constant(int height, int width, double value) {
  return AlphaMask(Plane(height, width, value));
}

Plane AlphaMask::resampled(int height, int width) const { return resize_plane(data_, height, width); }

AlphaMask AlphaMask::pow(double exponent) const {
  if (exponent == 1.0) return *this;
  Plane p = data_;
  for (double& v : p.data) v = std::pow(v, exponent);
  return AlphaMask(std::move(p));
}

double ramp_exponent(RampSpeed speed) { return speed == RampSpeed::slow ? 1.0 : 3.0; }

AlphaMask make_linear_mask(int height, int width, MaskAxis axis, double start_frac, double end_frac, double exponent) {
  if (height < 1 || width < 1) throw RangeError("mask resolution must be positive");
  if (!(start_frac >= 0.0 && start_frac < end_frac && end_frac <= 1.0))
    throw DomainError("linear mask needs 0 <= start_frac < end_frac <= 1");
  if (!(exponent > 0.0)) throw DomainError("ramp exponent must be positive");
  const int n = axis == MaskAxis::horizontal ? width : height;
  std::vector<double> ramp(n);
  for (int i = 0; i < n; ++i) {
    const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    const double r = std::clamp((u - start_frac) / (end_frac - start_frac), 0.0, 1.0);
    ramp[i] = exponent == 1.0 ? r : std::pow(r, exponent);
  }
  Plane p(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) p.at(y, x) = ramp[axis == MaskAxis::horizontal ? x : y];
  return AlphaMask(std::move(p));
}

AlphaMask make_box_mask(int height, int width, const Box& box, int feather) {
  if (box.empty()) throw DomainError("degenerate box");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > width || box.y1 > height) throw RangeError("box exceeds mask resolution");
  if (feather < 0) throw DomainError("feather must be non-negative");
  Plane p(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int dx = std::max({box.x0 - x, 0, x - (box.x1 - 1)});
      const int dy = std::max({box.y0 - y, 0, y - (box.y1 - 1)});
      const int d = std::max(dx, dy);
      p.at(y, x) = d == 0 ? 1.0 : (d <= feather ? 1.0 - static_cast<double>(d) / (feather + 1) : 0.0);
    }
  return AlphaMask(std::move(p));
}

BlendMode blend_mode_from_string(const std::string& s) {
  if (s == "two-image" || s == "two_image") return BlendMode::two_image;
  if (s == "cross-generator" || s == "cross_generator") return BlendMode::cross_generator;
  if (s == "constant") return BlendMode::constant;
  throw DomainError("unknown blend mode '" + s + "'");
}

std::string to_string(BlendMode m) {
  switch (m) {
    case BlendMode::two_image: return "two-image";
    case BlendMode::cross_generator: return "cross-generator";
    case BlendMode::constant: return "constant";
  }
  return "?";
}

void BlendSpec::validate(int num_layers) const {
  for (int l : layer_set)
    if (l < 0 || l >= num_layers) throw DomainError("blend layer " + std::to_string(l) + " out of range");
  if (mode == BlendMode::constant) {
    if (!constant_alpha) throw DomainError("constant blend mode requires constant_alpha");
    if (!(*constant_alpha >= 0.0 && *constant_alpha <= 1.0)) throw RangeError("constant_alpha must lie in [0, 1]");
  } else if (!mask) {
    throw DomainError("blend mode '" + to_string(mode) + "' requires a mask");
  }
}

Plane BlendSpec::alpha_at(int height, int width) const {
  if (mode == BlendMode::constant) return Plane(height, width, constant_alpha.value());
  return mask->resampled(height, width);
}

std::set<int> all_layers(int num_layers) {
  std::set<int> s;
  for (int i = 0; i < num_layers; ++i) s.insert(i);
  return s;
}

std::set<int> layers_up_to(int cut) {
  std::set<int> s;
  for (int i = 0; i <= cut; ++i) s.insert(i);
  return s;
}

double blend_value(double x, double y, double a) {
  if (a == 0.0) return x;
  if (a == 1.0) return y;
  const double v = x + a * (y - x);
  return std::clamp(v, std::min(x, y), std::max(x, y));
}

Tensor4 interpolate_tensors(const Tensor4& a, const Tensor4& b, const Plane& alpha) {
  if (!a.same_shape(b)) throw DomainError("interpolate: feature shapes differ");
  if (alpha.height != a.height() || alpha.width != a.width()) throw DomainError("interpolate: alpha size mismatch");
  Tensor4 out(a.batch(), a.channels(), a.height(), a.width());
  for (int n = 0; n < a.batch(); ++n)
    for (int c = 0; c < a.channels(); ++c) {
      const auto pa = a.plane(n, c);
      const auto pb = b.plane(n, c);
      auto po = out.plane(n, c);
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = blend_value(pa[i], pb[i], alpha.data[i]);
    }
  return out;
}

FeatureMap interpolate_features(const FeatureMap& fa, const FeatureMap& fb, const AlphaMask& mask) {
  if (!fa.data.same_shape(fb.data)) throw DomainError("interpolate_features: shape mismatch");
  const Plane alpha = mask.resampled(fa.data.height(), fa.data.width());
  return FeatureMap{fa.layer_index, interpolate_tensors(fa.data, fb.data, alpha)};
}

FeatureMap shift_blend(const FeatureMap& f, const AlphaMask& mask, const ShiftSpec& shift) {
  const int h = f.data.height();
  const int w = f.data.width();
  if (std::abs(shift.dy) >= h || std::abs(shift.dx) >= w) throw RangeError("shift exceeds feature map size");
  const Plane alpha = mask.resampled(h, w);

  Plane shifted_alpha(h, w, 0.0);
  Tensor4 shifted(f.data.batch(), f.data.channels(), h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sy = y - shift.dy;
      const int sx = x - shift.dx;
      if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
      shifted_alpha.at(y, x) = alpha.at(sy, sx);
      for (int n = 0; n < f.data.batch(); ++n)
        for (int c = 0; c < f.data.channels(); ++c) shifted.at(n, c, y, x) = f.data.at(n, c, sy, sx);
    }
  return FeatureMap{f.layer_index, interpolate_tensors(f.data, shifted, shifted_alpha)};
}

Image render_branch_blend(const BlendBranch& a, const BlendBranch& b, const BlendSpec& spec) {
  if (!a.generator || !b.generator) throw DomainError("blend branch without a generator");
  const Generator& ga = *a.generator;
  const Generator& gb = *b.generator;
  if (!(ga.config() == gb.config())) throw ConfigError("blend branches need generators with identical configs");
  spec.validate(ga.num_layers());

  Tensor4 xa = ga.const_input();
  Tensor4 xb = gb.const_input();
  for (int i = 0; i < ga.num_layers(); ++i) {
    xa = ga.run_layer(i, a.coeffs.per_layer.at(i), xa);
    xb = gb.run_layer(i, b.coeffs.per_layer.at(i), xb);
    if (spec.layer_set.contains(i)) {
      const Plane alpha = spec.alpha_at(xa.height(), xa.width());
      xa = interpolate_tensors(xa, xb, alpha);
      xb = xa;
    }
  }
  const Image img_a = ga.to_image(xa);
  const Image img_b = gb.to_image(xb);
  const Plane alpha = spec.alpha_at(img_a.height(), img_a.width());
  return Image(interpolate_tensors(img_a.tensor(), img_b.tensor(), alpha));
}

Image render_two_image_blend(const Generator& gen, const StyleCoeffs& a, const StyleCoeffs& b, const BlendSpec& spec) {
  return render_branch_blend(BlendBranch{&gen, a}, BlendBranch{&gen, b}, spec);
}

Image render_two_image_blend(const Generator& gen, const StyleStack& a, const StyleStack& b, const BlendSpec& spec) {
  return render_two_image_blend(gen, gen.styles_to_coeffs(a), gen.styles_to_coeffs(b), spec);
}

Image render_cross_generator_blend(const Generator& gen_a, const Generator& gen_b, const StyleCoeffs& styles,
                                   const BlendSpec& spec) {
  if (!(gen_a.config() == gen_b.config())) throw ConfigError("cross-generator blend requires identical configs");
  return render_branch_blend(BlendBranch{&gen_a, styles}, BlendBranch{&gen_b, styles}, spec);
}

Image render_cross_generator_blend(const Generator& gen_a, const Generator& gen_b, const StyleStack& styles,
                                   const BlendSpec& spec) {
  if (!(gen_a.config() == gen_b.config())) throw ConfigError("cross-generator blend requires identical configs");
  return render_branch_blend(BlendBranch{&gen_a, gen_a.styles_to_coeffs(styles)},
                             BlendBranch{&gen_b, gen_b.styles_to_coeffs(styles)}, spec);
}

}  // namespace stylemix
