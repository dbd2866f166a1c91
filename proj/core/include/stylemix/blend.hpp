#pragma once

#include <optional>
#include <set>
#include <string>

#include "stylemix/generator.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

/// Spatial blend weights in [0, 1] at a canonical resolution. Resampled
/// bilinearly to whatever layer resolution it is applied at.
class AlphaMask {
 public:
  AlphaMask() = default;
  /// Throws RangeError if any entry is outside [0, 1].
  explicit AlphaMask(Plane data);

  static AlphaMask constant(int height, int width, double value);

  int height() const { return data_.height; }
  int width() const { return data_.width; }
  double at(int y, int x) const { return data_.at(y, x); }
  const Plane& plane() const { return data_; }

  Plane resampled(int height, int width) const;
  /// Pointwise power; values stay in [0, 1].
  AlphaMask pow(double exponent) const;

  friend bool operator==(const AlphaMask&, const AlphaMask&) = default;

 private:
  Plane data_;
};

enum class MaskAxis { horizontal, vertical };
enum class RampSpeed { slow, fast };

/// Ramp exponent for the named speeds: slow = 1, fast = 3.
double ramp_exponent(RampSpeed speed);

/// Linear ramp along `axis`: 0 before start_frac, 1 after end_frac, and
/// ((u - start) / (end - start))^exponent in between, where u runs over
/// linspace(0, 1, n) along the axis.
AlphaMask make_linear_mask(int height, int width, MaskAxis axis, double start_frac, double end_frac,
                           double exponent = 1.0);

struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;  // exclusive

  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// 1 inside the box, 1 - d/(feather+1) for pixels at Chebyshev distance
/// d <= feather outside it, 0 beyond.
AlphaMask make_box_mask(int height, int width, const Box& box, int feather);

enum class BlendMode { two_image, cross_generator, constant };

BlendMode blend_mode_from_string(const std::string& s);
std::string to_string(BlendMode m);

struct BlendSpec {
  std::set<int> layer_set;
  std::optional<AlphaMask> mask;
  BlendMode mode = BlendMode::two_image;
  std::optional<double> constant_alpha;

  /// Throws DomainError for missing mask / alpha or layers outside [0, num_layers).
  void validate(int num_layers) const;
  /// Mask sampled at (height, width); constant mode yields a constant plane.
  Plane alpha_at(int height, int width) const;
};

/// Every layer index in [0, num_layers).
std::set<int> all_layers(int num_layers);
/// {0, ..., cut}.
std::set<int> layers_up_to(int cut);

/// (1 - a) * x + a * y, returning x exactly at a == 0, y exactly at a == 1,
/// and never leaving [min(x, y), max(x, y)].
double blend_value(double x, double y, double a);

/// Elementwise interpolation with alpha broadcast over batch and channels.
Tensor4 interpolate_tensors(const Tensor4& a, const Tensor4& b, const Plane& alpha);
FeatureMap interpolate_features(const FeatureMap& fa, const FeatureMap& fb, const AlphaMask& mask);

struct ShiftSpec {
  int dy = 0;
  int dx = 0;
};

/// Copies the masked patch to a translated location within one feature map:
/// out = (1 - S(alpha)) * f + S(alpha) * S(f), where S translates by
/// (dy, dx) and fills vacated cells with zero.
FeatureMap shift_blend(const FeatureMap& f, const AlphaMask& mask, const ShiftSpec& shift);

/// One branch of a lockstep blend render.
struct BlendBranch {
  const Generator* generator = nullptr;
  StyleCoeffs coeffs;
};

/// Runs both branches layer by layer. At every layer in the spec's layer set
/// both branch features are replaced by their interpolation; the two RGB
/// outputs are composited with the same mask.
Image render_branch_blend(const BlendBranch& a, const BlendBranch& b, const BlendSpec& spec);

Image render_two_image_blend(const Generator& gen, const StyleCoeffs& a, const StyleCoeffs& b, const BlendSpec& spec);
Image render_two_image_blend(const Generator& gen, const StyleStack& a, const StyleStack& b, const BlendSpec& spec);

/// Same styles through two generators with identical configs (for example a
/// base generator and its finetuned clone).
Image render_cross_generator_blend(const Generator& gen_a, const Generator& gen_b, const StyleCoeffs& styles,
                                   const BlendSpec& spec);
Image render_cross_generator_blend(const Generator& gen_a, const Generator& gen_b, const StyleStack& styles,
                                   const BlendSpec& spec);

}  // namespace stylemix
