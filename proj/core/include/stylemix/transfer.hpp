#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stylemix/blend.hpp"
#include "stylemix/generator.hpp"
#include "stylemix/spatial_ops.hpp"

namespace stylemix {

struct TransferRequest {
  StyleStack src_styles;
  StyleStack ref_styles;
  /// Pixel rectangle on the output image.
  Box box;
  int feather = 0;
  /// Blending runs on layers {0, ..., layer_cut}; defaults to default_layer_cut.
  std::optional<int> layer_cut;
  double alpha_exponent = 1.0;
  /// Leading flattened style dimensions copied from src into ref; defaults to default_pose_dims.
  std::optional<int> pose_k_dims;

  /// Throws DomainError / RangeError for boxes outside the output, bad layer
  /// cuts, exponents below 1, or stacks of the wrong depth.
  void validate(const Generator& gen) const;
};

/// ceil(12 * L / 14), capped at L - 1.
int default_layer_cut(int num_layers);

/// Reference styles after pose alignment to the source.
StyleStack aligned_reference(const Generator& gen, const TransferRequest& req);
/// Feathered box mask raised to alpha_exponent at output resolution; zero
/// everywhere for an empty box.
AlphaMask transfer_mask(const Generator& gen, const TransferRequest& req);

/// Pose-aligns ref to src, then blends ref features into src inside the
/// feathered box on layers up to layer_cut.
Image transfer_attributes(const Generator& gen, const TransferRequest& req);

struct ShiftBlendStep {
  int layer = kDefaultSpatialLayer;
  AlphaMask mask;
  ShiftSpec shift;
};

struct PadStep {
  int layer = kDefaultSpatialLayer;
  PadSpec pad;
};

struct ResizeStep {
  int layer = kDefaultSpatialLayer;
  ResizeSpec resize;
};

using VariationStep = std::variant<ShiftBlendStep, PadStep, ResizeStep>;

int step_layer(const VariationStep& step);
/// Applies one step to the features of its layer.
void apply_variation_step(const VariationStep& step, Tensor4& features);

/// Renders `w` with every recipe step applied, in order, to its layer's
/// features during a single synthesis pass.
Image single_image_variations(const Generator& gen, const StyleVector& w, const std::vector<VariationStep>& recipe);

/// JSON array of steps, for example
///   [{"op": "pad", "layer": 2, "mode": "reflect", "left": 4},
///    {"op": "resize", "layer": 3, "height": 8, "width": 12, "method": "nearest"},
///    {"op": "shift_blend", "layer": 2, "dx": 2, "dy": 0,
///     "mask": {"box": [x0, y0, x1, y1], "feather": 1, "height": 32, "width": 32}}]
/// Masks may instead be {"constant": a, "height": h, "width": w} or carry
/// row-major "values". Mask height and width are required.
std::vector<VariationStep> recipe_from_json(const std::string& text);
std::string recipe_to_json(const std::vector<VariationStep>& recipe);

/// One cross-generator render per constant alpha over all layers.
std::vector<Image> continuous_translation_sweep(const Generator& gen_a, const Generator& gen_b,
                                                const StyleStack& styles, const std::vector<double>& alphas);

}  // namespace stylemix
