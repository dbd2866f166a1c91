#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stylemix/tensor.hpp"

namespace stylemix {

/// Architecture of the style-based generator. Immutable once a Generator is built.
struct GeneratorConfig {
  int latent_dim = 64;
  int num_layers = 8;
  int base_resolution = 4;
  std::vector<int> channels_per_layer{64, 64, 64, 64, 32, 32, 16, 16};
  /// Synthesis layers that double H and W before convolving.
  std::vector<int> upsample_layers{2, 4, 6};
  int mapping_layers = 4;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError when the configuration is inconsistent.
  void validate() const;

  int output_resolution() const;
  int layer_resolution(int layer) const;
  /// Channels entering layer `layer`, i.e. the width of its style coefficients.
  int layer_in_channels(int layer) const;
  bool upsamples(int layer) const;

  /// 64-dim, 8 layers, 4x4 -> 32x32.
  static GeneratorConfig desk();
  /// Very small network for gradient checks.
  static GeneratorConfig tiny();

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Canonical JSON text (stable key order) and its inverse.
std::string config_to_json(const GeneratorConfig& cfg);
GeneratorConfig config_from_json(const std::string& text);

struct LatentCode {
  std::vector<double> values;
};

/// A point in W.
struct StyleVector {
  std::vector<double> values;
  friend bool operator==(const StyleVector&, const StyleVector&) = default;
};

/// One style row per synthesis layer (W+).
class StyleStack {
 public:
  StyleStack() = default;
  explicit StyleStack(std::vector<StyleVector> rows);

  int num_layers() const { return static_cast<int>(rows_.size()); }
  const StyleVector& row(int i) const { return rows_.at(i); }
  const std::vector<StyleVector>& rows() const { return rows_; }
  /// Mutable access clears the in-W flag.
  StyleVector& mutable_row(int i);
  void set_row(int i, StyleVector row);

  /// True when built by expand_to_stack and never edited since.
  bool in_w() const { return in_w_; }

  /// Row-major concatenation of all rows.
  std::vector<double> flattened() const;
  static StyleStack from_flat(std::span<const double> flat, int num_layers, int width);

  friend bool operator==(const StyleStack& a, const StyleStack& b) { return a.rows_ == b.rows_; }

 private:
  friend StyleStack expand_to_stack(const StyleVector& w, int num_layers);
  std::vector<StyleVector> rows_;
  bool in_w_ = false;
};

StyleStack expand_to_stack(const StyleVector& w, int num_layers);

/// Per-layer sigma coefficients produced by the affine layers.
struct StyleCoeffs {
  std::vector<std::vector<double>> per_layer;

  std::size_t total_size() const;
  std::vector<double> flattened() const;
  /// Inverse of flattened() using the widths of `like`.
  static StyleCoeffs unflatten(std::span<const double> flat, const StyleCoeffs& like);

  friend bool operator==(const StyleCoeffs&, const StyleCoeffs&) = default;
};

/// Named parameter array. Values are float32 so checkpoints round-trip exactly.
struct Parameter {
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t count() const;
  friend bool operator==(const Parameter&, const Parameter&) = default;
};

using ParameterSet = std::map<std::string, Parameter>;

/// Synthesis layer that owns a parameter, or nullopt for mapping-network parameters.
/// The learned constant belongs to layer 0 and the RGB head to the last layer.
std::optional<int> parameter_layer(const std::string& name, int num_layers);
bool is_mapping_parameter(const std::string& name);
bool is_affine_parameter(const std::string& name);
/// Fixed buffers (mean style, noise maps) that are never trained.
bool is_buffer(const std::string& name);

/// Capture / inject / transform hooks for one synthesis pass.
///
/// Order at layer i: compute f_i, record it if captured, apply the transform
/// callback, then replace with the injected map if present. The result feeds
/// layer i+1. Injected maps may change H and W but not C.
struct HookSet {
  std::set<int> capture;
  std::map<int, FeatureMap> inject;
  std::function<void(int layer, Tensor4& features)> transform;
};

struct SynthesisResult {
  Image image;
  std::map<int, FeatureMap> captured;
};

class Generator {
 public:
  /// Seeded initialization; identical configs give identical parameters.
  explicit Generator(GeneratorConfig config);
  /// Adopts an explicit parameter set. Throws IntegrityError on missing,
  /// unknown, or mis-shaped parameters.
  Generator(GeneratorConfig config, ParameterSet params);

  const GeneratorConfig& config() const { return config_; }
  const ParameterSet& parameters() const { return params_; }
  const Parameter& parameter(const std::string& name) const;

  int num_layers() const { return config_.num_layers; }
  int output_resolution() const { return config_.output_resolution(); }

  /// w = w_avg + truncation * (MLP(z) - w_avg).
  StyleVector map_latent(const LatentCode& z, double truncation = 1.0) const;
  std::vector<StyleVector> map_latents(std::span<const LatentCode> zs, double truncation = 1.0) const;
  StyleVector mean_style() const;

  StyleCoeffs styles_to_coeffs(const StyleStack& styles) const;
  std::vector<double> layer_coeffs(int layer, const StyleVector& w) const;

  /// Learned constant input, 1 x C0 x base x base.
  Tensor4 const_input() const;
  /// Applies synthesis layer `layer` (upsample if configured, modulated 3x3
  /// conv, noise, bias, activation) to an input of any spatial size.
  Tensor4 run_layer(int layer, std::span<const double> coeffs, const Tensor4& input) const;
  /// RGB head: tanh of a 1x1 conv; pointwise, so column-local.
  Image to_image(const Tensor4& last_features) const;

  SynthesisResult synthesize(const StyleCoeffs& coeffs, const HookSet& hooks = {}) const;
  SynthesisResult synthesize(const StyleStack& styles, const HookSet& hooks = {}) const;

  LatentCode sample_latent(std::uint64_t seed) const;

 private:
  void check_coeffs(const StyleCoeffs& coeffs) const;

  GeneratorConfig config_;
  ParameterSet params_;
};

/// Names and shapes every generator with this config must carry.
std::map<std::string, std::vector<int>> expected_parameter_shapes(const GeneratorConfig& cfg);

/// New generator with genB's parameters for the synthesis layers in
/// `layer_set` and genA's everywhere else.
Generator swap_weights(const Generator& gen_a, const Generator& gen_b, const std::set<int>& layer_set);

/// Modulated convolution weights for one layer, exposed for gradient code.
struct ModulatedWeights {
  std::vector<double> modulated;    // w' = scale * W * sigma_c
  std::vector<double> demod;        // per output channel 1/sqrt(sum w'^2 + eps)
  std::vector<double> effective;    // w'' = w' * demod_o
};

inline constexpr double kDemodEpsilon = 1e-8;

ModulatedWeights modulate_weights(const Parameter& weight, std::span<const double> coeffs, int out_channels,
                                  int in_channels);

/// Deterministic noise value for layer `layer` at (y, x), tiled from the stored map.
double noise_at(const Parameter& noise_map, int y, int x);

}  // namespace stylemix
