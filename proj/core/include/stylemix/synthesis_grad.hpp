#pragma once

// Reverse-mode derivatives of the generator. The traced forward pass reuses
// the same kernels as Generator::synthesize, so its image matches bitwise.

#include <map>
#include <string>
#include <vector>

#include "stylemix/generator.hpp"

namespace stylemix {

using ParameterGrads = std::map<std::string, std::vector<double>>;

struct SynthesisTrace {
  std::vector<Tensor4> conv_inputs;     // layer input after optional upsampling
  std::vector<ModulatedWeights> weights;
  std::vector<Tensor4> pre_activations;
  Tensor4 last_features;
  Image image;
};

SynthesisTrace trace_synthesis(const Generator& gen, const StyleCoeffs& coeffs);

struct SynthesisGradient {
  StyleCoeffs d_coeffs;
  ParameterGrads d_params;  // empty unless requested
};

/// Backpropagates d(loss)/d(image) to the coefficients and, when
/// `with_params` is set, to every synthesis parameter (conv, bias, noise
/// strength, constant, RGB head).
SynthesisGradient backprop_synthesis(const Generator& gen, const SynthesisTrace& trace, const StyleCoeffs& coeffs,
                                     const Tensor4& d_image, bool with_params);

/// Chains coefficient gradients through the affine layers. Accumulates affine
/// parameter gradients into `grads` when non-null; returns d/d(style rows).
std::vector<std::vector<double>> backprop_affine(const Generator& gen, const StyleStack& styles,
                                                 const StyleCoeffs& d_coeffs, ParameterGrads* grads);

struct MappingTrace {
  std::vector<std::vector<double>> inputs;          // input to each fc layer
  std::vector<std::vector<double>> pre_activations;
  double inv_norm = 1.0;
  std::vector<double> z;
  StyleVector output;
};

MappingTrace trace_mapping(const Generator& gen, const LatentCode& z);
/// Accumulates mapping-network parameter gradients given d/d(w).
void backprop_mapping(const Generator& gen, const MappingTrace& trace, std::span<const double> d_w,
                      ParameterGrads& grads);

}  // namespace stylemix
