#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stylemix/generator.hpp"

namespace stylemix {

/// Gaussian filter across a sequence of style vectors. Kernel radius is
/// ceil(3 * sigma), weights are renormalized after truncation, and indices
/// beyond either end reflect (mirror without repeating the endpoint).
/// Sigmas below 1e-3 return the sequence unchanged.
std::vector<StyleVector> smooth_latents(const std::vector<StyleVector>& seq, double kernel_sigma);

/// Normalized truncated Gaussian weights for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma);

/// Diagonal Gaussian over the per-layer sigma coefficients.
struct SigmaGaussian {
  StyleCoeffs mean;
  StyleCoeffs variance;
  int sample_count = 0;
};

inline constexpr double kVarianceFloor = 1e-6;

/// Fits over styles_to_coeffs(map_latent(z)) for `n_samples` z drawn from
/// `seed`. Variance is the maximum-likelihood estimate, floored at 1e-6.
SigmaGaussian fit_sigma_gaussian(const Generator& gen, int n_samples, std::uint64_t seed);

/// Latents used by fit_sigma_gaussian, in draw order.
std::vector<LatentCode> sigma_fit_latents(const Generator& gen, int n_samples, std::uint64_t seed);

/// Mean over all coefficients of (sigma - mean)^2 / variance.
double gaussian_prior_loss(const StyleCoeffs& sigma, const SigmaGaussian& g);
/// Gradient of gaussian_prior_loss with respect to sigma.
StyleCoeffs gaussian_prior_grad(const StyleCoeffs& sigma, const SigmaGaussian& g);

/// Draws mean + sqrt(variance) * N(0, 1) coefficients.
StyleCoeffs sample_sigma(const SigmaGaussian& g, std::uint64_t seed);

/// Stored as "aux.sigma_gaussian.{mean,variance}.<layer>" plus a count array.
ParameterSet sigma_gaussian_to_aux(const SigmaGaussian& g);
std::optional<SigmaGaussian> sigma_gaussian_from_aux(const ParameterSet& aux);

/// Copies the first `k_dims` entries of `pose_source` (flattened row-major over
/// layers) into `target`; the remainder keeps `target`'s values.
StyleStack pose_align(const StyleStack& target, const StyleStack& pose_source, int k_dims);

/// Default number of aligned dimensions: four style rows.
int default_pose_dims(int latent_dim);

/// Mean Euclidean distance between consecutive style vectors.
double mean_adjacent_distance(const std::vector<StyleVector>& seq);

}  // namespace stylemix
