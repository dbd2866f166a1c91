#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "stylemix/errors.hpp"
#include "stylemix/generator.hpp"
#include "stylemix/latent_tools.hpp"

namespace stylemix {

/// Pluggable perceptual distance. Implementations must return a non-negative
/// value that is zero for identical inputs.
class PerceptualLoss {
 public:
  virtual ~PerceptualLoss() = default;
  virtual std::string name() const = 0;
  virtual double value(const Image& a, const Image& b) const = 0;
  /// Writes d(value)/d(a) into `grad_a` (shaped like a.tensor()).
  virtual double value_and_grad(const Image& a, const Image& b, Tensor4& grad_a) const = 0;
};

/// Sum of per-scale MSE over an average-pooled pyramid: the full image and
/// two successive 2x2 downsamplings. Scales that would drop below 1 pixel
/// are skipped.
class PyramidMseLoss final : public PerceptualLoss {
 public:
  explicit PyramidMseLoss(int scales = 3);
  std::string name() const override { return "pyramid-mse"; }
  double value(const Image& a, const Image& b) const override;
  double value_and_grad(const Image& a, const Image& b, Tensor4& grad_a) const override;

 private:
  int scales_;
};

/// Looks up a registered provider by name ("pyramid-mse"); ConfigError otherwise.
std::unique_ptr<PerceptualLoss> make_perceptual_loss(const std::string& name);

double mse_loss(const Image& a, const Image& b);
/// ConfigError when no provider is given.
double perceptual_loss(const PerceptualLoss* provider, const Image& a, const Image& b);

struct InversionConfig {
  int steps = 3000;
  double step_size = 0.01;
  double prior_weight = 0.1;
  double perceptual_weight = 1.0;
  double mse_weight = 1.0;
  /// Recorded with the job for reproducibility; the descent itself starts
  /// deterministically at the fitted mean.
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossRecord {
  int step = 0;
  double total = 0.0;
  double mse = 0.0;
  double perceptual = 0.0;
  double prior = 0.0;
};

struct InversionResult {
  StyleCoeffs sigma;
  std::vector<LossRecord> loss_trace;  // steps + 1 entries
  Image final_image;
  int best_step = 0;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::vector<LossRecord> trace)
      : Error("non-finite inversion loss at step " + std::to_string(trace.empty() ? 0 : trace.back().step)),
        trace_(std::move(trace)) {}
  const std::vector<LossRecord>& trace() const { return trace_; }

 private:
  std::vector<LossRecord> trace_;
};

/// Total objective mse_w * MSE + perc_w * P + prior_w * prior at `sigma`.
/// When `grad` is non-null it receives d(total)/d(sigma).
LossRecord inversion_objective(const Generator& gen, const StyleCoeffs& sigma, const Image& target,
                               const SigmaGaussian& g, const InversionConfig& cfg, const PerceptualLoss& perceptual,
                               StyleCoeffs* grad);

/// Adam descent with cosine step decay on the sigma coefficients, starting
/// from g.mean. Returns the best coefficients seen (by total loss).
InversionResult invert(const Generator& gen, const Image& target, const SigmaGaussian& g, const InversionConfig& cfg,
                       const PerceptualLoss& perceptual);

/// "step,total,mse,perceptual,prior" with one row per record.
std::string loss_trace_csv(const std::vector<LossRecord>& trace);

}  // namespace stylemix
