#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stylemix/generator.hpp"

namespace stylemix {

struct FreezeSpec {
  bool freeze_mapping = true;
  bool freeze_affine = true;
  /// Synthesis layers whose parameters may train; nullopt means every layer.
  std::optional<std::set<int>> trainable_layer_set;

  bool is_trainable(const std::string& name, int num_layers) const;
  std::vector<std::string> trainable_parameters(const Generator& gen) const;
  /// Throws ConfigError for out-of-range layers or when nothing is trainable.
  void validate(const Generator& gen) const;
};

/// Four-layer convolutional critic: three 3x3 conv + leaky ReLU + 2x2 mean
/// pool stages, a 3x3 conv to one channel, and a spatial mean as the logit.
class Discriminator {
 public:
  Discriminator(int resolution, std::uint64_t seed);

  static constexpr int kStages = 4;

  double logit(const Image& img) const;
  /// Logit plus gradients of `d_logit * logit` with respect to the weights
  /// (accumulated into d_weights when non-null) and the image.
  double backward(const Image& img, double d_logit, std::vector<std::vector<double>>* d_weights,
                  Tensor4* d_image) const;

  std::vector<std::vector<double>>& weights() { return weights_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  const std::vector<int>& channels() const { return channels_; }

 private:
  std::vector<int> channels_;  // kStages + 1 entries, input first
  std::vector<std::vector<double>> weights_;
};

struct FinetuneConfig {
  int steps = 10;
  std::uint64_t seed = 0;
  int batch_size = 2;
  double learning_rate = 2e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;

  void validate() const;
};

struct FinetuneRecord {
  int step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

struct FinetuneResult {
  Generator generator;
  std::vector<FinetuneRecord> trace;
};

/// Adversarial finetuning of an exclusive clone of `gen` with a
/// non-saturating loss. Parameters the spec freezes, and all buffers, are
/// copied bit for bit; trainable ones are updated with Adam.
FinetuneResult finetune_frozen(const Generator& gen, const std::vector<Image>& images, const FreezeSpec& spec,
                               const FinetuneConfig& cfg);

std::string finetune_trace_csv(const std::vector<FinetuneRecord>& trace);

/// Every *.png in `dir`, sorted by file name, resized bilinearly to
/// resolution x resolution. Throws DomainError when none are found.
std::vector<Image> load_image_dataset(const std::filesystem::path& dir, int resolution);

/// Procedural stand-in domain: smooth two-colour gradients with a disc.
std::vector<Image> toy_image_dataset(int count, int resolution, std::uint64_t seed);

}  // namespace stylemix
