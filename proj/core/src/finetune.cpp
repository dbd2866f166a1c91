#include "stylemix/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "stylemix/errors.hpp"
#include "stylemix/image_io.hpp"
#include "stylemix/nn.hpp"
#include "stylemix/spatial_ops.hpp"
#include "stylemix/synthesis_grad.hpp"

namespace stylemix {

namespace {

constexpr int kKernel = 3;

bool pools(const Tensor4& t) { return t.height() >= 2 && t.width() >= 2; }

struct Adam {
  double lr;
  double beta1;
  double beta2;
  int t = 0;
  std::vector<std::vector<double>> m{};
  std::vector<std::vector<double>> v{};

  void step(std::vector<std::vector<double>>& params, const std::vector<std::vector<double>>& grads) {
    if (m.empty()) {
      for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
      }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < params[k].size(); ++i) {
        const double g = grads[k][i];
        m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
        v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
        params[k][i] -= lr * (m[k][i] / bc1) / (std::sqrt(v[k][i] / bc2) + 1e-8);
      }
  }
};

std::vector<std::vector<double>> zeros_like(const std::vector<std::vector<double>>& p) {
  std::vector<std::vector<double>> out;
  out.reserve(p.size());
  for (const auto& v : p) out.emplace_back(v.size(), 0.0);
  return out;
}

}  // namespace

bool FreezeSpec::is_trainable(const std::string& name, int num_layers) const {
  if (is_buffer(name)) return false;
  if (is_mapping_parameter(name)) return !freeze_mapping;
  const auto layer = parameter_layer(name, num_layers);
  if (!layer) return false;
  if (trainable_layer_set && !trainable_layer_set->contains(*layer)) return false;
  if (is_affine_parameter(name)) return !freeze_affine;
  return true;
}

std::vector<std::string> FreezeSpec::trainable_parameters(const Generator& gen) const {
  std::vector<std::string> out;
  for (const auto& [name, p] : gen.parameters())
    if (is_trainable(name, gen.num_layers())) out.push_back(name);
  return out;
}

void FreezeSpec::validate(const Generator& gen) const {
  if (trainable_layer_set)
    for (int l : *trainable_layer_set)
      if (l < 0 || l >= gen.num_layers()) throw ConfigError("trainable layer " + std::to_string(l) + " out of range");
  if (trainable_parameters(gen).empty()) throw ConfigError("freeze spec leaves no trainable parameter");
}

Discriminator::Discriminator(int resolution, std::uint64_t seed) : channels_{3, 16, 32, 32, 1} {
  if (resolution < 1) throw ConfigError("discriminator resolution must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < kStages; ++s) {
    const int fan_in = channels_[s] * kKernel * kKernel;
    const double stddev = std::sqrt(2.0 / fan_in);
    std::vector<double> w(static_cast<std::size_t>(channels_[s + 1]) * fan_in);
    for (double& x : w) x = stddev * normal(rng);
    weights_.push_back(std::move(w));
  }
}

double Discriminator::logit(const Image& img) const { return backward(img, 0.0, nullptr, nullptr); }

double Discriminator::backward(const Image& img, double d_logit, std::vector<std::vector<double>>* d_weights,
                               Tensor4* d_image) const {
  std::vector<Tensor4> inputs;
  std::vector<Tensor4> pre;
  Tensor4 x = img.tensor();
  for (int s = 0; s < kStages; ++s) {
    inputs.push_back(x);
    Tensor4 y = nn::conv2d(x, weights_[s], channels_[s + 1], kKernel);
    if (s + 1 < kStages) {
      pre.push_back(y);
      nn::leaky_relu_inplace(y, 1.0);
      if (pools(y)) y = nn::avg_pool2x(y);
    }
    x = std::move(y);
  }
  double sum = 0.0;
  for (double v : x.values()) sum += v;
  const double out = sum / static_cast<double>(x.size());
  if (!d_weights && !d_image) return out;

  Tensor4 g(x.batch(), x.channels(), x.height(), x.width(), d_logit / static_cast<double>(x.size()));
  for (int s = kStages - 1; s >= 0; --s) {
    if (s + 1 < kStages) {
      const Tensor4& p = pre[s];
      if (pools(p)) g = nn::avg_pool2x_grad(g, p.height(), p.width());
      nn::leaky_relu_grad_inplace(p, g, 1.0);
    }
    if (d_weights) nn::conv2d_grad_weights(inputs[s], g, kKernel, (*d_weights)[s]);
    if (s > 0 || d_image) g = nn::conv2d_grad_input(g, weights_[s], channels_[s], kKernel);
  }
  if (d_image) *d_image = std::move(g);
  return out;
}

void FinetuneConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("Adam betas must lie in [0, 1)");
}

FinetuneResult finetune_frozen(const Generator& gen, const std::vector<Image>& images, const FreezeSpec& spec,
                               const FinetuneConfig& cfg) {
  cfg.validate();
  spec.validate(gen);
  if (images.empty()) throw DomainError("finetune dataset is empty");
  const int res = gen.output_resolution();
  for (const auto& img : images)
    if (img.height() != res || img.width() != res) throw DomainError("dataset images must match the output resolution");

  const auto& gcfg = gen.config();
  const int layers = gen.num_layers();
  const auto names = spec.trainable_parameters(gen);
  const bool need_affine_grad = !spec.freeze_affine || !spec.freeze_mapping;

  // Double-precision master copies of the trainable parameters.
  std::vector<std::vector<double>> master;
  for (const auto& n : names) {
    const auto& v = gen.parameter(n).values;
    master.emplace_back(v.begin(), v.end());
  }

  ParameterSet params = gen.parameters();
  Generator current = gen;
  Discriminator disc(res, cfg.seed ^ 0x5eedd15cULL);
  Adam g_opt{cfg.learning_rate, cfg.beta1, cfg.beta2};
  Adam d_opt{cfg.learning_rate, cfg.beta1, cfg.beta2};
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);

  FinetuneResult result{gen, {}};
  for (int step = 0; step < cfg.steps; ++step) {
    FinetuneRecord rec;
    rec.step = step;

    struct Fake {
      LatentCode z;
      StyleStack styles;
      StyleCoeffs coeffs;
      SynthesisTrace trace;
    };
    std::vector<Fake> fakes;
    std::vector<const Image*> reals;
    for (int b = 0; b < cfg.batch_size; ++b) {
      Fake f;
      f.z = current.sample_latent(rng());
      f.styles = expand_to_stack(current.map_latent(f.z), layers);
      f.coeffs = current.styles_to_coeffs(f.styles);
      f.trace = trace_synthesis(current, f.coeffs);
      fakes.push_back(std::move(f));
      reals.push_back(&images[pick(rng)]);
    }
    const double inv_b = 1.0 / cfg.batch_size;

    // Critic update: softplus(D(fake)) + softplus(-D(real)).
    auto d_grads = zeros_like(disc.weights());
    for (int b = 0; b < cfg.batch_size; ++b) {
      const double lf = disc.logit(fakes[b].trace.image);
      const double lr = disc.logit(*reals[b]);
      rec.d_loss += inv_b * (nn::softplus(lf) + nn::softplus(-lr));
      disc.backward(fakes[b].trace.image, inv_b * nn::sigmoid(lf), &d_grads, nullptr);
      disc.backward(*reals[b], -inv_b * nn::sigmoid(-lr), &d_grads, nullptr);
    }
    d_opt.step(disc.weights(), d_grads);

    // Generator update: softplus(-D(fake)).
    ParameterGrads grads;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& f = fakes[b];
      Tensor4 d_img;
      const double lf = disc.backward(f.trace.image, -inv_b * nn::sigmoid(-disc.logit(f.trace.image)), nullptr, &d_img);
      rec.g_loss += inv_b * nn::softplus(-lf);
      auto back = backprop_synthesis(current, f.trace, f.coeffs, d_img, true);
      for (auto& [n, g] : back.d_params) {
        auto& slot = grads[n];
        if (slot.empty()) slot.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
      }
      if (need_affine_grad) {
        const auto d_rows = backprop_affine(current, f.styles, back.d_coeffs, &grads);
        if (!spec.freeze_mapping) {
          std::vector<double> d_w(gcfg.latent_dim, 0.0);
          for (const auto& row : d_rows)
            for (int k = 0; k < gcfg.latent_dim; ++k) d_w[k] += row[k];
          backprop_mapping(current, trace_mapping(current, f.z), d_w, grads);
        }
      }
    }

    std::vector<std::vector<double>> flat_grads;
    for (std::size_t k = 0; k < names.size(); ++k) {
      auto it = grads.find(names[k]);
      flat_grads.push_back(it != grads.end() ? it->second : std::vector<double>(master[k].size(), 0.0));
    }
    g_opt.step(master, flat_grads);
    for (std::size_t k = 0; k < names.size(); ++k) {
      auto& dst = params.at(names[k]).values;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(master[k][i]);
    }
    current = Generator(gcfg, params);
    result.trace.push_back(rec);
  }
  result.generator = std::move(current);
  return result;
}

std::string finetune_trace_csv(const std::vector<FinetuneRecord>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "step,d_loss,g_loss\n";
  for (const auto& r : trace) out << r.step << ',' << r.d_loss << ',' << r.g_loss << '\n';
  return out.str();
}

std::vector<Image> load_image_dataset(const std::filesystem::path& dir, int resolution) {
  if (!std::filesystem::is_directory(dir)) throw DomainError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DomainError("dataset directory has no PNG files: " + dir.string());
  std::vector<Image> out;
  for (const auto& f : files) {
    Image img = read_png(f);
    if (img.height() != resolution || img.width() != resolution)
      img = Image(resize_tensor(img.tensor(), resolution, resolution, ResizeMethod::bilinear));
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Image> toy_image_dataset(int count, int resolution, std::uint64_t seed) {
  if (count < 1 || resolution < 1) throw DomainError("toy dataset needs positive count and resolution");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.25, 0.75);
  std::vector<Image> out;
  for (int n = 0; n < count; ++n) {
    double c0[3], c1[3], disc[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = u(rng);
      c1[c] = u(rng);
      disc[c] = u(rng);
    }
    const double cy = pos(rng) * resolution;
    const double cx = pos(rng) * resolution;
    const double radius = 0.15 * resolution + 0.1 * resolution * (u(rng) + 1.0);
    Image img(resolution, resolution);
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) {
        const double t = static_cast<double>(x + y) / (2.0 * resolution);
        const bool inside = std::hypot(y + 0.5 - cy, x + 0.5 - cx) < radius;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = inside ? disc[c] : (1.0 - t) * c0[c] + t * c1[c];
      }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace stylemix
