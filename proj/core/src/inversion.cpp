#include "stylemix/inversion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "stylemix/nn.hpp"
#include "stylemix/synthesis_grad.hpp"

namespace stylemix {

namespace {

double tensor_mse(const Tensor4& a, const Tensor4& b, Tensor4* grad_a) {
  const auto va = a.values();
  const auto vb = b.values();
  const double n = static_cast<double>(va.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    acc += d * d;
  }
  if (grad_a) {
    auto g = grad_a->values();
    for (std::size_t i = 0; i < va.size(); ++i) g[i] = 2.0 * (va[i] - vb[i]) / n;
  }
  return acc / n;
}

void check_same_dims(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw DomainError("images have different dimensions");
}

}  // namespace

PyramidMseLoss::PyramidMseLoss(int scales) : scales_(scales) {
  if (scales < 1) throw ConfigError("pyramid needs at least one scale");
}

double PyramidMseLoss::value(const Image& a, const Image& b) const {
  check_same_dims(a, b);
  Tensor4 pa = a.tensor();
  Tensor4 pb = b.tensor();
  double total = 0.0;
  for (int s = 0; s < scales_; ++s) {
    if (s > 0) {
      if (pa.height() < 2 || pa.width() < 2) break;
      pa = nn::avg_pool2x(pa);
      pb = nn::avg_pool2x(pb);
    }
    total += tensor_mse(pa, pb, nullptr);
  }
  return total;
}

double PyramidMseLoss::value_and_grad(const Image& a, const Image& b, Tensor4& grad_a) const {
  check_same_dims(a, b);
  std::vector<Tensor4> levels_a{a.tensor()};
  std::vector<Tensor4> levels_b{b.tensor()};
  for (int s = 1; s < scales_; ++s) {
    if (levels_a.back().height() < 2 || levels_a.back().width() < 2) break;
    levels_a.push_back(nn::avg_pool2x(levels_a.back()));
    levels_b.push_back(nn::avg_pool2x(levels_b.back()));
  }
  double total = 0.0;
  Tensor4 carry;
  for (int s = static_cast<int>(levels_a.size()) - 1; s >= 0; --s) {
    Tensor4 g(levels_a[s].batch(), levels_a[s].channels(), levels_a[s].height(), levels_a[s].width());
    total += tensor_mse(levels_a[s], levels_b[s], &g);
    if (!carry.empty()) {
      const auto up = nn::avg_pool2x_grad(carry, levels_a[s].height(), levels_a[s].width());
      auto gv = g.values();
      const auto uv = up.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += uv[i];
    }
    carry = std::move(g);
  }
  grad_a = std::move(carry);
  return total;
}

std::unique_ptr<PerceptualLoss> make_perceptual_loss(const std::string& name) {
  if (name == "pyramid-mse" || name.empty()) return std::make_unique<PyramidMseLoss>();
  throw ConfigError("no perceptual loss provider named '" + name + "'");
}

double mse_loss(const Image& a, const Image& b) {
  check_same_dims(a, b);
  return tensor_mse(a.tensor(), b.tensor(), nullptr);
}

double perceptual_loss(const PerceptualLoss* provider, const Image& a, const Image& b) {
  if (!provider) throw ConfigError("no perceptual loss provider registered");
  return provider->value(a, b);
}

void InversionConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (prior_weight < 0.0 || perceptual_weight < 0.0 || mse_weight < 0.0)
    throw ConfigError("loss weights must be non-negative");
  if (!(prior_weight > 0.0 || perceptual_weight > 0.0 || mse_weight > 0.0))
    throw ConfigError("at least one loss weight must be positive");
}

LossRecord inversion_objective(const Generator& gen, const StyleCoeffs& sigma, const Image& target,
                               const SigmaGaussian& g, const InversionConfig& cfg, const PerceptualLoss& perceptual,
                               StyleCoeffs* grad) {
  const auto trace = trace_synthesis(gen, sigma);
  const Image& img = trace.image;
  check_same_dims(img, target);

  LossRecord rec;
  Tensor4 d_mse(1, 3, img.height(), img.width());
  rec.mse = tensor_mse(img.tensor(), target.tensor(), grad ? &d_mse : nullptr);
  Tensor4 d_perc;
  rec.perceptual = grad ? perceptual.value_and_grad(img, target, d_perc) : perceptual.value(img, target);
  rec.prior = gaussian_prior_loss(sigma, g);
  rec.total = cfg.mse_weight * rec.mse + cfg.perceptual_weight * rec.perceptual + cfg.prior_weight * rec.prior;

  if (grad) {
    Tensor4 d_img(1, 3, img.height(), img.width());
    auto dv = d_img.values();
    const auto mv = d_mse.values();
    const auto pv = d_perc.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = cfg.mse_weight * mv[i] + cfg.perceptual_weight * pv[i];
    auto back = backprop_synthesis(gen, trace, sigma, d_img, false);
    const auto prior_grad = gaussian_prior_grad(sigma, g);
    for (std::size_t i = 0; i < back.d_coeffs.per_layer.size(); ++i)
      for (std::size_t c = 0; c < back.d_coeffs.per_layer[i].size(); ++c)
        back.d_coeffs.per_layer[i][c] += cfg.prior_weight * prior_grad.per_layer[i][c];
    *grad = std::move(back.d_coeffs);
  }
  return rec;
}

InversionResult invert(const Generator& gen, const Image& target, const SigmaGaussian& g, const InversionConfig& cfg,
                       const PerceptualLoss& perceptual) {
  cfg.validate();
  if (target.height() != gen.output_resolution() || target.width() != gen.output_resolution())
    throw DomainError("target image must match the generator output resolution");
  if (g.mean.per_layer.size() != static_cast<std::size_t>(gen.num_layers()))
    throw DomainError("sigma Gaussian was fitted for a different generator");

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  auto params = g.mean.flattened();
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);

  InversionResult result;
  result.sigma = g.mean;
  double best = std::numeric_limits<double>::infinity();

  for (int t = 0; t <= cfg.steps; ++t) {
    const auto sigma = StyleCoeffs::unflatten(params, g.mean);
    StyleCoeffs grad;
    LossRecord rec = inversion_objective(gen, sigma, target, g, cfg, perceptual, t < cfg.steps ? &grad : nullptr);
    rec.step = t;
    result.loss_trace.push_back(rec);
    if (!std::isfinite(rec.total)) throw NonFiniteLossError(result.loss_trace);
    if (rec.total < best) {
      best = rec.total;
      result.sigma = sigma;
      result.best_step = t;
    }
    if (t == cfg.steps) break;

    const auto flat_grad = grad.flattened();
    const double lr = cfg.step_size * 0.5 * (1.0 + std::cos(std::numbers::pi * t / cfg.steps));
    const double bc1 = 1.0 - std::pow(beta1, t + 1);
    const double bc2 = 1.0 - std::pow(beta2, t + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * flat_grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * flat_grad[i] * flat_grad[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
  result.final_image = gen.synthesize(result.sigma).image;
  return result;
}

std::string loss_trace_csv(const std::vector<LossRecord>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "step,total,mse,perceptual,prior\n";
  for (const auto& r : trace) out << r.step << ',' << r.total << ',' << r.mse << ',' << r.perceptual << ',' << r.prior << '\n';
  return out.str();
}

}  // namespace stylemix
