#include "stylemix/synthesis_grad.hpp"

#include <cmath>

#include "stylemix/errors.hpp"
#include "stylemix/nn.hpp"

namespace stylemix {

namespace {

constexpr double kGain = 1.4142135623730951;

std::string prefix(int layer) { return "synthesis.layer" + std::to_string(layer) + "."; }

std::vector<double>& grad_slot(ParameterGrads& grads, const Generator& gen, const std::string& name) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, std::vector<double>(gen.parameter(name).count(), 0.0)).first;
  return it->second;
}

}  // namespace

SynthesisTrace trace_synthesis(const Generator& gen, const StyleCoeffs& coeffs) {
  const auto& cfg = gen.config();
  SynthesisTrace tr;
  Tensor4 x = gen.const_input();
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int cin = cfg.layer_in_channels(i);
    const int cout = cfg.channels_per_layer[i];
    const auto p = prefix(i);
    Tensor4 in = cfg.upsamples(i) ? nn::upsample_nearest2x(x) : x;
    auto mw = modulate_weights(gen.parameter(p + "conv.weight"), coeffs.per_layer.at(i), cout, cin);
    Tensor4 y = nn::conv2d(in, mw.effective, cout, 3);
    const auto& noise = gen.parameter(p + "noise.map");
    const double strength = gen.parameter(p + "noise.strength").values[0];
    const auto& bias = gen.parameter(p + "conv.bias").values;
    for (int o = 0; o < cout; ++o)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx) y.at(0, o, yy, xx) += strength * noise_at(noise, yy, xx) + bias[o];
    tr.pre_activations.push_back(y);
    nn::leaky_relu_inplace(y, kGain);
    tr.conv_inputs.push_back(std::move(in));
    tr.weights.push_back(std::move(mw));
    x = std::move(y);
  }
  tr.image = gen.to_image(x);
  tr.last_features = std::move(x);
  return tr;
}

SynthesisGradient backprop_synthesis(const Generator& gen, const SynthesisTrace& tr, const StyleCoeffs& coeffs,
                                     const Tensor4& d_image, bool with_params) {
  const auto& cfg = gen.config();
  if (!d_image.same_shape(tr.image.tensor())) throw DomainError("image gradient has the wrong shape");

  SynthesisGradient out;
  out.d_coeffs.per_layer.resize(cfg.num_layers);

  // RGB head.
  const Tensor4& f = tr.last_features;
  const int c_last = f.channels();
  const double rgb_scale = 1.0 / std::sqrt(static_cast<double>(c_last));
  const auto& w_rgb = gen.parameter("to_rgb.weight").values;
  Tensor4 df(1, c_last, f.height(), f.width());
  std::vector<double>* dw_rgb = with_params ? &grad_slot(out.d_params, gen, "to_rgb.weight") : nullptr;
  std::vector<double>* db_rgb = with_params ? &grad_slot(out.d_params, gen, "to_rgb.bias") : nullptr;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        const double v = tr.image.at(c, y, x);
        const double da = d_image.at(0, c, y, x) * (1.0 - v * v);
        if (da == 0.0) continue;
        for (int k = 0; k < c_last; ++k) {
          df.at(0, k, y, x) += static_cast<double>(w_rgb[c * c_last + k]) * rgb_scale * da;
          if (dw_rgb) (*dw_rgb)[c * c_last + k] += da * f.at(0, k, y, x) * rgb_scale;
        }
        if (db_rgb) (*db_rgb)[c] += da;
      }

  for (int i = cfg.num_layers - 1; i >= 0; --i) {
    const int cin = cfg.layer_in_channels(i);
    const int cout = cfg.channels_per_layer[i];
    const auto p = prefix(i);
    const auto& mw = tr.weights[i];
    const auto& in = tr.conv_inputs[i];

    nn::leaky_relu_grad_inplace(tr.pre_activations[i], df, kGain);
    const Tensor4& dy = df;

    if (with_params) {
      auto& db = grad_slot(out.d_params, gen, p + "conv.bias");
      auto& ds = grad_slot(out.d_params, gen, p + "noise.strength");
      const auto& noise = gen.parameter(p + "noise.map");
      for (int o = 0; o < cout; ++o)
        for (int yy = 0; yy < dy.height(); ++yy)
          for (int xx = 0; xx < dy.width(); ++xx) {
            const double g = dy.at(0, o, yy, xx);
            db[o] += g;
            ds[0] += g * noise_at(noise, yy, xx);
          }
    }

    std::vector<double> d_eff(mw.effective.size(), 0.0);
    nn::conv2d_grad_weights(in, dy, 3, d_eff);
    Tensor4 dx = nn::conv2d_grad_input(dy, mw.effective, cin, 3);

    // Through demodulation and modulation.
    const auto& w_raw = gen.parameter(p + "conv.weight").values;
    const auto& sigma = coeffs.per_layer[i];
    const double scale = 1.0 / std::sqrt(static_cast<double>(cin) * 9);
    auto& d_sigma = out.d_coeffs.per_layer[i];
    d_sigma.assign(cin, 0.0);
    std::vector<double>* dw = with_params ? &grad_slot(out.d_params, gen, p + "conv.weight") : nullptr;
    for (int o = 0; o < cout; ++o) {
      const std::size_t begin = static_cast<std::size_t>(o) * cin * 9;
      const std::size_t end = begin + static_cast<std::size_t>(cin) * 9;
      double dot = 0.0;
      for (std::size_t j = begin; j < end; ++j) dot += d_eff[j] * mw.modulated[j];
      const double dmod = mw.demod[o];
      const double d3 = dmod * dmod * dmod;
      for (int c = 0; c < cin; ++c)
        for (int k = 0; k < 9; ++k) {
          const std::size_t j = begin + static_cast<std::size_t>(c) * 9 + k;
          const double d_mod = dmod * d_eff[j] - d3 * mw.modulated[j] * dot;
          d_sigma[c] += d_mod * scale * w_raw[j];
          if (dw) (*dw)[j] += d_mod * scale * sigma[c];
        }
    }

    df = cfg.upsamples(i) ? nn::upsample_nearest2x_grad(dx) : std::move(dx);
  }

  if (with_params) {
    auto& dc = grad_slot(out.d_params, gen, "synthesis.const");
    const auto v = df.values();
    for (std::size_t j = 0; j < v.size(); ++j) dc[j] += v[j];
  }
  return out;
}

std::vector<std::vector<double>> backprop_affine(const Generator& gen, const StyleStack& styles,
                                                 const StyleCoeffs& d_coeffs, ParameterGrads* grads) {
  const auto& cfg = gen.config();
  const int d = cfg.latent_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::vector<double>> d_rows(cfg.num_layers, std::vector<double>(d, 0.0));
  for (int i = 0; i < cfg.num_layers; ++i) {
    const auto p = prefix(i);
    const auto& a = gen.parameter(p + "affine.weight").values;
    const auto& ds = d_coeffs.per_layer.at(i);
    const auto& w = styles.row(i).values;
    std::vector<double>* da = grads ? &grad_slot(*grads, gen, p + "affine.weight") : nullptr;
    std::vector<double>* db = grads ? &grad_slot(*grads, gen, p + "affine.bias") : nullptr;
    for (std::size_t c = 0; c < ds.size(); ++c) {
      const double g = ds[c];
      for (int k = 0; k < d; ++k) {
        d_rows[i][k] += g * scale * a[c * d + k];
        if (da) (*da)[c * d + k] += g * scale * w[k];
      }
      if (db) (*db)[c] += g;
    }
  }
  return d_rows;
}

MappingTrace trace_mapping(const Generator& gen, const LatentCode& z) {
  const auto& cfg = gen.config();
  const int d = cfg.latent_dim;
  MappingTrace tr;
  tr.z = z.values;
  double mean_sq = 0.0;
  for (double v : z.values) mean_sq += v * v;
  mean_sq /= d;
  tr.inv_norm = 1.0 / std::sqrt(mean_sq + 1e-8);
  std::vector<double> x(z.values);
  for (double& v : x) v *= tr.inv_norm;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 0; k < cfg.mapping_layers; ++k) {
    const auto& w = gen.parameter("mapping.fc" + std::to_string(k) + ".weight").values;
    const auto& b = gen.parameter("mapping.fc" + std::to_string(k) + ".bias").values;
    std::vector<double> pre(d), y(d);
    for (int o = 0; o < d; ++o) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += static_cast<double>(w[o * d + i]) * x[i];
      pre[o] = acc * scale + b[o];
      y[o] = kGain * (pre[o] >= 0.0 ? pre[o] : nn::kLeakySlope * pre[o]);
    }
    tr.inputs.push_back(std::move(x));
    tr.pre_activations.push_back(std::move(pre));
    x = std::move(y);
  }
  tr.output.values = std::move(x);
  return tr;
}

void backprop_mapping(const Generator& gen, const MappingTrace& tr, std::span<const double> d_w, ParameterGrads& grads) {
  const auto& cfg = gen.config();
  const int d = cfg.latent_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> g(d_w.begin(), d_w.end());
  for (int k = cfg.mapping_layers - 1; k >= 0; --k) {
    const auto name = "mapping.fc" + std::to_string(k);
    const auto& w = gen.parameter(name + ".weight").values;
    auto& dw = grad_slot(grads, gen, name + ".weight");
    auto& db = grad_slot(grads, gen, name + ".bias");
    const auto& pre = tr.pre_activations[k];
    const auto& x = tr.inputs[k];
    std::vector<double> dx(d, 0.0);
    for (int o = 0; o < d; ++o) {
      const double gp = g[o] * kGain * (pre[o] >= 0.0 ? 1.0 : nn::kLeakySlope);
      db[o] += gp;
      for (int i = 0; i < d; ++i) {
        dw[o * d + i] += gp * scale * x[i];
        dx[i] += gp * scale * w[o * d + i];
      }
    }
    g = std::move(dx);
  }
}

}  // namespace stylemix
