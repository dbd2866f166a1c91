#include "stylemix/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "stylemix/errors.hpp"
#include "stylemix/nn.hpp"

namespace stylemix {

namespace {

constexpr double kActivationGain = 1.4142135623730951;  // sqrt(2)
constexpr int kMeanStyleSamples = 512;
constexpr float kInitialNoiseStrength = 0.05F;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::string layer_prefix(int layer) { return "synthesis.layer" + std::to_string(layer) + "."; }

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError(std::string(what) + " has non-finite entries");
}

std::vector<double> mapping_mlp(const ParameterSet& params, const GeneratorConfig& cfg, std::span<const double> z) {
  const int d = cfg.latent_dim;
  double mean_sq = 0.0;
  for (double v : z) mean_sq += v * v;
  mean_sq /= d;
  const double inv_norm = 1.0 / std::sqrt(mean_sq + 1e-8);
  std::vector<double> x(z.begin(), z.end());
  for (double& v : x) v *= inv_norm;

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> y(d);
  for (int k = 0; k < cfg.mapping_layers; ++k) {
    const auto& w = params.at("mapping.fc" + std::to_string(k) + ".weight").values;
    const auto& b = params.at("mapping.fc" + std::to_string(k) + ".bias").values;
    for (int o = 0; o < d; ++o) {
      double acc = 0.0;
      const float* row = w.data() + static_cast<std::size_t>(o) * d;
      for (int i = 0; i < d; ++i) acc += static_cast<double>(row[i]) * x[i];
      const double pre = acc * scale + b[o];
      y[o] = kActivationGain * (pre >= 0.0 ? pre : nn::kLeakySlope * pre);
    }
    std::swap(x, y);
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------- config

void GeneratorConfig::validate() const {
  if (latent_dim <= 0) throw ConfigError("latent_dim must be positive");
  if (num_layers <= 0) throw ConfigError("num_layers must be positive");
  if (mapping_layers <= 0) throw ConfigError("mapping_layers must be positive");
  if (!is_power_of_two(base_resolution)) throw ConfigError("base_resolution must be a power of two");
  if (static_cast<int>(channels_per_layer.size()) != num_layers)
    throw ConfigError("channels_per_layer has " + std::to_string(channels_per_layer.size()) + " entries, expected " +
                      std::to_string(num_layers));
  for (int c : channels_per_layer)
    if (c <= 0) throw ConfigError("channel counts must be positive");
  for (std::size_t i = 0; i < upsample_layers.size(); ++i) {
    const int l = upsample_layers[i];
    if (l < 0 || l >= num_layers) throw ConfigError("upsample layer index out of range");
    if (i > 0 && upsample_layers[i - 1] >= l) throw ConfigError("upsample_layers must be strictly increasing");
  }
  if (upsample_layers.size() > 20) throw ConfigError("too many upsampling layers");
}

int GeneratorConfig::layer_resolution(int layer) const {
  int res = base_resolution;
  for (int l : upsample_layers)
    if (l <= layer) res *= 2;
  return res;
}

int GeneratorConfig::output_resolution() const { return layer_resolution(num_layers - 1); }

int GeneratorConfig::layer_in_channels(int layer) const {
  return layer == 0 ? channels_per_layer.front() : channels_per_layer.at(layer - 1);
}

bool GeneratorConfig::upsamples(int layer) const {
  return std::find(upsample_layers.begin(), upsample_layers.end(), layer) != upsample_layers.end();
}

GeneratorConfig GeneratorConfig::desk() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::tiny() {
  GeneratorConfig cfg;
  cfg.latent_dim = 8;
  cfg.num_layers = 3;
  cfg.base_resolution = 4;
  cfg.channels_per_layer = {6, 5, 4};
  cfg.upsample_layers = {2};
  cfg.mapping_layers = 2;
  cfg.rng_seed = 11;
  return cfg;
}

std::string config_to_json(const GeneratorConfig& cfg) {
  nlohmann::json j;
  j["latent_dim"] = cfg.latent_dim;
  j["num_layers"] = cfg.num_layers;
  j["base_resolution"] = cfg.base_resolution;
  j["channels_per_layer"] = cfg.channels_per_layer;
  j["upsample_layers"] = cfg.upsample_layers;
  j["mapping_layers"] = cfg.mapping_layers;
  j["rng_seed"] = cfg.rng_seed;
  return j.dump();
}

GeneratorConfig config_from_json(const std::string& text) {
  GeneratorConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.base_resolution = j.at("base_resolution").get<int>();
    cfg.channels_per_layer = j.at("channels_per_layer").get<std::vector<int>>();
    cfg.upsample_layers = j.at("upsample_layers").get<std::vector<int>>();
    cfg.mapping_layers = j.at("mapping_layers").get<int>();
    cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad generator config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- styles

StyleStack::StyleStack(std::vector<StyleVector> rows) : rows_(std::move(rows)) {}

StyleVector& StyleStack::mutable_row(int i) {
  in_w_ = false;
  return rows_.at(i);
}

void StyleStack::set_row(int i, StyleVector row) {
  in_w_ = false;
  rows_.at(i) = std::move(row);
}

std::vector<double> StyleStack::flattened() const {
  std::vector<double> flat;
  for (const auto& r : rows_) flat.insert(flat.end(), r.values.begin(), r.values.end());
  return flat;
}

StyleStack StyleStack::from_flat(std::span<const double> flat, int num_layers, int width) {
  if (flat.size() != static_cast<std::size_t>(num_layers) * width) throw DomainError("flat style size mismatch");
  std::vector<StyleVector> rows(num_layers);
  for (int i = 0; i < num_layers; ++i) {
    const auto part = flat.subspan(static_cast<std::size_t>(i) * width, width);
    rows[i].values.assign(part.begin(), part.end());
  }
  return StyleStack(std::move(rows));
}

StyleStack expand_to_stack(const StyleVector& w, int num_layers) {
  StyleStack s(std::vector<StyleVector>(num_layers, w));
  s.in_w_ = true;
  return s;
}

std::size_t StyleCoeffs::total_size() const {
  std::size_t n = 0;
  for (const auto& l : per_layer) n += l.size();
  return n;
}

std::vector<double> StyleCoeffs::flattened() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& l : per_layer) flat.insert(flat.end(), l.begin(), l.end());
  return flat;
}

StyleCoeffs StyleCoeffs::unflatten(std::span<const double> flat, const StyleCoeffs& like) {
  if (flat.size() != like.total_size()) throw DomainError("flat coefficient size mismatch");
  StyleCoeffs out;
  std::size_t off = 0;
  for (const auto& l : like.per_layer) {
    out.per_layer.emplace_back(flat.begin() + off, flat.begin() + off + l.size());
    off += l.size();
  }
  return out;
}

// ---------------------------------------------------------------- parameters

std::size_t Parameter::count() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::optional<int> parameter_layer(const std::string& name, int num_layers) {
  if (name.starts_with("synthesis.const")) return 0;
  if (name.starts_with("to_rgb.")) return num_layers - 1;
  constexpr std::string_view prefix = "synthesis.layer";
  if (name.starts_with(prefix)) {
    const auto dot = name.find('.', prefix.size());
    return std::stoi(name.substr(prefix.size(), dot - prefix.size()));
  }
  return std::nullopt;
}

bool is_mapping_parameter(const std::string& name) { return name.starts_with("mapping."); }
bool is_affine_parameter(const std::string& name) { return name.find(".affine.") != std::string::npos; }
bool is_buffer(const std::string& name) { return name == "mapping.w_avg" || name.ends_with(".noise.map"); }

std::map<std::string, std::vector<int>> expected_parameter_shapes(const GeneratorConfig& cfg) {
  std::map<std::string, std::vector<int>> shapes;
  const int d = cfg.latent_dim;
  for (int k = 0; k < cfg.mapping_layers; ++k) {
    shapes["mapping.fc" + std::to_string(k) + ".weight"] = {d, d};
    shapes["mapping.fc" + std::to_string(k) + ".bias"] = {d};
  }
  shapes["mapping.w_avg"] = {d};
  shapes["synthesis.const"] = {cfg.channels_per_layer.front(), cfg.base_resolution, cfg.base_resolution};
  for (int i = 0; i < cfg.num_layers; ++i) {
    const auto p = layer_prefix(i);
    const int cin = cfg.layer_in_channels(i);
    const int cout = cfg.channels_per_layer[i];
    const int res = cfg.layer_resolution(i);
    shapes[p + "affine.weight"] = {cin, d};
    shapes[p + "affine.bias"] = {cin};
    shapes[p + "conv.weight"] = {cout, cin, 3, 3};
    shapes[p + "conv.bias"] = {cout};
    shapes[p + "noise.map"] = {res, res};
    shapes[p + "noise.strength"] = {1};
  }
  shapes["to_rgb.weight"] = {3, cfg.channels_per_layer.back()};
  shapes["to_rgb.bias"] = {3};
  return shapes;
}

// ---------------------------------------------------------------- generator

Generator::Generator(GeneratorConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& [name, shape] : expected_parameter_shapes(config_)) {
    Parameter p;
    p.shape = shape;
    p.values.assign(p.count(), 0.0F);
    if (name.ends_with("affine.bias")) {
      std::fill(p.values.begin(), p.values.end(), 1.0F);
    } else if (name.ends_with(".weight") || name == "synthesis.const" || name.ends_with("noise.map")) {
      for (float& v : p.values) v = static_cast<float>(normal(rng));
    } else if (name.ends_with("noise.strength")) {
      p.values[0] = kInitialNoiseStrength;
    }
    params_.emplace(name, std::move(p));
  }

  // Mean style tracked from a fixed seeded batch.
  std::mt19937_64 zrng(config_.rng_seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<double> mean(config_.latent_dim, 0.0);
  std::vector<double> z(config_.latent_dim);
  for (int s = 0; s < kMeanStyleSamples; ++s) {
    for (double& v : z) v = normal(zrng);
    const auto w = mapping_mlp(params_, config_, z);
    for (int i = 0; i < config_.latent_dim; ++i) mean[i] += w[i];
  }
  auto& w_avg = params_.at("mapping.w_avg").values;
  for (int i = 0; i < config_.latent_dim; ++i) w_avg[i] = static_cast<float>(mean[i] / kMeanStyleSamples);
}

Generator::Generator(GeneratorConfig config, ParameterSet params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto expected = expected_parameter_shapes(config_);
  for (const auto& [name, p] : params_) {
    const auto it = expected.find(name);
    if (it == expected.end()) throw IntegrityError("unknown parameter '" + name + "'");
    if (it->second != p.shape) throw IntegrityError("parameter '" + name + "' has the wrong shape");
    if (p.values.size() != p.count()) throw IntegrityError("parameter '" + name + "' has the wrong element count");
  }
  for (const auto& [name, shape] : expected)
    if (!params_.contains(name)) throw IntegrityError("missing parameter '" + name + "'");
}

const Parameter& Generator::parameter(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw DomainError("no parameter named '" + name + "'");
  return it->second;
}

StyleVector Generator::mean_style() const {
  const auto& v = params_.at("mapping.w_avg").values;
  return StyleVector{std::vector<double>(v.begin(), v.end())};
}

StyleVector Generator::map_latent(const LatentCode& z, double truncation) const {
  if (static_cast<int>(z.values.size()) != config_.latent_dim) throw DomainError("latent has the wrong length");
  check_finite(z.values, "latent");
  if (!(truncation >= 0.0 && truncation <= 1.0)) throw DomainError("truncation must lie in [0, 1]");
  const StyleVector avg = mean_style();
  if (truncation == 0.0) return avg;
  StyleVector w{mapping_mlp(params_, config_, z.values)};
  if (truncation == 1.0) return w;
  for (int i = 0; i < config_.latent_dim; ++i) w.values[i] = avg.values[i] + truncation * (w.values[i] - avg.values[i]);
  return w;
}

std::vector<StyleVector> Generator::map_latents(std::span<const LatentCode> zs, double truncation) const {
  std::vector<StyleVector> out;
  out.reserve(zs.size());
  for (const auto& z : zs) out.push_back(map_latent(z, truncation));
  return out;
}

std::vector<double> Generator::layer_coeffs(int layer, const StyleVector& w) const {
  const int d = config_.latent_dim;
  if (static_cast<int>(w.values.size()) != d) throw DomainError("style row has the wrong width");
  const auto p = layer_prefix(layer);
  const auto& a = params_.at(p + "affine.weight").values;
  const auto& b = params_.at(p + "affine.bias").values;
  const int width = config_.layer_in_channels(layer);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> sigma(width);
  for (int c = 0; c < width; ++c) {
    double acc = 0.0;
    const float* row = a.data() + static_cast<std::size_t>(c) * d;
    for (int i = 0; i < d; ++i) acc += static_cast<double>(row[i]) * w.values[i];
    sigma[c] = acc * scale + b[c];
  }
  return sigma;
}

StyleCoeffs Generator::styles_to_coeffs(const StyleStack& styles) const {
  if (styles.num_layers() != config_.num_layers)
    throw DomainError("style stack has " + std::to_string(styles.num_layers()) + " rows, expected " +
                      std::to_string(config_.num_layers));
  StyleCoeffs out;
  for (int i = 0; i < config_.num_layers; ++i) out.per_layer.push_back(layer_coeffs(i, styles.row(i)));
  return out;
}

void Generator::check_coeffs(const StyleCoeffs& coeffs) const {
  if (static_cast<int>(coeffs.per_layer.size()) != config_.num_layers) throw DomainError("coefficient layer count mismatch");
  for (int i = 0; i < config_.num_layers; ++i) {
    if (static_cast<int>(coeffs.per_layer[i].size()) != config_.layer_in_channels(i))
      throw DomainError("coefficient width mismatch at layer " + std::to_string(i));
    check_finite(coeffs.per_layer[i], "style coefficients");
  }
}

Tensor4 Generator::const_input() const {
  const auto& c = params_.at("synthesis.const");
  Tensor4 t(1, c.shape[0], c.shape[1], c.shape[2]);
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.values[i];
  return t;
}

ModulatedWeights modulate_weights(const Parameter& weight, std::span<const double> coeffs, int out_channels,
                                  int in_channels) {
  constexpr int k2 = 9;
  ModulatedWeights mw;
  mw.modulated.resize(weight.values.size());
  mw.effective.resize(weight.values.size());
  mw.demod.resize(out_channels);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_channels) * k2);
  for (int o = 0; o < out_channels; ++o) {
    double sum_sq = 0.0;
    for (int c = 0; c < in_channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(o) * in_channels + c) * k2;
      for (int k = 0; k < k2; ++k) {
        const double v = scale * weight.values[base + k] * coeffs[c];
        mw.modulated[base + k] = v;
        sum_sq += v * v;
      }
    }
    const double d = 1.0 / std::sqrt(sum_sq + kDemodEpsilon);
    mw.demod[o] = d;
    const std::size_t begin = static_cast<std::size_t>(o) * in_channels * k2;
    for (std::size_t i = begin; i < begin + static_cast<std::size_t>(in_channels) * k2; ++i)
      mw.effective[i] = mw.modulated[i] * d;
  }
  return mw;
}

double noise_at(const Parameter& noise_map, int y, int x) {
  const int h = noise_map.shape[0];
  const int w = noise_map.shape[1];
  const int yy = ((y % h) + h) % h;
  const int xx = ((x % w) + w) % w;
  return noise_map.values[static_cast<std::size_t>(yy) * w + xx];
}

Tensor4 Generator::run_layer(int layer, std::span<const double> coeffs, const Tensor4& input) const {
  if (layer < 0 || layer >= config_.num_layers) throw DomainError("layer index out of range");
  const int cin = config_.layer_in_channels(layer);
  const int cout = config_.channels_per_layer[layer];
  if (input.channels() != cin) throw DomainError("layer input has the wrong channel count");
  if (static_cast<int>(coeffs.size()) != cin) throw DomainError("coefficient width mismatch");

  const auto p = layer_prefix(layer);
  const Tensor4 x = config_.upsamples(layer) ? nn::upsample_nearest2x(input) : input;
  const auto mw = modulate_weights(params_.at(p + "conv.weight"), coeffs, cout, cin);
  Tensor4 y = nn::conv2d(x, mw.effective, cout, 3);

  const auto& noise = params_.at(p + "noise.map");
  const double strength = params_.at(p + "noise.strength").values[0];
  const auto& bias = params_.at(p + "conv.bias").values;
  for (int b = 0; b < y.batch(); ++b)
    for (int o = 0; o < cout; ++o)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx) y.at(b, o, yy, xx) += strength * noise_at(noise, yy, xx) + bias[o];
  nn::leaky_relu_inplace(y, kActivationGain);
  return y;
}

Image Generator::to_image(const Tensor4& f) const {
  const auto& w = params_.at("to_rgb.weight").values;
  const auto& b = params_.at("to_rgb.bias").values;
  const int c_in = f.channels();
  if (c_in != config_.channels_per_layer.back()) throw DomainError("to_image: wrong channel count");
  const double scale = 1.0 / std::sqrt(static_cast<double>(c_in));
  Image img(f.height(), f.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        double acc = 0.0;
        for (int k = 0; k < c_in; ++k) acc += static_cast<double>(w[c * c_in + k]) * f.at(0, k, y, x);
        img.at(c, y, x) = std::tanh(acc * scale + b[c]);
      }
  return img;
}

SynthesisResult Generator::synthesize(const StyleCoeffs& coeffs, const HookSet& hooks) const {
  check_coeffs(coeffs);
  for (int l : hooks.capture)
    if (l < 0 || l >= config_.num_layers) throw DomainError("capture hook references invalid layer");
  for (const auto& [l, f] : hooks.inject) {
    if (l < 0 || l >= config_.num_layers) throw DomainError("inject hook references invalid layer");
    if (f.data.channels() != config_.channels_per_layer[l])
      throw InjectionError("feature map for layer " + std::to_string(l) + " has " + std::to_string(f.data.channels()) +
                           " channels, expected " + std::to_string(config_.channels_per_layer[l]));
    if (f.data.batch() != 1) throw InjectionError("injected feature maps must have batch 1");
  }

  SynthesisResult result;
  Tensor4 x = const_input();
  for (int i = 0; i < config_.num_layers; ++i) {
    x = run_layer(i, coeffs.per_layer[i], x);
    if (hooks.capture.contains(i)) result.captured[i] = FeatureMap{i, x};
    if (hooks.transform) {
      hooks.transform(i, x);
      if (x.channels() != config_.channels_per_layer[i] || x.batch() != 1)
        throw InjectionError("transform hook changed the channel count at layer " + std::to_string(i));
    }
    if (const auto it = hooks.inject.find(i); it != hooks.inject.end()) x = it->second.data;
  }
  result.image = to_image(x);
  return result;
}

SynthesisResult Generator::synthesize(const StyleStack& styles, const HookSet& hooks) const {
  return synthesize(styles_to_coeffs(styles), hooks);
}

LatentCode Generator::sample_latent(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode z;
  z.values.resize(config_.latent_dim);
  for (double& v : z.values) v = normal(rng);
  return z;
}

Generator swap_weights(const Generator& gen_a, const Generator& gen_b, const std::set<int>& layer_set) {
  if (!(gen_a.config() == gen_b.config())) throw ConfigError("swap_weights requires identical configs");
  const int layers = gen_a.num_layers();
  for (int l : layer_set)
    if (l < 0 || l >= layers) throw ConfigError("swap layer index out of range");
  ParameterSet params = gen_a.parameters();
  for (auto& [name, p] : params) {
    const auto layer = parameter_layer(name, layers);
    if (layer && layer_set.contains(*layer)) p = gen_b.parameters().at(name);
  }
  return Generator(gen_a.config(), std::move(params));
}

}  // namespace stylemix
