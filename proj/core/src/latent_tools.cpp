#include "stylemix/latent_tools.hpp"

#include <cmath>
#include <random>

#include "stylemix/errors.hpp"

namespace stylemix {

namespace {

// Reflect an index into [0, n) with period 2(n - 1), endpoint not repeated.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = ((i % period) + period) % period;
  return m < n ? m : period - m;
}

void check_same_layout(const StyleCoeffs& a, const StyleCoeffs& b) {
  if (a.per_layer.size() != b.per_layer.size()) throw DomainError("coefficient layer count mismatch");
  for (std::size_t i = 0; i < a.per_layer.size(); ++i)
    if (a.per_layer[i].size() != b.per_layer[i].size()) throw DomainError("coefficient width mismatch");
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    const double v = std::exp(-0.5 * d * d / (sigma * sigma));
    k[d + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<StyleVector> smooth_latents(const std::vector<StyleVector>& seq, double kernel_sigma) {
  if (seq.empty()) throw DomainError("cannot smooth an empty latent sequence");
  if (!(kernel_sigma > 0.0)) throw DomainError("kernel_sigma must be positive");
  if (kernel_sigma < 1e-3) return seq;
  const std::size_t dim = seq.front().values.size();
  for (const auto& s : seq)
    if (s.values.size() != dim) throw DomainError("latent sequence has mixed widths");

  const auto kernel = gaussian_kernel(kernel_sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int n = static_cast<int>(seq.size());
  // Accumulate weighted differences from the centre sample so that constant
  // sequences are reproduced exactly.
  std::vector<StyleVector> out(seq);
  for (int j = 0; j < n; ++j) {
    std::vector<double> acc(dim, 0.0);
    for (int d = -radius; d <= radius; ++d) {
      const auto& src = seq[reflect_index(j + d, n)].values;
      const double w = kernel[d + radius];
      for (std::size_t k = 0; k < dim; ++k) acc[k] += w * (src[k] - seq[j].values[k]);
    }
    for (std::size_t k = 0; k < dim; ++k) out[j].values[k] += acc[k];
  }
  return out;
}

std::vector<LatentCode> sigma_fit_latents(const Generator& gen, int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentCode> zs(n_samples);
  for (auto& z : zs) {
    z.values.resize(gen.config().latent_dim);
    for (double& v : z.values) v = normal(rng);
  }
  return zs;
}

SigmaGaussian fit_sigma_gaussian(const Generator& gen, int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw DomainError("fit_sigma_gaussian needs at least two samples");
  const auto zs = sigma_fit_latents(gen, n_samples, seed);

  // Welford accumulation per coefficient.
  SigmaGaussian g;
  StyleCoeffs m2;
  int count = 0;
  for (const auto& z : zs) {
    const auto sigma = gen.styles_to_coeffs(expand_to_stack(gen.map_latent(z), gen.num_layers()));
    if (count == 0) {
      g.mean = sigma;
      m2 = sigma;
      for (auto& l : g.mean.per_layer) std::fill(l.begin(), l.end(), 0.0);
      for (auto& l : m2.per_layer) std::fill(l.begin(), l.end(), 0.0);
    }
    ++count;
    for (std::size_t i = 0; i < sigma.per_layer.size(); ++i)
      for (std::size_t c = 0; c < sigma.per_layer[i].size(); ++c) {
        const double x = sigma.per_layer[i][c];
        double& mean = g.mean.per_layer[i][c];
        const double delta = x - mean;
        mean += delta / count;
        m2.per_layer[i][c] += delta * (x - mean);
      }
  }
  g.variance = m2;
  for (auto& l : g.variance.per_layer)
    for (double& v : l) v = std::max(v / count, kVarianceFloor);
  g.sample_count = count;
  return g;
}

double gaussian_prior_loss(const StyleCoeffs& sigma, const SigmaGaussian& g) {
  check_same_layout(sigma, g.mean);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < sigma.per_layer.size(); ++i)
    for (std::size_t c = 0; c < sigma.per_layer[i].size(); ++c) {
      const double d = sigma.per_layer[i][c] - g.mean.per_layer[i][c];
      acc += d * d / g.variance.per_layer[i][c];
      ++n;
    }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

StyleCoeffs gaussian_prior_grad(const StyleCoeffs& sigma, const SigmaGaussian& g) {
  check_same_layout(sigma, g.mean);
  StyleCoeffs grad = sigma;
  const double n = static_cast<double>(sigma.total_size());
  for (std::size_t i = 0; i < sigma.per_layer.size(); ++i)
    for (std::size_t c = 0; c < sigma.per_layer[i].size(); ++c)
      grad.per_layer[i][c] = 2.0 * (sigma.per_layer[i][c] - g.mean.per_layer[i][c]) / g.variance.per_layer[i][c] / n;
  return grad;
}

StyleCoeffs sample_sigma(const SigmaGaussian& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  StyleCoeffs s = g.mean;
  for (std::size_t i = 0; i < s.per_layer.size(); ++i)
    for (std::size_t c = 0; c < s.per_layer[i].size(); ++c)
      s.per_layer[i][c] += std::sqrt(g.variance.per_layer[i][c]) * normal(rng);
  return s;
}

ParameterSet sigma_gaussian_to_aux(const SigmaGaussian& g) {
  ParameterSet aux;
  for (std::size_t i = 0; i < g.mean.per_layer.size(); ++i) {
    const auto& m = g.mean.per_layer[i];
    const auto& v = g.variance.per_layer[i];
    aux["aux.sigma_gaussian.mean." + std::to_string(i)] =
        Parameter{{static_cast<int>(m.size())}, std::vector<float>(m.begin(), m.end())};
    aux["aux.sigma_gaussian.variance." + std::to_string(i)] =
        Parameter{{static_cast<int>(v.size())}, std::vector<float>(v.begin(), v.end())};
  }
  aux["aux.sigma_gaussian.sample_count"] = Parameter{{1}, {static_cast<float>(g.sample_count)}};
  return aux;
}

std::optional<SigmaGaussian> sigma_gaussian_from_aux(const ParameterSet& aux) {
  const auto count = aux.find("aux.sigma_gaussian.sample_count");
  if (count == aux.end()) return std::nullopt;
  SigmaGaussian g;
  g.sample_count = static_cast<int>(count->second.values.at(0));
  for (int i = 0;; ++i) {
    const auto m = aux.find("aux.sigma_gaussian.mean." + std::to_string(i));
    const auto v = aux.find("aux.sigma_gaussian.variance." + std::to_string(i));
    if (m == aux.end() || v == aux.end()) break;
    g.mean.per_layer.emplace_back(m->second.values.begin(), m->second.values.end());
    g.variance.per_layer.emplace_back(v->second.values.begin(), v->second.values.end());
  }
  return g;
}

StyleStack pose_align(const StyleStack& target, const StyleStack& pose_source, int k_dims) {
  if (target.num_layers() != pose_source.num_layers() || target.num_layers() == 0)
    throw DomainError("pose_align: stacks must have the same shape");
  const int width = static_cast<int>(target.row(0).values.size());
  const int total = target.num_layers() * width;
  if (k_dims < 0 || k_dims > total) throw RangeError("k_dims must lie in [0, layers * latent_dim]");
  auto flat = target.flattened();
  const auto src = pose_source.flattened();
  if (src.size() != flat.size()) throw DomainError("pose_align: stacks must have the same shape");
  std::copy(src.begin(), src.begin() + k_dims, flat.begin());
  return StyleStack::from_flat(flat, target.num_layers(), width);
}

int default_pose_dims(int latent_dim) { return 4 * latent_dim; }

double mean_adjacent_distance(const std::vector<StyleVector>& seq) {
  if (seq.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < seq.size(); ++j) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < seq[j].values.size(); ++k) {
      const double d = seq[j + 1].values[k] - seq[j].values[k];
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(seq.size() - 1);
}

}  // namespace stylemix
