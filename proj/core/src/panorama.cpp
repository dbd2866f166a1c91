#include "stylemix/panorama.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stylemix/errors.hpp"
#include "stylemix/latent_tools.hpp"

namespace stylemix {

namespace {

bool horizontal(PanoramaAxis axis) { return axis == PanoramaAxis::horizontal; }

int along_extent(const Tensor4& t, PanoramaAxis axis) { return horizontal(axis) ? t.width() : t.height(); }

// dst[.., dst_begin + k] = src[.., src_begin + k] for k in [0, len) along the axis.
void copy_along(Tensor4& dst, int dst_begin, const Tensor4& src, int src_begin, int len, PanoramaAxis axis) {
  const int cross = horizontal(axis) ? dst.height() : dst.width();
  for (int c = 0; c < dst.channels(); ++c)
    for (int q = 0; q < cross; ++q)
      for (int k = 0; k < len; ++k) {
        if (horizontal(axis))
          dst.at(0, c, q, dst_begin + k) = src.at(0, c, q, src_begin + k);
        else
          dst.at(0, c, dst_begin + k, q) = src.at(0, c, src_begin + k, q);
      }
}

Tensor4 make_canvas(int channels, int image_extent, int span_extent, PanoramaAxis axis) {
  return horizontal(axis) ? Tensor4(1, channels, image_extent, span_extent)
                          : Tensor4(1, channels, span_extent, image_extent);
}

Plane ramp_plane(const std::vector<double>& ramp, int cross, PanoramaAxis axis) {
  const int along = static_cast<int>(ramp.size());
  Plane p = horizontal(axis) ? Plane(cross, along) : Plane(along, cross);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) p.at(y, x) = ramp[horizontal(axis) ? x : y];
  return p;
}

// Overwrites both constrained blocks of `canvas` with a standalone image's features.
void pin_blocks(Tensor4& canvas, const Tensor4& standalone, const SpanGeometry& g, PanoramaAxis axis) {
  copy_along(canvas, 0, standalone, 0, g.left_end, axis);
  copy_along(canvas, g.right_begin, standalone, g.right_begin - g.offset, g.span_extent - g.right_begin, axis);
}

Image crop_along(const Image& img, ColumnRange r, PanoramaAxis axis) {
  return horizontal(axis) ? crop_columns(img, r.begin, r.end) : crop_rows(img, r.begin, r.end);
}

std::map<int, FeatureMap> standalone_features(const Generator& gen, const StyleStack& styles) {
  HookSet hooks;
  hooks.capture = all_layers(gen.num_layers());
  return gen.synthesize(styles, hooks).captured;
}

Image build_span_from(const Generator& gen, const SpanPlan& plan, const std::map<int, FeatureMap>& left,
                      const std::map<int, FeatureMap>& right, bool same_styles) {
  const auto geo = span_geometry(gen, plan);
  const auto cl = gen.styles_to_coeffs(plan.left_styles);
  const auto cr = same_styles ? cl : gen.styles_to_coeffs(plan.right_styles);
  const PanoramaAxis axis = plan.axis;

  auto alpha_for = [&](const SpanGeometry& g) {
    if (!plan.mask) return ramp_plane(span_ramp(g), g.image_extent, axis);
    return horizontal(axis) ? plan.mask->resampled(g.image_extent, g.span_extent)
                            : plan.mask->resampled(g.span_extent, g.image_extent);
  };

  // Input canvas: the constant placed at both image offsets, joined by the first layer's blend weights.
  const Tensor4 c0 = gen.const_input();
  const int base = along_extent(c0, PanoramaAxis::horizontal);
  const int ratio = gen.output_resolution() / base;
  SpanGeometry g0;
  g0.image_extent = base;
  g0.offset = geo.back().offset / ratio;
  g0.span_extent = base + g0.offset;
  g0.left_end = (plan.constrained_left.end + ratio - 1) / ratio;
  g0.right_begin = plan.constrained_right.begin / ratio;
  Tensor4 lhs = make_canvas(c0.channels(), base, g0.span_extent, axis);
  Tensor4 rhs = lhs;
  copy_along(lhs, 0, c0, 0, base, axis);
  copy_along(lhs, base, c0, base - g0.offset, g0.span_extent - base, axis);
  copy_along(rhs, g0.offset, c0, 0, base, axis);
  copy_along(rhs, 0, c0, 0, g0.offset, axis);
  Tensor4 mixed = interpolate_tensors(lhs, rhs, alpha_for(g0));

  for (int i = 0; i < gen.num_layers(); ++i) {
    const SpanGeometry& g = geo[i];
    Tensor4 a = gen.run_layer(i, cl.per_layer[i], mixed);
    pin_blocks(a, left.at(i).data, g, axis);
    if (same_styles) {
      mixed = std::move(a);
      continue;
    }
    Tensor4 b = gen.run_layer(i, cr.per_layer[i], mixed);
    pin_blocks(b, right.at(i).data, g, axis);
    mixed = interpolate_tensors(a, b, alpha_for(g));
  }
  return gen.to_image(mixed);
}

std::vector<SpanGeometry> output_geometry(const Generator& gen, const PanoramaPlan& plan) {
  const int w = gen.output_resolution();
  const int off = span_offset(gen, plan.overlap_frac);
  const auto def = SpanPlan::make_default(gen, StyleStack{}, StyleStack{}, plan.overlap_frac, plan.axis);
  SpanGeometry g;
  g.image_extent = w;
  g.offset = off;
  g.span_extent = w + off;
  g.left_end = def.constrained_left.end;
  g.right_begin = def.constrained_right.begin;
  return {g};
}

// Image-local extent of the block shared by consecutive spans: [right_begin - offset, left_end).
ColumnRange shared_block(const SpanGeometry& g) { return {g.right_begin - g.offset, g.left_end}; }

double max_abs_diff_along(const Image& a, int a_begin, const Image& b, int b_begin, int len, PanoramaAxis axis,
                          int* first_bad) {
  double worst = 0.0;
  if (first_bad) *first_bad = -1;
  const int cross = horizontal(axis) ? a.height() : a.width();
  for (int k = 0; k < len; ++k)
    for (int c = 0; c < 3; ++c)
      for (int q = 0; q < cross; ++q) {
        const double va = horizontal(axis) ? a.at(c, q, a_begin + k) : a.at(c, a_begin + k, q);
        const double vb = horizontal(axis) ? b.at(c, q, b_begin + k) : b.at(c, b_begin + k, q);
        const double d = std::abs(va - vb);
        if ((d > 0.0 || std::signbit(va) != std::signbit(vb)) && first_bad && *first_bad < 0) *first_bad = k;
        worst = std::max(worst, d);
      }
  return worst;
}

StyleStack stack_of(const Generator& gen, const StyleVector& w) { return expand_to_stack(w, gen.num_layers()); }

}  // namespace

PanoramaAxis panorama_axis_from_string(const std::string& s) {
  if (s == "horizontal") return PanoramaAxis::horizontal;
  if (s == "vertical") return PanoramaAxis::vertical;
  throw DomainError("unknown panorama axis '" + s + "'");
}

std::string to_string(PanoramaAxis axis) { return horizontal(axis) ? "horizontal" : "vertical"; }

int span_offset(const Generator& gen, double overlap_frac) {
  if (!(overlap_frac > 0.0 && overlap_frac < 1.0)) throw DomainError("overlap_frac must lie in (0, 1)");
  const int w = gen.output_resolution();
  const double exact = (1.0 - overlap_frac) * w;
  const int off = static_cast<int>(std::lround(exact));
  const int ratio = w / gen.config().base_resolution;
  if (std::abs(exact - off) > 1e-9 || off <= 0 || off % ratio != 0)
    throw DomainError("overlap_frac gives an offset that is not integral at every layer");
  return off;
}

int span_extent(const Generator& gen, double overlap_frac) {
  return gen.output_resolution() + span_offset(gen, overlap_frac);
}

SpanPlan SpanPlan::make_default(const Generator& gen, StyleStack left, StyleStack right, double overlap_frac,
                                PanoramaAxis axis) {
  const int w = gen.output_resolution();
  const int off = span_offset(gen, overlap_frac);
  SpanPlan p;
  p.left_styles = std::move(left);
  p.right_styles = std::move(right);
  p.overlap_frac = overlap_frac;
  p.axis = axis;
  p.constrained_left = {0, (2 * w + 2) / 3};
  p.constrained_right = {off + w / 3, off + w};
  return p;
}

std::vector<SpanGeometry> span_geometry(const Generator& gen, const SpanPlan& plan) {
  const int w = gen.output_resolution();
  const int off = span_offset(gen, plan.overlap_frac);
  const int extent = w + off;
  if (plan.constrained_left.begin != 0 || plan.constrained_left.end <= 0 || plan.constrained_left.end > w)
    throw DomainError("constrained_left must be a non-empty prefix of the left image");
  if (plan.constrained_right.end != extent || plan.constrained_right.begin < off ||
      plan.constrained_right.begin >= extent)
    throw DomainError("constrained_right must be a non-empty suffix of the right image");
  if (plan.constrained_left.end > plan.constrained_right.begin)
    throw DomainError("blend ramp overlaps a constrained range");

  std::vector<SpanGeometry> geo;
  for (int i = 0; i <= gen.num_layers(); ++i) {
    const int res = gen.config().layer_resolution(std::min(i, gen.num_layers() - 1));
    const int ratio = w / res;
    SpanGeometry g;
    g.image_extent = res;
    g.offset = off / ratio;
    g.span_extent = res + g.offset;
    g.left_end = (plan.constrained_left.end + ratio - 1) / ratio;
    g.right_begin = plan.constrained_right.begin / ratio;
    if (g.left_end > g.right_begin)
      throw DomainError("blend ramp overlaps a constrained range at layer " + std::to_string(i));
    geo.push_back(g);
  }
  return geo;
}

void SpanPlan::validate(const Generator& gen) const {
  if (left_styles.num_layers() != gen.num_layers() || right_styles.num_layers() != gen.num_layers())
    throw DomainError("span styles must have one row per synthesis layer");
  (void)span_geometry(gen, *this);
}

std::vector<double> span_ramp(const SpanGeometry& g) {
  std::vector<double> r(g.span_extent);
  const int gap = g.right_begin - g.left_end;
  for (int c = 0; c < g.span_extent; ++c) {
    if (c < g.left_end)
      r[c] = 0.0;
    else if (c >= g.right_begin)
      r[c] = 1.0;
    else
      r[c] = static_cast<double>(c - g.left_end + 1) / (gap + 1);
  }
  return r;
}

Image build_span(const Generator& gen, const SpanPlan& plan) {
  plan.validate(gen);
  const bool same = plan.left_styles == plan.right_styles && !plan.mask;
  const auto left = standalone_features(gen, plan.left_styles);
  if (same) return build_span_from(gen, plan, left, left, true);
  const auto right = standalone_features(gen, plan.right_styles);
  return build_span_from(gen, plan, left, right, false);
}

Image render_wide(const Generator& gen, const StyleStack& styles, double overlap_frac, PanoramaAxis axis) {
  return build_span(gen, SpanPlan::make_default(gen, styles, styles, overlap_frac, axis));
}

int PanoramaPlan::total_width() const {
  int total = 0;
  for (const auto& r : crop_ranges) total += r.width();
  return total;
}

void PanoramaPlan::validate(const Generator& gen) const {
  if (latents.size() < 2) throw DomainError("a panorama needs at least two latents");
  for (const auto& w : latents)
    if (static_cast<int>(w.values.size()) != gen.config().latent_dim)
      throw DomainError("panorama latent has the wrong width");
  if (smoothing_sigma < 0.0) throw DomainError("smoothing_sigma must be non-negative");
  const int extent = span_extent(gen, overlap_frac);
  if (span_width != extent)
    throw DomainError("span_width " + std::to_string(span_width) + " does not match the geometry (" +
                      std::to_string(extent) + ")");
  if (static_cast<int>(crop_ranges.size()) != num_spans()) throw DomainError("need one crop range per span");
  const SpanGeometry g = output_geometry(gen, *this).front();
  const ColumnRange shared = shared_block(g);
  for (int k = 0; k < num_spans(); ++k) {
    const auto& r = crop_ranges[k];
    if (r.begin < 0 || r.end > span_width || r.begin >= r.end) throw DomainError("crop range outside its span");
    if (k == 0) continue;
    const int seam = crop_ranges[k - 1].end - g.offset;
    if (seam != r.begin) throw DomainError("crop ranges leave a gap or overlap at span " + std::to_string(k));
    if (seam - 1 < shared.begin || seam >= shared.end)
      throw DomainError("crop boundary " + std::to_string(k) + " lies outside the shared constrained block");
  }
}

PanoramaPlan make_panorama_plan(const Generator& gen, std::vector<StyleVector> latents, double smoothing_sigma,
                                double overlap_frac, PanoramaAxis axis) {
  PanoramaPlan plan;
  plan.latents = std::move(latents);
  plan.overlap_frac = overlap_frac;
  plan.smoothing_sigma = smoothing_sigma;
  plan.axis = axis;
  plan.span_width = span_extent(gen, overlap_frac);
  if (plan.latents.size() < 2) throw DomainError("a panorama needs at least two latents");
  const SpanGeometry g = output_geometry(gen, plan).front();
  const ColumnRange shared = shared_block(g);
  const int cut = (shared.begin + shared.end) / 2;
  const int spans = plan.num_spans();
  for (int k = 0; k < spans; ++k)
    plan.crop_ranges.push_back({k == 0 ? 0 : cut, k == spans - 1 ? plan.span_width : g.offset + cut});
  plan.validate(gen);
  return plan;
}

std::vector<Image> build_spans(const Generator& gen, const PanoramaPlan& plan) {
  plan.validate(gen);
  const int n = static_cast<int>(plan.latents.size());
  std::vector<StyleStack> stacks;
  for (const auto& w : plan.latents) stacks.push_back(stack_of(gen, w));

  std::vector<std::future<std::map<int, FeatureMap>>> feature_jobs;
  for (int k = 0; k < n; ++k)
    feature_jobs.push_back(std::async(std::launch::async, [&, k] { return standalone_features(gen, stacks[k]); }));
  std::vector<std::map<int, FeatureMap>> features;
  for (auto& f : feature_jobs) features.push_back(f.get());

  std::vector<std::future<Image>> span_jobs;
  for (int k = 0; k + 1 < n; ++k)
    span_jobs.push_back(std::async(std::launch::async, [&, k] {
      const auto sp = SpanPlan::make_default(gen, stacks[k], stacks[k + 1], plan.overlap_frac, plan.axis);
      const bool same = stacks[k] == stacks[k + 1];
      return build_span_from(gen, sp, features[k], features[k + 1], same);
    }));
  std::vector<Image> spans;
  for (auto& f : span_jobs) spans.push_back(f.get());
  return spans;
}

void verify_spans(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans) {
  if (static_cast<int>(spans.size()) != plan.num_spans()) throw DomainError("span count does not match the plan");
  const SpanGeometry g = output_geometry(gen, plan).front();
  const ColumnRange shared = shared_block(g);
  for (int k = 1; k < plan.num_spans(); ++k) {
    int first_bad = -1;
    const double diff = max_abs_diff_along(spans[k - 1], g.offset + shared.begin, spans[k], shared.begin,
                                           shared.width(), plan.axis, &first_bad);
    if (first_bad >= 0) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "spans " << k - 1 << " and " << k << " disagree in the constrained block of image " << k
          << ": max |diff| " << diff << ", first differing offset " << shared.begin + first_bad;
      throw KnittingError(msg.str());
    }
  }
}

std::vector<double> seam_differences(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans) {
  const SpanGeometry g = output_geometry(gen, plan).front();
  std::vector<double> out;
  for (int k = 1; k < plan.num_spans(); ++k) {
    const int seam = plan.crop_ranges[k].begin;
    out.push_back(max_abs_diff_along(spans[k - 1], g.offset + seam - 1, spans[k], seam - 1, 2, plan.axis, nullptr));
  }
  return out;
}

Image knit_spans(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans) {
  verify_spans(gen, plan, spans);
  std::vector<Image> parts;
  for (int k = 0; k < plan.num_spans(); ++k) parts.push_back(crop_along(spans[k], plan.crop_ranges[k], plan.axis));
  return horizontal(plan.axis) ? concat_columns(parts) : concat_rows(parts);
}

Image knit_panorama(const Generator& gen, const PanoramaPlan& plan) {
  return knit_spans(gen, plan, build_spans(gen, plan));
}

std::vector<StyleVector> sample_panorama_latents(const Generator& gen, int n, std::uint64_t seed) {
  if (n < 2) throw DomainError("a panorama needs at least two latents");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<StyleVector> out;
  for (int k = 0; k < n; ++k) {
    LatentCode z;
    z.values.resize(gen.config().latent_dim);
    for (double& v : z.values) v = normal(rng);
    out.push_back(gen.map_latent(z));
  }
  return out;
}

PanoramaPlan default_panorama_plan(const Generator& gen, int n, std::uint64_t seed, double smoothing_sigma,
                                   PanoramaAxis axis) {
  if (smoothing_sigma < 0.0) throw DomainError("smoothing_sigma must be non-negative");
  auto latents = sample_panorama_latents(gen, n, seed);
  if (smoothing_sigma > 0.0) latents = smooth_latents(latents, smoothing_sigma);
  return make_panorama_plan(gen, std::move(latents), smoothing_sigma, 0.5, axis);
}

Image generate_panorama(const Generator& gen, int n, std::uint64_t seed, double smoothing_sigma, PanoramaAxis axis) {
  return knit_panorama(gen, default_panorama_plan(gen, n, seed, smoothing_sigma, axis));
}

std::string panorama_plan_to_json(const PanoramaPlan& plan) {
  nlohmann::json j;
  j["latents"] = nlohmann::json::array();
  for (const auto& w : plan.latents) j["latents"].push_back(w.values);
  j["span_width"] = plan.span_width;
  j["overlap_frac"] = plan.overlap_frac;
  j["crop_ranges"] = nlohmann::json::array();
  for (const auto& r : plan.crop_ranges) j["crop_ranges"].push_back({r.begin, r.end});
  j["smoothing_sigma"] = plan.smoothing_sigma;
  j["axis"] = to_string(plan.axis);
  return j.dump(2);
}

PanoramaPlan panorama_plan_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PanoramaPlan plan;
    for (const auto& w : j.at("latents")) plan.latents.push_back(StyleVector{w.get<std::vector<double>>()});
    plan.span_width = j.at("span_width").get<int>();
    plan.overlap_frac = j.at("overlap_frac").get<double>();
    for (const auto& r : j.at("crop_ranges")) plan.crop_ranges.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
    plan.smoothing_sigma = j.value("smoothing_sigma", 0.0);
    plan.axis = panorama_axis_from_string(j.value("axis", std::string("horizontal")));
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed panorama plan: ") + e.what());
  }
}

}  // namespace stylemix
