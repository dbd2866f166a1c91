#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylemix/blend.hpp"
#include "stylemix/generator.hpp"

namespace stylemix {

enum class PanoramaAxis { horizontal, vertical };

PanoramaAxis panorama_axis_from_string(const std::string& s);
std::string to_string(PanoramaAxis axis);

/// Half-open range [begin, end) along the panorama axis.
struct ColumnRange {
  int begin = 0;
  int end = 0;
  int width() const { return end - begin; }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Two images rendered side by side in feature space. The left image sits at
/// offset 0 and the right image at offset (1 - overlap_frac) * W. Ranges are
/// in output pixels, in span coordinates.
struct SpanPlan {
  StyleStack left_styles;
  StyleStack right_styles;
  double overlap_frac = 0.5;
  /// Must start at 0 and end inside the left image.
  ColumnRange constrained_left;
  /// Must start inside the right image and end at the span extent.
  ColumnRange constrained_right;
  PanoramaAxis axis = PanoramaAxis::horizontal;
  /// Replaces the default ramp (resampled per layer, oriented as the output
  /// image). Constrained regions are only guaranteed with the default ramp.
  std::optional<AlphaMask> mask;

  /// Left block covers the left image's first two thirds, right block the
  /// right image's last two thirds.
  static SpanPlan make_default(const Generator& gen, StyleStack left, StyleStack right, double overlap_frac = 0.5,
                               PanoramaAxis axis = PanoramaAxis::horizontal);
  /// DomainError on an invalid plan, including a ramp overlapping a
  /// constrained range at any layer.
  void validate(const Generator& gen) const;
};

/// Extents along the panorama axis at one synthesis layer.
struct SpanGeometry {
  int image_extent = 0;  // W_i
  int offset = 0;        // right image offset
  int span_extent = 0;   // W_i + offset
  int left_end = 0;      // constrained_left is [0, left_end)
  int right_begin = 0;   // constrained_right is [right_begin, span_extent)
};

/// Right-image offset in output pixels; DomainError unless it is integral at
/// every synthesis layer.
int span_offset(const Generator& gen, double overlap_frac);
int span_extent(const Generator& gen, double overlap_frac);

/// Per-layer geometry (index L is the output resolution, identical to layer L-1).
std::vector<SpanGeometry> span_geometry(const Generator& gen, const SpanPlan& plan);

/// Default ramp at one geometry: 0 before left_end, 1 from right_begin on,
/// linear in between.
std::vector<double> span_ramp(const SpanGeometry& g);

Image build_span(const Generator& gen, const SpanPlan& plan);

/// Span whose two images share `styles`.
Image render_wide(const Generator& gen, const StyleStack& styles, double overlap_frac = 0.5,
                  PanoramaAxis axis = PanoramaAxis::horizontal);

struct PanoramaPlan {
  std::vector<StyleVector> latents;
  /// Pixel extent of one span along the axis.
  int span_width = 0;
  double overlap_frac = 0.5;
  /// One range per span, in that span's coordinates.
  std::vector<ColumnRange> crop_ranges;
  double smoothing_sigma = 0.0;
  PanoramaAxis axis = PanoramaAxis::horizontal;

  int num_spans() const { return static_cast<int>(latents.size()) - 1; }
  int total_width() const;
  void validate(const Generator& gen) const;
};

/// Crops cut every interior image at the middle of its shared constrained block.
PanoramaPlan make_panorama_plan(const Generator& gen, std::vector<StyleVector> latents, double smoothing_sigma = 0.0,
                                double overlap_frac = 0.5, PanoramaAxis axis = PanoramaAxis::horizontal);

/// Span_{k,k+1} for every consecutive pair, built concurrently.
std::vector<Image> build_spans(const Generator& gen, const PanoramaPlan& plan);

/// Throws KnittingError if consecutive spans disagree anywhere in the shared
/// constrained block of their common image.
void verify_spans(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans);

/// Max abs difference, per crop boundary, between the two columns adjacent to
/// the seam as rendered by each of the two spans meeting there.
std::vector<double> seam_differences(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans);

Image knit_spans(const Generator& gen, const PanoramaPlan& plan, const std::vector<Image>& spans);
Image knit_panorama(const Generator& gen, const PanoramaPlan& plan);

/// n mapped latents drawn from one stream seeded by `seed`.
std::vector<StyleVector> sample_panorama_latents(const Generator& gen, int n, std::uint64_t seed);

/// Plan produced by generate_panorama: sampled, optionally smoothed latents.
PanoramaPlan default_panorama_plan(const Generator& gen, int n, std::uint64_t seed, double smoothing_sigma,
                                   PanoramaAxis axis = PanoramaAxis::horizontal);
Image generate_panorama(const Generator& gen, int n, std::uint64_t seed, double smoothing_sigma,
                        PanoramaAxis axis = PanoramaAxis::horizontal);

std::string panorama_plan_to_json(const PanoramaPlan& plan);
PanoramaPlan panorama_plan_from_json(const std::string& text);

}  // namespace stylemix
