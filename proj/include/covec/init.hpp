#pragma once

// Layer initialization: albedo estimate, region masks, shadow masks from
// region-wise mean thresholding, back-to-front mask grouping, and conversion
// of mask boundaries into closed cubic contours.

#include <cstdint>
#include <optional>
#include <vector>

#include "covec/image_io.hpp"
#include "covec/raster.hpp"
#include "covec/types.hpp"

namespace covec {

struct SemanticMask {
  Dims dims;
  std::vector<std::uint8_t> bitmap;  // row-major, 1 = member
  std::size_t area = 0;
  Rgb mean_color{0.0, 0.0, 0.0};
  int parent = -1;  // index of the albedo mask a shadow mask was cut from

  bool contains(int x, int y) const { return bitmap[static_cast<std::size_t>(y) * dims.width + x] != 0; }
};

/// Builds a mask from a bitmap; area and mean color are measured on `reference`.
SemanticMask make_mask(std::vector<std::uint8_t> bitmap, const RasterImage& reference);

struct MaskGroupSet {
  // Back-to-front. Masks within a group are pairwise disjoint.
  std::vector<std::vector<SemanticMask>> groups;

  std::size_t mask_count() const;
};

struct RegionThreshold {
  std::size_t mask_id = 0;
  double threshold = 0.0;
};

struct AlbedoFallbackConfig {
  double shade_epsilon = 0.05;  // floor on blurred luma
  double blur_radius = 0.0;     // px; 0 selects max(W,H)/16
};

/// Returns `albedo` when given (dims must match), else
/// clamp(I / max(eps, blur(luma(I))), 0, 1).
RasterImage load_or_fallback_albedo(const RasterImage& image, const std::optional<RasterImage>& albedo,
                                    const AlbedoFallbackConfig& cfg = {});

/// Separable Gaussian blur with clamp-to-edge borders, sigma = radius / 2.
ScalarMap gaussian_blur(const ScalarMap& input, double radius);
ScalarMap luma_map(const RasterImage& image);

struct SegmentConfig {
  int clusters = 8;
  int iterations = 50;
  std::uint64_t seed = 0;
  double min_area_fraction = 0.001;
};

/// One mask per distinct label, ascending; `ignore_label` pixels are skipped.
std::vector<SemanticMask> masks_from_labels(const LabelMap& labels, const RasterImage& reference,
                                            std::optional<std::uint32_t> ignore_label);

/// k-means++ on RGB, 4-connected components, small components merged into
/// their largest neighbor.
std::vector<SemanticMask> segment_fallback(const RasterImage& reference, const SegmentConfig& cfg);

/// Label-map ingestion (label 0 ignored) when given, else segment_fallback.
std::vector<SemanticMask> load_or_fallback_segment(const RasterImage& reference, const std::optional<LabelMap>& labels,
                                                   const SegmentConfig& cfg);

std::vector<RegionThreshold> region_thresholds(const RasterImage& image, const std::vector<SemanticMask>& masks);

/// Shadow pixels: members of mask i whose luma is at most the mean luma over
/// mask i. Empty results are dropped; `parent` records the source mask.
std::vector<SemanticMask> region_binarize(const RasterImage& image, const std::vector<SemanticMask>& albedo_masks);

/// Greedy packing by descending area. A mask goes into the group directly
/// above the frontmost group holding a mask it overlaps.
MaskGroupSet organize_masks(std::vector<SemanticMask> masks);

/// Outer boundary of the largest 4-connected component, traced along pixel
/// edges; only direction changes are kept as vertices.
Polyline trace_boundary(const SemanticMask& mask);

/// Pixels enclosed by trace_boundary: the largest component with its holes
/// filled. Mean color and parent are carried over unchanged.
SemanticMask outer_footprint(const SemanticMask& mask);

/// Closed Douglas-Peucker: split at the two mutually farthest vertices and
/// simplify both arcs. epsilon <= 0 returns the input.
Polyline simplify_closed(const Polyline& polyline, double epsilon);

Polyline trace_and_simplify(const SemanticMask& mask, double dp_epsilon);

/// Closed contour of straight cubic segments whose endpoints are polyline
/// vertices sampled at roughly equal arc length.
std::vector<Vec2> fit_bezier_contour(const Polyline& polyline, int max_segments);

std::size_t contour_segment_count(std::size_t vertex_count, int max_segments);

struct InitConfig {
  double dp_epsilon = 2.0;
  int max_segments = 8;
  double shade_epsilon = 0.05;
  std::size_t path_budget = 64;
};

struct InitResult {
  Layer albedo;
  Layer illumination;
  std::vector<RasterImage> albedo_mask_renders;
  std::vector<RasterImage> illumination_mask_renders;
  MaskGroupSet albedo_groups;
  MaskGroupSet illumination_groups;
};

/// Albedo paths from `albedo_masks` (fill = mean albedo), illumination paths
/// from their region-wise shadow masks (fill = mean clamp(I / max(A, eps), 0, 1)).
InitResult init_layers(const RasterImage& image, const RasterImage& albedo, const std::vector<SemanticMask>& albedo_masks,
                       const InitConfig& cfg);

/// Single-layer variant: region masks and their shadow masks together form
/// the albedo layer (fill = mean image color). The illumination layer is empty.
InitResult init_albedo_only(const RasterImage& image, const std::vector<SemanticMask>& region_masks,
                            const InitConfig& cfg);

}  // namespace covec
