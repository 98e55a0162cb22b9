#pragma once

// Soft rasterization of closed cubic Bézier loops, layer compositing and the
// matching reverse-mode gradients.
//
// Coverage of a pixel by a path is the mean, over a supersample grid, of
// logistic(-sd / aa_sigma) where sd is the signed distance (negative inside,
// nonzero winding) from the sample to the path's flattened polyline. Paths in
// a layer are composited back-to-front with source-over using
// alpha = coverage * opacity.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "covec/types.hpp"

namespace covec {

struct RasterizerConfig {
  double flatten_tolerance = 0.1;  // px, max chordal deviation
  double aa_sigma = 1.0;           // px, logistic width
  int supersample = 2;             // samples per pixel axis

  void validate() const;
};

/// Where a polyline vertex came from on its Bézier loop.
struct VertexOrigin {
  std::uint32_t segment = 0;
  double t = 0.0;

  friend bool operator==(VertexOrigin, VertexOrigin) = default;
};

/// Closed polyline; the closing edge from the last vertex back to the first
/// is implicit. `origins` is empty for polylines that did not come from a
/// Bézier loop (traced mask boundaries).
struct Polyline {
  std::vector<Vec2> vertices;
  std::vector<VertexOrigin> origins;
};

Vec2 bezier_point(const VectorPath& path, std::size_t segment, double t);

/// Uniform per-segment subdivision with the count chosen from the
/// second-difference bound, so every chord stays within `tolerance` of the
/// curve. Segment endpoints are always vertices.
Polyline flatten_bezier(const VectorPath& path, double tolerance);

/// Rebuilds a polyline at fixed curve parameters (used to hold flattening
/// constant while control points move).
Polyline evaluate_at(const VectorPath& path, std::span<const VertexOrigin> origins);

struct NearestEdge {
  std::size_t edge = 0;  // edge i runs from vertex i to vertex i+1 (mod n)
  Vec2 foot{};
  double s = 0.0;  // foot = v[i] + s (v[i+1] - v[i])
};

struct SignedDistance {
  double distance = 0.0;
  NearestEdge nearest{};
};

int winding_number(std::span<const Vec2> loop, Vec2 point);
SignedDistance signed_distance(const Polyline& polyline, Vec2 point);

/// logistic(-sd/sigma), saturated to exactly 0 or 1 beyond 30 sigma.
double coverage_from_distance(double signed_distance, double sigma);

/// Fill color as rendered: albedo and shade colors clamp to [0,1],
/// illumination and light colors clamp below at 0.
Rgb effective_color(const VectorPath& path);

struct PathGradient {
  std::vector<Vec2> d_control_points;
  Rgb d_color{0.0, 0.0, 0.0};
  double d_opacity = 0.0;

  static PathGradient zeros_like(const VectorPath& path);
};

using GradientBuffer = std::vector<PathGradient>;

GradientBuffer zero_gradients(std::span<const VectorPath> paths);

/// Forward state of one rendered layer, kept for the backward pass.
struct LayerRaster {
  RasterImage image;
  std::vector<ScalarMap> coverage;  // per path, pixel coverage in [0,1]
  std::vector<Polyline> polylines;  // per path; empty when degenerate
  Rgb background{1.0, 1.0, 1.0};
  std::optional<RasterImage> base;  // per-pixel backdrop; overrides `background`
};

std::vector<Polyline> flatten_all(std::span<const VectorPath> paths, const RasterizerConfig& cfg);
ScalarMap coverage_map(const Polyline& polyline, Dims dims, const RasterizerConfig& cfg);

/// `frozen` (optional) supplies per-path flattening parameters.
LayerRaster rasterize_layer(std::span<const VectorPath> paths, Rgb background, Dims dims, const RasterizerConfig& cfg,
                            const std::vector<std::vector<VertexOrigin>>* frozen = nullptr);

/// Composites `paths` over a per-pixel backdrop instead of a flat color.
LayerRaster rasterize_over(std::span<const VectorPath> paths, const RasterImage& base, const RasterizerConfig& cfg);

/// Chain d_coverage (per pixel) through the supersampled logistic and
/// nearest-edge geometry to control points, adding into `out`.
void accumulate_geometry_gradient(const VectorPath& path, const Polyline& polyline, const ScalarMap& d_coverage,
                                  const RasterizerConfig& cfg, PathGradient& out);

/// Gradients of sum(upstream ⊙ layer image) with respect to every path.
/// Control-point gradients of paths before `first_geometry` are left zero.
GradientBuffer backward_layer(std::span<const VectorPath> paths, const LayerRaster& raster, const RasterImage& upstream,
                              const RasterizerConfig& cfg, std::size_t first_geometry = 0);

enum class BlendMode { multiply, plus_lighter };
RasterImage blend(BlendMode mode, const RasterImage& a, const RasterImage& b);

enum class CompositeMode { two_layer, three_layer };

struct FrozenFlattening {
  std::array<std::vector<std::vector<VertexOrigin>>, 4> layers;
};

FrozenFlattening freeze_flattening(const LayeredDocument& doc, const RasterizerConfig& cfg);

struct CompositeEval {
  CompositeMode mode = CompositeMode::two_layer;
  RasterImage image;
  std::array<std::optional<LayerRaster>, 4> layers;

  const LayerRaster& layer(LayerTag tag) const { return *layers[static_cast<std::size_t>(tag)]; }
};

/// two_layer: R(albedo) ⊙ R(illumination); three_layer:
/// R(albedo) ⊙ R(shade) ⊕ R(light). Multiply operands render over white,
/// the additive one over black.
CompositeEval evaluate_composite(const LayeredDocument& doc, CompositeMode mode, const RasterizerConfig& cfg,
                                 const FrozenFlattening* frozen = nullptr);

RasterImage render_composite(const LayeredDocument& doc, CompositeMode mode, const RasterizerConfig& cfg,
                             const FrozenFlattening* frozen = nullptr);

struct DocumentGradient {
  std::array<GradientBuffer, 4> layers;

  GradientBuffer& at(LayerTag tag) { return layers[static_cast<std::size_t>(tag)]; }
  const GradientBuffer& at(LayerTag tag) const { return layers[static_cast<std::size_t>(tag)]; }
};

DocumentGradient backward(const LayeredDocument& doc, const CompositeEval& eval, const RasterImage& upstream,
                          const RasterizerConfig& cfg);

DocumentGradient backward(const LayeredDocument& doc, const RasterImage& upstream, CompositeMode mode,
                          const RasterizerConfig& cfg);

}  // namespace covec
