#pragma once

// Error-driven path addition with earlier paths frozen, cleanup of the new
// paths, and the split of the illumination layer into shade and light.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "covec/optimize.hpp"
#include "covec/raster.hpp"
#include "covec/types.hpp"

namespace covec {

struct RefineConfig {
  int rounds_max = 5;
  int iters_per_round = 100;
  int paths_per_round = 0;  // 0 spreads the remaining budget over the rounds left
  int new_path_segments = 4;
  int min_component_pixels = 16;
  double cleanup_area_min = 8.0;
  double cleanup_loss_eps = 1e-5;
  double merge_color_eps = 0.02;
  double merge_iou = 0.8;
  double shade_epsilon = 0.05;
  double stop_error = 1e-4;
  std::size_t path_budget = 64;  // across all layers

  void validate() const;
};

/// Per-pixel mean over channels of (target - composite)^2.
ScalarMap error_map(const RasterImage& target, const RasterImage& composite);

/// Circles seeded on the highest-error connected regions. `partner` is the
/// multiplicative co-factor render; colors are mean target / partner clamped
/// to the range of `tag`.
std::vector<VectorPath> propose_paths(const ScalarMap& err, std::size_t n, const RasterImage& target,
                                      const RasterImage& partner, LayerTag tag, const RefineConfig& cfg);

/// Closed circle of `segments` cubic pieces.
VectorPath circle_path(Vec2 center, double radius, int segments, LayerTag tag, Rgb fill);

struct CleanupResult {
  Layer layer;
  std::size_t removed = 0;
  std::size_t merged = 0;
};

/// Removes paths that barely cover anything or barely change the loss and
/// merges near-duplicate paths. Only paths at index >= first_mutable are
/// touched; the total loss increase is kept within cleanup_loss_eps.
CleanupResult cleanup_paths(Layer layer, std::size_t first_mutable, const RasterImage& partner,
                            const RasterImage& target, const RefineConfig& cfg, const RasterizerConfig& rcfg);

struct RefineResult {
  Layer layer;
  std::vector<TraceRow> trace;
};

using RoundCallback = std::function<void(int round, const Layer& layer)>;

/// Grows `layer`, composited as R(partner) ⊙ R(layer), toward the target.
/// Existing paths stay bit-identical; each round optimizes only its own paths.
RefineResult refine_layer(Layer layer, LayerTag tag, const Layer& partner, const RasterImage& target,
                          const RefineConfig& cfg, const Schedule& schedule, const RasterizerConfig& rcfg,
                          const RoundCallback& on_round = {});

struct Separation {
  Layer shade;
  Layer light;
};

/// Paths with every color channel <= 1 become shade; the rest keep only
/// their geometry as light paths (opacity 1).
Separation separate_layers(const Layer& illumination);

/// Light color = mean residual target - R(albedo) ⊙ R(shade) over the pixels
/// the path covers by more than half, clamped at 0; black for paths that
/// cover no pixel that much.
Layer assign_light_colors(const Layer& light, const RasterImage& target, const Layer& albedo, const Layer& shade,
                          const RasterizerConfig& rcfg);

}  // namespace covec
