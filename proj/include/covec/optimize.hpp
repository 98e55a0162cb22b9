#pragma once

// Structural optimization: per-layer structure losses during warm-up, then a
// shared reconstruction loss, each layer stepped by its own Adam state.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "covec/raster.hpp"
#include "covec/types.hpp"

namespace covec {

enum class PenaltySign {
  overlap,        // ReLU(alpha - delta): penalizes stacked coverage
  paper_literal,  // ReLU(delta - alpha)
};

struct StructLossConfig {
  double lambda_overlap = 1e-8;
  double delta_overlap = 0.6;
  double gray_alpha = 0.5;
  PenaltySign penalty_sign = PenaltySign::overlap;

  void validate() const;
};

struct Schedule {
  int warmup_epochs = 50;
  int joint_epochs = 50;
  double lr_points = 1.0;
  double lr_colors = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  std::uint64_t skipped = 0;  // steps dropped for non-finite gradients
};

/// One bias-corrected Adam update. Returns false (and leaves params alone)
/// when any gradient entry is non-finite; the step counter advances anyway.
bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const Schedule& hyper);

struct LayerLoss {
  double value = 0.0;
  GradientBuffer grads;
};

/// Sum over mask groups of MSE(mask render, group render) plus the weighted
/// alpha penalty of the group re-rendered in translucent gray.
LayerLoss loss_struct(std::span<const VectorPath> layer, std::span<const RasterImage> mask_renders,
                      const StructLossConfig& cfg, Dims dims, const RasterizerConfig& rcfg);

struct DocumentLoss {
  double value = 0.0;
  DocumentGradient grads;
  RasterImage composite;
};

/// Mean over pixels and channels of (target - composite)^2.
DocumentLoss loss_recon(const LayeredDocument& doc, CompositeMode mode, const RasterImage& target,
                        const RasterizerConfig& rcfg);

/// Adam over one layer with separate states for geometry and appearance.
/// Paths before `first_trainable` are left untouched.
class LayerOptimizer {
 public:
  explicit LayerOptimizer(Schedule schedule, std::size_t first_trainable = 0);

  void step(Layer& layer, const GradientBuffer& grads);

  const AdamState& points_state() const { return points_; }
  const AdamState& appearance_state() const { return appearance_; }

 private:
  Schedule schedule_;
  std::size_t first_;
  AdamState points_;
  AdamState appearance_;
};

/// Clamp colors to their tag's range and opacity to [0,1].
void project(VectorPath& path);

struct TraceRow {
  std::string stage;
  int step = 0;
  double loss = 0.0;
  int paths_added = 0;
  int paths_removed = 0;
};

struct StructuralResult {
  Layer albedo;
  Layer illumination;
  std::vector<TraceRow> trace;
};

/// Warm-up epochs on each layer's structure loss, then joint epochs on the
/// reconstruction loss of R(albedo) ⊙ R(illumination).
StructuralResult run_structural(Layer albedo, Layer illumination, const RasterImage& target,
                                std::span<const RasterImage> albedo_renders,
                                std::span<const RasterImage> illumination_renders, const Schedule& schedule,
                                const StructLossConfig& scfg, const RasterizerConfig& rcfg);

}  // namespace covec
