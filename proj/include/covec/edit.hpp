#pragma once

// Controlled recoloring: find where a reference image differs from the
// original, pick the albedo paths that sit on those regions and give them
// shade-aware colors.

#include <cstddef>
#include <string>
#include <vector>

#include "covec/raster.hpp"
#include "covec/types.hpp"

namespace covec {

struct EditConfig {
  double tau_diff = 0.1;
  double gamma_iou = 0.02;
  double delta_color = 0.25;
  double epsilon_shade = 1e-4;
  int k = 1;

  void validate() const;
};

/// Binary per-pixel mask (0 or 1).
struct Mask {
  Dims dims;
  std::vector<unsigned char> values;

  Mask() = default;
  explicit Mask(Dims d) : dims(d), values(d.pixels(), 0) {}
  std::size_t count() const;
};

/// Mean over channels of |original - reference|, thresholded with > tau.
Mask compute_edit_mask(const RasterImage& original, const RasterImage& reference, double tau);

double iou(const Mask& a, const Mask& b);

/// Pixels where the path, rendered alone, has coverage > 0.5.
Mask path_support(const VectorPath& path, Dims dims, const RasterizerConfig& rcfg);

struct EditCandidate {
  std::size_t index = 0;  // into the albedo layer
  std::size_t area = 0;   // |S_n|
  double iou = 0.0;
  Rgb mu{};      // mean original color over S_n
  Rgb mu_ref{};  // mean reference color over S_n
};

/// Albedo paths with IoU > gamma against the edit mask and
/// ||mu - mu_ref|| <= delta, largest support first (ties by index).
std::vector<EditCandidate> candidate_paths(const LayeredDocument& doc, const RasterImage& original,
                                           const RasterImage& reference, const Mask& edit_mask,
                                           const EditConfig& cfg, const RasterizerConfig& rcfg = {});

struct EditedPath {
  EditCandidate candidate;
  Rgb shade_mean{1.0, 1.0, 1.0};
  Rgb old_color{};
  Rgb new_color{};
};

struct EditReport {
  int k_requested = 0;
  std::size_t candidate_count = 0;
  std::size_t shortfall = 0;  // k_requested - edited, when positive
  std::vector<EditedPath> edited;
  double mse_before = 0.0;
  double mse_after = 0.0;

  std::string to_json() const;
};

struct EditResult {
  LayeredDocument doc;
  EditReport report;
};

/// Recolors the first K candidates. With a shade layer the new albedo color
/// is clamp(C_ref / (S̄ + eps), 0, 1) where S̄ is the mean of the shade layer
/// rendered over white; without one it is C_ref.
EditResult apply_color_edit(const LayeredDocument& doc, const std::vector<EditCandidate>& candidates,
                            const RasterImage& reference, const EditConfig& cfg, const RasterizerConfig& rcfg = {});

/// Full protocol: mask, candidates, recolor; MSEs are measured on the
/// clamped document render against the reference.
EditResult run_edit(const LayeredDocument& doc, const RasterImage& original, const RasterImage& reference,
                    const EditConfig& cfg, const RasterizerConfig& rcfg = {});

/// Clamped render used for edit metrics: the three-layer composite when a
/// shade layer is present, otherwise the albedo layer over white.
RasterImage render_document(const LayeredDocument& doc, const RasterizerConfig& rcfg = {});

/// Mean over pixels and channels of the squared difference.
double mse(const RasterImage& a, const RasterImage& b);

}  // namespace covec
