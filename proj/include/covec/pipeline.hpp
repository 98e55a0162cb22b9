#pragma once

// End-to-end vectorization: initialization, structural optimization,
// refinement and (full mode) the shade/light split.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covec/image_io.hpp"
#include "covec/init.hpp"
#include "covec/optimize.hpp"
#include "covec/raster.hpp"
#include "covec/refine.hpp"
#include "covec/types.hpp"

namespace covec {

enum class VectorizeMode { full, albedo_only };

struct VectorizeConfig {
  VectorizeMode mode = VectorizeMode::full;
  std::uint64_t seed = 0;
  std::size_t path_budget = 64;  // across all layers

  std::optional<RasterImage> albedo;  // precomputed albedo map
  std::optional<LabelMap> labels;     // precomputed region labels

  InitConfig init{};
  SegmentConfig segment{};
  AlbedoFallbackConfig albedo_fallback{};
  Schedule schedule{};
  StructLossConfig structure{};
  RefineConfig refine{};
  RasterizerConfig raster{};

  void validate() const;
};

struct VectorizeResult {
  LayeredDocument doc;  // three-layer; shade and light empty in albedo-only mode
  Layer illumination;   // refined illumination layer before the shade/light split
  std::vector<TraceRow> trace;
  RasterImage composite;  // three-layer render of `doc`
  double mse = 0.0;       // clamped composite vs input
};

using StageCallback = std::function<void(const std::string& stage)>;

VectorizeResult vectorize(const RasterImage& image, const VectorizeConfig& cfg, const StageCallback& on_stage = {});

/// Header `stage,step,loss,paths_added,paths_removed`, one row per entry.
std::string trace_csv(const std::vector<TraceRow>& trace);
void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace covec
