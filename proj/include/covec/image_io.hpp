#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "covec/types.hpp"

namespace covec {

/// Reads PNG (8/16-bit gray, gray+alpha, RGB, RGBA; alpha is composited over
/// white) or binary PPM (P6). Samples map to [0,1] by division by maxval.
RasterImage read_image(const std::filesystem::path& path);

/// Writes PNG or PPM depending on the extension. Values are clamped to
/// [0,1] and quantized with round-half-up. bit_depth is 8 or 16.
void write_image(const RasterImage& image, const std::filesystem::path& path, int bit_depth = 8);

void write_png(const RasterImage& image, const std::filesystem::path& path, int bit_depth = 8);
void write_ppm(const RasterImage& image, const std::filesystem::path& path, int maxval = 255);

/// Quantization used by the writers: round(clamp(v,0,1) * maxval + 0.5) floor.
std::uint32_t quantize(double value, std::uint32_t maxval);

/// Single-channel integer label map (region ids). 0 marks unlabeled pixels.
struct LabelMap {
  Dims dims;
  std::vector<std::uint32_t> labels;
};

/// Reads a single-channel 8- or 16-bit PNG label map.
LabelMap read_label_map(const std::filesystem::path& path);
void write_label_map(const LabelMap& map, const std::filesystem::path& path);

}  // namespace covec
