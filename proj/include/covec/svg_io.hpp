#pragma once

// Canonical SVG serialization of three-layer documents and a strict parser
// for the same subset.
//
// Layout (one element per line):
//
//   <svg xmlns="http://www.w3.org/2000/svg" width="W" height="H" viewBox="0 0 W H">
//   <g style="isolation: isolate">
//   <g id="albedo">
//   <rect x="0" y="0" width="W" height="H" fill="rgb(255,255,255)"/>
//   <path d="M x,y C x,y x,y x,y ... Z" fill="rgb(r,g,b)" fill-opacity="o" fill-rule="nonzero"/>
//   </g>
//   <g id="shade" style="mix-blend-mode: multiply">
//   ...
//   </g>
//   <g id="light" style="mix-blend-mode: plus-lighter">
//   ...
//   </g>
//   </g>
//   </svg>
//
// Coordinates and opacities carry three decimals; colors are 8-bit rgb().

#include <filesystem>
#include <string>
#include <string_view>

#include "covec/raster.hpp"
#include "covec/types.hpp"

namespace covec {

std::string emit_svg(const LayeredDocument& doc);
LayeredDocument parse_svg(std::string_view text);

void write_svg(const LayeredDocument& doc, const std::filesystem::path& path);
LayeredDocument read_svg(const std::filesystem::path& path);

/// White, then albedo paths (source-over), multiplied by the shade group and
/// increased by the light group, evaluated with premultiplied group
/// compositing and the CSS blend formulas. Shares only coverage with
/// render_composite.
RasterImage reference_composite(const LayeredDocument& doc, const RasterizerConfig& cfg = {});

/// Geometry and canvas scaled by `factor` (>= 1, integer).
LayeredDocument scale_document(const LayeredDocument& doc, int factor);

/// 8-bit channel value written for a color component.
int color_byte(double value);

}  // namespace covec
