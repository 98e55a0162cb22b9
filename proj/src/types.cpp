#include "covec/types.hpp"

#include <algorithm>

namespace covec {

RasterImage::RasterImage(int width, int height, Rgb fill) : dims_{width, height} {
  if (width <= 0 || height <= 0) {
    throw InputError("image dimensions must be positive");
  }
  data_.resize(3 * dims_.pixels());
  for (std::size_t i = 0; i < dims_.pixels(); ++i) {
    data_[3 * i + 0] = fill[0];
    data_[3 * i + 1] = fill[1];
    data_[3 * i + 2] = fill[2];
  }
}

bool RasterImage::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

RasterImage RasterImage::clamped() const {
  RasterImage out = *this;
  for (double& v : out.data_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::string_view to_string(LayerTag tag) {
  switch (tag) {
    case LayerTag::albedo:
      return "albedo";
    case LayerTag::illumination:
      return "illumination";
    case LayerTag::shade:
      return "shade";
    case LayerTag::light:
      return "light";
  }
  return "unknown";
}

void validate(const VectorPath& path) {
  const std::size_t n = path.control_points.size();
  if (n < 3 || n % 3 != 0) {
    throw InputError("path must hold 3k control points (k >= 1), got " + std::to_string(n));
  }
  if (!(path.opacity >= 0.0 && path.opacity <= 1.0)) {
    throw InputError("path opacity outside [0,1]");
  }
  for (const Vec2& p : path.control_points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("non-finite control point");
  }
}

VectorPath make_circle(Vec2 center, double radius, LayerTag tag, Rgb fill, double opacity) {
  constexpr double kappa = 0.5522847498307936;
  const double k = kappa * radius;
  const double cx = center.x;
  const double cy = center.y;
  VectorPath path;
  path.control_points = {
      {cx + radius, cy}, {cx + radius, cy + k}, {cx + k, cy + radius},
      {cx, cy + radius}, {cx - k, cy + radius}, {cx - radius, cy + k},
      {cx - radius, cy}, {cx - radius, cy - k}, {cx - k, cy - radius},
      {cx, cy - radius}, {cx + k, cy - radius}, {cx + radius, cy - k},
  };
  path.fill = fill;
  path.opacity = opacity;
  path.tag = tag;
  return path;
}

VectorPath make_rect(double x0, double y0, double x1, double y1, LayerTag tag, Rgb fill, double opacity) {
  const Vec2 corners[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  VectorPath path;
  for (int i = 0; i < 4; ++i) {
    const Vec2 a = corners[i];
    const Vec2 b = corners[(i + 1) % 4];
    path.control_points.push_back(a);
    path.control_points.push_back(a + (1.0 / 3.0) * (b - a));
    path.control_points.push_back(a + (2.0 / 3.0) * (b - a));
  }
  path.fill = fill;
  path.opacity = opacity;
  path.tag = tag;
  return path;
}

LayeredDocument LayeredDocument::two_layer(int width, int height) {
  LayeredDocument doc(width, height);
  doc.set_layer(LayerTag::albedo, {});
  doc.set_layer(LayerTag::illumination, {});
  return doc;
}

LayeredDocument LayeredDocument::three_layer(int width, int height) {
  LayeredDocument doc(width, height);
  doc.set_layer(LayerTag::albedo, {});
  doc.set_layer(LayerTag::shade, {});
  doc.set_layer(LayerTag::light, {});
  return doc;
}

Layer& LayeredDocument::layer(LayerTag tag) {
  auto& slot = layers_[static_cast<std::size_t>(tag)];
  if (!slot) throw PipelineError("document is missing the " + std::string(to_string(tag)) + " layer");
  return *slot;
}

const Layer& LayeredDocument::layer(LayerTag tag) const {
  const auto& slot = layers_[static_cast<std::size_t>(tag)];
  if (!slot) throw PipelineError("document is missing the " + std::string(to_string(tag)) + " layer");
  return *slot;
}

void LayeredDocument::set_layer(LayerTag tag, Layer paths) {
  for (VectorPath& p : paths) p.tag = tag;
  layers_[static_cast<std::size_t>(tag)] = std::move(paths);
}

std::size_t LayeredDocument::path_count() const {
  std::size_t n = 0;
  for (const auto& slot : layers_) {
    if (slot) n += slot->size();
  }
  return n;
}

}  // namespace covec
