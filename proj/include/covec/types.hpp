#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace covec {

// Error categories map onto CLI exit codes: input → 2, pipeline → 3, parse → 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

using Rgb = std::array<double, 3>;

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  friend bool operator==(Dims, Dims) = default;
};

/// H×W×3 row-major floating point image. Values are unclamped; [0,1] is
/// the nominal display range.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgb fill = {0.0, 0.0, 0.0});

  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  Dims dims() const { return dims_; }
  std::size_t pixel_count() const { return dims_.pixels(); }

  double* pixel(int x, int y) { return data_.data() + 3 * index(x, y); }
  const double* pixel(int x, int y) const { return data_.data() + 3 * index(x, y); }
  Rgb rgb(int x, int y) const {
    const double* p = pixel(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    double* p = pixel(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  RasterImage clamped() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x);
  }

  Dims dims_{};
  std::vector<double> data_;
};

/// Single-channel scalar map (coverage, error, luma).
struct ScalarMap {
  Dims dims;
  std::vector<double> values;

  ScalarMap() = default;
  explicit ScalarMap(Dims d, double fill = 0.0) : dims(d), values(d.pixels(), fill) {}
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * dims.width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * dims.width + x]; }
};

enum class LayerTag : std::uint8_t { albedo = 0, illumination = 1, shade = 2, light = 3 };

std::string_view to_string(LayerTag tag);

/// Closed loop of k cubic segments. Segment i uses control points
/// 3i, 3i+1, 3i+2, 3i+3 (indices mod 3k), so the loop closes by construction.
struct VectorPath {
  std::vector<Vec2> control_points;
  Rgb fill{0.0, 0.0, 0.0};
  double opacity = 1.0;
  LayerTag tag = LayerTag::albedo;
  // Index of the structural mask group this path was initialized from.
  std::uint32_t group = 0;

  std::size_t segment_count() const { return control_points.size() / 3; }
  const Vec2& point(std::size_t i) const { return control_points[i % control_points.size()]; }

  friend bool operator==(const VectorPath&, const VectorPath&) = default;
};

/// Throws InputError when the path is not a well-formed closed loop.
void validate(const VectorPath& path);

/// Circle of `radius` around `center` built from four cubic segments.
VectorPath make_circle(Vec2 center, double radius, LayerTag tag, Rgb fill, double opacity = 1.0);

/// Axis-aligned rectangle as four straight cubic segments.
VectorPath make_rect(double x0, double y0, double x1, double y1, LayerTag tag, Rgb fill, double opacity = 1.0);

using Layer = std::vector<VectorPath>;

/// Ordered path layers plus canvas size. A layer may be absent (two-layer
/// documents carry albedo + illumination; three-layer ones albedo + shade + light).
class LayeredDocument {
 public:
  LayeredDocument() = default;
  LayeredDocument(int width, int height) : dims_{width, height} {}

  static LayeredDocument two_layer(int width, int height);
  static LayeredDocument three_layer(int width, int height);

  Dims dims() const { return dims_; }
  int width() const { return dims_.width; }
  int height() const { return dims_.height; }

  bool has(LayerTag tag) const { return layers_[static_cast<std::size_t>(tag)].has_value(); }
  /// Throws PipelineError naming the layer if absent.
  Layer& layer(LayerTag tag);
  const Layer& layer(LayerTag tag) const;
  void set_layer(LayerTag tag, Layer paths);
  void drop_layer(LayerTag tag) { layers_[static_cast<std::size_t>(tag)].reset(); }

  std::size_t path_count() const;

  friend bool operator==(const LayeredDocument&, const LayeredDocument&) = default;

 private:
  Dims dims_{};
  std::array<std::optional<Layer>, 4> layers_{};
};

inline double luma(const double* rgb) { return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]; }
inline double luma(const Rgb& rgb) { return luma(rgb.data()); }

}  // namespace covec
