#include "covec/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "covec/parallel.hpp"

namespace covec {
namespace {

constexpr double kSaturation = 30.0;  // |sd| / sigma beyond which coverage is exactly 0 or 1

std::size_t slot(LayerTag tag) { return static_cast<std::size_t>(tag); }

struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double distance_to(Vec2 p) const {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
  }
};

BoundingBox bounds(const std::vector<Vec2>& pts) {
  BoundingBox b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Vec2& p : pts) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

std::array<double, 4> bernstein(double t) {
  const double u = 1.0 - t;
  return {u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t};
}

bool usable(const Polyline& p) { return p.vertices.size() >= 3; }

// Samples of pixel (x, y) on an ss×ss grid.
template <typename Fn>
void for_each_sample(int x, int y, int ss, Fn&& fn) {
  const double step = 1.0 / ss;
  for (int j = 0; j < ss; ++j) {
    for (int i = 0; i < ss; ++i) {
      fn(Vec2{x + (i + 0.5) * step, y + (j + 0.5) * step});
    }
  }
}

}  // namespace

void RasterizerConfig::validate() const {
  if (!(flatten_tolerance > 0.0)) throw InputError("flatten_tolerance must be > 0");
  if (!(aa_sigma > 0.0)) throw InputError("aa_sigma must be > 0");
  if (supersample < 1) throw InputError("supersample must be >= 1");
}

Vec2 bezier_point(const VectorPath& path, std::size_t segment, double t) {
  const auto w = bernstein(t);
  const std::size_t base = 3 * segment;
  Vec2 out{};
  for (std::size_t k = 0; k < 4; ++k) out += w[k] * path.point(base + k);
  return out;
}

Polyline flatten_bezier(const VectorPath& path, double tolerance) {
  if (!(tolerance > 0.0)) throw InputError("flatten tolerance must be > 0");
  validate(path);
  const Vec2 first = path.control_points.front();
  const bool degenerate = std::all_of(path.control_points.begin(), path.control_points.end(),
                                      [&](const Vec2& p) { return p == first; });
  if (degenerate) throw InputError("degenerate path: all control points coincide (single vertex)");

  Polyline out;
  const std::size_t k = path.segment_count();
  for (std::size_t seg = 0; seg < k; ++seg) {
    const Vec2 p0 = path.point(3 * seg);
    const Vec2 p1 = path.point(3 * seg + 1);
    const Vec2 p2 = path.point(3 * seg + 2);
    const Vec2 p3 = path.point(3 * seg + 3);
    // |B''| <= 6 M; chord error of n uniform pieces <= 6M / (8 n^2).
    const double m = std::max(norm(p0 - 2.0 * p1 + p2), norm(p1 - 2.0 * p2 + p3));
    const double pieces = std::ceil(std::sqrt(0.75 * m / tolerance));
    const int n = static_cast<int>(std::clamp(pieces, 1.0, 1024.0));
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / n;
      out.vertices.push_back(bezier_point(path, seg, t));
      out.origins.push_back({static_cast<std::uint32_t>(seg), t});
    }
  }
  return out;
}

Polyline evaluate_at(const VectorPath& path, std::span<const VertexOrigin> origins) {
  Polyline out;
  out.origins.assign(origins.begin(), origins.end());
  out.vertices.reserve(origins.size());
  for (const VertexOrigin& o : origins) out.vertices.push_back(bezier_point(path, o.segment, o.t));
  return out;
}

int winding_number(std::span<const Vec2> loop, Vec2 q) {
  int w = 0;
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = loop[i];
    const Vec2 b = loop[(i + 1) % n];
    const double side = cross(b - a, q - a);
    if (a.y <= q.y) {
      if (b.y > q.y && side > 0) ++w;
    } else if (b.y <= q.y && side < 0) {
      --w;
    }
  }
  return w;
}

SignedDistance signed_distance(const Polyline& polyline, Vec2 q) {
  const auto& v = polyline.vertices;
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  SignedDistance out;
  int w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[i + 1 == n ? 0 : i + 1];
    const Vec2 ab = b - a;
    const Vec2 aq = q - a;
    const double len2 = dot(ab, ab);
    double s = len2 > 0.0 ? dot(aq, ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    const Vec2 foot = a + s * ab;
    const Vec2 d = q - foot;
    const double dist2 = dot(d, d);
    if (dist2 < best) {
      best = dist2;
      out.nearest = {i, foot, s};
    }
    const double side = cross(ab, aq);
    if (a.y <= q.y) {
      if (b.y > q.y && side > 0) ++w;
    } else if (b.y <= q.y && side < 0) {
      --w;
    }
  }
  const double dist = std::sqrt(best);
  out.distance = w != 0 ? -dist : dist;
  return out;
}

double coverage_from_distance(double sd, double sigma) {
  const double z = sd / sigma;
  if (z >= kSaturation) return 0.0;
  if (z <= -kSaturation) return 1.0;
  return 1.0 / (1.0 + std::exp(z));
}

Rgb effective_color(const VectorPath& path) {
  Rgb c = path.fill;
  const bool bounded = path.tag == LayerTag::albedo || path.tag == LayerTag::shade;
  for (double& v : c) v = bounded ? std::clamp(v, 0.0, 1.0) : std::max(v, 0.0);
  return c;
}

PathGradient PathGradient::zeros_like(const VectorPath& path) {
  PathGradient g;
  g.d_control_points.assign(path.control_points.size(), Vec2{});
  return g;
}

GradientBuffer zero_gradients(std::span<const VectorPath> paths) {
  GradientBuffer out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(PathGradient::zeros_like(p));
  return out;
}

std::vector<Polyline> flatten_all(std::span<const VectorPath> paths, const RasterizerConfig& cfg) {
  std::vector<Polyline> out(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) out[i] = flatten_bezier(paths[i], cfg.flatten_tolerance);
  return out;
}

ScalarMap coverage_map(const Polyline& polyline, Dims dims, const RasterizerConfig& cfg) {
  ScalarMap cov(dims, 0.0);
  if (!usable(polyline)) return cov;
  const BoundingBox box = bounds(polyline.vertices);
  const double reach = kSaturation * cfg.aa_sigma;
  const double weight = 1.0 / (cfg.supersample * cfg.supersample);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      double acc = 0.0;
      for_each_sample(x, y, cfg.supersample, [&](Vec2 q) {
        if (box.distance_to(q) >= reach) return;
        acc += coverage_from_distance(signed_distance(polyline, q).distance, cfg.aa_sigma);
      });
      cov.at(x, y) = acc * weight;
    }
  }
  return cov;
}

namespace {

// Source-over of every path onto out.image using the stored coverage.
void composite_into(std::span<const VectorPath> paths, LayerRaster& out) {
  const std::size_t npix = out.image.pixel_count();
  auto& img = out.image.data();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Rgb color = effective_color(paths[i]);
    const double op = paths[i].opacity;
    const auto& cov = out.coverage[i].values;
    for (std::size_t p = 0; p < npix; ++p) {
      const double a = cov[p] * op;
      if (a == 0.0) continue;
      for (int c = 0; c < 3; ++c) img[3 * p + c] = img[3 * p + c] * (1.0 - a) + color[c] * a;
    }
  }
}

}  // namespace

LayerRaster rasterize_layer(std::span<const VectorPath> paths, Rgb background, Dims dims, const RasterizerConfig& cfg,
                            const std::vector<std::vector<VertexOrigin>>* frozen) {
  cfg.validate();
  if (dims.width <= 0 || dims.height <= 0) throw InputError("raster dimensions must be positive");
  if (frozen && frozen->size() != paths.size()) throw InputError("frozen flattening does not match path count");

  LayerRaster out;
  out.background = background;
  out.image = RasterImage(dims.width, dims.height, background);
  out.polylines.resize(paths.size());
  out.coverage.resize(paths.size());

  parallel_for(paths.size(), [&](std::size_t i) {
    out.polylines[i] = frozen ? evaluate_at(paths[i], (*frozen)[i]) : flatten_bezier(paths[i], cfg.flatten_tolerance);
    out.coverage[i] = coverage_map(out.polylines[i], dims, cfg);
  });

  composite_into(paths, out);
  return out;
}

LayerRaster rasterize_over(std::span<const VectorPath> paths, const RasterImage& base, const RasterizerConfig& cfg) {
  cfg.validate();
  const Dims dims = base.dims();
  if (dims.width <= 0 || dims.height <= 0) throw InputError("raster dimensions must be positive");
  LayerRaster out;
  out.image = base;
  out.base = base;
  out.polylines.resize(paths.size());
  out.coverage.resize(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) {
    out.polylines[i] = flatten_bezier(paths[i], cfg.flatten_tolerance);
    out.coverage[i] = coverage_map(out.polylines[i], dims, cfg);
  });
  composite_into(paths, out);
  return out;
}

void accumulate_geometry_gradient(const VectorPath& path, const Polyline& polyline, const ScalarMap& d_coverage,
                                  const RasterizerConfig& cfg, PathGradient& out) {
  if (!usable(polyline)) return;
  const std::size_t n = polyline.vertices.size();
  std::vector<Vec2> d_vertex(n, Vec2{});
  const double weight = 1.0 / (cfg.supersample * cfg.supersample);
  const double sigma = cfg.aa_sigma;
  const Dims dims = d_coverage.dims;

  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double g = d_coverage.at(x, y);
      if (g == 0.0) continue;
      for_each_sample(x, y, cfg.supersample, [&](Vec2 q) {
        const SignedDistance sd = signed_distance(polyline, q);
        const double z = sd.distance / sigma;
        if (std::abs(z) >= kSaturation) return;
        const double c = 1.0 / (1.0 + std::exp(z));
        const double d_sd = g * weight * (-c * (1.0 - c) / sigma);
        const Vec2 diff = q - sd.nearest.foot;
        const double dist = norm(diff);
        if (dist == 0.0) return;
        // sd = sign * |q - foot|; d|q - foot|/d(a) = -u (1 - s), d/d(b) = -u s.
        const double sign = sd.distance < 0.0 ? -1.0 : 1.0;
        const Vec2 u = (1.0 / dist) * diff;
        const double s = sd.nearest.s;
        const std::size_t ia = sd.nearest.edge;
        const std::size_t ib = ia + 1 == n ? 0 : ia + 1;
        d_vertex[ia] += (-d_sd * sign * (1.0 - s)) * u;
        d_vertex[ib] += (-d_sd * sign * s) * u;
      });
    }
  }

  const std::size_t npts = path.control_points.size();
  for (std::size_t v = 0; v < n; ++v) {
    const VertexOrigin o = polyline.origins[v];
    const auto w = bernstein(o.t);
    for (std::size_t k = 0; k < 4; ++k) {
      out.d_control_points[(3 * o.segment + k) % npts] += w[k] * d_vertex[v];
    }
  }
}

GradientBuffer backward_layer(std::span<const VectorPath> paths, const LayerRaster& raster, const RasterImage& upstream,
                              const RasterizerConfig& cfg, std::size_t first_geometry) {
  const Dims dims = raster.image.dims();
  if (upstream.dims() != dims) throw InputError("upstream gradient dimensions do not match layer");
  const std::size_t npaths = paths.size();
  GradientBuffer grads = zero_gradients(paths);
  if (npaths == 0) return grads;

  std::vector<Rgb> colors(npaths);
  std::vector<std::array<bool, 3>> color_live(npaths);
  for (std::size_t i = 0; i < npaths; ++i) {
    colors[i] = effective_color(paths[i]);
    const bool bounded = paths[i].tag == LayerTag::albedo || paths[i].tag == LayerTag::shade;
    for (int c = 0; c < 3; ++c) {
      const double v = paths[i].fill[c];
      color_live[i][c] = bounded ? (v >= 0.0 && v <= 1.0) : v >= 0.0;
    }
  }

  std::vector<ScalarMap> d_cov(npaths, ScalarMap(dims, 0.0));
  std::vector<Rgb> prev(npaths);
  const auto& up = upstream.data();
  const std::size_t npix = dims.pixels();
  for (std::size_t p = 0; p < npix; ++p) {
    Rgb acc = raster.background;
    if (raster.base) acc = {raster.base->data()[3 * p], raster.base->data()[3 * p + 1], raster.base->data()[3 * p + 2]};
    for (std::size_t i = 0; i < npaths; ++i) {
      prev[i] = acc;
      const double a = raster.coverage[i].values[p] * paths[i].opacity;
      for (int c = 0; c < 3; ++c) acc[c] = acc[c] * (1.0 - a) + colors[i][c] * a;
    }
    Rgb g{up[3 * p], up[3 * p + 1], up[3 * p + 2]};
    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
    for (std::size_t i = npaths; i-- > 0;) {
      const double cov = raster.coverage[i].values[p];
      const double op = paths[i].opacity;
      const double a = cov * op;
      double d_alpha = 0.0;
      for (int c = 0; c < 3; ++c) {
        if (color_live[i][c]) grads[i].d_color[c] += g[c] * a;
        d_alpha += g[c] * (colors[i][c] - prev[i][c]);
        g[c] *= 1.0 - a;
      }
      grads[i].d_opacity += d_alpha * cov;
      d_cov[i].values[p] = d_alpha * op;
    }
  }

  parallel_for(npaths, [&](std::size_t i) {
    if (i < first_geometry) return;
    accumulate_geometry_gradient(paths[i], raster.polylines[i], d_cov[i], cfg, grads[i]);
  });
  return grads;
}

RasterImage blend(BlendMode mode, const RasterImage& a, const RasterImage& b) {
  if (a.dims() != b.dims()) throw InputError("blend: image dimensions differ");
  RasterImage out = a;
  auto& o = out.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = mode == BlendMode::multiply ? o[i] * bd[i] : o[i] + bd[i];
  }
  return out;
}

FrozenFlattening freeze_flattening(const LayeredDocument& doc, const RasterizerConfig& cfg) {
  FrozenFlattening f;
  for (LayerTag tag : {LayerTag::albedo, LayerTag::illumination, LayerTag::shade, LayerTag::light}) {
    if (!doc.has(tag)) continue;
    for (const VectorPath& p : doc.layer(tag)) f.layers[slot(tag)].push_back(flatten_bezier(p, cfg.flatten_tolerance).origins);
  }
  return f;
}

CompositeEval evaluate_composite(const LayeredDocument& doc, CompositeMode mode, const RasterizerConfig& cfg,
                                 const FrozenFlattening* frozen) {
  constexpr Rgb white{1.0, 1.0, 1.0};
  constexpr Rgb black{0.0, 0.0, 0.0};
  CompositeEval eval;
  eval.mode = mode;
  auto render = [&](LayerTag tag, Rgb bg) -> const LayerRaster& {
    const auto* fz = frozen ? &frozen->layers[slot(tag)] : nullptr;
    eval.layers[slot(tag)] = rasterize_layer(doc.layer(tag), bg, doc.dims(), cfg, fz);
    return *eval.layers[slot(tag)];
  };
  if (mode == CompositeMode::two_layer) {
    // Resolve both layers first so a missing one is reported before any work.
    doc.layer(LayerTag::albedo);
    doc.layer(LayerTag::illumination);
    const auto& a = render(LayerTag::albedo, white);
    const auto& i = render(LayerTag::illumination, white);
    eval.image = blend(BlendMode::multiply, a.image, i.image);
  } else {
    doc.layer(LayerTag::albedo);
    doc.layer(LayerTag::shade);
    doc.layer(LayerTag::light);
    const auto& a = render(LayerTag::albedo, white);
    const auto& s = render(LayerTag::shade, white);
    const auto& l = render(LayerTag::light, black);
    eval.image = blend(BlendMode::plus_lighter, blend(BlendMode::multiply, a.image, s.image), l.image);
  }
  return eval;
}

RasterImage render_composite(const LayeredDocument& doc, CompositeMode mode, const RasterizerConfig& cfg,
                             const FrozenFlattening* frozen) {
  return evaluate_composite(doc, mode, cfg, frozen).image;
}

DocumentGradient backward(const LayeredDocument& doc, const CompositeEval& eval, const RasterImage& upstream,
                          const RasterizerConfig& cfg) {
  DocumentGradient out;
  auto layer_grad = [&](LayerTag tag, const RasterImage& g) {
    out.at(tag) = backward_layer(doc.layer(tag), eval.layer(tag), g, cfg);
  };
  if (eval.mode == CompositeMode::two_layer) {
    const auto& a = eval.layer(LayerTag::albedo).image;
    const auto& i = eval.layer(LayerTag::illumination).image;
    layer_grad(LayerTag::albedo, blend(BlendMode::multiply, upstream, i));
    layer_grad(LayerTag::illumination, blend(BlendMode::multiply, upstream, a));
  } else {
    const auto& a = eval.layer(LayerTag::albedo).image;
    const auto& s = eval.layer(LayerTag::shade).image;
    layer_grad(LayerTag::albedo, blend(BlendMode::multiply, upstream, s));
    layer_grad(LayerTag::shade, blend(BlendMode::multiply, upstream, a));
    layer_grad(LayerTag::light, upstream);
  }
  return out;
}

DocumentGradient backward(const LayeredDocument& doc, const RasterImage& upstream, CompositeMode mode,
                          const RasterizerConfig& cfg) {
  return backward(doc, evaluate_composite(doc, mode, cfg), upstream, cfg);
}

}  // namespace covec
