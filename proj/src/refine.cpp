#include "covec/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace covec {
namespace {

bool bounded(LayerTag tag) { return tag == LayerTag::albedo || tag == LayerTag::shade; }

RasterImage multiply(const RasterImage& a, const RasterImage& b) { return blend(BlendMode::multiply, a, b); }

double mse(const RasterImage& a, const RasterImage& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return s / static_cast<double>(a.data().size());
}

RasterImage render_white(std::span<const VectorPath> paths, Dims dims, const RasterizerConfig& rcfg) {
  return rasterize_layer(paths, {1.0, 1.0, 1.0}, dims, rcfg).image;
}

struct Component {
  std::vector<std::size_t> pixels;
  double total = 0.0;
  int min_x = 0;
  int min_y = 0;
};

}  // namespace

void RefineConfig::validate() const {
  if (rounds_max < 0) throw InputError("rounds must be >= 0");
  if (iters_per_round < 1) throw InputError("iterations per round must be >= 1");
  if (paths_per_round < 0) throw InputError("paths per round must be >= 0");
  if (new_path_segments < 2) throw InputError("new paths need at least 2 segments");
  if (path_budget < 1) throw InputError("path budget must be >= 1");
  if (!(cleanup_loss_eps >= 0.0) || !(merge_color_eps >= 0.0) || !(shade_epsilon > 0.0))
    throw InputError("cleanup thresholds must be non-negative");
}

ScalarMap error_map(const RasterImage& target, const RasterImage& composite) {
  if (target.dims() != composite.dims()) throw InputError("error map: dimensions differ");
  ScalarMap out(target.dims());
  for (std::size_t p = 0; p < out.values.size(); ++p) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = target.data()[3 * p + c] - composite.data()[3 * p + c];
      s += d * d;
    }
    out.values[p] = s / 3.0;
  }
  return out;
}

VectorPath circle_path(Vec2 center, double radius, int segments, LayerTag tag, Rgb fill) {
  if (segments < 2) throw InputError("circle needs at least 2 segments");
  const double step = 2.0 * std::numbers::pi / segments;
  const double k = 4.0 / 3.0 * std::tan(step / 4.0) * radius;
  VectorPath path;
  for (int i = 0; i < segments; ++i) {
    const double a0 = i * step, a1 = (i + 1) * step;
    const Vec2 p0{center.x + radius * std::cos(a0), center.y + radius * std::sin(a0)};
    const Vec2 p1{center.x + radius * std::cos(a1), center.y + radius * std::sin(a1)};
    path.control_points.push_back(p0);
    path.control_points.push_back(p0 + k * Vec2{-std::sin(a0), std::cos(a0)});
    path.control_points.push_back(p1 - k * Vec2{-std::sin(a1), std::cos(a1)});
  }
  path.fill = fill;
  path.opacity = 1.0;
  path.tag = tag;
  return path;
}

std::vector<VectorPath> propose_paths(const ScalarMap& err, std::size_t n, const RasterImage& target,
                                      const RasterImage& partner, LayerTag tag, const RefineConfig& cfg) {
  const Dims d = err.dims;
  if (target.dims() != d || partner.dims() != d) throw InputError("propose: dimensions differ");
  if (n == 0) return {};

  std::vector<double> sorted = err.values;
  const std::size_t rank =
      std::min(sorted.size() - 1, static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(sorted.size()))) - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
  const double threshold = sorted[rank];
  auto hot = [&](std::size_t p) { return err.values[p] > 0.0 && err.values[p] >= threshold; };

  std::vector<int> comp(d.pixels(), -1);
  std::vector<Component> comps;
  for (std::size_t start = 0; start < d.pixels(); ++start) {
    if (comp[start] != -1 || !hot(start)) continue;
    Component c;
    c.min_x = d.width;
    c.min_y = d.height;
    const int id = static_cast<int>(comps.size());
    std::vector<std::size_t> stack{start};
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      c.pixels.push_back(p);
      c.total += err.values[p];
      const int x = static_cast<int>(p % d.width), y = static_cast<int>(p / d.width);
      c.min_x = std::min(c.min_x, x);
      c.min_y = std::min(c.min_y, y);
      const std::pair<int, int> nb[4] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto [nx, ny] : nb) {
        if (nx < 0 || ny < 0 || nx >= d.width || ny >= d.height) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * d.width + nx;
        if (comp[q] == -1 && hot(q)) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    comps.push_back(std::move(c));
  }
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.total != b.total) return a.total > b.total;
    return std::tie(a.min_y, a.min_x) < std::tie(b.min_y, b.min_x);
  });

  std::vector<VectorPath> out;
  const double rmax = std::max(2.0, std::min(d.width, d.height) / 4.0);
  for (const Component& c : comps) {
    if (out.size() >= n) break;
    if (c.pixels.size() < static_cast<std::size_t>(cfg.min_component_pixels)) continue;
    Vec2 center{};
    Rgb color{0, 0, 0};
    for (std::size_t p : c.pixels) {
      const double w = err.values[p] / c.total;
      center += w * Vec2{static_cast<double>(p % d.width) + 0.5, static_cast<double>(p / d.width) + 0.5};
      for (int ch = 0; ch < 3; ++ch) {
        const double ratio = target.data()[3 * p + ch] / std::max(partner.data()[3 * p + ch], cfg.shade_epsilon);
        color[ch] += bounded(tag) ? std::clamp(ratio, 0.0, 1.0) : std::max(ratio, 0.0);
      }
    }
    for (double& v : color) v /= static_cast<double>(c.pixels.size());
    const double radius = std::clamp(std::sqrt(static_cast<double>(c.pixels.size()) / std::numbers::pi), 2.0, rmax);
    out.push_back(circle_path(center, radius, cfg.new_path_segments, tag, color));
  }
  return out;
}

CleanupResult cleanup_paths(Layer layer, std::size_t first_mutable, const RasterImage& partner,
                            const RasterImage& target, const RefineConfig& cfg, const RasterizerConfig& rcfg) {
  const Dims dims = target.dims();
  if (partner.dims() != dims) throw InputError("cleanup: dimensions differ");
  CleanupResult out;
  if (first_mutable >= layer.size()) {
    out.layer = std::move(layer);
    return out;
  }

  // Coverage never changes here, so every candidate is evaluated by
  // re-compositing cached coverage maps.
  const LayerRaster raster = rasterize_layer(layer, {1.0, 1.0, 1.0}, dims, rcfg);
  const std::size_t n = layer.size();
  const std::size_t npix = dims.pixels();
  std::vector<bool> active(n, true);
  std::vector<Rgb> colors(n);
  std::vector<double> area(n, 0.0);
  std::vector<std::vector<std::uint8_t>> solid(n, std::vector<std::uint8_t>(npix, 0));
  for (std::size_t i = 0; i < n; ++i) {
    colors[i] = layer[i].fill;
    for (std::size_t p = 0; p < npix; ++p) {
      area[i] += raster.coverage[i].values[p];
      solid[i][p] = raster.coverage[i].values[p] > 0.5;
    }
  }

  auto loss = [&]() {
    RasterImage img(dims.width, dims.height, {1.0, 1.0, 1.0});
    auto& px = img.data();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      VectorPath probe = layer[i];
      probe.fill = colors[i];
      const Rgb c = effective_color(probe);
      for (std::size_t p = 0; p < npix; ++p) {
        const double a = raster.coverage[i].values[p] * layer[i].opacity;
        if (a == 0.0) continue;
        for (int ch = 0; ch < 3; ++ch) px[3 * p + ch] = px[3 * p + ch] * (1.0 - a) + c[ch] * a;
      }
    }
    return mse(multiply(partner, img), target);
  };

  double current = loss();
  double budget = cfg.cleanup_loss_eps;
  for (int pass = 0; pass < 3; ++pass) {
    bool changed = false;
    for (std::size_t i = first_mutable; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[i] || !active[j]) continue;
        double dc = 0.0;
        for (int ch = 0; ch < 3; ++ch) dc = std::max(dc, std::abs(colors[i][ch] - colors[j][ch]));
        if (dc >= cfg.merge_color_eps) continue;
        std::size_t inter = 0, uni = 0;
        for (std::size_t p = 0; p < npix; ++p) {
          inter += solid[i][p] && solid[j][p];
          uni += solid[i][p] || solid[j][p];
        }
        if (uni == 0 || static_cast<double>(inter) / static_cast<double>(uni) <= cfg.merge_iou) continue;
        const std::size_t keep = area[i] >= area[j] ? i : j;
        const std::size_t drop = keep == i ? j : i;
        const Rgb saved = colors[keep];
        const double wsum = area[i] + area[j];
        for (int ch = 0; ch < 3; ++ch)
          colors[keep][ch] = wsum > 0 ? (area[i] * colors[i][ch] + area[j] * colors[j][ch]) / wsum : saved[ch];
        active[drop] = false;
        const double trial = loss();
        const double delta = trial - current;
        if (std::max(delta, 0.0) <= budget) {
          budget -= std::max(delta, 0.0);
          current = trial;
          ++out.merged;
          changed = true;
        } else {
          active[drop] = true;
          colors[keep] = saved;
        }
      }
    }
    for (std::size_t i = first_mutable; i < n; ++i) {
      if (!active[i]) continue;
      active[i] = false;
      const double trial = loss();
      const double delta = trial - current;
      const bool weak = area[i] < cfg.cleanup_area_min || delta < cfg.cleanup_loss_eps;
      if (weak && std::max(delta, 0.0) <= budget) {
        budget -= std::max(delta, 0.0);
        current = trial;
        ++out.removed;
        changed = true;
      } else {
        active[i] = true;
      }
    }
    if (!changed) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    VectorPath p = std::move(layer[i]);
    p.fill = colors[i];
    out.layer.push_back(std::move(p));
  }
  return out;
}

RefineResult refine_layer(Layer layer, LayerTag tag, const Layer& partner, const RasterImage& target,
                          const RefineConfig& cfg, const Schedule& schedule, const RasterizerConfig& rcfg,
                          const RoundCallback& on_round) {
  cfg.validate();
  schedule.validate();
  const Dims dims = target.dims();
  const RasterImage partner_img = render_white(partner, dims, rcfg);
  const double norm = 1.0 / (3.0 * static_cast<double>(dims.pixels()));

  RefineResult out;
  for (int round = 1; round <= cfg.rounds_max; ++round) {
    const std::size_t used = partner.size() + layer.size();
    if (used >= cfg.path_budget) break;
    const RasterImage composite = multiply(partner_img, render_white(layer, dims, rcfg));
    const ScalarMap err = error_map(target, composite);
    if (*std::max_element(err.values.begin(), err.values.end()) < cfg.stop_error) break;

    const std::size_t capacity = cfg.path_budget - used;
    const std::size_t rounds_left = static_cast<std::size_t>(cfg.rounds_max - round + 1);
    const std::size_t want = cfg.paths_per_round > 0
                                 ? std::min<std::size_t>(cfg.paths_per_round, capacity)
                                 : (capacity + rounds_left - 1) / rounds_left;
    Layer fresh = propose_paths(err, want, target, partner_img, tag, cfg);
    if (fresh.empty()) break;

    // Earlier paths are a fixed backdrop for the new ones.
    const RasterImage base = render_white(layer, dims, rcfg);
    LayerOptimizer opt(schedule);
    for (int it = 0; it < cfg.iters_per_round; ++it) {
      const LayerRaster raster = rasterize_over(fresh, base, rcfg);
      RasterImage upstream(dims.width, dims.height);
      for (std::size_t k = 0; k < upstream.data().size(); ++k) {
        const double c = partner_img.data()[k] * raster.image.data()[k];
        upstream.data()[k] = 2.0 * (c - target.data()[k]) * norm * partner_img.data()[k];
      }
      opt.step(fresh, backward_layer(fresh, raster, upstream, rcfg));
    }

    const std::size_t first = layer.size();
    const std::size_t added = fresh.size();
    for (auto& p : fresh) layer.push_back(std::move(p));
    CleanupResult cleaned = cleanup_paths(std::move(layer), first, partner_img, target, cfg, rcfg);
    layer = std::move(cleaned.layer);

    const double loss = mse(multiply(partner_img, render_white(layer, dims, rcfg)), target);
    out.trace.push_back({"refine", round, loss, static_cast<int>(added),
                         static_cast<int>(cleaned.removed + cleaned.merged)});
    if (on_round) on_round(round, layer);
  }
  out.layer = std::move(layer);
  return out;
}

Separation separate_layers(const Layer& illumination) {
  Separation out;
  for (const VectorPath& p : illumination) {
    VectorPath q = p;
    if (*std::max_element(p.fill.begin(), p.fill.end()) <= 1.0) {
      q.tag = LayerTag::shade;
      out.shade.push_back(std::move(q));
    } else {
      q.tag = LayerTag::light;
      q.opacity = 1.0;
      q.fill = {0.0, 0.0, 0.0};
      out.light.push_back(std::move(q));
    }
  }
  return out;
}

Layer assign_light_colors(const Layer& light, const RasterImage& target, const Layer& albedo, const Layer& shade,
                          const RasterizerConfig& rcfg) {
  const Dims dims = target.dims();
  const RasterImage base = multiply(render_white(albedo, dims, rcfg), render_white(shade, dims, rcfg));
  Layer out;
  for (const VectorPath& p : light) {
    const ScalarMap cov = coverage_map(flatten_bezier(p, rcfg.flatten_tolerance), dims, rcfg);
    Rgb sum{0, 0, 0};
    std::size_t count = 0;
    for (std::size_t px = 0; px < dims.pixels(); ++px) {
      if (cov.values[px] <= 0.5) continue;
      ++count;
      for (int c = 0; c < 3; ++c) sum[c] += target.data()[3 * px + c] - base.data()[3 * px + c];
    }
    VectorPath q = p;
    for (int c = 0; c < 3; ++c) q.fill[c] = count ? std::max(0.0, sum[c] / static_cast<double>(count)) : 0.0;
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace covec
