#include "covec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

namespace covec {

namespace {

VectorPath random_path(std::mt19937_64& rng, Dims dims, LayerTag tag, int segments) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cx = dims.width * (0.3 + 0.4 * u(rng));
  const double cy = dims.height * (0.3 + 0.4 * u(rng));
  const double rmax = 0.45 * std::min(dims.width, dims.height);
  std::vector<Vec2> anchors;
  for (int i = 0; i < segments; ++i) {
    const double ang = 2 * std::numbers::pi * (i + 0.3 * u(rng)) / segments;
    const double r = rmax * (0.35 + 0.5 * u(rng));
    anchors.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang)});
  }
  VectorPath p;
  p.tag = tag;
  for (int i = 0; i < segments; ++i) {
    const Vec2 a = anchors[i];
    const Vec2 b = anchors[(i + 1) % segments];
    const Vec2 jitter1{(u(rng) - 0.5) * 2, (u(rng) - 0.5) * 2};
    const Vec2 jitter2{(u(rng) - 0.5) * 2, (u(rng) - 0.5) * 2};
    p.control_points.push_back(a);
    p.control_points.push_back(a + (1.0 / 3.0) * (b - a) + jitter1);
    p.control_points.push_back(a + (2.0 / 3.0) * (b - a) + jitter2);
  }
  // Keep colors away from clamp kinks so differences stay smooth.
  const double hi = (tag == LayerTag::albedo || tag == LayerTag::shade) ? 0.9 : 1.5;
  for (double& c : p.fill) c = 0.1 + (hi - 0.1) * u(rng);
  p.opacity = 0.3 + 0.6 * u(rng);
  return p;
}

double weighted_pixel(const LayeredDocument& doc, CompositeMode mode, const RasterizerConfig& rcfg,
                      const FrozenFlattening& frozen, int px, int py, const Rgb& w) {
  const RasterImage img = render_composite(doc, mode, rcfg, &frozen);
  const double* p = img.pixel(px, py);
  return w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
}

bool close(double analytic, double numeric, const GradcheckConfig& cfg) {
  const double diff = std::abs(analytic - numeric);
  if (diff < cfg.abs_tol) return true;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) < cfg.rel_tol;
}

void run_probe(std::mt19937_64& rng, bool three, std::size_t probe_index, const GradcheckConfig& cfg,
               GradcheckReport& report) {
  const RasterizerConfig& rcfg = cfg.raster;
  std::uniform_int_distribution<int> side(16, 32);
  std::uniform_int_distribution<int> count(1, 5);
  const int w = side(rng), h = side(rng);
  LayeredDocument doc = three ? LayeredDocument::three_layer(w, h) : LayeredDocument::two_layer(w, h);
  const int n = count(rng);
  const LayerTag tags3[] = {LayerTag::albedo, LayerTag::shade, LayerTag::light};
  const LayerTag tags2[] = {LayerTag::albedo, LayerTag::illumination};
  for (int i = 0; i < n; ++i) {
    const LayerTag tag = three ? tags3[i % 3] : tags2[i % 2];
    doc.layer(tag).push_back(random_path(rng, doc.dims(), tag, 2 + static_cast<int>(rng() % 4)));
  }
  const CompositeMode mode = three ? CompositeMode::three_layer : CompositeMode::two_layer;

  std::vector<std::pair<int, int>> band;
  for (LayerTag tag : {LayerTag::albedo, LayerTag::illumination, LayerTag::shade, LayerTag::light}) {
    if (!doc.has(tag)) continue;
    for (const auto& p : doc.layer(tag)) {
      const ScalarMap cov = coverage_map(flatten_bezier(p, rcfg.flatten_tolerance), doc.dims(), rcfg);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (cov.at(x, y) > 1e-3 && cov.at(x, y) < 1 - 1e-3) band.emplace_back(x, y);
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, band.empty() ? 0 : band.size() - 1);
  const auto [px, py] = band.empty() ? std::pair<int, int>{w / 2, h / 2} : band[pick(rng)];
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Rgb weight{u(rng), u(rng), u(rng)};

  RasterImage upstream(w, h);
  upstream.set(px, py, weight);
  const FrozenFlattening frozen = freeze_flattening(doc, rcfg);
  const DocumentGradient grad = backward(doc, upstream, mode, rcfg);

  auto probe = [&](double analytic, double& param, double step, const char* what, LayerTag tag, std::size_t i) {
    const double saved = param;
    param = saved + step;
    const double up = weighted_pixel(doc, mode, rcfg, frozen, px, py, weight);
    param = saved - step;
    const double down = weighted_pixel(doc, mode, rcfg, frozen, px, py, weight);
    param = saved;
    const double numeric = (up - down) / (2 * step);
    ++report.checked;
    if (close(analytic, numeric, cfg)) return;
    ++report.failed;
    report.worst_abs = std::max(report.worst_abs, std::abs(analytic - numeric));
    if (report.failures.size() < 10) {
      std::ostringstream os;
      os << "probe " << probe_index << " " << to_string(tag) << "[" << i << "] " << what << ": analytic " << analytic
         << " numeric " << numeric;
      report.failures.push_back(os.str());
    }
  };

  for (LayerTag tag : {LayerTag::albedo, LayerTag::illumination, LayerTag::shade, LayerTag::light}) {
    if (!doc.has(tag)) continue;
    Layer& layer = doc.layer(tag);
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const PathGradient& g = grad.at(tag)[i];
      for (std::size_t k = 0; k < layer[i].control_points.size(); ++k) {
        probe(g.d_control_points[k].x, layer[i].control_points[k].x, cfg.point_step, "point.x", tag, i);
        probe(g.d_control_points[k].y, layer[i].control_points[k].y, cfg.point_step, "point.y", tag, i);
      }
      for (int c = 0; c < 3; ++c) {
        const double analytic = cfg.flip_color_gradient ? -g.d_color[c] : g.d_color[c];
        probe(analytic, layer[i].fill[c], cfg.appearance_step, "color", tag, i);
      }
      probe(g.d_opacity, layer[i].opacity, cfg.appearance_step, "opacity", tag, i);
    }
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  cfg.raster.validate();
  GradcheckReport report;
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = 0; i < cfg.probes; ++i) {
    run_probe(rng, i % 2 == 1, i, cfg, report);
    ++report.probes;
  }
  return report;
}

}  // namespace covec
