#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "covec/init.hpp"
#include "support/oracles.hpp"

using namespace covec;
using namespace covec::testing;

namespace {

std::vector<std::uint8_t> bitmap_where(Dims d, auto pred) {
  std::vector<std::uint8_t> b(d.pixels(), 0);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) b[static_cast<std::size_t>(y) * d.width + x] = pred(x, y) ? 1 : 0;
  return b;
}

SemanticMask rect_mask(const RasterImage& ref, int x0, int y0, int x1, int y1) {
  return make_mask(bitmap_where(ref.dims(), [&](int x, int y) { return x >= x0 && x < x1 && y >= y0 && y < y1; }),
                   ref);
}

SemanticMask disk_mask(const RasterImage& ref, double cx, double cy, double r) {
  return make_mask(bitmap_where(ref.dims(),
                                [&](int x, int y) {
                                  const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                                  return dx * dx + dy * dy <= r * r;
                                }),
                   ref);
}

double channel_std(const RasterImage& img, int c) {
  double s = 0, s2 = 0;
  const double n = static_cast<double>(img.pixel_count());
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const double v = img.data()[3 * p + c];
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return std::sqrt(std::max(0.0, s2 / n - m * m));
}

bool disjoint(const SemanticMask& a, const SemanticMask& b) {
  for (std::size_t p = 0; p < a.bitmap.size(); ++p)
    if (a.bitmap[p] && b.bitmap[p]) return false;
  return true;
}

}  // namespace

TEST_CASE("albedo: provided map is returned verbatim") {
  std::mt19937_64 rng(1);
  const RasterImage img = random_image(rng, 8, 6);
  const RasterImage alb = random_image(rng, 8, 6);
  CHECK(load_or_fallback_albedo(img, alb) == alb);
  CHECK_THROWS_AS(load_or_fallback_albedo(img, RasterImage(7, 6)), InputError);
}

TEST_CASE("albedo fallback: uniform gray is fully lit") {
  const RasterImage img(20, 12, {0.5, 0.5, 0.5});
  const RasterImage alb = load_or_fallback_albedo(img, std::nullopt);
  for (double v : alb.data()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("albedo fallback: vignette is mostly removed") {
  const int w = 96, h = 64;
  const Rgb base{0.7, 0.5, 0.3};
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x + 0.5 - w / 2.0) / w, dy = (y + 0.5 - h / 2.0) / h;
      const double v = 1.0 - 1.2 * (dx * dx + dy * dy);
      img.set(x, y, {base[0] * v, base[1] * v, base[2] * v});
    }
  }
  const RasterImage alb = load_or_fallback_albedo(img, std::nullopt);
  for (int c = 0; c < 3; ++c) {
    CHECK(channel_std(alb, c) * 4.0 <= channel_std(img, c));
  }
}

TEST_CASE("gaussian blur preserves constants and mass-center") {
  ScalarMap m(Dims{15, 9}, 0.25);
  const ScalarMap b = gaussian_blur(m, 3.0);
  for (double v : b.values) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("segment: label map halves become two equal masks") {
  const RasterImage ref(10, 4, {0.3, 0.3, 0.3});
  LabelMap labels{ref.dims(), std::vector<std::uint32_t>(40, 0)};
  for (int y = 0; y < 4; ++y)
    for (int x = 5; x < 10; ++x) labels.labels[y * 10 + x] = 1;
  const auto masks = masks_from_labels(labels, ref, std::nullopt);
  REQUIRE(masks.size() == 2);
  CHECK(masks[0].area == 20);
  CHECK(masks[1].area == 20);

  // File ingestion treats 0 as unlabeled.
  const auto ingested = load_or_fallback_segment(ref, labels, {});
  REQUIRE(ingested.size() == 1);
  CHECK(ingested[0].area == 20);
  CHECK(ingested[0].contains(7, 2));

  LabelMap empty{ref.dims(), std::vector<std::uint32_t>(40, 0)};
  CHECK_THROWS_AS(load_or_fallback_segment(ref, empty, {}), InputError);
}

TEST_CASE("segment fallback: red disk on blue field gives two regions") {
  const int w = 64, h = 48;
  RasterImage img(w, h, {0.1, 0.2, 0.9});
  auto truth = bitmap_where(img.dims(), [](int x, int y) {
    const double dx = x + 0.5 - 30, dy = y + 0.5 - 22;
    return dx * dx + dy * dy <= 14.0 * 14.0;
  });
  for (std::size_t p = 0; p < truth.size(); ++p)
    if (truth[p]) {
      img.data()[3 * p] = 0.9;
      img.data()[3 * p + 1] = 0.1;
      img.data()[3 * p + 2] = 0.1;
    }
  const auto masks = segment_fallback(img, {});
  REQUIRE(masks.size() == 2);
  const SemanticMask& disk = masks[0].bitmap[22 * w + 30] ? masks[0] : masks[1];
  std::size_t agree = 0;
  for (std::size_t p = 0; p < truth.size(); ++p) agree += (disk.bitmap[p] != 0) == (truth[p] != 0);
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(truth.size()));
}

TEST_CASE("segment fallback: uniform image is one mask") {
  const RasterImage img(17, 11, {0.4, 0.6, 0.2});
  const auto masks = segment_fallback(img, {});
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].area == img.pixel_count());
}

TEST_CASE("segment fallback: noise speckles merge away") {
  std::mt19937_64 rng(9);
  RasterImage img(40, 40, {0.5, 0.5, 0.5});
  // A lone off-color pixel is below the minimum area for 1600 px (2 px).
  img.set(10, 10, {0.0, 0.0, 0.0});
  const auto masks = segment_fallback(img, {});
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].area == 1600);
}

TEST_CASE("binarize: constant and two-level regions") {
  RasterImage img(8, 4, {0.6, 0.6, 0.6});
  const auto whole = rect_mask(img, 0, 0, 8, 4);
  auto out = region_binarize(img, {whole});
  REQUIRE(out.size() == 1);
  CHECK(out[0].bitmap == whole.bitmap);

  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) img.set(x, y, x < 4 ? Rgb{0.2, 0.2, 0.2} : Rgb{0.8, 0.8, 0.8});
  const auto th = region_thresholds(img, {whole});
  CHECK(th[0].threshold == doctest::Approx(0.5));
  out = region_binarize(img, {whole});
  REQUIRE(out.size() == 1);
  CHECK(out[0].bitmap == rect_mask(img, 0, 0, 4, 4).bitmap);
  CHECK(out[0].parent == 0);
}

TEST_CASE("binarize: matches a per-pixel oracle on random inputs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterImage img = random_image(rng, 24, 18);
    std::vector<SemanticMask> masks;
    std::bernoulli_distribution coin(0.4);
    for (int m = 0; m < 4; ++m) {
      std::vector<std::uint8_t> bits(img.pixel_count());
      for (auto& b : bits) b = coin(rng) ? 1 : 0;
      masks.push_back(make_mask(bits, img));
    }
    const auto out = region_binarize(img, masks);
    std::size_t k = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      double sum = 0;
      int cnt = 0;
      for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        if (!masks[i].bitmap[p]) continue;
        const double* px = img.data().data() + 3 * p;
        sum += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        ++cnt;
      }
      const double t = sum / cnt;
      std::vector<std::uint8_t> expect(img.pixel_count(), 0);
      bool any = false;
      for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        const double* px = img.data().data() + 3 * p;
        if (masks[i].bitmap[p] && 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2] <= t) expect[p] = any = true;
      }
      if (!any) continue;
      REQUIRE(k < out.size());
      CHECK(out[k].bitmap == expect);
      CHECK(out[k].parent == static_cast<int>(i));
      for (std::size_t p = 0; p < img.pixel_count(); ++p)
        if (out[k].bitmap[p]) CHECK(masks[i].bitmap[p]);
      ++k;
    }
    CHECK(k == out.size());
  }
}

TEST_CASE("organize: disjoint masks share one group") {
  const RasterImage ref(30, 10);
  const auto g = organize_masks({rect_mask(ref, 0, 0, 5, 5), rect_mask(ref, 10, 0, 18, 5), rect_mask(ref, 20, 0, 30, 10)});
  REQUIRE(g.groups.size() == 1);
  CHECK(g.groups[0].size() == 3);
  CHECK(g.groups[0][0].area == 100);
}

TEST_CASE("organize: nested masks split back to front") {
  const RasterImage ref(20, 20);
  const auto g = organize_masks({rect_mask(ref, 5, 5, 10, 10), rect_mask(ref, 0, 0, 20, 20), rect_mask(ref, 2, 2, 15, 15)});
  REQUIRE(g.groups.size() == 3);
  CHECK(g.groups[0][0].area == 400);
  CHECK(g.groups[1][0].area == 169);
  CHECK(g.groups[2][0].area == 25);
}

TEST_CASE("organize: random overlapping sets stay disjoint and complete") {
  std::mt19937_64 rng(5);
  const RasterImage ref(40, 40);
  std::uniform_int_distribution<int> pos(0, 35), size(2, 15);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SemanticMask> masks;
    for (int m = 0; m < 12; ++m) {
      const int x = pos(rng), y = pos(rng);
      masks.push_back(rect_mask(ref, x, y, std::min(40, x + size(rng)), std::min(40, y + size(rng))));
    }
    const auto g = organize_masks(masks);
    CHECK(g.mask_count() == masks.size());
    std::multiset<std::vector<std::uint8_t>> in, out;
    for (const auto& m : masks) in.insert(m.bitmap);
    for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
      const auto& group = g.groups[gi];
      for (std::size_t a = 0; a < group.size(); ++a) {
        out.insert(group[a].bitmap);
        for (std::size_t b = a + 1; b < group.size(); ++b) CHECK(disjoint(group[a], group[b]));
      }
    }
    CHECK(in == out);
    // Larger masks never sit above smaller ones they overlap.
    for (std::size_t gi = 0; gi < g.groups.size(); ++gi)
      for (std::size_t gj = gi + 1; gj < g.groups.size(); ++gj)
        for (const auto& lo : g.groups[gi])
          for (const auto& hi : g.groups[gj])
            if (!disjoint(lo, hi)) CHECK(lo.area >= hi.area);
  }
}

TEST_CASE("trace: rectangle collapses to its four corners") {
  const RasterImage ref(20, 16);
  const auto m = rect_mask(ref, 3, 4, 12, 10);
  const Polyline raw = trace_boundary(m);
  REQUIRE(raw.vertices.size() == 4);
  CHECK(raw.vertices[0] == Vec2{3, 4});
  CHECK(raw.vertices[1] == Vec2{12, 4});
  CHECK(raw.vertices[2] == Vec2{12, 10});
  CHECK(raw.vertices[3] == Vec2{3, 10});
  const Polyline simp = trace_and_simplify(m, 0.5);
  CHECK(simp.vertices == raw.vertices);
}

TEST_CASE("trace: single pixel is a unit square") {
  const RasterImage ref(5, 5);
  const auto m = rect_mask(ref, 2, 3, 3, 4);
  const Polyline p = trace_boundary(m);
  REQUIRE(p.vertices.size() == 4);
  CHECK(p.vertices[0] == Vec2{2, 3});
  CHECK(p.vertices[2] == Vec2{3, 4});
}

TEST_CASE("trace: L shape and largest component only") {
  const RasterImage ref(12, 12);
  auto bits = bitmap_where(ref.dims(), [](int x, int y) {
    return (x >= 1 && x < 6 && y >= 1 && y < 8) || (x >= 6 && x < 9 && y >= 5 && y < 8) || (x == 11 && y == 11);
  });
  const Polyline p = trace_boundary(make_mask(bits, ref));
  const std::vector<Vec2> expect{{1, 1}, {6, 1}, {6, 5}, {9, 5}, {9, 8}, {1, 8}};
  CHECK(p.vertices == expect);
}

TEST_CASE("trace: every pixel centre is classified by the traced loop") {
  std::mt19937_64 rng(77);
  const RasterImage ref(30, 30);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_real_distribution<double> u(8, 22), r(4, 8);
    const auto m = disk_mask(ref, u(rng), u(rng), r(rng));
    const Polyline p = trace_boundary(m);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) CHECK(ray_cast_inside(p.vertices, {x + 0.5, y + 0.5}) == m.contains(x, y));
  }
}

TEST_CASE("simplify: disk boundary stays within epsilon") {
  const RasterImage ref(120, 120);
  const auto m = disk_mask(ref, 60, 60, 50);
  const Polyline raw = trace_boundary(m);
  const Polyline simp = simplify_closed(raw, 2.0);
  CHECK(simp.vertices.size() < raw.vertices.size());
  for (const Vec2& v : raw.vertices) CHECK(brute_min_distance(simp.vertices, v) <= 2.0 + 1e-12);
  CHECK(simplify_closed(raw, 0.0).vertices == raw.vertices);
}

TEST_CASE("fit: square gives four straight segments") {
  Polyline sq;
  sq.vertices = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  const auto pts = fit_bezier_contour(sq, 4);
  REQUIRE(pts.size() == 12);
  VectorPath path;
  path.control_points = pts;
  const Polyline flat = flatten_bezier(path, 0.1);
  for (const Vec2& v : flat.vertices) CHECK(brute_min_distance(sq.vertices, v) <= 0.1);
  for (const Vec2& v : sq.vertices) CHECK(brute_min_distance(flat.vertices, v) <= 0.1);
  CHECK_THROWS_AS(fit_bezier_contour(Polyline{{{0, 0}, {1, 1}}, {}}, 4), InputError);
}

TEST_CASE("fit: closure and circle deviation bound") {
  Polyline circle;
  const double r = 30.0;
  for (int i = 0; i < 100; ++i) {
    const double a = 2 * std::numbers::pi * i / 100;
    circle.vertices.push_back({50 + r * std::cos(a), 50 + r * std::sin(a)});
  }
  const auto pts = fit_bezier_contour(circle, 8);
  REQUIRE(pts.size() == 24);
  VectorPath path;
  path.control_points = pts;
  CHECK(path.point(24) == pts[0]);

  // Sagitta of the widest chord actually produced.
  double bound = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const Vec2 a = pts[3 * i], b = path.point(3 * i + 3);
    const double half = norm(b - a) / 2;
    bound = std::max(bound, r - std::sqrt(r * r - half * half));
  }
  CHECK(bound <= r * (1 - std::cos(std::numbers::pi / 8)) * 1.2);
  for (int i = 0; i < 8; ++i) {
    const Vec2 a = pts[3 * i], b = path.point(3 * i + 3);
    for (int s = 0; s <= 20; ++s) {
      const Vec2 q = cubic_point(a, pts[3 * i + 1], pts[3 * i + 2], b, s / 20.0);
      CHECK(brute_min_distance(circle.vertices, q) <= bound + 1e-9);
    }
  }
}

TEST_CASE("init: shading-free flat image gives unit illumination") {
  const RasterImage img(32, 24, {0.4, 0.7, 0.2});
  const auto masks = std::vector<SemanticMask>{rect_mask(img, 0, 0, 32, 24)};
  const auto res = init_layers(img, img, masks, {});
  REQUIRE(res.albedo.size() == 1);
  REQUIRE(res.illumination.size() == 1);
  for (double c : res.illumination[0].fill) CHECK(c == doctest::Approx(1.0).epsilon(0.05));
  CHECK(res.albedo_mask_renders.size() == 1);
  CHECK(res.illumination_mask_renders.size() == 1);
}

TEST_CASE("init: shaded disk attenuation and counts") {
  const int w = 64, h = 64;
  RasterImage albedo(w, h, {0.2, 0.5, 0.8});
  const auto disk = disk_mask(albedo, 32, 32, 16);
  for (std::size_t p = 0; p < disk.bitmap.size(); ++p)
    if (disk.bitmap[p]) {
      albedo.data()[3 * p] = 0.8;
      albedo.data()[3 * p + 1] = 0.2;
      albedo.data()[3 * p + 2] = 0.2;
    }
  RasterImage img = albedo;
  for (std::size_t p = 0; p < disk.bitmap.size(); ++p)
    if (disk.bitmap[p])
      for (int c = 0; c < 3; ++c) img.data()[3 * p + c] *= 0.5;
  const auto background = make_mask(bitmap_where(albedo.dims(), [&](int x, int y) { return !disk.contains(x, y); }), albedo);
  const auto res = init_layers(img, albedo, {background, disk}, {});
  CHECK(res.albedo.size() == 2);
  CHECK(res.illumination.size() == 2);

  const VectorPath* disk_path = nullptr;
  for (const auto& p : res.albedo) {
    for (double c : p.fill) CHECK((c >= 0.0 && c <= 1.0));
    CHECK(p.opacity == 1.0);
    if (p.fill[0] > 0.7) disk_path = &p;
  }
  REQUIRE(disk_path);
  CHECK(disk_path->fill[1] == doctest::Approx(0.2));
  bool found = false;
  for (const auto& p : res.illumination) {
    if (std::abs(p.fill[0] - 0.5) <= 0.05 && std::abs(p.fill[1] - 0.5) <= 0.05 && std::abs(p.fill[2] - 0.5) <= 0.05)
      found = true;
  }
  CHECK(found);
  CHECK_THROWS_AS(init_layers(img, albedo, {}, {}), PipelineError);
}

TEST_CASE("init: budget caps the path count") {
  const RasterImage img(40, 40, {0.5, 0.5, 0.5});
  std::vector<SemanticMask> masks;
  for (int i = 0; i < 4; ++i) masks.push_back(rect_mask(img, 10 * i, 0, 10 * i + 10, 40));
  InitConfig cfg;
  cfg.path_budget = 6;
  const auto res = init_layers(img, img, masks, cfg);
  CHECK(res.albedo.size() == 4);
  CHECK(res.illumination.size() == 2);
}

TEST_CASE("init: albedo-only mode fills one layer") {
  RasterImage img(32, 32, {0.8, 0.8, 0.8});
  for (int y = 0; y < 32; ++y)
    for (int x = 16; x < 32; ++x) img.set(x, y, {0.3, 0.3, 0.3});
  const auto res = init_albedo_only(img, {rect_mask(img, 0, 0, 32, 32)}, {});
  CHECK(res.illumination.empty());
  REQUIRE(res.albedo.size() == 2);
  CHECK(res.albedo[1].fill[0] == doctest::Approx(0.3));
  CHECK(res.albedo[1].group == 1);
}

TEST_CASE("footprint: holes are filled, stray components dropped") {
  RasterImage img(24, 24, {0.5, 0.5, 0.5});
  const SemanticMask ring = make_mask(bitmap_where(img.dims(),
                                                   [](int x, int y) {
                                                     const bool outer = x >= 2 && x < 18 && y >= 2 && y < 18;
                                                     const bool hole = x >= 6 && x < 14 && y >= 6 && y < 14;
                                                     return (outer && !hole) || (x == 22 && y == 22);
                                                   }),
                                      img);
  const SemanticMask f = outer_footprint(ring);
  CHECK(f.area == 16 * 16);
  CHECK(f.contains(10, 10));
  CHECK_FALSE(f.contains(22, 22));
  CHECK(f.mean_color == ring.mean_color);
}

TEST_CASE("albedo-only init: a region inside another's hole stays on top") {
  // Background frame with a darker band, disk in the middle.
  RasterImage img(32, 32, {0.2, 0.3, 0.7});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double dx = x + 0.5 - 16, dy = y + 0.5 - 16;
      if (dx * dx + dy * dy <= 64) img.set(x, y, {0.9, 0.8, 0.1});
      else if (y >= 28) img.set(x, y, {0.1, 0.15, 0.35});
    }
  const SemanticMask disk = disk_mask(img, 16, 16, 8);
  SemanticMask bg = disk;
  for (auto& b : bg.bitmap) b = !b;
  bg = make_mask(bg.bitmap, img);
  const auto res = init_albedo_only(img, {bg, disk}, {});
  LayeredDocument doc = LayeredDocument::three_layer(32, 32);
  doc.set_layer(LayerTag::albedo, res.albedo);
  const RasterImage r = render_composite(doc, CompositeMode::three_layer, {});
  // The disk path must not be painted over by the background's shadow path.
  CHECK(std::abs(r.rgb(16, 16)[2] - 0.1) < 0.01);
  const auto disk_path = std::find_if(res.albedo.begin(), res.albedo.end(), [](const VectorPath& p) { return p.fill[0] > 0.5; });
  REQUIRE(disk_path != res.albedo.end());
  CHECK(disk_path->group >= 1);
}
