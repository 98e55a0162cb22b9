#include <doctest.h>
#include <json.hpp>

#include <random>

#include "covec/edit.hpp"
#include "support/oracles.hpp"

using namespace covec;
using namespace covec::testing;

namespace {

const Rgb kDisk{0.6, 0.3, 0.3};
const Rgb kDiskEdited{0.72, 0.42, 0.42};

// Three paths away from the disk, the disk itself and a square on top of it.
LayeredDocument five_path_doc(Rgb disk_color) {
  LayeredDocument doc = LayeredDocument::three_layer(64, 64);
  Layer& a = doc.layer(LayerTag::albedo);
  a.push_back(make_rect(2, 2, 14, 14, LayerTag::albedo, {0.1, 0.7, 0.2}));
  a.push_back(make_rect(50, 2, 62, 14, LayerTag::albedo, {0.9, 0.9, 0.1}));
  a.push_back(make_circle({54, 54}, 7, LayerTag::albedo, {0.2, 0.2, 0.8}));
  a.push_back(make_circle({32, 32}, 12, LayerTag::albedo, disk_color));
  a.push_back(make_rect(26, 26, 38, 38, LayerTag::albedo, disk_color));
  return doc;
}

RasterImage random_pair_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterImage img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("edit: difference mask") {
  RasterImage a(6, 5, {0.4, 0.4, 0.4});
  CHECK(compute_edit_mask(a, a, 0.1).count() == 0);

  RasterImage b = a;
  b.set(3, 2, {0.4 + 0.9, 0.4, 0.4});
  const Mask one = compute_edit_mask(a, b, 0.1);
  CHECK(one.count() == 1);
  CHECK(one.values[2 * 6 + 3] == 1);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterImage x = random_pair_image(rng, 9, 7);
    const RasterImage y = random_pair_image(rng, 9, 7);
    const Mask m = compute_edit_mask(x, y, 0.3);
    for (int py = 0; py < 7; ++py)
      for (int px = 0; px < 9; ++px) {
        double d = 0;
        for (int c = 0; c < 3; ++c) d += std::abs(x.pixel(px, py)[c] - y.pixel(px, py)[c]);
        CHECK(m.values[py * 9 + px] == (d / 3 > 0.3 ? 1 : 0));
      }
  }
  CHECK_THROWS_AS(compute_edit_mask(a, RasterImage(5, 5), 0.1), InputError);
}

TEST_CASE("edit: iou is symmetric and bounded") {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 20; ++trial) {
    Mask a({8, 8}), b({8, 8});
    for (auto& v : a.values) v = coin(rng);
    for (auto& v : b.values) v = coin(rng);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou(a, a) == (a.count() ? 1.0 : 0.0));
  }
}

TEST_CASE("edit: mse") {
  CHECK(mse(RasterImage(4, 4, {0.3, 0.2, 0.1}), RasterImage(4, 4, {0.3, 0.2, 0.1})) == 0.0);
  CHECK(mse(RasterImage(4, 3), RasterImage(4, 3, {1, 1, 1})) == 1.0);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const RasterImage a = random_pair_image(rng, 11, 6);
    const RasterImage b = random_pair_image(rng, 11, 6);
    CHECK(std::abs(mse(a, b) - image_mse(a, b)) <= 1e-12);
  }
  CHECK_THROWS_AS(mse(RasterImage(2, 2), RasterImage(3, 2)), InputError);
}

TEST_CASE("edit: candidates on the five-path scene") {
  const LayeredDocument doc = five_path_doc(kDisk);
  const RasterImage original = render_document(doc);
  const RasterImage reference = render_document(five_path_doc(kDiskEdited));
  const EditConfig cfg;
  const Mask m = compute_edit_mask(original, reference, cfg.tau_diff);
  REQUIRE(m.count() > 0);

  const auto cands = candidate_paths(doc, original, reference, m, cfg);
  REQUIRE(cands.size() == 2);
  CHECK(cands[0].index == 3);
  CHECK(cands[1].index == 4);
  CHECK(cands[0].area > cands[1].area);
  for (const auto& c : cands) {
    CHECK(c.iou > cfg.gamma_iou);
    CHECK(c.iou <= 1.0);
  }

  // A path matching the edit mask exactly has IoU 1.
  CHECK(iou(path_support(doc.layer(LayerTag::albedo)[3], doc.dims(), {}), path_support(doc.layer(LayerTag::albedo)[3], doc.dims(), {})) == 1.0);

  // The printed compatibility test drops regions that changed by more than delta.
  EditConfig tight = cfg;
  tight.delta_color = 0.1;
  CHECK(candidate_paths(doc, original, reference, m, tight).empty());
}

TEST_CASE("edit: top-K selection is a prefix and error does not grow with K") {
  const LayeredDocument doc = five_path_doc(kDisk);
  const RasterImage original = render_document(doc);
  const RasterImage reference = render_document(five_path_doc(kDiskEdited));
  double last = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> prev;
  for (int k : {1, 2, 4, 8, 16}) {
    EditConfig cfg;
    cfg.k = k;
    const EditResult r = run_edit(doc, original, reference, cfg);
    std::vector<std::size_t> ids;
    for (const auto& e : r.report.edited) ids.push_back(e.candidate.index);
    CHECK(ids.size() <= static_cast<std::size_t>(k));
    REQUIRE(ids.size() >= prev.size());
    CHECK(std::equal(prev.begin(), prev.end(), ids.begin()));
    CHECK(r.report.mse_after <= last + 1e-15);
    CHECK(r.report.mse_after <= r.report.mse_before);
    CHECK(r.report.shortfall == static_cast<std::size_t>(k) - ids.size());
    last = r.report.mse_after;
    prev = ids;
    // Geometry, opacity and order are untouched.
    const Layer& before = doc.layer(LayerTag::albedo);
    const Layer& after = r.doc.layer(LayerTag::albedo);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(before[i].control_points == after[i].control_points);
      CHECK(before[i].opacity == after[i].opacity);
      const bool edited = std::find(ids.begin(), ids.end(), i) != ids.end();
      CHECK((before[i].fill == after[i].fill) == !edited);
    }
  }
}

TEST_CASE("edit: shade-aware color formula") {
  LayeredDocument doc = LayeredDocument::three_layer(10, 10);
  doc.layer(LayerTag::albedo).push_back(make_rect(-40, -40, 50, 50, LayerTag::albedo, {0.9, 0.9, 0.9}));
  doc.layer(LayerTag::shade).push_back(make_rect(-40, -40, 50, 50, LayerTag::shade, {0.5, 0.5, 0.5}));
  doc.layer(LayerTag::light).push_back(make_circle({5, 5}, 3, LayerTag::light, {0.2, 0.1, 0.0}));
  const RasterImage reference(10, 10, {0.3, 0.3, 0.3});
  EditConfig cfg;
  EditCandidate c;
  c.index = 0;
  const EditResult r = apply_color_edit(doc, {c}, reference, cfg);
  REQUIRE(r.report.edited.size() == 1);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(r.report.edited[0].shade_mean[ch] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.doc.layer(LayerTag::albedo)[0].fill[ch] == doctest::Approx(0.3 / 0.5001).epsilon(1e-12));
  }

  // Only albedo colors change: shade and light render bit-identically.
  const RasterizerConfig rcfg;
  for (LayerTag tag : {LayerTag::shade, LayerTag::light}) {
    CHECK(r.doc.layer(tag) == doc.layer(tag));
    const Rgb bg = tag == LayerTag::shade ? Rgb{1, 1, 1} : Rgb{0, 0, 0};
    CHECK(rasterize_layer(r.doc.layer(tag), bg, doc.dims(), rcfg).image ==
          rasterize_layer(doc.layer(tag), bg, doc.dims(), rcfg).image);
  }

  // Unit shade leaves C_ref essentially unchanged.
  doc.layer(LayerTag::shade).clear();
  const EditResult plain = apply_color_edit(doc, {c}, reference, cfg);
  CHECK(plain.doc.layer(LayerTag::albedo)[0].fill[0] == doctest::Approx(0.3 / (1 + 1e-4)).epsilon(1e-12));
}

TEST_CASE("edit: no candidates and bad K") {
  const LayeredDocument doc = five_path_doc(kDisk);
  const RasterImage original = render_document(doc);
  const EditResult r = run_edit(doc, original, original, EditConfig{});
  CHECK(r.report.edited.empty());
  CHECK(r.report.shortfall == 1);
  CHECK(r.doc == doc);
  CHECK(r.report.mse_after == r.report.mse_before);

  EditConfig bad;
  bad.k = 0;
  CHECK_THROWS_AS(run_edit(doc, original, original, bad), InputError);
}

TEST_CASE("edit: json report fields") {
  const LayeredDocument doc = five_path_doc(kDisk);
  const RasterImage original = render_document(doc);
  const RasterImage reference = render_document(five_path_doc(kDiskEdited));
  EditConfig cfg;
  cfg.k = 4;
  const EditResult r = run_edit(doc, original, reference, cfg);
  const auto j = nlohmann::json::parse(r.report.to_json());
  CHECK(j.at("k") == 4);
  CHECK(j.at("candidates") == 2);
  CHECK(j.at("shortfall") == 2);
  CHECK(j.at("selected") == nlohmann::json::array({3, 4}));
  CHECK(j.at("paths").size() == 2);
  CHECK(j.at("paths")[0].at("new_color").size() == 3);
  CHECK(j.at("mse_after").get<double>() < j.at("mse_before").get<double>());
}
