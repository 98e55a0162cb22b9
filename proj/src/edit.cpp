#include "covec/edit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "covec/parallel.hpp"

namespace covec {

void EditConfig::validate() const {
  if (!(tau_diff > 0.0) || !(gamma_iou > 0.0) || !(delta_color > 0.0) || !(epsilon_shade > 0.0))
    throw InputError("edit thresholds must be positive");
  if (k < 1) throw InputError("edit K must be >= 1, got " + std::to_string(k));
}

std::size_t Mask::count() const { return static_cast<std::size_t>(std::count(values.begin(), values.end(), 1)); }

namespace {

void require_same_dims(Dims a, Dims b, const char* what) {
  if (!(a == b))
    throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     ")");
}

Rgb mean_over(const RasterImage& img, const Mask& m) {
  Rgb sum{0.0, 0.0, 0.0};
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (!m.values[i]) continue;
    const double* p = img.data().data() + 3 * i;
    for (int c = 0; c < 3; ++c) sum[c] += p[c];
    ++n;
  }
  if (n == 0) return sum;
  for (double& v : sum) v /= static_cast<double>(n);
  return sum;
}

nlohmann::json rgb_json(const Rgb& c) { return nlohmann::json::array({c[0], c[1], c[2]}); }

}  // namespace

Mask compute_edit_mask(const RasterImage& original, const RasterImage& reference, double tau) {
  require_same_dims(original.dims(), reference.dims(), "edit mask");
  Mask m(original.dims());
  const auto& a = original.data();
  const auto& b = reference.data();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double d =
        (std::abs(a[3 * i] - b[3 * i]) + std::abs(a[3 * i + 1] - b[3 * i + 1]) + std::abs(a[3 * i + 2] - b[3 * i + 2])) /
        3.0;
    m.values[i] = d > tau ? 1 : 0;
  }
  return m;
}

double iou(const Mask& a, const Mask& b) {
  require_same_dims(a.dims, b.dims, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    inter += (a.values[i] && b.values[i]) ? 1 : 0;
    uni += (a.values[i] || b.values[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Mask path_support(const VectorPath& path, Dims dims, const RasterizerConfig& rcfg) {
  Mask m(dims);
  const ScalarMap cov = coverage_map(flatten_bezier(path, rcfg.flatten_tolerance), dims, rcfg);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = cov.values[i] > 0.5 ? 1 : 0;
  return m;
}

std::vector<EditCandidate> candidate_paths(const LayeredDocument& doc, const RasterImage& original,
                                           const RasterImage& reference, const Mask& edit_mask,
                                           const EditConfig& cfg, const RasterizerConfig& rcfg) {
  require_same_dims(original.dims(), reference.dims(), "candidates");
  require_same_dims(original.dims(), doc.dims(), "candidates");
  require_same_dims(edit_mask.dims, doc.dims(), "candidates");
  const Layer& albedo = doc.layer(LayerTag::albedo);

  std::vector<std::optional<EditCandidate>> slots(albedo.size());
  parallel_for(albedo.size(), [&](std::size_t n) {
    const Mask support = path_support(albedo[n], doc.dims(), rcfg);
    EditCandidate c;
    c.index = n;
    c.area = support.count();
    c.iou = iou(support, edit_mask);
    if (!(c.iou > cfg.gamma_iou)) return;
    c.mu = mean_over(original, support);
    c.mu_ref = mean_over(reference, support);
    const double dist = std::hypot(c.mu[0] - c.mu_ref[0], c.mu[1] - c.mu_ref[1], c.mu[2] - c.mu_ref[2]);
    if (dist <= cfg.delta_color) slots[n] = c;
  });

  std::vector<EditCandidate> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  std::stable_sort(out.begin(), out.end(), [](const EditCandidate& a, const EditCandidate& b) { return a.area > b.area; });
  return out;
}

RasterImage render_document(const LayeredDocument& doc, const RasterizerConfig& rcfg) {
  if (doc.has(LayerTag::shade)) {
    LayeredDocument full = doc;
    if (!full.has(LayerTag::light)) full.set_layer(LayerTag::light, {});
    return render_composite(full, CompositeMode::three_layer, rcfg).clamped();
  }
  return rasterize_layer(doc.layer(LayerTag::albedo), {1.0, 1.0, 1.0}, doc.dims(), rcfg).image.clamped();
}

EditResult apply_color_edit(const LayeredDocument& doc, const std::vector<EditCandidate>& candidates,
                            const RasterImage& reference, const EditConfig& cfg, const RasterizerConfig& rcfg) {
  cfg.validate();
  require_same_dims(reference.dims(), doc.dims(), "color edit");
  EditResult result{doc, {}};
  EditReport& report = result.report;
  report.k_requested = cfg.k;
  report.candidate_count = candidates.size();
  const std::size_t take = std::min(candidates.size(), static_cast<std::size_t>(cfg.k));
  report.shortfall = static_cast<std::size_t>(cfg.k) - take;

  std::optional<RasterImage> shade;
  if (doc.has(LayerTag::shade))
    shade = rasterize_layer(doc.layer(LayerTag::shade), {1.0, 1.0, 1.0}, doc.dims(), rcfg).image;

  Layer& albedo = result.doc.layer(LayerTag::albedo);
  for (std::size_t i = 0; i < take; ++i) {
    const EditCandidate& c = candidates[i];
    if (c.index >= albedo.size()) throw PipelineError("edit candidate index out of range");
    VectorPath& path = albedo[c.index];
    const Mask support = path_support(path, doc.dims(), rcfg);
    EditedPath e;
    e.candidate = c;
    e.old_color = path.fill;
    const Rgb c_ref = mean_over(reference, support);
    if (shade && support.count() > 0) {
      e.shade_mean = mean_over(*shade, support);
      for (int ch = 0; ch < 3; ++ch)
        e.new_color[ch] = std::clamp(c_ref[ch] / (e.shade_mean[ch] + cfg.epsilon_shade), 0.0, 1.0);
    } else {
      e.new_color = c_ref;
    }
    path.fill = e.new_color;
    report.edited.push_back(e);
  }

  report.mse_before = mse(render_document(doc, rcfg), reference);
  report.mse_after = report.edited.empty() ? report.mse_before : mse(render_document(result.doc, rcfg), reference);
  return result;
}

EditResult run_edit(const LayeredDocument& doc, const RasterImage& original, const RasterImage& reference,
                    const EditConfig& cfg, const RasterizerConfig& rcfg) {
  cfg.validate();
  const Mask edit_mask = compute_edit_mask(original, reference, cfg.tau_diff);
  const auto candidates = candidate_paths(doc, original, reference, edit_mask, cfg, rcfg);
  return apply_color_edit(doc, candidates, reference, cfg, rcfg);
}

double mse(const RasterImage& a, const RasterImage& b) {
  require_same_dims(a.dims(), b.dims(), "mse");
  if (a.data().empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data().size());
}

std::string EditReport::to_json() const {
  nlohmann::json paths = nlohmann::json::array();
  for (const EditedPath& e : edited) {
    paths.push_back({{"layer", "albedo"},
                     {"index", e.candidate.index},
                     {"area", e.candidate.area},
                     {"iou", e.candidate.iou},
                     {"mu", rgb_json(e.candidate.mu)},
                     {"mu_ref", rgb_json(e.candidate.mu_ref)},
                     {"shade_mean", rgb_json(e.shade_mean)},
                     {"old_color", rgb_json(e.old_color)},
                     {"new_color", rgb_json(e.new_color)}});
  }
  nlohmann::json selected = nlohmann::json::array();
  for (const EditedPath& e : edited) selected.push_back(e.candidate.index);
  const nlohmann::json j = {{"k", k_requested},
                            {"candidates", candidate_count},
                            {"shortfall", shortfall},
                            {"selected", selected},
                            {"paths", paths},
                            {"mse_before", mse_before},
                            {"mse_after", mse_after}};
  return j.dump(2) + "\n";
}

}  // namespace covec
