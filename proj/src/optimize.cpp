#include "covec/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace covec {
namespace {

constexpr double kOpacityFloor = 1e-6;

double logit(double p) {
  p = std::clamp(p, kOpacityFloor, 1.0 - kOpacityFloor);
  return std::log(p / (1.0 - p));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool bounded(LayerTag tag) { return tag == LayerTag::albedo || tag == LayerTag::shade; }

void ensure_shape(AdamState& st, std::size_t n) {
  if (st.m.empty() && st.v.empty() && n > 0) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
  }
  if (st.m.size() != n) throw PipelineError("optimizer parameter layout changed between steps");
}

}  // namespace

void StructLossConfig::validate() const {
  if (!(lambda_overlap >= 0.0)) throw InputError("lambda_overlap must be >= 0");
  if (!(delta_overlap > 0.0 && delta_overlap < 1.0)) throw InputError("delta_overlap must lie in (0,1)");
  if (!(gray_alpha > 0.0 && gray_alpha < 1.0)) throw InputError("gray_alpha must lie in (0,1)");
}

void Schedule::validate() const {
  if (warmup_epochs < 0 || joint_epochs < 0) throw InputError("epoch counts must be >= 0");
  if (!(lr_points > 0.0) || !(lr_colors > 0.0)) throw InputError("learning rates must be > 0");
}

bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const Schedule& hyper) {
  if (params.size() != grads.size()) throw PipelineError("adam: parameter and gradient sizes differ");
  ensure_shape(state, params.size());
  ++state.step;
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
    ++state.skipped;
    std::clog << "covec: skipped update with non-finite gradient at step " << state.step << "\n";
    return false;
  }
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.epsilon);
  }
  return true;
}

void project(VectorPath& path) {
  for (double& c : path.fill) c = bounded(path.tag) ? std::clamp(c, 0.0, 1.0) : std::max(c, 0.0);
  path.opacity = std::clamp(path.opacity, 0.0, 1.0);
}

LayerLoss loss_struct(std::span<const VectorPath> layer, std::span<const RasterImage> mask_renders,
                      const StructLossConfig& cfg, Dims dims, const RasterizerConfig& rcfg) {
  cfg.validate();
  LayerLoss out;
  out.grads = zero_gradients(layer);
  const std::size_t groups = mask_renders.size();
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < layer.size(); ++i) {
    if (layer[i].group >= groups) throw PipelineError("path group has no matching mask render");
    members[layer[i].group].push_back(i);
  }
  for (std::size_t g = 0; g < groups; ++g) {
    if (members[g].empty()) throw PipelineError("mask render has no paths in its group");
    if (mask_renders[g].dims() != dims) throw InputError("mask render dimensions do not match");
  }

  const std::size_t npix = dims.pixels();
  const double norm = 1.0 / (3.0 * static_cast<double>(npix));
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<VectorPath> paths;
    for (std::size_t i : members[g]) paths.push_back(layer[i]);
    const LayerRaster raster = rasterize_layer(paths, {1.0, 1.0, 1.0}, dims, rcfg);

    const auto& r = raster.image.data();
    const auto& m = mask_renders[g].data();
    RasterImage upstream(dims.width, dims.height);
    double mse = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double d = r[k] - m[k];
      mse += d * d;
      upstream.data()[k] = 2.0 * d * norm;
    }
    out.value += mse * norm;
    GradientBuffer grads = backward_layer(paths, raster, upstream, rcfg);

    if (cfg.lambda_overlap > 0.0) {
      // alpha = 1 - prod_k (1 - gray_alpha * cov_k); gray fill carries no color gradient.
      const std::size_t n = paths.size();
      const double ga = cfg.gray_alpha;
      std::vector<ScalarMap> d_cov(n, ScalarMap(dims, 0.0));
      std::vector<double> prefix(n + 1), suffix(n + 1);
      double penalty = 0.0;
      for (std::size_t p = 0; p < npix; ++p) {
        prefix[0] = 1.0;
        for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] * (1.0 - ga * raster.coverage[k].values[p]);
        suffix[n] = 1.0;
        for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] * (1.0 - ga * raster.coverage[k].values[p]);
        const double alpha = 1.0 - prefix[n];
        double excess, d_alpha;
        if (cfg.penalty_sign == PenaltySign::overlap) {
          excess = alpha - cfg.delta_overlap;
          d_alpha = 1.0;
        } else {
          excess = cfg.delta_overlap - alpha;
          d_alpha = -1.0;
        }
        if (excess <= 0.0) continue;
        penalty += excess;
        for (std::size_t k = 0; k < n; ++k) {
          d_cov[k].values[p] = cfg.lambda_overlap * d_alpha * ga * prefix[k] * suffix[k + 1];
        }
      }
      out.value += cfg.lambda_overlap * penalty;
      for (std::size_t k = 0; k < n; ++k) {
        accumulate_geometry_gradient(paths[k], raster.polylines[k], d_cov[k], rcfg, grads[k]);
      }
    }
    for (std::size_t k = 0; k < members[g].size(); ++k) out.grads[members[g][k]] = std::move(grads[k]);
  }
  return out;
}

DocumentLoss loss_recon(const LayeredDocument& doc, CompositeMode mode, const RasterImage& target,
                        const RasterizerConfig& rcfg) {
  if (target.dims() != doc.dims()) throw InputError("target dimensions do not match the document");
  const CompositeEval eval = evaluate_composite(doc, mode, rcfg);
  const std::size_t n = eval.image.data().size();
  const double norm = 1.0 / static_cast<double>(n);
  RasterImage upstream(doc.width(), doc.height());
  DocumentLoss out;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = eval.image.data()[k] - target.data()[k];
    out.value += d * d;
    upstream.data()[k] = 2.0 * d * norm;
  }
  out.value *= norm;
  out.grads = backward(doc, eval, upstream, rcfg);
  out.composite = eval.image;
  return out;
}

LayerOptimizer::LayerOptimizer(Schedule schedule, std::size_t first_trainable)
    : schedule_(schedule), first_(first_trainable) {
  schedule_.validate();
}

void LayerOptimizer::step(Layer& layer, const GradientBuffer& grads) {
  if (grads.size() != layer.size()) throw PipelineError("gradient buffer does not match layer");
  if (first_ > layer.size()) throw PipelineError("optimizer starts past the end of the layer");

  std::vector<double> pts, d_pts, app, d_app;
  for (std::size_t i = first_; i < layer.size(); ++i) {
    const VectorPath& path = layer[i];
    if (grads[i].d_control_points.size() != path.control_points.size())
      throw PipelineError("gradient buffer does not match path shape");
    for (std::size_t k = 0; k < path.control_points.size(); ++k) {
      pts.push_back(path.control_points[k].x);
      pts.push_back(path.control_points[k].y);
      d_pts.push_back(grads[i].d_control_points[k].x);
      d_pts.push_back(grads[i].d_control_points[k].y);
    }
    const double op = std::clamp(path.opacity, kOpacityFloor, 1.0 - kOpacityFloor);
    for (int c = 0; c < 3; ++c) {
      app.push_back(path.fill[c]);
      d_app.push_back(grads[i].d_color[c]);
    }
    app.push_back(logit(path.opacity));
    d_app.push_back(grads[i].d_opacity * op * (1.0 - op));
  }

  const std::vector<double> old_app = app;
  const bool moved_pts = adam_step(pts, d_pts, points_, schedule_.lr_points, schedule_);
  const bool moved_app = adam_step(app, d_app, appearance_, schedule_.lr_colors, schedule_);

  std::size_t ip = 0, ia = 0;
  for (std::size_t i = first_; i < layer.size(); ++i) {
    VectorPath& path = layer[i];
    if (moved_pts) {
      for (Vec2& p : path.control_points) {
        p.x = pts[ip];
        p.y = pts[ip + 1];
        ip += 2;
      }
    }
    if (moved_app) {
      for (int c = 0; c < 3; ++c) path.fill[c] = app[ia + c];
      if (app[ia + 3] != old_app[ia + 3]) path.opacity = sigmoid(app[ia + 3]);
      ia += 4;
    }
    project(path);
  }
}

StructuralResult run_structural(Layer albedo, Layer illumination, const RasterImage& target,
                                std::span<const RasterImage> albedo_renders,
                                std::span<const RasterImage> illumination_renders, const Schedule& schedule,
                                const StructLossConfig& scfg, const RasterizerConfig& rcfg) {
  schedule.validate();
  scfg.validate();
  rcfg.validate();
  const Dims dims = target.dims();
  LayerOptimizer opt_a(schedule), opt_i(schedule);
  StructuralResult out;

  for (int e = 0; e < schedule.warmup_epochs; ++e) {
    const LayerLoss la = loss_struct(albedo, albedo_renders, scfg, dims, rcfg);
    const LayerLoss li = loss_struct(illumination, illumination_renders, scfg, dims, rcfg);
    opt_a.step(albedo, la.grads);
    opt_i.step(illumination, li.grads);
    out.trace.push_back({"warmup", e + 1, la.value + li.value, 0, 0});
  }
  for (int e = 0; e < schedule.joint_epochs; ++e) {
    LayeredDocument doc = LayeredDocument::two_layer(dims.width, dims.height);
    doc.set_layer(LayerTag::albedo, albedo);
    doc.set_layer(LayerTag::illumination, illumination);
    const DocumentLoss loss = loss_recon(doc, CompositeMode::two_layer, target, rcfg);
    opt_a.step(albedo, loss.grads.at(LayerTag::albedo));
    opt_i.step(illumination, loss.grads.at(LayerTag::illumination));
    out.trace.push_back({"joint", schedule.warmup_epochs + e + 1, loss.value, 0, 0});
  }
  out.albedo = std::move(albedo);
  out.illumination = std::move(illumination);
  return out;
}

}  // namespace covec
