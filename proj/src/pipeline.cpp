#include "covec/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "covec/edit.hpp"

namespace covec {

void VectorizeConfig::validate() const {
  if (path_budget < 1) throw InputError("path budget must be >= 1");
  schedule.validate();
  structure.validate();
  refine.validate();
  raster.validate();
  if (init.dp_epsilon < 0) throw InputError("dp epsilon must be >= 0");
  if (init.max_segments < 1) throw InputError("max segments must be >= 1");
}

namespace {

void notify(const StageCallback& cb, const char* stage) {
  if (cb) cb(stage);
}

}  // namespace

VectorizeResult vectorize(const RasterImage& image, const VectorizeConfig& cfg, const StageCallback& on_stage) {
  cfg.validate();
  if (image.pixel_count() == 0) throw InputError("empty input image");
  if (cfg.labels && !(cfg.labels->dims == image.dims()))
    throw InputError("mask file dimensions differ from the input image");

  InitConfig icfg = cfg.init;
  icfg.path_budget = cfg.path_budget;
  RefineConfig rcfg = cfg.refine;
  rcfg.path_budget = cfg.path_budget;
  SegmentConfig scfg = cfg.segment;
  scfg.seed = cfg.seed;

  VectorizeResult out;
  out.doc = LayeredDocument::three_layer(image.width(), image.height());

  if (cfg.mode == VectorizeMode::albedo_only) {
    notify(on_stage, "init");
    const auto regions = load_or_fallback_segment(image, cfg.labels, scfg);
    InitResult init = init_albedo_only(image, regions, icfg);
    if (init.albedo.empty()) throw PipelineError("initialization produced no paths");

    notify(on_stage, "structural");
    StructuralResult st = run_structural(std::move(init.albedo), {}, image, init.albedo_mask_renders, {}, cfg.schedule,
                                         cfg.structure, cfg.raster);
    out.trace = std::move(st.trace);

    notify(on_stage, "refine");
    RefineResult rf = refine_layer(std::move(st.albedo), LayerTag::albedo, {}, image, rcfg, cfg.schedule, cfg.raster);
    out.trace.insert(out.trace.end(), rf.trace.begin(), rf.trace.end());
    out.doc.set_layer(LayerTag::albedo, std::move(rf.layer));
  } else {
    notify(on_stage, "init");
    const RasterImage albedo = load_or_fallback_albedo(image, cfg.albedo, cfg.albedo_fallback);
    const auto regions = load_or_fallback_segment(albedo, cfg.labels, scfg);
    InitResult init = init_layers(image, albedo, regions, icfg);
    if (init.albedo.empty()) throw PipelineError("initialization produced no albedo paths");

    notify(on_stage, "structural");
    StructuralResult st =
        run_structural(std::move(init.albedo), std::move(init.illumination), image, init.albedo_mask_renders,
                       init.illumination_mask_renders, cfg.schedule, cfg.structure, cfg.raster);
    out.trace = std::move(st.trace);

    notify(on_stage, "refine");
    RefineResult rf =
        refine_layer(std::move(st.illumination), LayerTag::illumination, st.albedo, image, rcfg, cfg.schedule, cfg.raster);
    out.trace.insert(out.trace.end(), rf.trace.begin(), rf.trace.end());

    notify(on_stage, "separate");
    Separation sep = separate_layers(rf.layer);
    out.illumination = std::move(rf.layer);
    Layer light = assign_light_colors(sep.light, image, st.albedo, sep.shade, cfg.raster);
    out.doc.set_layer(LayerTag::albedo, std::move(st.albedo));
    out.doc.set_layer(LayerTag::shade, std::move(sep.shade));
    out.doc.set_layer(LayerTag::light, std::move(light));
  }

  out.composite = render_composite(out.doc, CompositeMode::three_layer, cfg.raster);
  out.mse = covec::mse(out.composite.clamped(), image);
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string s = "stage,step,loss,paths_added,paths_removed\n";
  char buf[64];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%.10g", r.loss);
    s += r.stage + "," + std::to_string(r.step) + "," + buf + "," + std::to_string(r.paths_added) + "," +
         std::to_string(r.paths_removed) + "\n";
  }
  return s;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write trace file " + path.string());
  f << trace_csv(trace);
  if (!f) throw InputError("failed writing trace file " + path.string());
}

}  // namespace covec
