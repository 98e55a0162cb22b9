#include <doctest.h>

#include <sstream>

#include "covec/edit.hpp"
#include "covec/gradcheck.hpp"
#include "covec/pipeline.hpp"
#include "covec/svg_io.hpp"
#include "support/scenes.hpp"

using namespace covec;
using namespace covec::testing;

namespace {

VectorizeConfig quick_config() {
  VectorizeConfig cfg;
  cfg.path_budget = 10;
  cfg.schedule.warmup_epochs = 5;
  cfg.schedule.joint_epochs = 10;
  cfg.refine.rounds_max = 2;
  cfg.refine.iters_per_round = 10;
  return cfg;
}

SceneSpec small_scene() {
  SceneSpec s;
  s.width = s.height = 32;
  s.disk_center = {16, 16};
  s.disk_radius = 8;
  s.shadow_x = 16;
  return s;
}

}  // namespace

TEST_CASE("pipeline: full mode produces a valid three-layer document") {
  const Scene sc = make_scene(small_scene());
  std::vector<std::string> stages;
  const VectorizeResult r = vectorize(sc.image, quick_config(), [&](const std::string& s) { stages.push_back(s); });
  CHECK(stages == std::vector<std::string>{"init", "structural", "refine", "separate"});
  CHECK(r.doc.path_count() <= 10);
  CHECK(r.doc.has(LayerTag::shade));
  CHECK(r.doc.has(LayerTag::light));
  for (const auto& p : r.doc.layer(LayerTag::shade))
    for (double c : p.fill) CHECK(c <= 1.0);
  for (const auto& p : r.doc.layer(LayerTag::light))
    for (double c : p.fill) CHECK(c >= 0.0);
  CHECK(r.mse == doctest::Approx(mse(render_document(r.doc), sc.image)).epsilon(1e-12));
  CHECK(r.trace.size() >= 15);
  CHECK(r.trace.front().stage == "warmup");
  CHECK(r.trace[5].stage == "joint");
  // Parses back cleanly.
  CHECK(emit_svg(parse_svg(emit_svg(r.doc))) == emit_svg(r.doc));
}

TEST_CASE("pipeline: albedo-only mode leaves shade and light empty") {
  const Scene sc = make_scene(small_scene());
  VectorizeConfig cfg = quick_config();
  cfg.mode = VectorizeMode::albedo_only;
  const VectorizeResult r = vectorize(sc.image, cfg);
  CHECK(r.doc.layer(LayerTag::shade).empty());
  CHECK(r.doc.layer(LayerTag::light).empty());
  CHECK_FALSE(r.doc.layer(LayerTag::albedo).empty());
  CHECK(r.doc.path_count() <= 10);
}

TEST_CASE("pipeline: deterministic for a fixed seed") {
  const Scene sc = make_scene(small_scene());
  VectorizeConfig cfg = quick_config();
  cfg.seed = 7;
  const VectorizeResult a = vectorize(sc.image, cfg);
  const VectorizeResult b = vectorize(sc.image, cfg);
  CHECK(emit_svg(a.doc) == emit_svg(b.doc));
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));
}

TEST_CASE("pipeline: supplied albedo and labels are used") {
  const Scene sc = make_scene(small_scene());
  VectorizeConfig cfg = quick_config();
  cfg.albedo = sc.albedo;
  cfg.labels = sc.labels;
  const VectorizeResult r = vectorize(sc.image, cfg);
  CHECK(r.doc.layer(LayerTag::albedo).size() == 2);

  cfg.labels->dims = {8, 8};
  CHECK_THROWS_AS(vectorize(sc.image, cfg), InputError);
  VectorizeConfig bad = quick_config();
  bad.path_budget = 0;
  CHECK_THROWS_AS(vectorize(sc.image, bad), InputError);
}

TEST_CASE("pipeline: trace csv layout") {
  const std::vector<TraceRow> rows{{"warmup", 1, 0.25, 0, 0}, {"refine", 2, 1e-3, 3, 1}};
  CHECK(trace_csv(rows) == "stage,step,loss,paths_added,paths_removed\nwarmup,1,0.25,0,0\nrefine,2,0.001,3,1\n");
}

TEST_CASE("gradcheck: passes, catches a flipped color gradient, allows zero probes") {
  GradcheckConfig cfg;
  cfg.seed = 3;
  cfg.probes = 6;
  const GradcheckReport ok = run_gradcheck(cfg);
  INFO((ok.failures.empty() ? "" : ok.failures.front()));
  CHECK(ok.passed());
  CHECK(ok.probes == 6);
  CHECK(ok.checked > 0);

  cfg.flip_color_gradient = true;
  const GradcheckReport bad = run_gradcheck(cfg);
  CHECK_FALSE(bad.passed());
  CHECK_FALSE(bad.failures.empty());

  cfg.probes = 0;
  const GradcheckReport none = run_gradcheck(cfg);
  CHECK(none.passed());
  CHECK(none.checked == 0);
}
