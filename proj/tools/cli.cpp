#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "covec/edit.hpp"
#include "covec/gradcheck.hpp"
#include "covec/image_io.hpp"
#include "covec/pipeline.hpp"
#include "covec/svg_io.hpp"

namespace covec::cli {

namespace {

std::filesystem::path sibling(const std::filesystem::path& p, const char* ext) {
  std::filesystem::path q = p;
  q.replace_extension(ext);
  return q;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("failed writing " + path.string());
}

// SVG files are rendered; anything else is read as a raster image.
RasterImage load_for_metrics(const std::filesystem::path& path, const RasterizerConfig& rcfg) {
  if (path.extension() == ".svg") return reference_composite(read_svg(path), rcfg).clamped();
  return read_image(path);
}

struct VectorizeArgs {
  std::string input;
  std::string output;
  std::string trace;
  std::string albedo;
  std::string masks;
  std::size_t paths = 64;
  std::string mode = "full";
  std::uint64_t seed = 0;
  double dp_eps = InitConfig{}.dp_epsilon;
  double aa_sigma = RasterizerConfig{}.aa_sigma;
  int warmup = Schedule{}.warmup_epochs;
  int joint = Schedule{}.joint_epochs;
  int rounds = RefineConfig{}.rounds_max;
  int iters = RefineConfig{}.iters_per_round;
  double lambda = StructLossConfig{}.lambda_overlap;
  double delta_overlap = StructLossConfig{}.delta_overlap;
  std::string penalty = "overlap";
  bool quiet = false;
};

struct EditArgs {
  std::string svg;
  std::string original;
  std::string reference;
  std::string output;
  std::string report;
  EditConfig edit{};
  double aa_sigma = RasterizerConfig{}.aa_sigma;
};

struct RenderArgs {
  std::string svg;
  std::string output;
  int scale = 1;
  double aa_sigma = RasterizerConfig{}.aa_sigma;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t probes = 100;
  bool flip = false;
};

struct MetricsArgs {
  std::string a;
  std::string b;
  double aa_sigma = RasterizerConfig{}.aa_sigma;
};

int cmd_vectorize(const VectorizeArgs& a, std::ostream& out, std::ostream& err) {
  const RasterImage image = read_image(a.input);
  VectorizeConfig cfg;
  cfg.mode = a.mode == "albedo-only" ? VectorizeMode::albedo_only : VectorizeMode::full;
  cfg.seed = a.seed;
  cfg.path_budget = a.paths;
  if (!a.albedo.empty()) cfg.albedo = read_image(a.albedo);
  if (!a.masks.empty()) cfg.labels = read_label_map(a.masks);
  cfg.init.dp_epsilon = a.dp_eps;
  cfg.raster.aa_sigma = a.aa_sigma;
  cfg.schedule.warmup_epochs = a.warmup;
  cfg.schedule.joint_epochs = a.joint;
  cfg.refine.rounds_max = a.rounds;
  cfg.refine.iters_per_round = a.iters;
  cfg.structure.lambda_overlap = a.lambda;
  cfg.structure.delta_overlap = a.delta_overlap;
  cfg.structure.penalty_sign = a.penalty == "paper-literal" ? PenaltySign::paper_literal : PenaltySign::overlap;

  const VectorizeResult r = vectorize(image, cfg, [&](const std::string& stage) {
    if (!a.quiet) err << "covec: " << stage << "\n";
  });
  write_svg(r.doc, a.output);
  const std::filesystem::path trace = a.trace.empty() ? sibling(a.output, ".csv") : std::filesystem::path(a.trace);
  write_trace_csv(r.trace, trace);
  out << "wrote " << a.output << ": albedo " << r.doc.layer(LayerTag::albedo).size() << ", shade "
      << r.doc.layer(LayerTag::shade).size() << ", light " << r.doc.layer(LayerTag::light).size() << " paths; mse "
      << r.mse << "\n";
  return ok;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const LayeredDocument doc = scale_document(read_svg(a.svg), a.scale);
  RasterizerConfig rcfg;
  rcfg.aa_sigma = a.aa_sigma * a.scale;
  const RasterImage img = reference_composite(doc, rcfg).clamped();
  write_image(img, a.output);
  out << "wrote " << a.output << " (" << img.width() << "x" << img.height() << ")\n";
  return ok;
}

int cmd_edit(const EditArgs& a, std::ostream& out) {
  const LayeredDocument doc = read_svg(a.svg);
  const RasterImage original = read_image(a.original);
  const RasterImage reference = read_image(a.reference);
  RasterizerConfig rcfg;
  rcfg.aa_sigma = a.aa_sigma;
  const EditResult r = run_edit(doc, original, reference, a.edit, rcfg);
  write_svg(r.doc, a.output);
  const std::filesystem::path report = a.report.empty() ? sibling(a.output, ".json") : std::filesystem::path(a.report);
  write_text(report, r.report.to_json());
  out << "edited " << r.report.edited.size() << " of " << r.report.candidate_count << " candidates; mse "
      << r.report.mse_before << " -> " << r.report.mse_after << "\n";
  return ok;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.probes == 0) err << "covec: warning: 0 probes requested, nothing checked\n";
  GradcheckConfig cfg;
  cfg.seed = a.seed;
  cfg.probes = a.probes;
  cfg.flip_color_gradient = a.flip;
  const GradcheckReport r = run_gradcheck(cfg);
  for (const auto& f : r.failures) err << "  " << f << "\n";
  out << (r.passed() ? "PASS" : "FAIL") << ": " << r.probes << " probes, " << r.checked << " parameters, "
      << r.failed << " mismatches\n";
  return r.passed() ? ok : pipeline;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  RasterizerConfig rcfg;
  rcfg.aa_sigma = a.aa_sigma;
  const RasterImage x = load_for_metrics(a.a, rcfg);
  const RasterImage y = load_for_metrics(a.b, rcfg);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", mse(x, y));
  out << "mse " << buf << "\n";
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"covec: layered vectorization into albedo, shade and light", "covec"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::function<int()> action;

  VectorizeArgs va;
  auto* vec = app.add_subcommand("vectorize", "Vectorize a raster image into a layered SVG");
  vec->add_option("input", va.input, "Input PNG or PPM image")->required();
  vec->add_option("-o,--output", va.output, "Output SVG")->required();
  vec->add_option("--paths", va.paths, "Path budget across all layers")->check(CLI::PositiveNumber);
  vec->add_option("--mode", va.mode, "Layer model")->check(CLI::IsMember({"full", "albedo-only"}));
  vec->add_option("--seed", va.seed, "Seed for the fallback segmentation");
  vec->add_option("--albedo", va.albedo, "Precomputed albedo image")->check(CLI::ExistingFile);
  vec->add_option("--masks", va.masks, "Region label map PNG (0 = unlabeled)")->check(CLI::ExistingFile);
  vec->add_option("--dp-eps", va.dp_eps, "Contour simplification tolerance (px)")->check(CLI::NonNegativeNumber);
  vec->add_option("--aa-sigma", va.aa_sigma, "Edge softness (px)")->check(CLI::PositiveNumber);
  vec->add_option("--warmup", va.warmup, "Structure-loss epochs")->check(CLI::NonNegativeNumber);
  vec->add_option("--joint", va.joint, "Reconstruction-loss epochs")->check(CLI::NonNegativeNumber);
  vec->add_option("--rounds", va.rounds, "Maximum refinement rounds")->check(CLI::NonNegativeNumber);
  vec->add_option("--iters", va.iters, "Iterations per refinement round")->check(CLI::PositiveNumber);
  vec->add_option("--lambda", va.lambda, "Overlap penalty weight")->check(CLI::NonNegativeNumber);
  vec->add_option("--delta-overlap", va.delta_overlap, "Overlap alpha threshold");
  vec->add_option("--penalty", va.penalty, "Overlap penalty sign")
      ->check(CLI::IsMember({"overlap", "paper-literal"}));
  vec->add_option("--trace", va.trace, "Loss trace CSV (default: output with .csv)");
  vec->add_flag("-q,--quiet", va.quiet, "No progress on stderr");
  vec->callback([&] { action = [&] { return cmd_vectorize(va, out, err); }; });

  RenderArgs ra;
  auto* ren = app.add_subcommand("render", "Rasterize a covec SVG");
  ren->add_option("svg", ra.svg, "Input SVG")->required();
  ren->add_option("-o,--output", ra.output, "Output PNG or PPM")->required();
  ren->add_option("--scale", ra.scale, "Integer upscaling factor")->check(CLI::Range(1, 64));
  ren->add_option("--aa-sigma", ra.aa_sigma, "Edge softness (px, before scaling)")->check(CLI::PositiveNumber);
  ren->callback([&] { action = [&] { return cmd_render(ra, out); }; });

  EditArgs ea;
  auto* ed = app.add_subcommand("edit", "Recolor paths toward a reference image");
  ed->add_option("svg", ea.svg, "Input SVG")->required();
  ed->add_option("original", ea.original, "Original raster image")->required();
  ed->add_option("reference", ea.reference, "Recolored reference image")->required();
  ed->add_option("-o,--output", ea.output, "Edited SVG")->required();
  ed->add_option("--report", ea.report, "JSON report (default: output with .json)");
  ed->add_option("--k", ea.edit.k, "Number of paths to recolor")->check(CLI::Range(1, 1 << 20));
  ed->add_option("--tau", ea.edit.tau_diff, "Difference threshold")->check(CLI::PositiveNumber);
  ed->add_option("--gamma", ea.edit.gamma_iou, "IoU floor")->check(CLI::PositiveNumber);
  ed->add_option("--delta-color", ea.edit.delta_color, "Color compatibility bound")->check(CLI::PositiveNumber);
  ed->add_option("--epsilon-shade", ea.edit.epsilon_shade, "Shade divisor offset")->check(CLI::PositiveNumber);
  ed->add_option("--aa-sigma", ea.aa_sigma, "Edge softness (px)")->check(CLI::PositiveNumber);
  ed->callback([&] { action = [&] { return cmd_edit(ea, out); }; });

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc->add_option("--seed", ga.seed, "Random seed");
  gc->add_option("--probes", ga.probes, "Number of random probes");
  gc->add_flag("--inject-color-sign-flip", ga.flip)->group("");
  gc->callback([&] { action = [&] { return cmd_gradcheck(ga, out, err); }; });

  MetricsArgs ma;
  auto* met = app.add_subcommand("metrics", "MSE between two images (SVG inputs are rendered)");
  met->add_option("a", ma.a, "First image or SVG")->required();
  met->add_option("b", ma.b, "Second image or SVG")->required();
  met->add_option("--aa-sigma", ma.aa_sigma, "Edge softness for SVG inputs (px)")->check(CLI::PositiveNumber);
  met->callback([&] { action = [&] { return cmd_metrics(ma, out); }; });

  std::vector<std::string> argv_store{"covec"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return usage;
  }

  try {
    return action ? action() : usage;
  } catch (const covec::ParseError& e) {
    err << "covec: parse error: " << e.what() << "\n";
    return parse;
  } catch (const InputError& e) {
    err << "covec: input error: " << e.what() << "\n";
    return usage;
  } catch (const PipelineError& e) {
    err << "covec: pipeline error: " << e.what() << "\n";
    return pipeline;
  } catch (const std::exception& e) {
    err << "covec: error: " << e.what() << "\n";
    return pipeline;
  }
}

}  // namespace covec::cli
