#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "covec/edit.hpp"
#include "covec/gradcheck.hpp"
#include "covec/image_io.hpp"
#include "covec/parallel.hpp"
#include "covec/pipeline.hpp"
#include "covec/svg_io.hpp"

namespace py = pybind11;
using namespace covec;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RasterImage to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InputError("expected an (H, W, 3) array");
  RasterImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.data().data(), a.data(), img.data().size() * sizeof(double));
  return img;
}

Array to_array(const RasterImage& img) {
  Array a({static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width()), py::ssize_t{3}});
  std::memcpy(a.mutable_data(), img.data().data(), img.data().size() * sizeof(double));
  return a;
}

RasterizerConfig raster_cfg(double aa_sigma) {
  RasterizerConfig r;
  r.aa_sigma = aa_sigma;
  return r;
}

}  // namespace

PYBIND11_MODULE(_covec, m) {
  m.doc() = "Illumination-aware image vectorization";

  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<InputError>(m, "InputError");
  py::register_exception<PipelineError>(m, "PipelineError");

  m.def("read_image", [](const std::string& path) { return to_array(read_image(path)); }, py::arg("path"));
  m.def(
      "write_image", [](const Array& a, const std::string& path) { write_image(to_image(a), path); }, py::arg("image"),
      py::arg("path"));

  m.def(
      "vectorize",
      [](const Array& image, const std::string& mode, std::uint64_t seed, std::size_t paths, int warmup, int joint,
         int rounds, int iters) {
        VectorizeConfig cfg;
        if (mode == "albedo-only")
          cfg.mode = VectorizeMode::albedo_only;
        else if (mode != "full")
          throw InputError("mode must be 'full' or 'albedo-only'");
        cfg.seed = seed;
        cfg.path_budget = paths;
        cfg.schedule.warmup_epochs = warmup;
        cfg.schedule.joint_epochs = joint;
        cfg.refine.rounds_max = rounds;
        cfg.refine.iters_per_round = iters;
        const RasterImage img = to_image(image);
        VectorizeResult r;
        {
          py::gil_scoped_release release;
          r = vectorize(img, cfg);
        }
        py::dict out;
        out["svg"] = emit_svg(r.doc);
        out["mse"] = r.mse;
        out["trace_csv"] = trace_csv(r.trace);
        return out;
      },
      py::arg("image"), py::kw_only(), py::arg("mode") = "full", py::arg("seed") = 0, py::arg("paths") = 64,
      py::arg("warmup") = 50, py::arg("joint") = 50, py::arg("rounds") = 5, py::arg("iters") = 100);

  m.def(
      "render",
      [](const std::string& svg, double aa_sigma) {
        return to_array(reference_composite(parse_svg(svg), raster_cfg(aa_sigma)).clamped());
      },
      py::arg("svg"), py::kw_only(), py::arg("aa_sigma") = 1.0);

  m.def(
      "edit",
      [](const std::string& svg, const Array& original, const Array& reference, int k, double tau,
         double gamma, double delta_color) {
        EditConfig cfg;
        cfg.k = k;
        cfg.tau_diff = tau;
        cfg.gamma_iou = gamma;
        cfg.delta_color = delta_color;
        const EditResult r = run_edit(parse_svg(svg), to_image(original), to_image(reference), cfg);
        return py::make_tuple(emit_svg(r.doc), r.report.to_json());
      },
      py::arg("svg"), py::arg("original"), py::arg("reference"), py::kw_only(), py::arg("k") = 1,
      py::arg("tau") = 0.1, py::arg("gamma") = 0.02, py::arg("delta_color") = 0.25);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t probes) {
        GradcheckConfig cfg;
        cfg.seed = seed;
        cfg.probes = probes;
        const GradcheckReport r = run_gradcheck(cfg);
        py::dict out;
        out["passed"] = r.passed();
        out["checked"] = r.checked;
        out["failed"] = r.failed;
        out["worst_abs"] = r.worst_abs;
        return out;
      },
      py::arg("seed") = 0, py::arg("probes") = 100);

  m.def(
      "mse", [](const Array& a, const Array& b) { return covec::mse(to_image(a), to_image(b)); }, py::arg("a"),
      py::arg("b"));
  m.def("set_max_threads", &set_max_threads, py::arg("n"));
}
