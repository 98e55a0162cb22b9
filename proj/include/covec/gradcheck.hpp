#pragma once

// Randomized finite-difference check of the composite gradients.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "covec/raster.hpp"

namespace covec {

struct GradcheckConfig {
  std::uint64_t seed = 0;
  std::size_t probes = 100;
  double rel_tol = 1e-2;
  double abs_tol = 1e-4;
  double point_step = 1e-3;
  double appearance_step = 1e-4;
  // Mutation hook: negates every analytic color gradient before comparison.
  bool flip_color_gradient = false;
  RasterizerConfig raster{};
};

struct GradcheckReport {
  std::size_t probes = 0;
  std::size_t checked = 0;  // individual parameters compared
  std::size_t failed = 0;
  double worst_abs = 0.0;
  std::vector<std::string> failures;  // first few, human readable

  bool passed() const { return failed == 0; }
};

/// Each probe: a 16..32 px canvas with 1..5 random paths spread over the
/// layers of a two- or three-layer document, one pixel from some path's
/// soft edge and a random channel weighting; every path parameter is
/// compared against a central difference of the weighted pixel.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace covec
