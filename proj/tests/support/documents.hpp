#pragma once

#include <algorithm>
#include <random>

#include "covec/types.hpp"
#include "support/oracles.hpp"

namespace covec::testing {

/// Three-layer document with 0-4 random paths per layer. Light colors stay
/// within [0,1] so they survive 8-bit serialization.
inline LayeredDocument random_document(std::mt19937_64& rng, int w, int h) {
  LayeredDocument doc = LayeredDocument::three_layer(w, h);
  std::uniform_int_distribution<int> count(0, 4), segs(2, 6);
  for (LayerTag tag : {LayerTag::albedo, LayerTag::shade, LayerTag::light}) {
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      VectorPath p = random_path(rng, doc.dims(), tag, segs(rng));
      for (double& c : p.fill) c = std::min(c, 1.0);
      doc.layer(tag).push_back(std::move(p));
    }
  }
  return doc;
}

}  // namespace covec::testing
