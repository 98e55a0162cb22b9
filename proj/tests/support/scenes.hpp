#pragma once

// Synthetic scenes with known albedo and shading, rendered analytically with
// 4x4 supersampling.

#include <algorithm>
#include <cmath>
#include <optional>

#include "covec/image_io.hpp"
#include "covec/types.hpp"

namespace covec::testing {

struct SceneSpec {
  int width = 64;
  int height = 64;
  Rgb background{0.2, 0.5, 0.8};
  Rgb disk_color{0.8, 0.3, 0.3};
  Vec2 disk_center{32, 32};
  double disk_radius = 16;
  double shadow = 0.5;  // multiplier for x >= shadow_x
  double shadow_x = 32;
  std::optional<Vec2> highlight_center;  // additive white disk
  double highlight_radius = 6;
  double highlight_gain = 0.3;
};

struct Scene {
  RasterImage image;
  RasterImage albedo;
  RasterImage shading;
  LabelMap labels;  // 1 = background, 2 = disk
};

inline Scene make_scene(const SceneSpec& s) {
  Scene out{RasterImage(s.width, s.height), RasterImage(s.width, s.height), RasterImage(s.width, s.height),
            LabelMap{{s.width, s.height}, {}}};
  const int ss = 4;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      Rgb img{0, 0, 0}, alb{0, 0, 0}, shd{0, 0, 0};
      for (int j = 0; j < ss; ++j) {
        for (int i = 0; i < ss; ++i) {
          const double qx = x + (i + 0.5) / ss, qy = y + (j + 0.5) / ss;
          const double dx = qx - s.disk_center.x, dy = qy - s.disk_center.y;
          const bool in_disk = dx * dx + dy * dy <= s.disk_radius * s.disk_radius;
          const Rgb a = in_disk ? s.disk_color : s.background;
          const double sh = qx >= s.shadow_x ? s.shadow : 1.0;
          double light = 0.0;
          if (s.highlight_center) {
            const double hx = qx - s.highlight_center->x, hy = qy - s.highlight_center->y;
            if (hx * hx + hy * hy <= s.highlight_radius * s.highlight_radius) light = s.highlight_gain;
          }
          for (int c = 0; c < 3; ++c) {
            img[c] += std::clamp(a[c] * sh + light, 0.0, 1.0);
            alb[c] += a[c];
            shd[c] += sh;
          }
        }
      }
      for (int c = 0; c < 3; ++c) {
        img[c] /= ss * ss;
        alb[c] /= ss * ss;
        shd[c] /= ss * ss;
      }
      out.image.set(x, y, img);
      out.albedo.set(x, y, alb);
      out.shading.set(x, y, shd);
      const double dx = x + 0.5 - s.disk_center.x, dy = y + 0.5 - s.disk_center.y;
      out.labels.labels.push_back(dx * dx + dy * dy <= s.disk_radius * s.disk_radius ? 2u : 1u);
    }
  }
  return out;
}

}  // namespace covec::testing
