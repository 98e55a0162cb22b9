#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "covec/image_io.hpp"
#include "support/oracles.hpp"

using namespace covec;
using namespace covec::testing;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "covec_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

RasterImage grid_image(int w, int h, int steps) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = static_cast<double>((x + y * w) % (steps + 1)) / steps;
      img.set(x, y, {v, 1.0 - v, (x % 2) ? v : 128.0 / 255.0});
    }
  return img;
}

}  // namespace

TEST_CASE("quantize rounds half up and clamps") {
  CHECK(quantize(0.5, 255) == 128);
  CHECK(quantize(-1.0, 255) == 0);
  CHECK(quantize(2.0, 255) == 255);
  CHECK(quantize(1.0 / 255.0, 255) == 1);
  CHECK(quantize(0.5, 65535) == 32768);
}

TEST_CASE("png 8-bit round trip of exact levels") {
  const RasterImage img = grid_image(9, 7, 255);
  const auto path = temp_file("grid8.png");
  write_png(img, path, 8);
  const RasterImage back = read_image(path);
  REQUIRE(back.dims() == img.dims());
  CHECK(max_abs_diff(back, img) <= 1e-12);
}

TEST_CASE("ppm maxval 255 stores 0.5 as 128") {
  const RasterImage img(3, 2, {0.5, 0.5, 0.5});
  const auto path = temp_file("half.ppm");
  write_image(img, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  in.get();
  CHECK(magic == "P6");
  CHECK(maxval == 255);
  CHECK(in.get() == 128);
  const RasterImage back = read_image(path);
  CHECK(back.rgb(0, 0)[0] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("16-bit sweep error stays within half a level") {
  RasterImage img(257, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 257; ++x) {
      const double v = (x + 0.37 * y) / 257.0;
      img.set(x, y, {v, v * v, 1.0 - v});
    }
  for (const char* name : {"sweep16.png", "sweep16.ppm"}) {
    const auto path = temp_file(name);
    if (std::string(name).ends_with(".png"))
      write_png(img, path, 16);
    else
      write_ppm(img, path, 65535);
    const RasterImage back = read_image(path);
    CHECK(max_abs_diff(back, img.clamped()) <= 1.0 / 131070.0 + 1e-15);
  }
}

TEST_CASE("bad inputs raise input errors") {
  CHECK_THROWS_AS(read_image(temp_file("does_not_exist.png")), InputError);
  const auto junk = temp_file("junk.png");
  std::ofstream(junk) << "not an image";
  CHECK_THROWS_AS(read_image(junk), InputError);
  const auto ppm = temp_file("bad.ppm");
  std::ofstream(ppm, std::ios::binary) << "P3\n2 2\n255\n";
  CHECK_THROWS_AS(read_image(ppm), InputError);
  CHECK_THROWS_AS(write_png(RasterImage(2, 2), temp_file("x.png"), 12), InputError);
  CHECK_THROWS_AS(write_image(RasterImage(2, 2), temp_file("x.bmp")), InputError);
}

TEST_CASE("label map round trip and rejection of rgb") {
  LabelMap m{{6, 4}, {}};
  for (int i = 0; i < 24; ++i) m.labels.push_back(static_cast<std::uint32_t>(i * 37 % 300));
  const auto path = temp_file("labels.png");
  write_label_map(m, path);
  const LabelMap back = read_label_map(path);
  CHECK(back.dims == m.dims);
  CHECK(back.labels == m.labels);
  const auto rgb = temp_file("rgb.png");
  write_png(RasterImage(2, 2), rgb);
  CHECK_THROWS_AS(read_label_map(rgb), InputError);
}
