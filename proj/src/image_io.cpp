#include "covec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace covec {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path.string());
  return f;
}

// libpng reports errors through longjmp. The setjmp frames below hold only
// trivially destructible locals; failures become exceptions in the callers.
struct PngErrorSink {
  char message[256] = {};
};

void png_fail(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof sink->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

struct PngRaw {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<std::uint32_t> samples;  // row-major, `channels` per pixel
};

struct PngHeader {
  png_uint_32 width;
  png_uint_32 height;
  int bit_depth;
  int color_type;
  int channels;
  std::size_t rowbytes;
};

bool png_read_header(png_structp png, png_infop info, std::FILE* f, PngHeader* hdr) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  hdr->width = png_get_image_width(png, info);
  hdr->height = png_get_image_height(png, info);
  hdr->bit_depth = png_get_bit_depth(png, info);
  hdr->color_type = png_get_color_type(png, info);
  if (hdr->bit_depth == 16) png_set_swap(png);  // host-order samples
  png_read_update_info(png, info);
  hdr->channels = png_get_channels(png, info);
  hdr->rowbytes = png_get_rowbytes(png, info);
  return true;
}

bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

PngRaw read_png_raw(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError(path.string() + " is not a PNG file");
  }
  PngErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw InputError("png: out of memory");
  auto fail = [&](const std::string& why) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError(path.string() + ": " + why);
  };
  PngHeader hdr{};
  if (!png_read_header(png, info, f.get(), &hdr)) fail(std::string("png: ") + sink.message);
  if (hdr.bit_depth != 8 && hdr.bit_depth != 16) fail("unsupported PNG bit depth " + std::to_string(hdr.bit_depth));
  if (hdr.color_type == PNG_COLOR_TYPE_PALETTE) fail("unsupported PNG color type (palette)");

  std::vector<png_byte> buf(hdr.rowbytes * hdr.height);
  std::vector<png_bytep> rows(hdr.height);
  for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = buf.data() + y * hdr.rowbytes;
  if (!png_read_rows(png, rows.data())) fail(std::string("png: ") + sink.message);
  png_destroy_read_struct(&png, &info, nullptr);

  PngRaw raw;
  raw.width = hdr.width;
  raw.height = hdr.height;
  raw.bit_depth = hdr.bit_depth;
  raw.color_type = hdr.color_type;
  raw.channels = hdr.channels;
  raw.samples.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    if (raw.bit_depth == 8) {
      raw.samples[i] = buf[i];
    } else {
      std::uint16_t v;
      std::memcpy(&v, buf.data() + 2 * i, 2);
      raw.samples[i] = v;
    }
  }
  return raw;
}

bool png_write_all(png_structp png, png_infop info, std::FILE* f, int width, int height, int color_type,
                   int bit_depth, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

void write_png_raw(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
                   const std::vector<std::uint32_t>& samples) {
  const std::size_t bytes = bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes;
  std::vector<png_byte> buf(rowbytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 1) {
      buf[i] = static_cast<png_byte>(samples[i]);
    } else {  // PNG is big endian
      buf[2 * i] = static_cast<png_byte>(samples[i] >> 8);
      buf[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xff);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buf.data() + y * rowbytes;

  FilePtr f = open_file(path, "wb");
  PngErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw InputError("png: out of memory");
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const bool ok = png_write_all(png, info, f.get(), width, height, color_type, bit_depth, rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw InputError(path.string() + ": png: " + sink.message);
}

bool has_extension(const std::filesystem::path& path, std::initializer_list<const char*> exts) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::any_of(exts.begin(), exts.end(), [&](const char* e) { return ext == e; });
}

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P6") throw InputError(path.string() + ": only binary PPM (P6) is supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (...) {
    throw InputError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw InputError(path.string() + ": bad PPM header values");
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3 * bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw InputError(path.string() + ": truncated PPM data");
  }
  RasterImage img(w, h);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const std::uint32_t v = bytes == 1 ? buf[i] : (static_cast<std::uint32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];
    img.data()[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

}  // namespace

std::uint32_t quantize(double value, std::uint32_t maxval) {
  const double v = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::floor(v * maxval + 0.5));
}

RasterImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("no such file: " + path.string());
  if (has_extension(path, {".ppm", ".pnm"})) return read_ppm(path);
  const PngRaw raw = read_png_raw(path);
  const double maxval = raw.bit_depth == 16 ? 65535.0 : 255.0;
  RasterImage img(static_cast<int>(raw.width), static_cast<int>(raw.height));
  const bool alpha = raw.channels == 2 || raw.channels == 4;
  const bool gray = raw.channels <= 2;
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const std::uint32_t* s = raw.samples.data() + p * raw.channels;
    const double a = alpha ? s[raw.channels - 1] / maxval : 1.0;
    for (int c = 0; c < 3; ++c) {
      const double v = (gray ? s[0] : s[c]) / maxval;
      img.data()[3 * p + c] = alpha ? v * a + (1.0 - a) : v;
    }
  }
  return img;
}

void write_png(const RasterImage& image, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InputError("PNG bit depth must be 8 or 16");
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  std::vector<std::uint32_t> samples(image.data().size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize(image.data()[i], maxval);
  write_png_raw(path, image.width(), image.height(), 3, bit_depth, samples);
}

void write_ppm(const RasterImage& image, const std::filesystem::path& path, int maxval) {
  if (maxval < 1 || maxval > 65535) throw InputError("PPM maxval must be in [1, 65535]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "P6\n" << image.width() << " " << image.height() << "\n" << maxval << "\n";
  for (double v : image.data()) {
    const std::uint32_t q = quantize(v, static_cast<std::uint32_t>(maxval));
    if (maxval > 255) out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xff));
  }
}

void write_image(const RasterImage& image, const std::filesystem::path& path, int bit_depth) {
  if (has_extension(path, {".ppm", ".pnm"})) {
    write_ppm(image, path, bit_depth == 16 ? 65535 : 255);
  } else if (has_extension(path, {".png"})) {
    write_png(image, path, bit_depth);
  } else {
    throw InputError("unsupported image extension: " + path.string());
  }
}

LabelMap read_label_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("no such file: " + path.string());
  const PngRaw raw = read_png_raw(path);
  if (raw.channels != 1) throw InputError("label map must be a single-channel PNG");
  LabelMap map;
  map.dims = {static_cast<int>(raw.width), static_cast<int>(raw.height)};
  map.labels = raw.samples;
  return map;
}

void write_label_map(const LabelMap& map, const std::filesystem::path& path) {
  const std::uint32_t top = map.labels.empty() ? 0 : *std::max_element(map.labels.begin(), map.labels.end());
  write_png_raw(path, map.dims.width, map.dims.height, 1, top > 255 ? 16 : 8, map.labels);
}

}  // namespace covec
