#include "covec/svg_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace covec {
namespace {

constexpr LayerTag kOrder[] = {LayerTag::albedo, LayerTag::shade, LayerTag::light};

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string group_style(LayerTag tag) {
  switch (tag) {
    case LayerTag::shade:
      return "mix-blend-mode: multiply";
    case LayerTag::light:
      return "mix-blend-mode: plus-lighter";
    default:
      return "";
  }
}

void emit_path(std::ostringstream& os, const VectorPath& p) {
  const std::size_t k = p.segment_count();
  os << "<path d=\"M " << fixed3(p.point(0).x) << ',' << fixed3(p.point(0).y);
  for (std::size_t s = 0; s < k; ++s) {
    os << " C";
    for (std::size_t j = 1; j <= 3; ++j) {
      const Vec2& v = p.point(3 * s + j);
      os << ' ' << fixed3(v.x) << ',' << fixed3(v.y);
    }
  }
  os << " Z\" fill=\"rgb(" << color_byte(p.fill[0]) << ',' << color_byte(p.fill[1]) << ',' << color_byte(p.fill[2])
     << ")\" fill-opacity=\"" << fixed3(std::clamp(p.opacity, 0.0, 1.0)) << "\" fill-rule=\"nonzero\"/>\n";
}

// --- strict reader for the emitted subset ---

struct Tag {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  bool closing = false;
  bool self_closing = false;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : s_(text) {}

  bool done() {
    skip_misc();
    return pos_ >= s_.size();
  }

  Tag next() {
    skip_misc();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of document");
    if (s_[pos_] != '<') throw ParseError("unexpected text content near offset " + std::to_string(pos_));
    ++pos_;
    Tag t;
    if (peek() == '/') {
      ++pos_;
      t.closing = true;
      t.name = name();
      skip_ws();
      expect('>');
      return t;
    }
    t.name = name();
    while (true) {
      skip_ws();
      if (peek() == '/') {
        ++pos_;
        expect('>');
        t.self_closing = true;
        return t;
      }
      if (peek() == '>') {
        ++pos_;
        return t;
      }
      std::string key = name();
      skip_ws();
      expect('=');
      skip_ws();
      const char q = peek();
      if (q != '"' && q != '\'') throw ParseError("attribute '" + key + "' on <" + t.name + "> is not quoted");
      ++pos_;
      const std::size_t end = s_.find(q, pos_);
      if (end == std::string_view::npos) throw ParseError("unterminated attribute '" + key + "'");
      t.attrs.emplace_back(std::move(key), std::string(s_.substr(pos_, end - pos_)));
      pos_ = end + 1;
    }
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void skip_misc() {
    while (true) {
      skip_ws();
      if (s_.substr(pos_, 2) == "<?") {
        const std::size_t end = s_.find("?>", pos_);
        if (end == std::string_view::npos) throw ParseError("unterminated processing instruction");
        pos_ = end + 2;
      } else if (s_.substr(pos_, 4) == "<!--") {
        const std::size_t end = s_.find("-->", pos_);
        if (end == std::string_view::npos) throw ParseError("unterminated comment");
        pos_ = end + 3;
      } else if (s_.substr(pos_, 2) == "<!") {
        throw ParseError("unsupported construct: document type or CDATA");
      } else {
        return;
      }
    }
  }
  void expect(char c) {
    if (peek() != c) throw ParseError(std::string("expected '") + c + "' near offset " + std::to_string(pos_));
    ++pos_;
  }
  std::string name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-' ||
                                s_[pos_] == ':' || s_[pos_] == '_'))
      ++pos_;
    if (start == pos_) throw ParseError("expected a name near offset " + std::to_string(start));
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Whitespace-insensitive form of a declaration list, without a trailing ';'.
std::string normalize_style(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  while (!out.empty() && out.back() == ';') out.pop_back();
  return out;
}

const std::string* find_attr(const Tag& t, std::string_view key) {
  for (const auto& [k, v] : t.attrs)
    if (k == key) return &v;
  return nullptr;
}

void allow_only(const Tag& t, std::initializer_list<std::string_view> keys) {
  for (const auto& [k, v] : t.attrs) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ParseError("unsupported attribute '" + k + "' on <" + t.name + ">");
  }
}

double to_number(std::string_view s, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) throw ParseError(what + ": bad number '" + std::string(s) + "'");
  return v;
}

int to_dimension(const Tag& t, std::string_view key) {
  const std::string* v = find_attr(t, key);
  if (!v) throw ParseError("<svg> is missing '" + std::string(key) + "'");
  const double d = to_number(*v, "<svg> " + std::string(key));
  if (d < 1 || d != std::floor(d) || d > 1e6) throw ParseError("<svg> " + std::string(key) + " must be a positive integer");
  return static_cast<int>(d);
}

std::vector<double> split_numbers(std::string_view s, const std::string& what) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != ',') ++j;
    out.push_back(to_number(s.substr(i, j - i), what));
    i = j;
  }
  return out;
}

std::vector<Vec2> parse_d(std::string_view d, const std::string& where) {
  const std::string what = where + ": malformed d attribute";
  std::vector<Vec2> pts;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < d.size() && (std::isspace(static_cast<unsigned char>(d[i])) || d[i] == ',')) ++i;
  };
  auto read_number = [&]() {
    skip();
    std::size_t j = i;
    while (j < d.size() && (std::isdigit(static_cast<unsigned char>(d[j])) || d[j] == '.' || d[j] == '-' ||
                            d[j] == '+' || d[j] == 'e' || d[j] == 'E'))
      ++j;
    if (j == i) throw ParseError(what + " (expected a number)");
    const double v = to_number(d.substr(i, j - i), what);
    i = j;
    return v;
  };
  auto read_point = [&]() {
    const double x = read_number();
    const double y = read_number();
    return Vec2{x, y};
  };

  skip();
  if (i >= d.size() || d[i] != 'M') throw ParseError(what + " (must start with M)");
  ++i;
  pts.push_back(read_point());
  bool closed = false;
  std::size_t segments = 0;
  while (true) {
    skip();
    if (i >= d.size()) break;
    const char cmd = d[i];
    if (closed) throw ParseError(what + " (content after Z)");
    if (cmd == 'C') {
      ++i;
      do {
        for (int k = 0; k < 3; ++k) pts.push_back(read_point());
        ++segments;
        skip();
      } while (i < d.size() && d[i] != 'Z' && d[i] != 'C');
    } else if (cmd == 'Z') {
      ++i;
      closed = true;
    } else {
      throw ParseError(what + " (unsupported command '" + std::string(1, cmd) + "')");
    }
  }
  if (!closed) throw ParseError(what + " (path is not closed with Z)");
  if (segments == 0) throw ParseError(what + " (no curve segments)");
  if (!(pts.back() == pts.front())) throw ParseError(what + " (last segment does not end at the start point)");
  pts.pop_back();
  return pts;
}

Rgb parse_fill(const std::string& f, const std::string& where) {
  if (f.rfind("rgb(", 0) != 0 || f.back() != ')') throw ParseError(where + ": unsupported fill '" + f + "'");
  const auto parts = split_numbers(std::string_view(f).substr(4, f.size() - 5), where + ": bad fill");
  if (parts.size() != 3) throw ParseError(where + ": fill needs three channels");
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    if (parts[i] < 0 || parts[i] > 255 || parts[i] != std::floor(parts[i]))
      throw ParseError(where + ": fill channels must be integers in [0,255]");
    c[i] = parts[i] / 255.0;
  }
  return c;
}

VectorPath parse_path(const Tag& t, LayerTag tag, std::size_t index) {
  const std::string where = "path " + std::to_string(index) + " in layer " + std::string(to_string(tag));
  allow_only(t, {"d", "fill", "fill-opacity", "fill-rule"});
  if (!t.self_closing) throw ParseError(where + ": <path> must be self-closing");
  const std::string* d = find_attr(t, "d");
  if (!d) throw ParseError(where + ": missing d attribute");
  VectorPath p;
  p.control_points = parse_d(*d, where);
  p.tag = tag;
  const std::string* fill = find_attr(t, "fill");
  if (!fill) throw ParseError(where + ": missing fill");
  p.fill = parse_fill(*fill, where);
  if (const std::string* o = find_attr(t, "fill-opacity")) {
    p.opacity = to_number(*o, where + ": fill-opacity");
    if (p.opacity < 0 || p.opacity > 1) throw ParseError(where + ": fill-opacity out of range");
  }
  if (const std::string* r = find_attr(t, "fill-rule"); r && *r != "nonzero")
    throw ParseError(where + ": unsupported fill-rule '" + *r + "'");
  return p;
}

void check_background(const Tag& t, int w, int h) {
  allow_only(t, {"x", "y", "width", "height", "fill"});
  auto num = [&](std::string_view k) {
    const std::string* v = find_attr(t, k);
    if (!v) throw ParseError("background <rect> is missing '" + std::string(k) + "'");
    return to_number(*v, "background <rect>");
  };
  const std::string* fill = find_attr(t, "fill");
  if (num("x") != 0 || num("y") != 0 || num("width") != w || num("height") != h || !fill ||
      (*fill != "rgb(255,255,255)" && *fill != "#ffffff" && *fill != "white"))
    throw ParseError("unsupported <rect>: only the full-canvas white background is allowed");
  if (!t.self_closing) throw ParseError("<rect> must be self-closing");
}

// Premultiplied source-over of a path stack onto transparent.
struct Premult {
  RasterImage color;
  ScalarMap alpha;
};

Premult group_over_transparent(const Layer& layer, Dims dims, const RasterizerConfig& cfg) {
  Premult g{RasterImage(dims.width, dims.height), ScalarMap(dims, 0.0)};
  for (const VectorPath& p : layer) {
    const ScalarMap cov = coverage_map(flatten_bezier(p, cfg.flatten_tolerance), dims, cfg);
    const Rgb c = effective_color(p);
    for (std::size_t i = 0; i < dims.pixels(); ++i) {
      const double a = cov.values[i] * p.opacity;
      for (int ch = 0; ch < 3; ++ch) g.color.data()[3 * i + ch] = a * c[ch] + (1.0 - a) * g.color.data()[3 * i + ch];
      g.alpha.values[i] = a + (1.0 - a) * g.alpha.values[i];
    }
  }
  return g;
}

}  // namespace

int color_byte(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  return static_cast<int>(std::floor(v * 255.0 + 0.5));
}

std::string emit_svg(const LayeredDocument& doc) {
  for (LayerTag tag : kOrder)
    if (!doc.has(tag)) throw PipelineError("cannot emit SVG: document is missing the " + std::string(to_string(tag)) + " layer");
  const int w = doc.width(), h = doc.height();
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\">\n";
  os << "<g style=\"isolation: isolate\">\n";
  for (LayerTag tag : kOrder) {
    os << "<g id=\"" << to_string(tag) << '"';
    const std::string style = group_style(tag);
    if (!style.empty()) os << " style=\"" << style << '"';
    os << ">\n";
    if (tag == LayerTag::albedo)
      os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"rgb(255,255,255)\"/>\n";
    for (const VectorPath& p : doc.layer(tag)) emit_path(os, p);
    os << "</g>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

LayeredDocument parse_svg(std::string_view text) {
  Lexer lex(text);
  Tag root = lex.next();
  if (root.closing || root.name != "svg") throw ParseError("root element must be <svg>");
  if (root.self_closing) throw ParseError("<svg> has no content");
  allow_only(root, {"xmlns", "width", "height", "viewBox", "version"});
  const int w = to_dimension(root, "width");
  const int h = to_dimension(root, "height");
  if (const std::string* vb = find_attr(root, "viewBox")) {
    const auto v = split_numbers(*vb, "<svg> viewBox");
    if (v.size() != 4 || v[0] != 0 || v[1] != 0 || v[2] != w || v[3] != h)
      throw ParseError("unsupported viewBox: must be '0 0 width height'");
  }
  LayeredDocument doc = LayeredDocument::three_layer(w, h);

  Tag t = lex.next();
  bool wrapped = false;
  if (!t.closing && t.name == "g" && !find_attr(t, "id")) {
    allow_only(t, {"style"});
    const std::string* st = find_attr(t, "style");
    if (!st || normalize_style(*st) != "isolation:isolate")
      throw ParseError("unsupported wrapper group style");
    wrapped = true;
    t = lex.next();
  }

  std::size_t next_layer = 0;
  while (!(t.closing && t.name == (wrapped ? "g" : "svg"))) {
    if (t.closing || t.name != "g") throw ParseError("unsupported element <" + t.name + "> at document level");
    allow_only(t, {"id", "style"});
    const std::string* id = find_attr(t, "id");
    if (next_layer >= 3 || !id || *id != to_string(kOrder[next_layer]))
      throw ParseError("layer groups must be albedo, shade, light in that order");
    const LayerTag tag = kOrder[next_layer++];
    const std::string* st = find_attr(t, "style");
    const std::string style = st ? normalize_style(*st) : "";
    if (style != normalize_style(group_style(tag))) throw ParseError("unsupported style on layer group '" + *id + "'");
    Layer paths;
    if (!t.self_closing) {
      bool first = true;
      for (Tag c = lex.next(); !(c.closing && c.name == "g"); c = lex.next(), first = false) {
        if (c.closing) throw ParseError("unexpected </" + c.name + ">");
        if (c.name == "rect" && tag == LayerTag::albedo && first) {
          check_background(c, w, h);
        } else if (c.name == "path") {
          paths.push_back(parse_path(c, tag, paths.size()));
        } else {
          throw ParseError("unsupported element <" + c.name + "> in layer " + std::string(to_string(tag)));
        }
      }
    }
    doc.set_layer(tag, std::move(paths));
    t = lex.next();
  }
  if (next_layer != 3) throw ParseError("document must contain albedo, shade and light groups");
  if (wrapped) {
    const Tag end = lex.next();
    if (!(end.closing && end.name == "svg")) throw ParseError("expected </svg>");
  }
  if (!lex.done()) throw ParseError("trailing content after </svg>");
  return doc;
}

void write_svg(const LayeredDocument& doc, const std::filesystem::path& path) {
  const std::string text = emit_svg(doc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

LayeredDocument read_svg(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_svg(ss.str());
}

RasterImage reference_composite(const LayeredDocument& doc, const RasterizerConfig& cfg) {
  const Dims dims = doc.dims();
  const Layer empty;
  auto layer_or_empty = [&](LayerTag tag) -> const Layer& { return doc.has(tag) ? doc.layer(tag) : empty; };
  const Premult albedo = group_over_transparent(layer_or_empty(LayerTag::albedo), dims, cfg);
  const Premult shade = group_over_transparent(layer_or_empty(LayerTag::shade), dims, cfg);
  const Premult light = group_over_transparent(layer_or_empty(LayerTag::light), dims, cfg);

  RasterImage out(dims.width, dims.height);
  for (std::size_t i = 0; i < dims.pixels(); ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const std::size_t k = 3 * i + ch;
      // Backdrop: albedo group over the opaque white rectangle.
      const double cb = albedo.color.data()[k] + (1.0 - albedo.alpha.values[i]);
      // multiply: (1 - as) Cb + as Cb Cs, with as Cs premultiplied.
      const double as = shade.alpha.values[i];
      const double mul = (1.0 - as) * cb + cb * shade.color.data()[k];
      // plus-lighter adds the premultiplied source.
      out.data()[k] = mul + light.color.data()[k];
    }
  }
  return out;
}

LayeredDocument scale_document(const LayeredDocument& doc, int factor) {
  if (factor < 1) throw InputError("scale must be >= 1");
  LayeredDocument out(doc.width() * factor, doc.height() * factor);
  for (LayerTag tag : {LayerTag::albedo, LayerTag::illumination, LayerTag::shade, LayerTag::light}) {
    if (!doc.has(tag)) continue;
    Layer layer = doc.layer(tag);
    for (auto& p : layer)
      for (auto& v : p.control_points) v = static_cast<double>(factor) * v;
    out.set_layer(tag, std::move(layer));
  }
  return out;
}

}  // namespace covec
