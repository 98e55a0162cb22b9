#include "covec/init.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace covec {
namespace {

using Bitmap = std::vector<std::uint8_t>;

void check_dims(Dims a, Dims b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": dimensions do not match the input image");
}

// 4-connected component labels of the pixels where `member(p)` holds; -1 elsewhere.
template <typename Member, typename Same>
std::vector<int> label_components(Dims dims, Member member, Same same, int* count) {
  const std::size_t n = dims.pixels();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != -1 || !member(start)) continue;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % dims.width);
      const int y = static_cast<int>(p / dims.width);
      const std::size_t nb[4] = {p - 1, p + 1, p - dims.width, p + dims.width};
      const bool ok[4] = {x > 0, x + 1 < dims.width, y > 0, y + 1 < dims.height};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k]) continue;
        const std::size_t q = nb[k];
        if (comp[q] == -1 && member(q) && same(p, q)) {
          comp[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  *count = next;
  return comp;
}

Bitmap largest_component(const SemanticMask& mask) {
  int count = 0;
  const auto comp = label_components(
      mask.dims, [&](std::size_t p) { return mask.bitmap[p] != 0; }, [](std::size_t, std::size_t) { return true; },
      &count);
  std::vector<std::size_t> sizes(count, 0);
  for (int c : comp)
    if (c >= 0) ++sizes[c];
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  Bitmap out(comp.size(), 0);
  for (std::size_t p = 0; p < comp.size(); ++p) out[p] = comp[p] == best ? 1 : 0;
  return out;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + t * ab));
}

std::vector<std::uint32_t> kmeans_labels(const RasterImage& img, const SegmentConfig& cfg) {
  const std::size_t n = img.pixel_count();
  const auto& d = img.data();
  auto dist2 = [&](std::size_t p, const Rgb& c) {
    const double a = d[3 * p] - c[0], b = d[3 * p + 1] - c[1], e = d[3 * p + 2] - c[2];
    return a * a + b * b + e * e;
  };
  std::mt19937_64 rng(cfg.seed);
  std::vector<Rgb> centers;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  const std::size_t p0 = first(rng);
  centers.push_back({d[3 * p0], d[3 * p0 + 1], d[3 * p0 + 2]});
  std::vector<double> best(n);
  for (std::size_t p = 0; p < n; ++p) best[p] = dist2(p, centers[0]);
  while (static_cast<int>(centers.size()) < cfg.clusters) {
    const double total = std::accumulate(best.begin(), best.end(), 0.0);
    if (total <= 0.0) break;  // fewer distinct colors than clusters
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t pick = n - 1;
    for (std::size_t p = 0; p < n; ++p) {
      r -= best[p];
      if (r <= 0.0 && best[p] > 0.0) {
        pick = p;
        break;
      }
    }
    centers.push_back({d[3 * pick], d[3 * pick + 1], d[3 * pick + 2]});
    for (std::size_t p = 0; p < n; ++p) best[p] = std::min(best[p], dist2(p, centers.back()));
  }

  std::vector<std::uint32_t> label(n, 0);
  for (int it = 0; it < cfg.iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t p = 0; p < n; ++p) {
      std::uint32_t arg = 0;
      double m = dist2(p, centers[0]);
      for (std::size_t k = 1; k < centers.size(); ++k) {
        const double v = dist2(p, centers[k]);
        if (v < m) {
          m = v;
          arg = static_cast<std::uint32_t>(k);
        }
      }
      if (label[p] != arg) {
        label[p] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Rgb> sum(centers.size(), Rgb{0, 0, 0});
    std::vector<std::size_t> cnt(centers.size(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < 3; ++c) sum[label[p]][c] += d[3 * p + c];
      ++cnt[label[p]];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (cnt[k] == 0) continue;  // empty cluster keeps its center
      for (int c = 0; c < 3; ++c) centers[k][c] = sum[k][c] / cnt[k];
    }
  }
  return label;
}

std::vector<Vec2> straight_loop(const std::vector<Vec2>& anchors) {
  std::vector<Vec2> pts;
  const std::size_t k = anchors.size();
  for (std::size_t i = 0; i < k; ++i) {
    const Vec2 a = anchors[i];
    const Vec2 b = anchors[(i + 1) % k];
    pts.push_back(a);
    pts.push_back(a + (1.0 / 3.0) * (b - a));
    pts.push_back(a + (2.0 / 3.0) * (b - a));
  }
  return pts;
}

VectorPath contour_path(const SemanticMask& mask, const InitConfig& cfg, LayerTag tag, Rgb fill, std::uint32_t group) {
  VectorPath path;
  path.control_points = fit_bezier_contour(trace_and_simplify(mask, cfg.dp_epsilon), cfg.max_segments);
  path.fill = fill;
  path.opacity = 1.0;
  path.tag = tag;
  path.group = group;
  return path;
}

RasterImage paint_group(const std::vector<SemanticMask>& group, const std::vector<Rgb>& colors, Dims dims) {
  RasterImage img(dims.width, dims.height, {1.0, 1.0, 1.0});
  for (std::size_t m = 0; m < group.size(); ++m) {
    for (std::size_t p = 0; p < dims.pixels(); ++p) {
      if (!group[m].bitmap[p]) continue;
      for (int c = 0; c < 3; ++c) img.data()[3 * p + c] = colors[m][c];
    }
  }
  return img;
}

std::vector<SemanticMask> largest_first(std::vector<SemanticMask> masks, std::size_t keep) {
  std::stable_sort(masks.begin(), masks.end(), [](const auto& a, const auto& b) { return a.area > b.area; });
  if (masks.size() > keep) masks.resize(keep);
  return masks;
}

Rgb mean_attenuation(const SemanticMask& mask, const RasterImage& image, const RasterImage& albedo, double eps) {
  Rgb sum{0, 0, 0};
  for (std::size_t p = 0; p < mask.bitmap.size(); ++p) {
    if (!mask.bitmap[p]) continue;
    for (int c = 0; c < 3; ++c) {
      sum[c] += std::clamp(image.data()[3 * p + c] / std::max(albedo.data()[3 * p + c], eps), 0.0, 1.0);
    }
  }
  for (double& v : sum) v /= static_cast<double>(mask.area);
  return sum;
}

}  // namespace

SemanticMask make_mask(std::vector<std::uint8_t> bitmap, const RasterImage& reference) {
  SemanticMask m;
  m.dims = reference.dims();
  m.bitmap = std::move(bitmap);
  Rgb sum{0, 0, 0};
  for (std::size_t p = 0; p < m.bitmap.size(); ++p) {
    if (!m.bitmap[p]) continue;
    ++m.area;
    for (int c = 0; c < 3; ++c) sum[c] += reference.data()[3 * p + c];
  }
  if (m.area > 0) {
    for (int c = 0; c < 3; ++c) m.mean_color[c] = sum[c] / static_cast<double>(m.area);
  }
  return m;
}

std::size_t MaskGroupSet::mask_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

ScalarMap luma_map(const RasterImage& image) {
  ScalarMap out(image.dims());
  for (std::size_t p = 0; p < image.pixel_count(); ++p) out.values[p] = luma(image.data().data() + 3 * p);
  return out;
}

ScalarMap gaussian_blur(const ScalarMap& input, double radius) {
  const int r = std::max(1, static_cast<int>(std::lround(radius)));
  const double sigma = std::max(0.5, radius / 2.0);
  std::vector<double> kernel(2 * r + 1);
  double total = 0;
  for (int i = -r; i <= r; ++i) total += kernel[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= total;

  const Dims d = input.dims;
  ScalarMap tmp(d), out(d);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * input.at(std::clamp(x + i, 0, d.width - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * tmp.at(x, std::clamp(y + i, 0, d.height - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

RasterImage load_or_fallback_albedo(const RasterImage& image, const std::optional<RasterImage>& albedo,
                                    const AlbedoFallbackConfig& cfg) {
  if (albedo) {
    check_dims(albedo->dims(), image.dims(), "albedo map");
    return *albedo;
  }
  const double radius = cfg.blur_radius > 0 ? cfg.blur_radius : std::max(image.width(), image.height()) / 16.0;
  const ScalarMap shading = gaussian_blur(luma_map(image), radius);
  RasterImage out(image.width(), image.height());
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const double s = std::max(cfg.shade_epsilon, shading.values[p]);
    for (int c = 0; c < 3; ++c) out.data()[3 * p + c] = std::clamp(image.data()[3 * p + c] / s, 0.0, 1.0);
  }
  return out;
}

std::vector<SemanticMask> masks_from_labels(const LabelMap& labels, const RasterImage& reference,
                                            std::optional<std::uint32_t> ignore_label) {
  check_dims(labels.dims, reference.dims(), "label map");
  std::set<std::uint32_t> ids;
  for (std::uint32_t l : labels.labels)
    if (!ignore_label || l != *ignore_label) ids.insert(l);
  if (ids.empty()) throw InputError("label map contains no labeled regions");
  std::vector<SemanticMask> out;
  for (std::uint32_t id : ids) {
    Bitmap bits(labels.labels.size(), 0);
    for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = labels.labels[p] == id ? 1 : 0;
    out.push_back(make_mask(std::move(bits), reference));
  }
  return out;
}

std::vector<SemanticMask> segment_fallback(const RasterImage& reference, const SegmentConfig& cfg) {
  const Dims dims = reference.dims();
  const std::size_t n = dims.pixels();
  const auto cluster = kmeans_labels(reference, cfg);
  int count = 0;
  std::vector<int> comp = label_components(
      dims, [](std::size_t) { return true; }, [&](std::size_t a, std::size_t b) { return cluster[a] == cluster[b]; },
      &count);

  std::vector<std::vector<std::size_t>> members(count);
  for (std::size_t p = 0; p < n; ++p) members[comp[p]].push_back(p);
  const std::size_t min_area =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.min_area_fraction * static_cast<double>(n))));

  // Repeatedly fold the smallest undersized component into its largest neighbor.
  while (true) {
    int victim = -1;
    for (int c = 0; c < count; ++c) {
      if (members[c].empty() || members[c].size() >= min_area) continue;
      if (victim == -1 || members[c].size() < members[victim].size()) victim = c;
    }
    if (victim == -1) break;
    std::map<int, std::size_t> neighbors;
    for (std::size_t p : members[victim]) {
      const int x = static_cast<int>(p % dims.width), y = static_cast<int>(p / dims.width);
      const std::pair<int, int> nb[4] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto [nx, ny] : nb) {
        if (nx < 0 || ny < 0 || nx >= dims.width || ny >= dims.height) continue;
        const int o = comp[static_cast<std::size_t>(ny) * dims.width + nx];
        if (o != victim) neighbors[o] = members[o].size();
      }
    }
    if (neighbors.empty()) break;  // the whole image is one small component
    int target = neighbors.begin()->first;
    for (auto [id, size] : neighbors)
      if (size > members[target].size()) target = id;
    for (std::size_t p : members[victim]) comp[p] = target;
    members[target].insert(members[target].end(), members[victim].begin(), members[victim].end());
    members[victim].clear();
  }

  std::vector<SemanticMask> out;
  for (int c = 0; c < count; ++c) {
    if (members[c].empty()) continue;
    Bitmap bits(n, 0);
    for (std::size_t p : members[c]) bits[p] = 1;
    out.push_back(make_mask(std::move(bits), reference));
  }
  return out;
}

std::vector<SemanticMask> load_or_fallback_segment(const RasterImage& reference, const std::optional<LabelMap>& labels,
                                                   const SegmentConfig& cfg) {
  if (labels) return masks_from_labels(*labels, reference, 0u);
  return segment_fallback(reference, cfg);
}

std::vector<RegionThreshold> region_thresholds(const RasterImage& image, const std::vector<SemanticMask>& masks) {
  std::vector<RegionThreshold> out;
  const ScalarMap lum = luma_map(image);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    check_dims(masks[i].dims, image.dims(), "mask");
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t p = 0; p < lum.values.size(); ++p) {
      if (!masks[i].bitmap[p]) continue;
      sum += lum.values[p];
      ++cnt;
    }
    out.push_back({i, cnt > 0 ? sum / static_cast<double>(cnt) : 0.0});
  }
  return out;
}

std::vector<SemanticMask> region_binarize(const RasterImage& image, const std::vector<SemanticMask>& albedo_masks) {
  const ScalarMap lum = luma_map(image);
  const auto thresholds = region_thresholds(image, albedo_masks);
  std::vector<SemanticMask> out;
  for (const RegionThreshold& t : thresholds) {
    const SemanticMask& m = albedo_masks[t.mask_id];
    Bitmap bits(m.bitmap.size(), 0);
    bool any = false;
    for (std::size_t p = 0; p < bits.size(); ++p) {
      if (m.bitmap[p] && lum.values[p] <= t.threshold + 1e-12) {
        bits[p] = 1;
        any = true;
      }
    }
    if (!any) continue;
    SemanticMask shadow = make_mask(std::move(bits), image);
    shadow.parent = static_cast<int>(t.mask_id);
    out.push_back(std::move(shadow));
  }
  return out;
}

MaskGroupSet organize_masks(std::vector<SemanticMask> masks) {
  std::stable_sort(masks.begin(), masks.end(), [](const auto& a, const auto& b) { return a.area > b.area; });
  auto overlaps = [](const SemanticMask& a, const SemanticMask& b) {
    for (std::size_t p = 0; p < a.bitmap.size(); ++p)
      if (a.bitmap[p] && b.bitmap[p]) return true;
    return false;
  };
  MaskGroupSet set;
  for (auto& m : masks) {
    std::size_t target = 0;
    for (std::size_t g = set.groups.size(); g-- > 0;) {
      const bool hit = std::any_of(set.groups[g].begin(), set.groups[g].end(),
                                   [&](const SemanticMask& other) { return overlaps(m, other); });
      if (hit) {
        target = g + 1;
        break;
      }
    }
    if (target == set.groups.size()) set.groups.emplace_back();
    set.groups[target].push_back(std::move(m));
  }
  return set;
}

Polyline trace_boundary(const SemanticMask& mask) {
  if (mask.area == 0) throw InputError("cannot trace an empty mask");
  const Bitmap bits = largest_component(mask);
  const Dims d = mask.dims;
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < d.width && y < d.height && bits[static_cast<std::size_t>(y) * d.width + x] != 0;
  };
  const std::size_t first = static_cast<std::size_t>(std::find(bits.begin(), bits.end(), 1) - bits.begin());
  const int sx = static_cast<int>(first % d.width);
  const int sy = static_cast<int>(first / d.width);

  // Walk pixel corners with the region on the right-hand side (y down).
  int vx = sx, vy = sy, dx = 1, dy = 0;
  std::vector<Vec2> corners;
  while (true) {
    vx += dx;
    vy += dy;
    const int rx = -dy, ry = dx;
    // Pixels ahead of the corner, right and left of the heading.
    const int arx = static_cast<int>(std::floor(vx + 0.5 * dx + 0.5 * rx));
    const int ary = static_cast<int>(std::floor(vy + 0.5 * dy + 0.5 * ry));
    const int alx = static_cast<int>(std::floor(vx + 0.5 * dx - 0.5 * rx));
    const int aly = static_cast<int>(std::floor(vy + 0.5 * dy - 0.5 * ry));
    int ndx = dx, ndy = dy;
    if (!inside(arx, ary)) {
      ndx = rx;
      ndy = ry;
    } else if (inside(alx, aly)) {
      ndx = -rx;
      ndy = -ry;
    }
    if (ndx != dx || ndy != dy) corners.push_back({static_cast<double>(vx), static_cast<double>(vy)});
    dx = ndx;
    dy = ndy;
    if (vx == sx && vy == sy && dx == 1 && dy == 0) break;
  }
  std::rotate(corners.begin(), corners.end() - 1, corners.end());
  Polyline out;
  out.vertices = std::move(corners);
  return out;
}

Polyline simplify_closed(const Polyline& polyline, double epsilon) {
  const auto& v = polyline.vertices;
  const std::size_t n = v.size();
  if (epsilon <= 0.0 || n <= 3) return polyline;

  std::size_t bi = 0, bj = 1;
  double best = -1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 e = v[i] - v[j];
      const double d2 = dot(e, e);
      if (d2 > best) {
        best = d2;
        bi = i;
        bj = j;
      }
    }
  }
  std::vector<bool> keep(n, false);
  keep[bi] = keep[bj] = true;
  // Arcs are walked in cyclic index space: offsets from `a` up to `b`.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{bi, bj}, {bj, bi}};
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    const std::size_t span = (b + n - a) % n;
    double dmax = -1;
    std::size_t arg = a;
    for (std::size_t k = 1; k < span; ++k) {
      const std::size_t idx = (a + k) % n;
      const double dist = point_segment_distance(v[idx], v[a], v[b]);
      if (dist > dmax) {
        dmax = dist;
        arg = idx;
      }
    }
    if (span > 1 && dmax > epsilon) {
      keep[arg] = true;
      stack.push_back({a, arg});
      stack.push_back({arg, b});
    }
  }
  Polyline out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.vertices.push_back(v[i]);
  if (out.vertices.size() < 3) return polyline;
  return out;
}

SemanticMask outer_footprint(const SemanticMask& mask) {
  SemanticMask out = mask;
  std::fill(out.bitmap.begin(), out.bitmap.end(), 0);
  out.area = 0;
  if (mask.area == 0) return out;
  const Polyline loop = trace_boundary(mask);
  for (int y = 0; y < mask.dims.height; ++y) {
    for (int x = 0; x < mask.dims.width; ++x) {
      if (winding_number(loop.vertices, {x + 0.5, y + 0.5}) == 0) continue;
      out.bitmap[static_cast<std::size_t>(y) * mask.dims.width + x] = 1;
      ++out.area;
    }
  }
  return out;
}

Polyline trace_and_simplify(const SemanticMask& mask, double dp_epsilon) {
  return simplify_closed(trace_boundary(mask), dp_epsilon);
}

std::size_t contour_segment_count(std::size_t vertex_count, int max_segments) {
  const std::size_t half = (vertex_count + 1) / 2;
  const std::size_t floor4 = std::min<std::size_t>(vertex_count, 4);
  return std::min<std::size_t>(static_cast<std::size_t>(max_segments), std::max(half, floor4));
}

std::vector<Vec2> fit_bezier_contour(const Polyline& polyline, int max_segments) {
  const auto& v = polyline.vertices;
  const std::size_t n = v.size();
  if (n < 3) throw InputError("contour fitting needs at least 3 vertices");
  if (max_segments < 2) throw InputError("max_segments must be >= 2");
  const std::size_t k = contour_segment_count(n, max_segments);

  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + norm(v[(i + 1) % n] - v[i]);
  const double total = cum[n];

  std::vector<std::size_t> idx{0};
  for (std::size_t s = 1; s < k; ++s) {
    const double target = total * static_cast<double>(s) / static_cast<double>(k);
    const std::size_t lo = idx.back() + 1;
    const std::size_t hi = n - (k - s);
    std::size_t arg = lo;
    for (std::size_t j = lo; j <= hi; ++j) {
      if (std::abs(cum[j] - target) < std::abs(cum[arg] - target)) arg = j;
    }
    idx.push_back(arg);
  }
  std::vector<Vec2> anchors;
  for (std::size_t i : idx) anchors.push_back(v[i]);
  return straight_loop(anchors);
}

InitResult init_layers(const RasterImage& image, const RasterImage& albedo, const std::vector<SemanticMask>& albedo_masks,
                       const InitConfig& cfg) {
  check_dims(albedo.dims(), image.dims(), "albedo map");
  if (albedo_masks.empty()) throw PipelineError("initialization found no albedo masks");
  if (cfg.path_budget < 1) throw InputError("path budget must be >= 1");

  std::vector<SemanticMask> a_masks = largest_first(albedo_masks, cfg.path_budget);
  for (auto& m : a_masks) m = make_mask(m.bitmap, albedo);
  std::vector<SemanticMask> i_masks = region_binarize(image, a_masks);
  i_masks = largest_first(std::move(i_masks), cfg.path_budget - a_masks.size());
  for (auto& m : i_masks) m.mean_color = mean_attenuation(m, image, albedo, cfg.shade_epsilon);
  for (auto& m : a_masks) m = outer_footprint(m);
  for (auto& m : i_masks) m = outer_footprint(m);

  InitResult out;
  out.albedo_groups = organize_masks(std::move(a_masks));
  out.illumination_groups = organize_masks(std::move(i_masks));

  for (std::size_t g = 0; g < out.albedo_groups.groups.size(); ++g) {
    const auto& group = out.albedo_groups.groups[g];
    std::vector<Rgb> colors;
    for (const auto& m : group) {
      Rgb c = m.mean_color;
      for (double& x : c) x = std::clamp(x, 0.0, 1.0);
      colors.push_back(c);
      out.albedo.push_back(contour_path(m, cfg, LayerTag::albedo, c, static_cast<std::uint32_t>(g)));
    }
    out.albedo_mask_renders.push_back(paint_group(group, colors, image.dims()));
  }
  for (std::size_t g = 0; g < out.illumination_groups.groups.size(); ++g) {
    const auto& group = out.illumination_groups.groups[g];
    std::vector<Rgb> colors;
    for (const auto& m : group) {
      const Rgb c = m.mean_color;
      colors.push_back(c);
      out.illumination.push_back(contour_path(m, cfg, LayerTag::illumination, c, static_cast<std::uint32_t>(g)));
    }
    out.illumination_mask_renders.push_back(paint_group(group, colors, image.dims()));
  }
  return out;
}

InitResult init_albedo_only(const RasterImage& image, const std::vector<SemanticMask>& region_masks,
                            const InitConfig& cfg) {
  if (region_masks.empty()) throw PipelineError("initialization found no region masks");
  if (cfg.path_budget < 1) throw InputError("path budget must be >= 1");
  std::vector<SemanticMask> regions = largest_first(region_masks, cfg.path_budget);
  std::vector<SemanticMask> shadows = region_binarize(image, regions);
  for (auto& m : regions) m = outer_footprint(make_mask(m.bitmap, image));
  for (auto& m : shadows) {
    const int parent = m.parent;
    m = outer_footprint(make_mask(m.bitmap, image));
    m.parent = parent;
  }
  // A shadow path with the same outline as its region adds nothing.
  std::erase_if(shadows, [&](const SemanticMask& s) { return s.bitmap == regions[s.parent].bitmap; });
  shadows = largest_first(std::move(shadows), cfg.path_budget - regions.size());

  std::vector<SemanticMask> all = std::move(regions);
  for (auto& s : shadows) all.push_back(std::move(s));

  InitResult out;
  out.albedo_groups = organize_masks(std::move(all));
  for (std::size_t g = 0; g < out.albedo_groups.groups.size(); ++g) {
    const auto& group = out.albedo_groups.groups[g];
    std::vector<Rgb> colors;
    for (const auto& m : group) {
      Rgb c = m.mean_color;
      for (double& x : c) x = std::clamp(x, 0.0, 1.0);
      colors.push_back(c);
      out.albedo.push_back(contour_path(m, cfg, LayerTag::albedo, c, static_cast<std::uint32_t>(g)));
    }
    out.albedo_mask_renders.push_back(paint_group(group, colors, image.dims()));
  }
  return out;
}

}  // namespace covec
