#include "abbspo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "abbspo/spa.hpp"

namespace abbspo::synth {

namespace {

constexpr double kCrossBar = 0.34;        // arm thickness fraction
constexpr double kRoundedCorner = 0.25;   // corner radius / min side
constexpr int kSceneRetries = 20;
constexpr int kPlacementTries = 120;

// Normalized airplane silhouette, CCW, symmetric about v = 0, spanning
// [-0.5, 0.5]^2 (nose/tail touch the u extremes, wing tips the v extremes).
constexpr int kAirplaneVerts = 12;
constexpr double kAirplane[kAirplaneVerts][2] = {
    {0.50, 0.00},   {0.30, 0.08},   {0.10, 0.50},  {-0.05, 0.50},
    {-0.15, 0.10},  {-0.42, 0.35},  {-0.50, 0.00}, {-0.42, -0.35},
    {-0.15, -0.10}, {-0.05, -0.50}, {0.10, -0.50}, {0.30, -0.08}};

struct LocalPoint {
  double u, v;
};

// Local-frame coordinates of an image point.
inline LocalPoint to_local(const geom::RBox& rb, double x, double y) {
  const double c = std::cos(rb.theta), s = std::sin(rb.theta);
  const double dx = x - rb.cx, dy = y - rb.cy;
  return {dx * c + dy * s, -dx * s + dy * c};
}

bool polygon_contains(const double (*verts)[2], int n, double u, double v) {
  bool inside = false;
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const double ui = verts[i][0], vi = verts[i][1];
    const double uj = verts[j][0], vj = verts[j][1];
    if ((vi > v) != (vj > v) &&
        u < (uj - ui) * (v - vi) / (vj - vi) + ui) {
      inside = !inside;
    }
  }
  return inside;
}

// Support points (local frame) plus a pad radius; the shape is the union of
// pad-balls around them convex-combined edge-wise, which is all the extent
// computation needs.
void support_points(const ShapeSpec& spec, std::vector<LocalPoint>& pts,
                    double& pad) {
  const double hw = 0.5 * spec.rbox.w, hh = 0.5 * spec.rbox.h;
  pts.clear();
  pad = 0.0;
  switch (spec.kind) {
    case ShapeKind::rectangle:
      pts = {{hw, hh}, {hw, -hh}, {-hw, hh}, {-hw, -hh}};
      break;
    case ShapeKind::rounded_rectangle: {
      pad = kRoundedCorner * std::min(spec.rbox.w, spec.rbox.h);
      const double cw = hw - pad, ch = hh - pad;
      pts = {{cw, ch}, {cw, -ch}, {-cw, ch}, {-cw, -ch}};
      break;
    }
    case ShapeKind::cross: {
      const double bw = kCrossBar * hw, bh = kCrossBar * hh;
      pts = {{hw, bh},  {hw, -bh},  {-hw, bh},  {-hw, -bh},
             {bw, hh},  {bw, -hh},  {-bw, hh},  {-bw, -hh}};
      break;
    }
    case ShapeKind::airplane_polygon:
      for (const auto& v : kAirplane) {
        pts.push_back({v[0] * spec.rbox.w, v[1] * spec.rbox.h});
      }
      break;
    case ShapeKind::disc:
      pad = hw;
      pts = {{0.0, 0.0}};
      break;
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double pixel_value(const Scene& scene, const std::vector<geom::HBox>& extents,
                   int x, int y, int supersample) {
  double value = 0.0;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const geom::HBox& e = extents[k];
    if (x + 1.0 < e.cx - 0.5 * e.w || x > e.cx + 0.5 * e.w ||
        y + 1.0 < e.cy - 0.5 * e.h || y > e.cy + 0.5 * e.h) {
      continue;
    }
    int hits = 0;
    for (int a = 0; a < supersample; ++a) {
      const double sy = y + (a + 0.5) / supersample;
      for (int b = 0; b < supersample; ++b) {
        const double sx = x + (b + 0.5) / supersample;
        if (shape_contains(scene.objects[k], sx, sy)) ++hits;
      }
    }
    if (hits > 0) {
      const double cov = static_cast<double>(hits) /
                         (static_cast<double>(supersample) * supersample);
      value = std::max(value, cov * scene.objects[k].intensity);
    }
  }
  return value;
}

Image rasterize_impl(const Scene& scene, int supersample, bool parallel) {
  if (supersample < 1) {
    throw std::invalid_argument("rasterize: supersample must be >= 1");
  }
  const int w = scene.image.width, h = scene.image.height;
  Image out(w, h, 0.0);
  std::vector<geom::HBox> extents;
  extents.reserve(scene.objects.size());
  for (const ShapeSpec& s : scene.objects) extents.push_back(shape_extent(s));
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = pixel_value(scene, extents, x, y, supersample);
    }
  }
  return out;
}

}  // namespace

ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "rectangle") return ShapeKind::rectangle;
  if (s == "rounded_rectangle") return ShapeKind::rounded_rectangle;
  if (s == "cross") return ShapeKind::cross;
  if (s == "airplane_polygon") return ShapeKind::airplane_polygon;
  if (s == "disc") return ShapeKind::disc;
  throw std::invalid_argument("unknown shape kind: " + s);
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::rounded_rectangle: return "rounded_rectangle";
    case ShapeKind::cross: return "cross";
    case ShapeKind::airplane_polygon: return "airplane_polygon";
    case ShapeKind::disc: return "disc";
  }
  throw std::invalid_argument("unknown shape kind");
}

bool shape_is_symmetric(ShapeKind kind) { return kind != ShapeKind::disc; }

bool shape_contains(const ShapeSpec& spec, double x, double y) {
  const geom::RBox& rb = spec.rbox;
  const auto [u, v] = to_local(rb, x, y);
  const double hw = 0.5 * rb.w, hh = 0.5 * rb.h;
  switch (spec.kind) {
    case ShapeKind::rectangle:
      return std::abs(u) <= hw && std::abs(v) <= hh;
    case ShapeKind::rounded_rectangle: {
      const double r = kRoundedCorner * std::min(rb.w, rb.h);
      const double qx = std::max(std::abs(u) - (hw - r), 0.0);
      const double qy = std::max(std::abs(v) - (hh - r), 0.0);
      return qx * qx + qy * qy <= r * r;
    }
    case ShapeKind::cross:
      return (std::abs(u) <= hw && std::abs(v) <= kCrossBar * hh) ||
             (std::abs(u) <= kCrossBar * hw && std::abs(v) <= hh);
    case ShapeKind::airplane_polygon:
      return polygon_contains(kAirplane, kAirplaneVerts, u / rb.w, v / rb.h);
    case ShapeKind::disc:
      return u * u + v * v <= hw * hw;
  }
  return false;
}

geom::HBox shape_extent(const ShapeSpec& spec) {
  std::vector<LocalPoint> pts;
  double pad = 0.0;
  support_points(spec, pts, pad);
  const double c = std::cos(spec.rbox.theta), s = std::sin(spec.rbox.theta);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const LocalPoint& p : pts) {
    const double x = spec.rbox.cx + p.u * c - p.v * s;
    const double y = spec.rbox.cy + p.u * s + p.v * c;
    xmin = std::min(xmin, x - pad);
    xmax = std::max(xmax, x + pad);
    ymin = std::min(ymin, y - pad);
    ymax = std::max(ymax, y + pad);
  }
  return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax), xmax - xmin, ymax - ymin};
}

Image rasterize(const Scene& scene, int supersample) {
  return rasterize_impl(scene, supersample, true);
}

Image rasterize_reference(const Scene& scene, int supersample) {
  return rasterize_impl(scene, supersample, false);
}

Image object_coverage(const ShapeSpec& spec, int width, int height,
                      int supersample) {
  Image cov(width, height, 0.0);
  const geom::HBox e = shape_extent(spec);
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - 0.5 * e.w)) - 1);
  const int x1 = std::min(width - 1,
                          static_cast<int>(std::ceil(e.cx + 0.5 * e.w)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - 0.5 * e.h)) - 1);
  const int y1 = std::min(height - 1,
                          static_cast<int>(std::ceil(e.cy + 0.5 * e.h)) + 1);
  const double norm = 1.0 / (static_cast<double>(supersample) * supersample);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (int a = 0; a < supersample; ++a) {
        const double sy = y + (a + 0.5) / supersample;
        for (int b = 0; b < supersample; ++b) {
          const double sx = x + (b + 0.5) / supersample;
          if (shape_contains(spec, sx, sy)) ++hits;
        }
      }
      if (hits > 0) cov.at(x, y) = hits * norm;
    }
  }
  return cov;
}

geom::HBox tight_hbox(const Image& coverage, double threshold) {
  int xmin = coverage.width, xmax = -1, ymin = coverage.height, ymax = -1;
  for (int y = 0; y < coverage.height; ++y) {
    for (int x = 0; x < coverage.width; ++x) {
      if (coverage.at(x, y) >= threshold) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (xmax < 0) throw std::invalid_argument("tight_hbox: empty mask");
  return {0.5 * (xmin + xmax + 1), 0.5 * (ymin + ymax + 1),
          static_cast<double>(xmax + 1 - xmin),
          static_cast<double>(ymax + 1 - ymin)};
}

std::vector<AnnotationRecord> derive_annotations(const Scene& scene,
                                                 int supersample) {
  std::vector<AnnotationRecord> records;
  records.reserve(scene.objects.size());
  for (const ShapeSpec& spec : scene.objects) {
    AnnotationRecord rec;
    rec.class_id = spec.class_id;
    rec.rbox = spec.rbox;
    rec.c_hbox = geom::mcr(spec.rbox);
    rec.t_hbox = tight_hbox(
        object_coverage(spec, scene.image.width, scene.image.height,
                        supersample));
    records.push_back(rec);
  }
  return records;
}

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  for (int attempt = 0; attempt < kSceneRetries; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, attempt));
    Scene scene;
    scene.seed = seed;
    scene.image = Image(cfg.width, cfg.height, 0.0);

    std::uniform_int_distribution<int> n_dist(cfg.min_objects,
                                              cfg.max_objects);
    const int n_objects = n_dist(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool placed_all = true;
    for (int k = 0; k < n_objects; ++k) {
      const ShapeKind kind = cfg.kinds[static_cast<std::size_t>(
          unit(rng) * static_cast<double>(cfg.kinds.size()))];
      bool placed = false;
      for (int t = 0; t < kPlacementTries && !placed; ++t) {
        ShapeSpec spec;
        spec.kind = kind;
        spec.class_id = static_cast<int>(kind);
        spec.intensity = 0.4 + 0.55 * unit(rng);
        const double shrink = std::pow(0.93, t / 10);
        const double long_side =
            (cfg.min_long_side +
             (cfg.max_long_side - cfg.min_long_side) * unit(rng)) *
            shrink;
        const double aspect = 0.4 + 0.35 * unit(rng);
        if (kind == ShapeKind::disc) {
          spec.rbox.w = spec.rbox.h = long_side * 0.7;
          spec.rbox.theta = 0.0;
        } else {
          spec.rbox.w = long_side;
          spec.rbox.h = long_side * aspect;
          spec.rbox.theta = geom::kPi * (unit(rng) - 0.5);
          spec.rbox.theta = geom::canonical_angle(spec.rbox.theta);
        }
        spec.rbox.cx = 0.0;
        spec.rbox.cy = 0.0;
        const geom::HBox ext = shape_extent(spec);
        const double lo_x = cfg.margin + 0.5 * ext.w;
        const double hi_x = cfg.width - cfg.margin - 0.5 * ext.w;
        const double lo_y = cfg.margin + 0.5 * ext.h;
        const double hi_y = cfg.height - cfg.margin - 0.5 * ext.h;
        if (lo_x >= hi_x || lo_y >= hi_y) continue;
        spec.rbox.cx = lo_x + (hi_x - lo_x) * unit(rng);
        spec.rbox.cy = lo_y + (hi_y - lo_y) * unit(rng);
        bool clear = true;
        for (const ShapeSpec& other : scene.objects) {
          if (geom::rotated_iou(spec.rbox, other.rbox) > 0.05) {
            clear = false;
            break;
          }
          // Extent gap so antialiased borders cannot touch.
          const geom::HBox oe = shape_extent(other);
          const geom::HBox se = shape_extent(spec);
          if (std::abs(se.cx - oe.cx) < 0.5 * (se.w + oe.w) + 3.0 &&
              std::abs(se.cy - oe.cy) < 0.5 * (se.h + oe.h) + 3.0) {
            clear = false;
            break;
          }
        }
        if (clear) {
          scene.objects.push_back(spec);
          placed = true;
        }
      }
      if (!placed) {
        placed_all = false;
        break;
      }
    }
    if (!placed_all || static_cast<int>(scene.objects.size()) <
                           cfg.min_objects) {
      continue;
    }

    // Masks must stay disjoint at the 0.5-coverage level or tight boxes of
    // merged blobs would be ill-defined.
    Image owners(cfg.width, cfg.height, 0.0);
    bool merged = false;
    for (const ShapeSpec& spec : scene.objects) {
      const Image cov =
          object_coverage(spec, cfg.width, cfg.height, cfg.supersample);
      for (std::size_t i = 0; i < cov.data.size() && !merged; ++i) {
        if (cov.data[i] >= 0.5) {
          if (owners.data[i] > 0.0) merged = true;
          owners.data[i] = 1.0;
        }
      }
      if (merged) break;
    }
    if (merged) continue;

    scene.image = rasterize(scene, cfg.supersample);
    if (cfg.noise_amplitude > 0.0) {
      for (double& px : scene.image.data) {
        px = std::min(1.0, px + cfg.noise_amplitude * unit(rng));
      }
    }
    return scene;
  }
  throw std::runtime_error("generate_scene: could not place objects after " +
                           std::to_string(kSceneRetries) + " reseeds");
}

Image rotate_image(const Image& image, double rotation, geom::Vec2 center) {
  Image out(image.width, image.height, 0.0);
  const double c = std::cos(-rotation), s = std::sin(-rotation);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double dx = x + 0.5 - center.x, dy = y + 0.5 - center.y;
      const double sx = center.x + dx * c - dy * s;
      const double sy = center.y + dx * s + dy * c;
      if (sx < 0.0 || sy < 0.0 || sx > image.width || sy > image.height) {
        continue;  // zero padding
      }
      out.at(x, y) = spa::bilinear_sample(image, sx, sy);
    }
  }
  return out;
}

Image flip_image(const Image& image) {
  Image out(image.width, image.height, 0.0);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      out.at(x, y) = image.at(image.width - 1 - x, y);
    }
  }
  return out;
}

ViewSet augment_views(const Scene& scene, double rotation) {
  ViewSet views;
  views.rotation = rotation;
  views.center = {0.5 * scene.image.width, 0.5 * scene.image.height};
  views.rot = rotate_image(scene.image, rotation, views.center);
  views.flp = flip_image(scene.image);
  return views;
}

void write_pgm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  for (double v : image.data) {
    const int q = std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255);
    out.put(static_cast<char>(q));
  }
  if (!out) throw std::runtime_error("write_pgm: write failed: " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("read_pgm: not a P5 file");
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error("read_pgm: bad header in " + path);
  }
  in.get();  // single whitespace after maxval
  Image image(w, h, 0.0);
  std::vector<unsigned char> buf(image.data.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error("read_pgm: truncated data in " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    image.data[i] = buf[i] / static_cast<double>(maxval);
  }
  return image;
}

}  // namespace abbspo::synth
