#include "abbspo/geom.hpp"

#include <algorithm>

namespace abbspo::geom {

namespace {

constexpr double kDegenerateArea = 1e-12;  // px^2

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Vec2 edge_intersection(const Vec2& p, const Vec2& q, const Vec2& a,
                       const Vec2& b) {
  // p + t (q - p) meeting the infinite line through a, b.
  const double dx = q.x - p.x, dy = q.y - p.y;
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double denom = dx * ey - dy * ex;
  const double t = ((a.x - p.x) * ey - (a.y - p.y) * ex) / denom;
  return {p.x + t * dx, p.y + t * dy};
}

}  // namespace

double canonical_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("canonical_angle: non-finite angle");
  }
  double t = std::remainder(theta, kPi);  // [-pi/2, pi/2]
  if (t <= -kHalfPi) t = kHalfPi;
  return t;
}

Polygon rbox_corners(const RBox& rb) {
  const double c = std::cos(rb.theta), s = std::sin(rb.theta);
  const double hw = 0.5 * rb.w, hh = 0.5 * rb.h;
  // Local corners (-hw,-hh), (+hw,-hh) rotated, then their point mirrors, so
  // the first edge runs along the w direction and the centroid is exactly
  // the box center.
  const Vec2 p0{rb.cx - hw * c + hh * s, rb.cy - hw * s - hh * c};
  const Vec2 p1{rb.cx + hw * c + hh * s, rb.cy + hw * s - hh * c};
  return Polygon{{p0, p1, {2.0 * rb.cx - p0.x, 2.0 * rb.cy - p0.y},
                  {2.0 * rb.cx - p1.x, 2.0 * rb.cy - p1.y}}};
}

double polygon_area(const Polygon& p) {
  const auto& v = p.vertices;
  if (v.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    s += v[j].x * v[i].y - v[i].x * v[j].y;
  }
  return std::max(0.0, 0.5 * s);
}

Polygon clip_convex(const Polygon& subject, const Polygon& clipper) {
  std::vector<Vec2> out = subject.vertices;
  const auto& clip = clipper.vertices;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    std::vector<Vec2> in;
    in.swap(out);
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Vec2& p = in[j];
      const Vec2& q = in[(j + 1) % in.size()];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(edge_intersection(p, q, a, b));
    }
  }
  // Prune duplicates and collinear vertices left by grazing intersections.
  std::vector<Vec2> pruned;
  for (const Vec2& v : out) {
    if (!pruned.empty()) {
      const double dx = v.x - pruned.back().x, dy = v.y - pruned.back().y;
      if (dx * dx + dy * dy < 1e-20) continue;
    }
    pruned.push_back(v);
  }
  while (pruned.size() > 1) {
    const Vec2& first = pruned.front();
    const Vec2& last = pruned.back();
    const double dx = first.x - last.x, dy = first.y - last.y;
    if (dx * dx + dy * dy < 1e-20) {
      pruned.pop_back();
    } else {
      break;
    }
  }
  if (pruned.size() > 2) {
    std::vector<Vec2> slim;
    for (std::size_t i = 0; i < pruned.size(); ++i) {
      const Vec2& prev = slim.empty() ? pruned.back() : slim.back();
      const Vec2& cur = pruned[i];
      const Vec2& next = pruned[(i + 1) % pruned.size()];
      if (std::abs(cross(prev, cur, next)) > 2.0 * kDegenerateArea) {
        slim.push_back(cur);
      }
    }
    pruned.swap(slim);
  }
  Polygon result{std::move(pruned)};
  if (result.vertices.size() < 3 || polygon_area(result) < kDegenerateArea) {
    return Polygon{};
  }
  return result;
}

double rotated_iou(const RBox& a, const RBox& b) {
  if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0)) {
    throw std::invalid_argument("rotated_iou: zero-area box");
  }
  const double inter =
      polygon_area(clip_convex(rbox_corners(a), rbox_corners(b)));
  const double uni = a.w * a.h + b.w * b.h - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

RBox rotate_box(const RBox& rb, double angle, Vec2 pivot) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = rb.cx - pivot.x, dy = rb.cy - pivot.y;
  return {pivot.x + dx * c - dy * s, pivot.y + dx * s + dy * c, rb.w, rb.h,
          canonical_angle(rb.theta + angle)};
}

RBox flip_box(const RBox& rb, double axis_x) {
  return {2.0 * axis_x - rb.cx, rb.cy, rb.w, rb.h, canonical_angle(-rb.theta)};
}

}  // namespace abbspo::geom
