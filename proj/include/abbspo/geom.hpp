#pragma once

// Rotated/horizontal box types, angle normalization, minimum circumscribed
// rectangle (MCR) projection, view transforms and exact rotated IoU via
// convex polygon clipping.
//
// Conventions:
//  - RBox angles are stored canonically in (-pi/2, pi/2] modulo pi.
//  - Polygons are convex and counter-clockwise (positive shoelace sign on
//    plain (x, y) coordinates); clipping emits vertices in traversal order.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "abbspo/dual.hpp"

namespace abbspo::geom {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;
inline constexpr double kQuarterPi = kPi / 4.0;

template <typename T>
struct RBoxT {
  T cx{}, cy{};  // center (px)
  T w{}, h{};    // side lengths (px), > 0
  T theta{};     // radians
};

template <typename T>
struct HBoxT {
  T cx{}, cy{};
  T w{}, h{};
};

using RBox = RBoxT<double>;
using HBox = HBoxT<double>;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Polygon {
  std::vector<Vec2> vertices;  // convex, CCW
};

template <typename T>
HBoxT<T> lift_hbox(const HBox& b) {
  return {T(b.cx), T(b.cy), T(b.w), T(b.h)};
}

// Wraps to the canonical storage range (-pi/2, pi/2], period pi.
double canonical_angle(double theta);

// Wraps to [0, pi/2), period pi/2 (the domain of the scale adjustment
// function). Derivative w.r.t. theta is 1 everywhere away from the seam.
template <typename T>
T normalize_angle_quarter(T theta) {
  const double v = value_of(theta);
  if (!std::isfinite(v)) {
    throw std::invalid_argument("normalize_angle_quarter: non-finite angle");
  }
  const double k = std::floor(v / kHalfPi);
  T out = theta - k * kHalfPi;
  if (value_of(out) >= kHalfPi) out = out - kHalfPi;
  if (value_of(out) < 0.0) out = out + kHalfPi;
  return out;
}

// Minimum circumscribed (axis-aligned) rectangle of a rotated box:
//   w' = w|cos t| + h|sin t|,  h' = w|sin t| + h|cos t|, same center.
template <typename T>
HBoxT<T> mcr(const RBoxT<T>& rb) {
  using std::abs;
  using std::cos;
  using std::sin;
  const T c = abs(cos(rb.theta));
  const T s = abs(sin(rb.theta));
  return {rb.cx, rb.cy, rb.w * c + rb.h * s, rb.w * s + rb.h * c};
}

// Axis-aligned IoU in [0, 1]. Throws on zero-area operands.
template <typename T>
T hbox_iou(const HBoxT<T>& a, const HBoxT<T>& b) {
  if (!(value_of(a.w) > 0.0 && value_of(a.h) > 0.0 &&
        value_of(b.w) > 0.0 && value_of(b.h) > 0.0)) {
    throw std::invalid_argument("hbox_iou: zero-area box");
  }
  using std::max;
  using std::min;
  const T half = 0.5;
  const T ix = min(a.cx + a.w * half, b.cx + b.w * half) -
               max(a.cx - a.w * half, b.cx - b.w * half);
  const T iy = min(a.cy + a.h * half, b.cy + b.h * half) -
               max(a.cy - a.h * half, b.cy - b.h * half);
  const T inter = max(ix, T(0.0)) * max(iy, T(0.0));
  const T uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

// Corner polygon of a rotated box, CCW starting from the local (+w/2, -h/2)
// corner. Centroid equals the box center by construction.
Polygon rbox_corners(const RBox& rb);

// Sutherland-Hodgman intersection of two convex CCW polygons. Near-degenerate
// results (area below 1e-12 px^2) collapse to the empty polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& clipper);

// Shoelace area; non-negative for CCW input.
double polygon_area(const Polygon& p);

// Exact rotated IoU: clip corner polygons, apply inclusion-exclusion.
double rotated_iou(const RBox& a, const RBox& b);

// Rotates center about `pivot` by `angle`; theta' = theta + angle
// canonicalized; w, h unchanged.
RBox rotate_box(const RBox& rb, double angle, Vec2 pivot);

// Mirror about the vertical line x = axis_x: cx' = 2*axis_x - cx,
// theta' = -theta canonicalized; w, h unchanged.
RBox flip_box(const RBox& rb, double axis_x);

}  // namespace abbspo::geom
