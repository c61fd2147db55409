#pragma once

// Symmetric-prior angle loss: raster sampling of a rotated box interior onto
// a fixed grid, split along the symmetry axis with one half flipped, SSIM
// between the halves, and Top-k proposal selection.

#include <span>
#include <utility>
#include <vector>

#include "abbspo/geom.hpp"
#include "abbspo/types.hpp"

namespace abbspo::spa {

struct RasterPatch {
  int resolution = 0;           // G
  std::vector<double> data;     // G x G row-major, values in [0, 1]
};

// Bilinear sample of `image` at continuous coordinates (x, y); pixel (i, j)
// is centered at (i + 0.5, j + 0.5) and out-of-image reads are 0.
template <typename T>
T bilinear_sample(const Image& image, T x, T y) {
  const double gx = value_of(x) - 0.5;
  const double gy = value_of(y) - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const T fx = (x - 0.5) - static_cast<double>(x0);
  const T fy = (y - 0.5) - static_cast<double>(y0);
  auto pix = [&](int i, int j) -> double {
    if (i < 0 || j < 0 || i >= image.width || j >= image.height) return 0.0;
    return image.at(i, j);
  };
  const T one = 1.0;
  return (one - fy) * ((one - fx) * pix(x0, y0) + fx * pix(x0 + 1, y0)) +
         fy * ((one - fx) * pix(x0, y0 + 1) + fx * pix(x0 + 1, y0 + 1));
}

// Projects the interior of a rotated box onto a G x G grid. Grid point
// (r, c) maps to local coordinates u = (c/(G-1) - 1/2) w, v = (r/(G-1) - 1/2) h,
// rotated by theta and translated to the box center.
template <typename T>
std::vector<T> sample_rbox_patch_t(const Image& image,
                                   const geom::RBoxT<T>& rb, int G) {
  if (image.empty()) {
    throw std::invalid_argument("sample_rbox_patch: empty image");
  }
  if (!(value_of(rb.w) > 0.0 && value_of(rb.h) > 0.0)) {
    throw std::invalid_argument("sample_rbox_patch: degenerate box");
  }
  if (G < 2) throw std::invalid_argument("sample_rbox_patch: G must be >= 2");
  using std::cos;
  using std::sin;
  const T c = cos(rb.theta), s = sin(rb.theta);
  std::vector<T> patch(static_cast<std::size_t>(G) * G);
  const double inv = 1.0 / (G - 1);
  for (int r = 0; r < G; ++r) {
    const T v = (r * inv - 0.5) * rb.h;
    for (int col = 0; col < G; ++col) {
      const T u = (col * inv - 0.5) * rb.w;
      const T x = rb.cx + u * c - v * s;
      const T y = rb.cy + u * s + v * c;
      patch[static_cast<std::size_t>(r) * G + col] =
          bilinear_sample(image, x, y);
    }
  }
  return patch;
}

RasterPatch sample_rbox_patch(const Image& image, const geom::RBox& rb,
                              int G = 50);

// Splits a G x G patch along the local u-axis (the row direction, i.e. the
// line v = 0 through the center along the box's w dimension). p1 holds the
// v < 0 rows, p2_flipped the v > 0 rows in reversed row order; both are
// (G/2) x G. Requires even G.
template <typename T>
void split_and_flip(std::span<const T> patch, int G, std::vector<T>& p1,
                    std::vector<T>& p2_flipped) {
  if (G % 2 != 0) throw std::invalid_argument("split_and_flip: G must be even");
  const int half = G / 2;
  p1.assign(patch.begin(), patch.begin() + static_cast<std::size_t>(half) * G);
  p2_flipped.resize(static_cast<std::size_t>(half) * G);
  for (int r = 0; r < half; ++r) {
    const T* src = patch.data() + static_cast<std::size_t>(G - 1 - r) * G;
    std::copy(src, src + G, p2_flipped.begin() + static_cast<std::size_t>(r) * G);
  }
}

std::pair<RasterPatch, RasterPatch> split_and_flip(const RasterPatch& patch);

// Global-statistics SSIM over the whole pair (no sliding window);
// C1 = 0.01^2, C2 = 0.03^2 for dynamic range 1.
template <typename T>
T ssim(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("ssim: shape mismatch");
  }
  const double n = static_cast<double>(a.size());
  T mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mu_a += a[i];
    mu_b += b[i];
  }
  mu_a = mu_a / n;
  mu_b = mu_b / n;
  T var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T da = a[i] - mu_a;
    const T db = b[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a = var_a / n;
  var_b = var_b / n;
  cov = cov / n;
  const double kC1 = 1e-4, kC2 = 9e-4;
  return ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
}

// 1 - SSIM between the two halves of the box's raster patch.
template <typename T>
T symmetry_loss(const Image& image, const geom::RBoxT<T>& rb, int G) {
  const std::vector<T> patch = sample_rbox_patch_t(image, rb, G);
  std::vector<T> p1, p2;
  split_and_flip(std::span<const T>(patch), G, p1, p2);
  return T(1.0) - ssim(std::span<const T>(p1), std::span<const T>(p2));
}

// Indices of the k symmetric proposals with the largest sc_cls + sc_loc,
// stable under ties. k larger than the symmetric pool truncates.
std::vector<std::size_t> topk_indices(std::span<const Proposal> proposals,
                                      std::size_t k);
std::vector<Proposal> topk_select(std::span<const Proposal> proposals,
                                  std::size_t k);

// Mean of 1 - SSIM over the Top-k symmetric proposals; 0 when no symmetric
// proposal exists.
double spa_loss(const Image& image, std::span<const Proposal> proposals,
                std::size_t k, int G = 50);

// IoU between the proposal's MCR projection and the GT HBox; stands in for
// the otherwise undefined localization score.
double localization_score(const geom::RBox& rb, const geom::HBox& gt);

}  // namespace abbspo::spa
