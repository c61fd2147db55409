#pragma once

#include <cstddef>
#include <vector>

#include "abbspo/geom.hpp"

namespace abbspo {

// Grayscale intensity grid, values in [0, 1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool empty() const { return width <= 0 || height <= 0; }
};

// Per-object prediction state: a rotated box plus the scores used for
// Top-k selection. sc_cls stays 1.0 in the synthetic trainer (no classifier).
struct Proposal {
  geom::RBox box;
  double sc_cls = 1.0;
  double sc_loc = 0.0;
  int class_id = 0;
  bool symmetric = true;
};

}  // namespace abbspo
