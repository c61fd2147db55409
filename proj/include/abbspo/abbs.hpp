#pragma once

// Adaptive bounding box scaling: uniformly quantized scale grids, the
// angle-adjusted scale function f, scaled GT HBox generation, and the
// min-over-scales scaling/regression losses.

#include <span>
#include <utility>
#include <vector>

#include "abbspo/geom.hpp"
#include "abbspo/types.hpp"

namespace abbspo::abbs {

// Uniform scale range [s_min .. s_max] quantized into n >= 2 factors. The
// same grid applies to width and height.
struct ScaleGrid {
  double s_min = 1.0;
  double s_max = 1.5;
  int n = 6;
};

// n = round((s_max - s_min) / step) + 1, the CLI-facing parametrization.
ScaleGrid grid_from_step(double s_min, double s_max, double step);

// s_i = s_min + (s_max - s_min) / (n - 1) * (i - 1), i = 1..n.
std::vector<double> basic_scale_factors(const ScaleGrid& grid);

// Triangle-profile scale adjustment on theta in [0, pi/2):
//   f(theta, s) = (4/pi)(s-1) theta + 1          for theta in [0, pi/4)
//   f(theta, s) = (4/pi)(1-s) theta + (2s - 1)   for theta in [pi/4, pi/2)
// f(0, s) = 1, f(pi/4, s) = s, f -> 1 as theta -> pi/2, f(theta, 1) = 1.
double scale_adjust(double theta, double s);

// The n^2 scaled variants of a GT HBox for a predicted angle, all sharing
// the GT center. index_pairs[k] holds the (i, j) grid indices (1-based).
struct ScaledHboxSet {
  std::vector<geom::HBox> boxes;
  std::vector<std::pair<int, int>> index_pairs;
  int n = 0;
};

ScaledHboxSet scaled_gt_hboxes(const geom::HBox& gt, double theta_pred,
                               const ScaleGrid& grid);

template <typename T>
T iou_loss(const geom::HBoxT<T>& pred, const geom::HBox& gt) {
  return T(1.0) - geom::hbox_iou(pred, geom::lift_hbox<T>(gt));
}

// min_k (1 - IoU(pred, candidate_k)); ties broken toward the smallest
// (i, j) in lexicographic order. With Dual inputs the argmin is selected on
// primal values and only that branch carries the tangent (the argmin is
// locally constant).
template <typename T>
T min_iou_loss(const geom::HBoxT<T>& pred, const ScaledHboxSet& candidates,
               std::pair<int, int>* argmin = nullptr) {
  if (candidates.boxes.empty()) {
    throw std::invalid_argument("min_iou_loss: empty candidate set");
  }
  T best = iou_loss(pred, candidates.boxes[0]);
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < candidates.boxes.size(); ++k) {
    T l = iou_loss(pred, candidates.boxes[k]);
    if (value_of(l) < value_of(best)) {
      best = l;
      best_k = k;
    }
  }
  if (argmin != nullptr) *argmin = candidates.index_pairs[best_k];
  return best;
}

struct AbbsLossResult {
  double loss = 0.0;
  std::vector<std::pair<int, int>> argmin;  // per proposal
};

// L_as: mean over proposals of the min-over-scales IoU loss between the
// proposal's MCR projection and the scaled GT HBoxes generated with that
// proposal's current predicted angle. Proposals and GTs are aligned 1:1.
AbbsLossResult abbs_loss(std::span<const Proposal> proposals,
                         std::span<const geom::HBox> gts,
                         const ScaleGrid& grid);

// L_reg = L_as + alpha * mean(1 - IoU(MCR(pred), gt)).
double regression_loss(std::span<const Proposal> proposals,
                       std::span<const geom::HBox> gts, const ScaleGrid& grid,
                       double alpha = 0.01);

}  // namespace abbspo::abbs
