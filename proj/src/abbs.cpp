#include "abbspo/abbs.hpp"

#include <cmath>

namespace abbspo::abbs {

ScaleGrid grid_from_step(double s_min, double s_max, double step) {
  if (!(step > 0.0) || s_max < s_min) {
    throw std::invalid_argument("grid_from_step: bad range or step");
  }
  const int n = static_cast<int>(std::lround((s_max - s_min) / step)) + 1;
  return {s_min, s_max, n < 2 ? 2 : n};
}

std::vector<double> basic_scale_factors(const ScaleGrid& grid) {
  if (grid.n < 2) {
    throw std::invalid_argument("basic_scale_factors: n must be >= 2");
  }
  if (grid.s_max < grid.s_min) {
    throw std::invalid_argument("basic_scale_factors: s_min > s_max");
  }
  std::vector<double> s(grid.n);
  const double step = (grid.s_max - grid.s_min) / (grid.n - 1);
  for (int i = 0; i < grid.n; ++i) s[i] = grid.s_min + step * i;
  return s;
}

double scale_adjust(double theta, double s) {
  if (!(theta >= 0.0 && theta < geom::kHalfPi)) {
    throw std::invalid_argument("scale_adjust: theta outside [0, pi/2)");
  }
  // r = theta / (pi/4) keeps the branch boundary and the s = 1 fixed point
  // exact: r = 1 at theta = pi/4 gives (s-1)+1 = (1-s)+(2s-1) = s.
  const double r = theta / geom::kQuarterPi;
  if (theta < geom::kQuarterPi) {
    return (s - 1.0) * r + 1.0;
  }
  return (1.0 - s) * r + (2.0 * s - 1.0);
}

ScaledHboxSet scaled_gt_hboxes(const geom::HBox& gt, double theta_pred,
                               const ScaleGrid& grid) {
  if (!(gt.w > 0.0 && gt.h > 0.0)) {
    throw std::invalid_argument("scaled_gt_hboxes: degenerate gt box");
  }
  const double theta = geom::normalize_angle_quarter(theta_pred);
  const std::vector<double> s = basic_scale_factors(grid);
  ScaledHboxSet set;
  set.n = grid.n;
  set.boxes.reserve(static_cast<std::size_t>(grid.n) * grid.n);
  set.index_pairs.reserve(set.boxes.capacity());
  for (int i = 0; i < grid.n; ++i) {
    const double sw = scale_adjust(theta, s[i]);
    for (int j = 0; j < grid.n; ++j) {
      const double sh = scale_adjust(theta, s[j]);
      set.boxes.push_back({gt.cx, gt.cy, gt.w * sw, gt.h * sh});
      set.index_pairs.emplace_back(i + 1, j + 1);
    }
  }
  return set;
}

AbbsLossResult abbs_loss(std::span<const Proposal> proposals,
                         std::span<const geom::HBox> gts,
                         const ScaleGrid& grid) {
  if (proposals.empty()) {
    throw std::invalid_argument("abbs_loss: empty proposal list");
  }
  if (proposals.size() != gts.size()) {
    throw std::invalid_argument("abbs_loss: proposal/gt count mismatch");
  }
  AbbsLossResult result;
  result.argmin.resize(proposals.size());
  double sum = 0.0;
  for (std::size_t l = 0; l < proposals.size(); ++l) {
    const geom::HBox pred = geom::mcr(proposals[l].box);
    const ScaledHboxSet cands =
        scaled_gt_hboxes(gts[l], proposals[l].box.theta, grid);
    sum += min_iou_loss(pred, cands, &result.argmin[l]);
  }
  result.loss = sum / static_cast<double>(proposals.size());
  return result;
}

double regression_loss(std::span<const Proposal> proposals,
                       std::span<const geom::HBox> gts, const ScaleGrid& grid,
                       double alpha) {
  const AbbsLossResult as = abbs_loss(proposals, gts, grid);
  double reg = 0.0;
  for (std::size_t l = 0; l < proposals.size(); ++l) {
    reg += iou_loss(geom::mcr(proposals[l].box), gts[l]);
  }
  return as.loss + alpha * reg / static_cast<double>(proposals.size());
}

}  // namespace abbspo::abbs
