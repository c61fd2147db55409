#include "abbspo/spa.hpp"

#include <algorithm>
#include <numeric>

namespace abbspo::spa {

RasterPatch sample_rbox_patch(const Image& image, const geom::RBox& rb,
                              int G) {
  return {G, sample_rbox_patch_t(image, rb, G)};
}

std::pair<RasterPatch, RasterPatch> split_and_flip(const RasterPatch& patch) {
  const int G = patch.resolution;
  RasterPatch p1{G, {}}, p2{G, {}};
  split_and_flip(std::span<const double>(patch.data), G, p1.data, p2.data);
  return {std::move(p1), std::move(p2)};
}

std::vector<std::size_t> topk_indices(std::span<const Proposal> proposals,
                                      std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].symmetric) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].sc_cls + proposals[a].sc_loc >
           proposals[b].sc_cls + proposals[b].sc_loc;
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

std::vector<Proposal> topk_select(std::span<const Proposal> proposals,
                                  std::size_t k) {
  std::vector<Proposal> out;
  for (std::size_t i : topk_indices(proposals, k)) out.push_back(proposals[i]);
  return out;
}

double spa_loss(const Image& image, std::span<const Proposal> proposals,
                std::size_t k, int G) {
  if (image.empty()) throw std::invalid_argument("spa_loss: empty image");
  const std::vector<std::size_t> selected = topk_indices(proposals, k);
  if (selected.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : selected) {
    sum += symmetry_loss(image, proposals[i].box, G);
  }
  return sum / static_cast<double>(selected.size());
}

double localization_score(const geom::RBox& rb, const geom::HBox& gt) {
  return geom::hbox_iou(geom::mcr(rb), gt);
}

}  // namespace abbspo::spa
