#pragma once

// Desk-scale stand-in for the detector: per-object, per-view box parameters
// optimized by gradient descent on the combined objective, recovering rotated
// boxes from horizontal-box supervision without a network. The three views
// (original, rotated by R, flipped) each own five parameters per object and
// are tied together by the angle-consistency losses.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abbspo/abbs.hpp"
#include "abbspo/geom.hpp"
#include "abbspo/losses.hpp"
#include "abbspo/spa.hpp"
#include "abbspo/synth.hpp"
#include "abbspo/types.hpp"

namespace abbspo::trainer {

enum View { kOri = 0, kRot = 1, kFlp = 2 };

enum class Supervision { tight, coarse };

struct RSampler {
  bool fixed = false;
  double value = geom::kPi / 6.0;  // used when fixed
  double lo = geom::kPi / 12.0;
  double hi = 11.0 * geom::kPi / 12.0;
};

// Update per parameter: -step_size * scale_group * clamp(g / grad_ref, +-1).
// Position/size in px and angle in radians need different magnitudes.
struct StepScales {
  double position = 0.5;
  double size = 0.2;
  double angle = 0.01;
  double grad_ref = 0.02;
};

struct SpaTopK {
  double fraction = 0.25;  // k = max(1, ceil(fraction * N_symmetric))
  int count = -1;          // >= 0 overrides the fraction rule
};

struct TrainConfig {
  Supervision supervision = Supervision::tight;
  abbs::ScaleGrid grid{1.0, 1.5, 6};
  losses::LossWeights weights;
  int iters = 1000;
  double step_size = 1.0;
  StepScales scales;
  RSampler r_sampler;
  bool enable_abbs = true;
  bool enable_spa = true;
  bool reg_theta_grad = false;  // theta partials through MCR in L_reg
  SpaTopK spa_topk;
  int spa_grid = 50;
  double snap_period = geom::kHalfPi;
  double smooth_l1_delta = 1.0;
  double min_size = 2.0;  // w, h projection floor after each step
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct TrainScene {
  Image image;
  std::vector<synth::ShapeSpec> objects;
  std::vector<synth::AnnotationRecord> annotations;
};

using Dataset = std::vector<TrainScene>;

Dataset make_dataset(const std::vector<synth::Scene>& scenes,
                     int supersample = 4);

// Per-view box parameters of one object; views indexed by View.
struct ObjectParams {
  geom::RBox view[3];
};

// GT HBox for one object in one view: the annotation's tight or coarse box
// recomputed in that view (flip is an exact mirror; the rotated view uses the
// transformed shape's analytic extent for tight, MCR of the rotated rbox for
// coarse).
geom::HBox view_gt(const synth::ShapeSpec& spec,
                   const synth::AnnotationRecord& ann, View view,
                   Supervision supervision, double rotation,
                   geom::Vec2 center, double image_width);

// All views start from the GT box of their own view (theta = 0) with +-2%
// seeded size jitter.
ObjectParams init_params(const geom::HBox& gt_ori, const geom::HBox& gt_rot,
                         const geom::HBox& gt_flp, std::mt19937_64& rng);

// Everything one object's step objective sees besides its 15 parameters.
// Candidate sets and detached angles are frozen per step, so the objective
// is a plain differentiable function of the parameter vector.
struct StepContext {
  const Image* image = nullptr;
  geom::HBox gt[3];
  abbs::ScaledHboxSet candidates[3];
  double theta_detached[3] = {0.0, 0.0, 0.0};
  double rotation = 0.0;
  bool spa_selected = false;
  double spa_weight = 1.0;  // 1 / N_spa share of the scene SPA mean
  losses::LossWeights weights;
  bool enable_abbs = true;
  bool enable_spa = true;
  bool reg_theta_grad = false;
  int spa_grid = 50;
  double snap_period = geom::kHalfPi;
  double smooth_l1_delta = 1.0;
};

// Regression loss of one view: min-over-scales IoU loss plus the
// alpha-weighted plain IoU term (plain IoU only when ABBS is disabled).
template <typename T>
T view_reg_loss(const StepContext& ctx, int view, const geom::RBoxT<T>& p) {
  geom::RBoxT<T> rb = p;
  if (!ctx.reg_theta_grad) rb.theta = T(ctx.theta_detached[view]);
  const geom::HBoxT<T> hb = geom::mcr(rb);
  if (ctx.enable_abbs) {
    return abbs::min_iou_loss(hb, ctx.candidates[view]) +
           ctx.weights.alpha * abbs::iou_loss(hb, ctx.gt[view]);
  }
  return (1.0 + ctx.weights.alpha) * abbs::iou_loss(hb, ctx.gt[view]);
}

// Full per-object objective over the 15-vector
// [ori cx cy w h theta, rot ..., flp ...]:
//   lambda_reg * mean_view(reg) + lambda_ang * (beta (lr L_rot + lf L_flp)
//   + gamma * spa_weight * (1 - SSIM))
template <typename T>
T object_total_loss(const StepContext& ctx, std::span<const T> p) {
  const auto& w = ctx.weights;
  auto box = [&](int v) {
    return geom::RBoxT<T>{p[5 * v + 0], p[5 * v + 1], p[5 * v + 2],
                          p[5 * v + 3], p[5 * v + 4]};
  };
  const geom::RBoxT<T> ori = box(kOri), rot = box(kRot), flp = box(kFlp);
  const T reg = (view_reg_loss(ctx, kOri, ori) + view_reg_loss(ctx, kRot, rot) +
                 view_reg_loss(ctx, kFlp, flp)) /
                3.0;
  const T l_rot = losses::snap_loss(rot.theta - ori.theta, T(ctx.rotation),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  const T l_flp = losses::snap_loss(flp.theta + ori.theta, T(0.0),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  T l_spa = T(0.0);
  if (ctx.enable_spa && ctx.spa_selected) {
    l_spa = ctx.spa_weight * spa::symmetry_loss(*ctx.image, ori, ctx.spa_grid);
  }
  const T l_ang = losses::angle_loss(l_rot, l_flp, l_spa, w);
  return losses::total_loss(l_ang, reg, T(0.0), T(0.0), w);
}

// 15-parameter closure over a frozen context (owns a copy).
losses::Objective make_object_objective(StepContext ctx);

struct LossBreakdown {
  int iter = 0;
  int object_id = 0;
  double l_reg = 0.0;
  double l_rot = 0.0;
  double l_flp = 0.0;
  double l_spa = 0.0;  // the object's own 1 - SSIM term (0 if not selected)
  double total = 0.0;
};

struct ObjectResult {
  int object_id = 0;
  geom::RBox final_box;  // original view, canonical angle
  geom::RBox true_box;
  double rotated_iou = 0.0;
  double angle_error_deg = 0.0;
  bool symmetric = true;
  std::vector<LossBreakdown> curve;
};

struct SceneResult {
  int scene_id = 0;
  std::vector<ObjectResult> objects;
};

struct TrainReport {
  std::vector<SceneResult> scenes;
  double mean_rotated_iou = 0.0;
  double median_rotated_iou = 0.0;
  double median_angle_error_deg = 0.0;
};

// Optimizes every object of every scene for cfg.iters steps; R is re-sampled
// per object per step. Scenes run concurrently; results are deterministic
// for a given seed regardless of thread count.
TrainReport run(const TrainConfig& cfg, const Dataset& data);

// Reads a dataset written by the synth CLI: scene_NNNN.pgm plus
// scene_NNNN_rbox.txt / _thbox.txt / _chbox.txt.
Dataset load_dataset(const std::string& dir);

}  // namespace abbspo::trainer
