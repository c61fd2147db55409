#include "abbspo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "abbspo/evalio.hpp"

namespace abbspo::trainer {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) +
                    0xd1b54a32d192ed03ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sample_rotation(const RSampler& sampler, std::mt19937_64& rng) {
  if (sampler.fixed) return sampler.value;
  std::uniform_real_distribution<double> dist(sampler.lo, sampler.hi);
  return dist(rng);
}

template <typename T>
geom::RBoxT<T> box_from(const T* p) {
  return {p[0], p[1], p[2], p[3], p[4]};
}

// Per-view objective slices: each contains exactly the terms that depend on
// that view's parameters (the other views enter as constants), so the three
// 5-parameter gradients assemble the full 15-parameter gradient.
template <typename T>
T slice_ori(const StepContext& ctx, const geom::RBoxT<T>& p, double theta_rot,
            double theta_flp) {
  const auto& w = ctx.weights;
  const T reg = view_reg_loss(ctx, kOri, p);
  const T l_rot = losses::snap_loss(T(theta_rot) - p.theta, T(ctx.rotation),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  const T l_flp = losses::snap_loss(T(theta_flp) + p.theta, T(0.0),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  T l_spa = T(0.0);
  if (ctx.enable_spa && ctx.spa_selected) {
    l_spa = ctx.spa_weight * spa::symmetry_loss(*ctx.image, p, ctx.spa_grid);
  }
  return w.lambda_reg * (reg / 3.0) +
         w.lambda_ang * losses::angle_loss(l_rot, l_flp, l_spa, w);
}

template <typename T>
T slice_rot(const StepContext& ctx, const geom::RBoxT<T>& p,
            double theta_ori) {
  const auto& w = ctx.weights;
  const T reg = view_reg_loss(ctx, kRot, p);
  const T l_rot = losses::snap_loss(p.theta - T(theta_ori), T(ctx.rotation),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  return w.lambda_reg * (reg / 3.0) +
         w.lambda_ang * w.beta * w.lambda_r * l_rot;
}

template <typename T>
T slice_flp(const StepContext& ctx, const geom::RBoxT<T>& p,
            double theta_ori) {
  const auto& w = ctx.weights;
  const T reg = view_reg_loss(ctx, kFlp, p);
  const T l_flp = losses::snap_loss(p.theta + T(theta_ori), T(0.0),
                                    ctx.snap_period, ctx.smooth_l1_delta);
  return w.lambda_reg * (reg / 3.0) +
         w.lambda_ang * w.beta * w.lambda_f * l_flp;
}

template <typename F>
void grad5(const geom::RBox& p, F&& f, double* out, int object_id) {
  Dual d[5] = {p.cx, p.cy, p.w, p.h, p.theta};
  for (int i = 0; i < 5; ++i) {
    d[i].dot = 1.0;
    const Dual y = f(d);
    d[i].dot = 0.0;
    if (!std::isfinite(y.val) || !std::isfinite(y.dot)) {
      throw std::runtime_error(
          "trainer: non-finite gradient for object " +
          std::to_string(object_id) + ", parameter " + std::to_string(i) +
          " (value " + std::to_string(y.val) + ")");
    }
    out[i] = y.dot;
  }
}

struct ObjectState {
  ObjectParams params;
  std::mt19937_64 rng;
  geom::HBox gt_ori, gt_flp;  // static across steps
  double rotation = 0.0;      // R of the current step
  bool spa_selected = false;
  std::vector<LossBreakdown> curve;
};

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

void apply_update(geom::RBox& p, const double* g, const TrainConfig& cfg) {
  const StepScales& sc = cfg.scales;
  const double k = cfg.step_size;
  p.cx -= k * sc.position * clamp_unit(g[0] / sc.grad_ref);
  p.cy -= k * sc.position * clamp_unit(g[1] / sc.grad_ref);
  p.w -= k * sc.size * clamp_unit(g[2] / sc.grad_ref);
  p.h -= k * sc.size * clamp_unit(g[3] / sc.grad_ref);
  p.theta -= k * sc.angle * clamp_unit(g[4] / sc.grad_ref);
  p.w = std::max(cfg.min_size, p.w);
  p.h = std::max(cfg.min_size, p.h);
}

SceneResult run_scene(const TrainConfig& cfg, const TrainScene& scene,
                      int scene_id) {
  const std::size_t n = scene.objects.size();
  if (n == 0 || scene.annotations.size() != n) {
    throw std::invalid_argument("run_scene: empty scene or mismatched annotations");
  }
  const geom::Vec2 center{0.5 * scene.image.width, 0.5 * scene.image.height};

  std::vector<ObjectState> objs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ObjectState& st = objs[i];
    st.rng = std::mt19937_64(mix_seed(cfg.seed, scene_id, i));
    st.gt_ori = view_gt(scene.objects[i], scene.annotations[i], kOri,
                        cfg.supervision, 0.0, center, scene.image.width);
    st.gt_flp = view_gt(scene.objects[i], scene.annotations[i], kFlp,
                        cfg.supervision, 0.0, center, scene.image.width);
    const double r0 = sample_rotation(cfg.r_sampler, st.rng);
    const geom::HBox gt_rot =
        view_gt(scene.objects[i], scene.annotations[i], kRot, cfg.supervision,
                r0, center, scene.image.width);
    st.params = init_params(st.gt_ori, gt_rot, st.gt_flp, st.rng);
    st.curve.reserve(cfg.iters);
  }

  std::vector<Proposal> proposals(n);
  for (int iter = 1; iter <= cfg.iters; ++iter) {
    // R per object, then Top-k selection on the original view.
    int n_symmetric = 0;
    for (std::size_t i = 0; i < n; ++i) {
      objs[i].rotation = sample_rotation(cfg.r_sampler, objs[i].rng);
      Proposal& pr = proposals[i];
      pr.box = objs[i].params.view[kOri];
      pr.sc_cls = 1.0;
      pr.sc_loc = spa::localization_score(pr.box, objs[i].gt_ori);
      pr.class_id = scene.objects[i].class_id;
      pr.symmetric = synth::shape_is_symmetric(scene.objects[i].kind);
      if (pr.symmetric) ++n_symmetric;
    }
    std::size_t k = 0;
    if (cfg.spa_topk.count >= 0) {
      k = static_cast<std::size_t>(cfg.spa_topk.count);
    } else if (n_symmetric > 0) {
      k = static_cast<std::size_t>(std::max(
          1.0, std::ceil(cfg.spa_topk.fraction * n_symmetric)));
    }
    const std::vector<std::size_t> selected = spa::topk_indices(proposals, k);
    for (ObjectState& st : objs) st.spa_selected = false;
    for (std::size_t i : selected) objs[i].spa_selected = true;
    const double spa_weight =
        selected.empty() ? 0.0 : 1.0 / static_cast<double>(selected.size());

    for (std::size_t i = 0; i < n; ++i) {
      ObjectState& st = objs[i];
      StepContext ctx;
      ctx.image = &scene.image;
      ctx.gt[kOri] = st.gt_ori;
      ctx.gt[kFlp] = st.gt_flp;
      ctx.gt[kRot] =
          view_gt(scene.objects[i], scene.annotations[i], kRot,
                  cfg.supervision, st.rotation, center, scene.image.width);
      ctx.rotation = st.rotation;
      ctx.spa_selected = st.spa_selected;
      ctx.spa_weight = spa_weight;
      ctx.weights = cfg.weights;
      ctx.enable_abbs = cfg.enable_abbs;
      ctx.enable_spa = cfg.enable_spa;
      ctx.reg_theta_grad = cfg.reg_theta_grad;
      ctx.spa_grid = cfg.spa_grid;
      ctx.snap_period = cfg.snap_period;
      ctx.smooth_l1_delta = cfg.smooth_l1_delta;
      for (int v = 0; v < 3; ++v) {
        ctx.theta_detached[v] = st.params.view[v].theta;
        if (cfg.enable_abbs) {
          ctx.candidates[v] = abbs::scaled_gt_hboxes(
              ctx.gt[v], st.params.view[v].theta, cfg.grid);
        }
      }

      const int object_id = static_cast<int>(i);
      double g[15];
      const double th_ori = st.params.view[kOri].theta;
      const double th_rot = st.params.view[kRot].theta;
      const double th_flp = st.params.view[kFlp].theta;
      grad5(st.params.view[kOri],
            [&](const Dual* p) {
              return slice_ori(ctx, box_from(p), th_rot, th_flp);
            },
            g, object_id);
      grad5(st.params.view[kRot],
            [&](const Dual* p) { return slice_rot(ctx, box_from(p), th_ori); },
            g + 5, object_id);
      grad5(st.params.view[kFlp],
            [&](const Dual* p) { return slice_flp(ctx, box_from(p), th_ori); },
            g + 10, object_id);

      // Loss breakdown at the pre-update parameters.
      LossBreakdown bd;
      bd.iter = iter;
      bd.object_id = object_id;
      double reg = 0.0;
      for (int v = 0; v < 3; ++v) {
        reg += view_reg_loss(ctx, v, st.params.view[v]);
      }
      bd.l_reg = reg / 3.0;
      bd.l_rot = losses::snap_loss(th_rot - th_ori, ctx.rotation,
                                   ctx.snap_period, ctx.smooth_l1_delta);
      bd.l_flp = losses::snap_loss(th_flp + th_ori, 0.0, ctx.snap_period,
                                   ctx.smooth_l1_delta);
      bd.l_spa = 0.0;
      if (cfg.enable_spa && st.spa_selected) {
        bd.l_spa = spa::symmetry_loss(scene.image, st.params.view[kOri],
                                      cfg.spa_grid);
      }
      const double l_ang = losses::angle_loss(
          bd.l_rot, bd.l_flp, spa_weight * bd.l_spa, cfg.weights);
      bd.total =
          losses::total_loss(l_ang, bd.l_reg, 0.0, 0.0, cfg.weights);
      st.curve.push_back(bd);

      for (int v = 0; v < 3; ++v) {
        apply_update(st.params.view[v], g + 5 * v, cfg);
      }
    }
  }

  SceneResult result;
  result.scene_id = scene_id;
  result.objects.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ObjectResult& res = result.objects[i];
    res.object_id = static_cast<int>(i);
    res.final_box = objs[i].params.view[kOri];
    res.final_box.theta = geom::canonical_angle(res.final_box.theta);
    res.true_box = scene.annotations[i].rbox;
    res.rotated_iou = geom::rotated_iou(res.final_box, res.true_box);
    res.angle_error_deg = evalio::angle_error_deg(res.final_box, res.true_box);
    res.symmetric = synth::shape_is_symmetric(scene.objects[i].kind);
    res.curve = std::move(objs[i].curve);
  }
  return result;
}

}  // namespace

Dataset make_dataset(const std::vector<synth::Scene>& scenes,
                     int supersample) {
  Dataset data;
  data.reserve(scenes.size());
  for (const synth::Scene& scene : scenes) {
    TrainScene ts;
    ts.image = scene.image;
    ts.objects = scene.objects;
    ts.annotations = synth::derive_annotations(scene, supersample);
    data.push_back(std::move(ts));
  }
  return data;
}

geom::HBox view_gt(const synth::ShapeSpec& spec,
                   const synth::AnnotationRecord& ann, View view,
                   Supervision supervision, double rotation, geom::Vec2 center,
                   double image_width) {
  const geom::HBox base =
      supervision == Supervision::tight ? ann.t_hbox : ann.c_hbox;
  switch (view) {
    case kOri:
      return base;
    case kFlp:
      // Horizontal mirror is pixel-exact, so the mirrored annotation box is
      // the annotation of the mirrored view.
      return {image_width - base.cx, base.cy, base.w, base.h};
    case kRot: {
      const geom::RBox rotated = geom::rotate_box(ann.rbox, rotation, center);
      if (supervision == Supervision::coarse) return geom::mcr(rotated);
      synth::ShapeSpec moved = spec;
      moved.rbox = rotated;
      return synth::shape_extent(moved);
    }
  }
  throw std::invalid_argument("view_gt: bad view");
}

ObjectParams init_params(const geom::HBox& gt_ori, const geom::HBox& gt_rot,
                         const geom::HBox& gt_flp, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  ObjectParams params;
  const geom::HBox* gts[3] = {&gt_ori, &gt_rot, &gt_flp};
  for (int v = 0; v < 3; ++v) {
    const geom::HBox& gt = *gts[v];
    params.view[v] = {gt.cx, gt.cy, gt.w * (1.0 + jitter(rng)),
                      gt.h * (1.0 + jitter(rng)), 0.0};
  }
  return params;
}

losses::Objective make_object_objective(StepContext ctx) {
  return [ctx = std::move(ctx)](std::span<const Dual> p) -> Dual {
    if (p.size() != 15) {
      throw std::invalid_argument("object objective expects 15 parameters");
    }
    return object_total_loss(ctx, p);
  };
}

TrainReport run(const TrainConfig& cfg, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("run: empty dataset");
  if (cfg.iters < 1) throw std::invalid_argument("run: iters must be >= 1");
  if (!(cfg.step_size > 0.0)) {
    throw std::invalid_argument("run: step_size must be > 0");
  }
  TrainReport report;
  report.scenes.resize(data.size());
  std::string error;
  const std::int64_t n_scenes = static_cast<std::int64_t>(data.size());
#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
  for (std::int64_t s = 0; s < n_scenes; ++s) {
    try {
      report.scenes[s] = run_scene(cfg, data[s], static_cast<int>(s));
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);

  std::vector<double> ious, angle_errors;
  for (const SceneResult& sr : report.scenes) {
    for (const ObjectResult& obj : sr.objects) {
      ious.push_back(obj.rotated_iou);
      angle_errors.push_back(obj.angle_error_deg);
    }
  }
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  report.mean_rotated_iou =
      std::accumulate(ious.begin(), ious.end(), 0.0) /
      static_cast<double>(ious.size());
  report.median_rotated_iou = median(ious);
  report.median_angle_error_deg = median(angle_errors);
  return report;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset data;
  for (int index = 0;; ++index) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", index);
    const fs::path base = fs::path(dir) / name;
    const fs::path image_path = base.string() + ".pgm";
    if (!fs::exists(image_path)) break;
    TrainScene ts;
    ts.image = synth::read_pgm(image_path.string());
    const auto rboxes = evalio::read_rbox_file(base.string() + "_rbox.txt");
    const auto thboxes = evalio::read_hbox_file(base.string() + "_thbox.txt");
    const auto chboxes = evalio::read_hbox_file(base.string() + "_chbox.txt");
    if (rboxes.size() != thboxes.size() || rboxes.size() != chboxes.size()) {
      throw std::runtime_error(std::string("load_dataset: mismatched record "
                                           "counts for ") + name);
    }
    for (std::size_t i = 0; i < rboxes.size(); ++i) {
      synth::ShapeSpec spec;
      spec.kind = synth::shape_kind_from_string(rboxes[i].class_token);
      spec.rbox = evalio::corners_to_rbox(rboxes[i].corners).box;
      spec.class_id = static_cast<int>(spec.kind);
      ts.objects.push_back(spec);
      ts.annotations.push_back({spec.class_id, thboxes[i].box, chboxes[i].box,
                                spec.rbox});
    }
    data.push_back(std::move(ts));
  }
  if (data.empty()) {
    throw std::runtime_error("load_dataset: no scene_0000.pgm under " + dir);
  }
  return data;
}

}  // namespace abbspo::trainer
