// SPDX-License-Identifier: Apache-2.0
#include "semsplat/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "semsplat/error.hpp"

namespace semsplat {

void OptimizerState::reset(std::size_t count, int class_count) {
  first.assign(count, GaussianPrimitive::zeros(class_count));
  second.assign(count, GaussianPrimitive::zeros(class_count));
}

void OptimizerState::append_zero(int class_count) {
  first.push_back(GaussianPrimitive::zeros(class_count));
  second.push_back(GaussianPrimitive::zeros(class_count));
}

void OptimizerState::audit(const GaussianScene& scene) const {
  if (first.size() != scene.size() || second.size() != scene.size()) {
    throw ContractViolation("optimizer moments track " + std::to_string(first.size()) + " primitives, scene has " +
                            std::to_string(scene.size()));
  }
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].semantic.size() != std::size_t(scene.class_count) ||
        second[i].semantic.size() != std::size_t(scene.class_count)) {
      throw ContractViolation("optimizer moment " + std::to_string(i) + " has the wrong class count");
    }
  }
}

double& group_lr(OptimizerState& s, ParamGroup g) { return s.lr[std::size_t(g)]; }
double group_lr(const OptimizerState& s, ParamGroup g) { return s.lr[std::size_t(g)]; }

double camera_extent(const std::vector<Camera>& cameras) {
  if (cameras.size() < 2) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& c : cameras) mean += c.center();
  mean /= double(cameras.size());
  double radius = 0.0;
  for (const auto& c : cameras) radius = std::max(radius, (c.center() - mean).norm());
  return radius > 0.0 ? 1.1 * radius : 1.0;
}

double position_lr(const TrainConfig& cfg, double spatial_scale, std::int64_t iteration) {
  const double t =
      cfg.total_iters > 0 ? std::clamp(double(iteration) / double(cfg.total_iters), 0.0, 1.0) : 0.0;
  if (cfg.lr_position_init <= 0.0 || cfg.lr_position_final <= 0.0) {
    return spatial_scale * ((1 - t) * cfg.lr_position_init + t * cfg.lr_position_final);
  }
  return spatial_scale *
         std::exp((1 - t) * std::log(cfg.lr_position_init) + t * std::log(cfg.lr_position_final));
}

OptimizerState make_optimizer_state(const GaussianScene& scene, const TrainConfig& cfg, double spatial_scale) {
  OptimizerState s;
  s.reset(scene.size(), scene.class_count);
  group_lr(s, ParamGroup::position) = position_lr(cfg, spatial_scale, 0);
  group_lr(s, ParamGroup::log_scale) = cfg.lr_log_scale;
  group_lr(s, ParamGroup::rotation) = cfg.lr_rotation;
  group_lr(s, ParamGroup::opacity) = cfg.lr_opacity;
  group_lr(s, ParamGroup::color) = cfg.lr_color;
  group_lr(s, ParamGroup::semantic) = cfg.lr_semantic;
  return s;
}

void adam_step(GaussianScene& scene, OptimizerState& state, const std::vector<GaussianPrimitive>& grads,
               std::int64_t iteration) {
  state.audit(scene);
  if (grads.size() != scene.size()) {
    throw ContractViolation("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(scene.size()) + " primitives");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (ParamGroup g : kParamGroups) {
      for (double v : field(grads[i], g)) {
        if (!std::isfinite(v)) {
          throw NumericalFailure("non-finite gradient at iteration " + std::to_string(iteration) + " in group " +
                                 std::string(param_group_name(g)) + " (primitive " + std::to_string(i) + ")");
        }
      }
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, double(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, double(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    GaussianPrimitive& p = scene.primitives[i];
    for (ParamGroup g : kParamGroups) {
      const double lr = group_lr(state, g);
      auto x = field(p, g);
      auto m = field(state.first[i], g);
      auto v = field(state.second[i], g);
      auto d = field(grads[i], g);
      if (d.size() != x.size()) throw ContractViolation("adam_step: gradient shape mismatch");
      for (std::size_t k = 0; k < x.size(); ++k) {
        m[k] = kAdamBeta1 * m[k] + (1 - kAdamBeta1) * d[k];
        v[k] = kAdamBeta2 * v[k] + (1 - kAdamBeta2) * d[k] * d[k];
        x[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEpsilon);
      }
    }
    const double qn = p.rotation.norm();
    if (qn > 0.0) p.rotation /= qn;
  }
}

void DensifyStats::reset(std::size_t n) {
  grad_sum.assign(n, 0.0);
  count.assign(n, 0);
}

void DensifyStats::accumulate(const SceneGradients& grads) {
  if (grad_sum.size() != grads.screen_grad_norm.size()) reset(grads.screen_grad_norm.size());
  for (std::size_t i = 0; i < grad_sum.size(); ++i) {
    if (!grads.visible[i]) continue;
    grad_sum[i] += grads.screen_grad_norm[i];
    ++count[i];
  }
}

bool densify_due(const TrainConfig& cfg, std::int64_t iteration) {
  return iteration > cfg.densify_from_iter && iteration < cfg.densify_until_iter &&
         iteration % cfg.densify_interval == 0;
}

DensifyResult densify_and_prune(GaussianScene& scene, OptimizerState& state, DensifyStats& stats,
                                const TrainConfig& cfg, double extent, std::uint64_t seed) {
  state.audit(scene);
  DensifyResult result;
  const std::size_t n = scene.size();
  if (stats.grad_sum.size() != n) stats.reset(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double size_limit = cfg.percent_dense * extent;
  const double shrink = std::log(1.6);
  const auto cap = std::size_t(cfg.max_primitives);

  std::vector<std::uint8_t> drop(n, 0);
  std::size_t live = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (stats.count[i] == 0) continue;
    if (stats.grad_sum[i] / double(stats.count[i]) <= cfg.densify_grad_threshold) continue;
    const GaussianPrimitive parent = scene.primitives[i];
    const double max_scale = parent.log_scale.array().exp().maxCoeff();
    if (max_scale <= size_limit) {
      if (live + 1 > cap) continue;
      scene.primitives.push_back(parent);
      state.append_zero(scene.class_count);
      ++live;
      ++result.cloned;
    } else {
      if (live + 1 > cap) continue;
      const Mat3 r = quaternion_to_matrix(parent.rotation);
      const Vec3 s = parent.log_scale.array().exp();
      for (int k = 0; k < 2; ++k) {
        GaussianPrimitive child = parent;
        const Vec3 z(normal(rng), normal(rng), normal(rng));
        child.position = parent.position + r * s.cwiseProduct(z);
        child.log_scale = parent.log_scale.array() - shrink;
        scene.primitives.push_back(std::move(child));
        state.append_zero(scene.class_count);
      }
      drop[i] = 1;
      ++live;
      ++result.split;
    }
  }
  drop.resize(scene.size(), 0);

  // Prune, keeping the most opaque candidates when the floor would be crossed.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!drop[i] && sigmoid(scene.primitives[i].opacity_logit) < cfg.prune_opacity) candidates.push_back(i);
  }
  const auto floor = std::size_t(std::max<std::int64_t>(cfg.min_primitives, 0));
  if (live - candidates.size() < floor) {
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      return scene.primitives[a].opacity_logit > scene.primitives[b].opacity_logit;
    });
    const std::size_t keep = std::min(candidates.size(), floor - (live - candidates.size()));
    candidates.erase(candidates.begin(), candidates.begin() + std::ptrdiff_t(keep));
  }
  for (std::size_t i : candidates) drop[i] = 1;
  result.pruned = candidates.size();

  std::size_t out = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (drop[i]) continue;
    if (out != i) {
      scene.primitives[out] = std::move(scene.primitives[i]);
      state.first[out] = std::move(state.first[i]);
      state.second[out] = std::move(state.second[i]);
    }
    ++out;
  }
  scene.primitives.resize(out);
  state.first.resize(out);
  state.second.resize(out);
  state.audit(scene);
  stats.reset(out);
  return result;
}

namespace {

void write_rows(const std::filesystem::path& path, const std::string& header,
                const std::function<void(std::ofstream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << header << '\n';
  body(out);
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

void TrainLog::write_csv(const std::filesystem::path& path) const {
  write_rows(path, "iter,view,l_rgb,l_soft,l_hard,l_sem,l_d,l_ng,l_nb,total,guidance,depth_degenerate,primitives",
             [&](std::ofstream& out) {
               for (const auto& r : rows) {
                 out << r.iteration << ',' << r.view << ',' << format_exact(r.l_rgb) << ','
                     << format_exact(r.l_soft) << ',' << format_exact(r.l_hard) << ',' << format_exact(r.l_sem)
                     << ',' << format_exact(r.l_d) << ',' << format_exact(r.l_ng) << ','
                     << format_exact(r.l_nb) << ',' << format_exact(r.total) << ',' << int(r.guidance_active)
                     << ',' << int(r.depth_degenerate) << ',' << r.primitives << '\n';
               }
             });
}

void TrainLog::write_eval_csv(const std::filesystem::path& path) const {
  write_rows(path, "iter,psnr,ssim", [&](std::ofstream& out) {
    for (const auto& e : evals) out << e.iteration << ',' << format_exact(e.psnr) << ',' << format_exact(e.ssim) << '\n';
  });
}

void TrainLog::write_timing_csv(const std::filesystem::path& path) const {
  write_rows(path, "iter,seconds", [&](std::ofstream& out) {
    for (std::size_t i = 0; i < wall_seconds.size(); ++i) out << (i + 1) << ',' << wall_seconds[i] << '\n';
  });
}

TrainResult train(GaussianScene scene, const std::vector<TrainView>& views, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  TrainResult result;
  if (cfg.total_iters == 0) {
    result.state = make_optimizer_state(scene, cfg, 1.0);
    result.scene = std::move(scene);
    return result;
  }
  if (views.empty()) throw ContractViolation("train: need at least one view");
  std::vector<Camera> cameras;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& view = views[v];
    const int w = view.camera.width, h = view.camera.height;
    const auto& pb = view.priors;
    if (view.image.width != w || view.image.height != h || view.image.channels != 3 ||
        pb.teacher_logits.width != w || pb.teacher_logits.height != h ||
        pb.teacher_logits.channels != scene.class_count || pb.prior_depth.width != w ||
        pb.prior_depth.height != h) {
      throw ContractViolation("train: view " + std::to_string(v) + " buffers disagree with its camera or class count");
    }
    cameras.push_back(view.camera);
  }
  const double extent = options.extent > 0.0 ? options.extent : camera_extent(cameras);
  const double spatial_scale = cfg.spatial_lr_scale > 0.0 ? cfg.spatial_lr_scale : extent;

  OptimizerState state = make_optimizer_state(scene, cfg, spatial_scale);
  DensifyStats stats;
  stats.reset(scene.size());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  const RenderOptions ropt{options.threads};
  using Clock = std::chrono::steady_clock;

  for (std::int64_t it = 1; it <= cfg.total_iters; ++it) {
    const auto started = Clock::now();
    if (cursor == order.size()) {
      order.resize(views.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t vi = order[cursor++];
    const TrainView& view = views[vi];

    group_lr(state, ParamGroup::position) = position_lr(cfg, spatial_scale, it);
    const RenderOutput out = render(scene, view.camera, ropt);
    LossReport rep = total_loss(out, view.image, view.priors, view.camera, cfg, it);
    if (!std::isfinite(rep.total)) {
      throw NumericalFailure("non-finite loss at iteration " + std::to_string(it) + " (view " + std::to_string(vi) + ")");
    }
    const SceneGradients grads = render_backward(scene, view.camera, rep.grads, out.cache, ropt);
    stats.accumulate(grads);
    adam_step(scene, state, grads.per_primitive, it);

    TrainLogRow row;
    row.iteration = it;
    row.view = vi;
    row.l_rgb = rep.l_rgb;
    row.l_soft = rep.l_soft;
    row.l_hard = rep.l_hard;
    row.l_sem = rep.l_sem;
    row.l_d = rep.l_d;
    row.l_ng = rep.l_ng;
    row.l_nb = rep.l_nb;
    row.total = rep.total;
    row.guidance_active = rep.guidance_active;
    row.depth_degenerate = rep.depth_degenerate;

    if (densify_due(cfg, it)) {
      densify_and_prune(scene, state, stats, cfg, extent, cfg.seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(it)));
    }
    row.primitives = scene.size();
    result.log.rows.push_back(row);
    if (options.on_iteration) options.on_iteration(row);
    result.log.wall_seconds.push_back(std::chrono::duration<double>(Clock::now() - started).count());

    if (cfg.eval_interval > 0 && options.on_eval && it % cfg.eval_interval == 0) {
      result.log.evals.push_back(options.on_eval(it, scene));
    }
    if (cfg.checkpoint_interval > 0 && options.on_checkpoint && it % cfg.checkpoint_interval == 0) {
      options.on_checkpoint(it, scene, state);
    }
  }
  result.scene = std::move(scene);
  result.state = std::move(state);
  return result;
}

}  // namespace semsplat
