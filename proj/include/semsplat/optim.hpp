// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "semsplat/config.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-15;

/// Adaptive-moment state, index-aligned with the scene's primitive list.
struct OptimizerState {
  std::vector<GaussianPrimitive> first;
  std::vector<GaussianPrimitive> second;
  std::int64_t step = 0;
  std::array<double, kParamGroups.size()> lr{};  // indexed by ParamGroup

  /// Zero moments for `count` primitives with `class_count` semantic channels.
  void reset(std::size_t count, int class_count);
  /// Appends zero moments for one new primitive.
  void append_zero(int class_count);
  /// Throws ContractViolation unless moments match the scene's primitives.
  void audit(const GaussianScene& scene) const;
};

double& group_lr(OptimizerState& s, ParamGroup g);
double group_lr(const OptimizerState& s, ParamGroup g);

/// Radius of the training cameras' centers around their mean, padded by 10%.
/// Returns 1 for a single camera.
double camera_extent(const std::vector<Camera>& cameras);

/// Position learning rate at `iteration`: log-linear from init to final over
/// total_iters, multiplied by `spatial_scale`.
double position_lr(const TrainConfig& config, double spatial_scale, std::int64_t iteration);

OptimizerState make_optimizer_state(const GaussianScene& scene, const TrainConfig& config, double spatial_scale);

/// One bias-corrected Adam update over every parameter group, then quaternion
/// renormalization. Throws NumericalFailure naming the iteration and group when
/// a gradient is non-finite.
void adam_step(GaussianScene& scene, OptimizerState& state, const std::vector<GaussianPrimitive>& gradients,
               std::int64_t iteration = 0);

/// Screen-space position-gradient statistics accumulated between density
/// control events.
struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<std::uint32_t> count;

  void reset(std::size_t n);
  void accumulate(const SceneGradients& grads);
};

struct DensifyResult {
  std::size_t cloned = 0, split = 0, pruned = 0;
};

bool densify_due(const TrainConfig& config, std::int64_t iteration);

/// Clone small high-gradient primitives, split large ones in two (scale / 1.6,
/// positions sampled from the parent), prune low-opacity ones while keeping at
/// least min_primitives and at most max_primitives. Moments of new primitives
/// start at zero; `stats` is reset to the new size.
DensifyResult densify_and_prune(GaussianScene& scene, OptimizerState& state, DensifyStats& stats,
                                const TrainConfig& config, double extent, std::uint64_t seed);

struct TrainView {
  Camera camera;
  Image image;
  PriorBundle priors;
};

struct TrainLogRow {
  std::int64_t iteration = 0;
  std::size_t view = 0;
  double l_rgb = 0, l_soft = 0, l_hard = 0, l_sem = 0, l_d = 0, l_ng = 0, l_nb = 0, total = 0;
  bool guidance_active = false;
  bool depth_degenerate = false;
  std::size_t primitives = 0;
};

struct EvalRow {
  std::int64_t iteration = 0;
  double psnr = 0, ssim = 0;
};

/// Append-only record of a run. Rows are deterministic; wall-clock timings
/// live in their own vector so the CSV of rows stays byte-reproducible.
struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::vector<EvalRow> evals;
  std::vector<double> wall_seconds;

  void write_csv(const std::filesystem::path& path) const;
  void write_eval_csv(const std::filesystem::path& path) const;
  void write_timing_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
  int threads = 1;
  /// Scene extent used for position learning rates and the clone/split
  /// boundary; <= 0 derives it from the training cameras.
  double extent = 0.0;
  /// Called after every checkpoint_interval iterations.
  std::function<void(std::int64_t, const GaussianScene&, const OptimizerState&)> on_checkpoint;
  /// Called after every iteration with its log row.
  std::function<void(const TrainLogRow&)> on_iteration;
  /// Called every eval_interval iterations; returns held-out (PSNR, SSIM).
  std::function<EvalRow(std::int64_t, const GaussianScene&)> on_eval;
};

struct TrainResult {
  GaussianScene scene;
  OptimizerState state;
  TrainLog log;
};

/// Runs config.total_iters iterations (numbered from 1), visiting views in a
/// seeded shuffle per epoch. Throws NumericalFailure on a non-finite loss.
TrainResult train(GaussianScene scene, const std::vector<TrainView>& views, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace semsplat
