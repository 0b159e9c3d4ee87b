// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace semsplat {

/// Every loss weight, learning rate and schedule boundary of a training run.
/// Defaults reproduce the reference hyperparameters; learning rates and
/// density-control thresholds follow common splatting practice.
struct TrainConfig {
  // Loss weights.
  double lambda_sem = 1.0;
  double lambda_guide = 1.0;
  double lambda_soft = 1.0;
  double lambda_hard = 0.1;
  double lambda_ssim = 0.2;
  double omega_d = 0.5;
  double omega_ng = 0.05;
  double omega_nb = 0.01;
  double alpha_sigmoid_scale = 100.0;

  // Schedule.
  std::int64_t total_iters = 7000;
  std::int64_t guidance_start_iter = 1500;

  // Learning rates. Position rates are multiplied by spatial_lr_scale; a
  // non-positive scale means "derive from the camera extent".
  double lr_position_init = 1.6e-4;
  double lr_position_final = 1.6e-6;
  double lr_rotation = 1e-3;
  double lr_log_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_semantic = 2.5e-3;
  double spatial_lr_scale = 0.0;

  // Density control.
  std::int64_t densify_from_iter = 500;
  std::int64_t densify_until_iter = 5000;
  std::int64_t densify_interval = 300;
  double densify_grad_threshold = 2e-4;
  double percent_dense = 0.01;
  double prune_opacity = 0.005;
  std::int64_t min_primitives = 16;
  std::int64_t max_primitives = 200000;

  // Priors.
  std::int64_t edge_mask_dilation = 2;
  /// 0: boundary labels from the teacher logits (default); 1: from rendered logits.
  std::int64_t boundary_labels_from_render = 0;

  std::int64_t checkpoint_interval = 1000;
  std::int64_t eval_interval = 0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on negative weights or an inconsistent schedule.
  void validate() const;

  /// Overlays `key = value` pairs. Unknown keys or unparsable values throw ConfigError.
  void apply(const std::map<std::string, std::string>& values);
  /// Every key with its current value, formatted to round-trip exactly.
  std::map<std::string, std::string> to_map() const;
};

/// Parses a flat `key = value` file ('#' starts a comment). Duplicate keys throw ConfigError.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);
void write_key_value_file(const std::filesystem::path& path, const std::map<std::string, std::string>& values);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_exact(double v);

}  // namespace semsplat
