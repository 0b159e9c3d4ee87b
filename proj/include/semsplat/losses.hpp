// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "semsplat/config.hpp"
#include "semsplat/image.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

/// Unordered 4-neighbor pixel pair, stored as linear indices with first < second.
using PixelPair = std::pair<std::uint32_t, std::uint32_t>;

/// Per-view supervision derived from teacher models (or their synthetic stand-ins).
struct PriorBundle {
  Image teacher_logits;  // H x W x C
  Image prior_depth;     // H x W, affine-ambiguous units
  Mask edge_mask;        // true = unreliable for depth supervision
  std::vector<PixelPair> boundary_pairs;
  LabelMap teacher_labels;

  /// Fills teacher_labels, edge_mask and boundary_pairs from teacher_logits.
  static PriorBundle derive(Image teacher_logits, Image prior_depth, int edge_dilation = 2);
};

/// A scalar loss and its gradient with respect to one buffer.
struct LossValue {
  double value = 0.0;
  Image grad;
};

Image softmax_channels(const Image& logits);

/// Mean over pixels of KL(softmax(teacher) || softmax(student)); gradient w.r.t. student.
LossValue soft_distill_loss(const Image& teacher_logits, const Image& student_logits);

/// Mean over pixels of -log softmax(student)[label].
LossValue hard_distill_loss(const LabelMap& labels, const Image& student_logits);

/// Per-pixel argmax over channels (lowest index on ties).
LabelMap argmax_labels(const Image& logits);

/// Pixels within Chebyshev distance `dilation` of a pixel that has a
/// differently labelled 4-neighbor.
Mask semantic_edge_mask(const LabelMap& labels, int dilation = 2);

struct PearsonResult {
  double rho = 0.0;
  bool degenerate = false;  // a variance fell below 1e-12; rho reported as 0
};

/// Centered correlation over pixels where `mask` is false (empty mask = all
/// pixels). Throws DegenerateMask with fewer than two usable pixels.
PearsonResult pearson(const Image& x, const Image& y, const Mask& mask = {});

struct DepthLoss {
  double value = 0.0;
  bool degenerate = false;
  Image grad;  // w.r.t. rendered depth; exactly zero on masked pixels
};

/// 1 - rho(rendered, prior) over the unmasked pixels.
DepthLoss depth_loss(const Image& rendered_depth, const Image& prior_depth, const Mask& mask);

struct DepthNormals {
  Image normals;  // H x W x 3 unit vectors, camera frame; zero where invalid
  Mask valid;
};

/// Normals from central-difference tangents of the back-projected depth map.
/// Border pixels fall back to one-sided differences; pixels touching a
/// zero-depth sample are invalid.
DepthNormals normals_from_depth(const Image& depth, const Camera& camera);

/// Chains dL/dN_d back to dL/dD for the map produced by normals_from_depth.
Image normals_from_depth_backward(const Image& depth, const Camera& camera, const DepthNormals& normals,
                                  const Image& grad_normals);

struct NormalLoss {
  double value = 0.0;
  Image grad_rendered;  // w.r.t. the un-normalized rendered normals
  Image grad_depth_normals;
};

/// Mean over valid pixels of 1 - normalize(N_r) . N_d.
NormalLoss geometric_normal_loss(const Image& rendered_normals, const Image& depth_normals, const Mask& valid);

/// Label-discontinuous 4-neighbor pairs, each listed once (right then down neighbor, row-major).
std::vector<PixelPair> boundary_pairs(const LabelMap& labels);

/// Mean over pairs of 1 - sigmoid(alpha * (1 - n_u . n_v)) on renormalized
/// rendered normals. Empty pair set gives zero loss and zero gradient.
LossValue boundary_normal_loss(const Image& rendered_normals, const std::vector<PixelPair>& pairs, double alpha);

/// Mean single-scale SSIM (11x11 Gaussian window, sigma 1.5, symmetric border)
/// averaged over channels; gradient w.r.t. `a`.
LossValue ssim(const Image& a, const Image& b);

/// (1 - lambda_ssim) * mean|gt - rendered| + lambda_ssim * (1 - SSIM(rendered, gt)).
LossValue photometric_loss(const Image& ground_truth, const Image& rendered, double lambda_ssim);

struct LossReport {
  double l_rgb = 0, l_soft = 0, l_hard = 0, l_sem = 0, l_d = 0, l_ng = 0, l_nb = 0, l_guide = 0, total = 0;
  bool guidance_active = false;
  bool depth_degenerate = false;
  RenderGradients grads;
};

/// Composes every loss term for one view. Terms whose weight is zero are
/// skipped and reported as zero; guidance terms before guidance_start_iter are
/// evaluated and reported but carry no weight in `total` or in the gradients.
LossReport total_loss(const RenderOutput& render, const Image& ground_truth, const PriorBundle& priors,
                      const Camera& camera, const TrainConfig& config, std::int64_t iteration);

}  // namespace semsplat
