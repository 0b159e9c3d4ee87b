// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semsplat/image.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

inline constexpr int kTileSize = 16;
inline constexpr double kNearPlane = 0.01;
/// Jacobian evaluation point limit, as a multiple of the half field of view.
inline constexpr double kFrustumClamp = 1.3;
inline constexpr double kCovarianceDilation = 0.3;  // px^2 added to the projected covariance
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;

/// Integer pixel box, inclusive on both ends.
struct Footprint {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct ProjectedGaussian {
  std::uint32_t index = 0;  // primitive id
  Vec2 mean2d;
  Mat2 cov2d;               // includes the dilation term
  Vec3 conic;               // inverse cov2d as (xx, xy, yy)
  double view_depth = 0;
  Vec3 normal_cam;
  Footprint footprint;
  /// Part of the footprint where alpha can reach kMinAlpha; empty when it never does.
  Footprint raster;

  // Cached activations and projection state needed by the backward pass.
  Vec3 t_cam;
  double opacity = 0;
  Vec3 color;
  int normal_axis = 0;
  double normal_sign = 1;
};

Mat3 covariance3d(const ActivatedGaussian& g);

/// Perspective projection with first-order (EWA) covariance mapping. Returns
/// nothing when the primitive lies within the near plane or its 3-sigma box
/// misses the image.
std::optional<ProjectedGaussian> project(const ActivatedGaussian& g, const Camera& camera,
                                         std::uint32_t index = 0);

/// Forward state kept for render_backward: the depth-sorted projected
/// primitives, per-tile lists into them and the number of list entries each
/// pixel consumed before terminating.
struct BlendCache {
  int width = 0, height = 0, class_count = 0;
  std::size_t primitive_count = 0;
  std::uint64_t fingerprint = 0;
  int tiles_x = 0, tiles_y = 0;
  std::vector<ProjectedGaussian> projected;   // sorted by (view_depth, index)
  std::vector<std::uint32_t> tile_offsets;    // tiles_x * tiles_y + 1
  std::vector<std::uint32_t> tile_entries;    // indices into `projected`
  std::vector<std::uint32_t> pixel_consumed;  // per pixel: tile entries traversed
};

struct RenderOutput {
  Image rgb;              // H x W x 3
  Image depth;            // H x W, alpha-blended camera-space z
  Image normal;           // H x W x 3, camera frame, not renormalized
  Image semantic_logits;  // H x W x C
  Image accum_alpha;      // H x W
  BlendCache cache;
};

/// Upstream gradients, one buffer per RenderOutput image. Empty buffers are
/// treated as zero.
struct RenderGradients {
  Image rgb, depth, normal, semantic_logits, accum_alpha;
};

struct SceneGradients {
  std::vector<GaussianPrimitive> per_primitive;
  /// |dL/d mean2d| in normalized device units, zero for primitives not in view.
  std::vector<double> screen_grad_norm;
  std::vector<std::uint8_t> visible;
};

struct RenderOptions {
  int threads = 1;
};

RenderOutput render(const GaussianScene& scene, const Camera& camera, const RenderOptions& options = {});

/// Exact reverse-mode derivative of render() with the depth ordering held
/// fixed. Throws ContractViolation when `cache` was produced for a different
/// scene, camera or class count.
SceneGradients render_backward(const GaussianScene& scene, const Camera& camera, const RenderGradients& grads,
                               const BlendCache& cache, const RenderOptions& options = {});

}  // namespace semsplat
