// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "semsplat/geometry.hpp"
#include "semsplat/image.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

inline constexpr int kFloorClass = 0;
inline constexpr int kCeilingClass = 1;
inline constexpr int kFirstWallClass = 2;  // four walls: 2..5
inline constexpr int kFirstBoxClass = 6;

struct Triangle {
  Vec3 a, b, c;
  int class_id = 0;
  Vec3 albedo = Vec3::Constant(0.5);

  Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
};

struct Box {
  Vec3 lo, hi;
  int class_id = 0;
};

/// Axis-aligned room (z up) with floating boxes. Shell triangles face the
/// interior, box triangles face outward, so every normal points into free space.
struct SyntheticScene {
  std::vector<Triangle> triangles;
  std::vector<Box> boxes;
  Vec3 room_lo = Vec3::Zero();
  Vec3 room_hi = Vec3(4.0, 4.0, 2.6);
  Vec3 light = Vec3(2.0, 2.0, 2.4);
  int class_count = 0;

  double extent() const { return (room_hi - room_lo).norm(); }
  TriangleMesh mesh() const;
};

/// Deterministic in `seed`. Boxes float at least 0.3 above the floor and away
/// from the walls and never overlap. Throws InvalidParameter when
/// class_count < 6 + box_count.
SyntheticScene generate_room(std::uint64_t seed, int box_count, int class_count);

struct RayHit {
  double t = 0;  // ray parameter
  int triangle = -1;
};

/// Nearest hit with t > t_min (Moller-Trumbore, two-sided).
std::optional<RayHit> intersect(const std::vector<Triangle>& triangles, const Vec3& origin, const Vec3& direction,
                                double t_min = 1e-9);

struct ViewSupervision {
  Camera camera;
  Image image;    // H x W x 3 Lambertian shading
  Image depth;    // camera-space z of the nearest hit
  LabelMap labels;
  Image normals;  // camera frame, unit, facing the camera
};

/// Oracle renderer: one ray per pixel center. Throws RenderError if a ray escapes.
ViewSupervision raycast_view(const SyntheticScene& scene, const Camera& camera, int threads = 1);

Vec3 shade(const SyntheticScene& scene, const Triangle& tri, const Vec3& point);

/// One-hot logits at `peak`, then a normalized box blur of radius `softness`.
Image make_teacher_logits(const LabelMap& labels, int class_count, double peak = 8.0, int softness = 1);

struct PerturbOptions {
  bool noise = true;
  bool boundary_band = true;
  int band_dilation = 2;  // band = label-edge pixels dilated by this many pixels
  double band_noise_factor = 10.0;
};

/// Affine-ambiguous monocular-style depth: a * exact + b + noise with
/// a in [0.5, 2], b in [-0.5, 0.5], sigma = 0.01 * a * median(exact), and
/// band_noise_factor times stronger noise near label boundaries.
Image perturb_depth(const Image& exact, const LabelMap& labels, std::uint64_t seed, const PerturbOptions& opts = {});

/// Area-weighted surface samples jittered by isotropic Gaussian noise. A
/// negative sigma means 0.01 * extent.
PointCloud init_point_cloud(const SyntheticScene& scene, std::size_t n, double noise_sigma, std::uint64_t seed);

/// `count` cameras on a ring around the room center looking across the room.
std::vector<Camera> default_camera_rig(const SyntheticScene& scene, int count, int width, int height);

struct DatasetView {
  int index = 0;
  Camera camera;
  Image image;
  PriorBundle priors;
};

/// Writes view_%03d.{png,pfm,semf,cam} plus the exact depth as view_%03d.gt.pfm.
void write_view(const std::filesystem::path& dir, int index, const ViewSupervision& exact, const Image& teacher_logits,
                const Image& prior_depth);

/// Loads every view_%03d.cam in `dir` with its image, depth and logits and
/// derives the edge mask and boundary pairs. `class_count` <= 0 accepts the
/// first view's channel count. Throws DataError naming the view and field.
std::vector<DatasetView> load_prior_bundle(const std::filesystem::path& dir, int class_count = 0,
                                           int edge_dilation = 2);

}  // namespace semsplat
