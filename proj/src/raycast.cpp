// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "semsplat/error.hpp"
#include "semsplat/parallel.hpp"
#include "semsplat/priors.hpp"

namespace semsplat {
namespace {
// Shared quad diagonals must not leak rays through rounding.
constexpr double kEdgeSlack = 1e-12;
}  // namespace

std::optional<RayHit> intersect(const std::vector<Triangle>& triangles, const Vec3& origin, const Vec3& dir,
                                double t_min) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const Triangle& tri = triangles[i];
    const Vec3 e1 = tri.b - tri.a, e2 = tri.c - tri.a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-15) continue;
    const double inv = 1.0 / det;
    const Vec3 s = origin - tri.a;
    const double u = s.dot(p) * inv;
    if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < -kEdgeSlack || u + v > 1.0 + kEdgeSlack) continue;
    const double t = e2.dot(q) * inv;
    if (t <= t_min) continue;
    if (!best || t < best->t) best = RayHit{t, int(i)};
  }
  return best;
}

Vec3 shade(const SyntheticScene& scene, const Triangle& tri, const Vec3& point) {
  const Vec3 l = (scene.light - point).normalized();
  const double lambert = std::max(0.0, tri.normal().dot(l));
  return (tri.albedo * (lambert + 0.2)).cwiseMin(1.0).cwiseMax(0.0);
}

ViewSupervision raycast_view(const SyntheticScene& scene, const Camera& cam, int threads) {
  cam.validate(1e-6);
  const int w = cam.width, h = cam.height;
  ViewSupervision out{cam, Image(w, h, 3), Image(w, h, 1), LabelMap(w, h), Image(w, h, 3)};
  const Vec3 origin = cam.center();
  const Mat3 cam_to_world = cam.rotation.transpose();
  parallel_for(std::size_t(h), threads, [&](std::size_t row) {
    const int y = int(row);
    for (int x = 0; x < w; ++x) {
      const Vec3 dir = cam_to_world * cam.pixel_ray(x, y);
      const auto hit = intersect(scene.triangles, origin, dir);
      if (!hit) {
        throw RenderError("oracle ray through pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                          ") escaped the scene");
      }
      const Triangle& tri = scene.triangles[std::size_t(hit->triangle)];
      const Vec3 point = origin + hit->t * dir;
      // Ray z component is 1 in camera frame, so t is the camera-space depth.
      out.depth.at(x, y) = to_f32_exact(hit->t);
      out.labels.at(x, y) = tri.class_id;
      Vec3 n = tri.normal();
      if (n.dot(dir) > 0) n = -n;
      const Vec3 n_cam = cam.rotation * n;
      const Vec3 color = shade(scene, tri, point);
      for (int k = 0; k < 3; ++k) {
        out.normals.at(x, y, k) = n_cam[k];
        out.image.at(x, y, k) = std::lround(color[k] * 255.0) / 255.0;
      }
    }
  });
  return out;
}

}  // namespace semsplat
