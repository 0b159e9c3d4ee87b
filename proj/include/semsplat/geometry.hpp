// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semsplat/scene.hpp"

namespace semsplat {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

/// Points with optional per-point colors in [0, 1] and class ids. Optional
/// attributes are either empty or index-aligned with `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::vector<int> classes;

  std::size_t size() const { return points.size(); }
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace semsplat
