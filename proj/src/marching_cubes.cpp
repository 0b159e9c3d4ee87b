// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <unordered_map>

#include "semsplat/log.hpp"
#include "semsplat/mesh.hpp"

namespace semsplat {
namespace {

#include "marching_cubes_tables.inc"

// Corner c of a cell sits at (i, j, k) + kCorner[c].
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// Edge e joins corners kEdgeCorners[e][0] and [1]; the first is the lower end
// along the edge axis, so every edge has one canonical owner voxel.
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                     {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
constexpr int kEdgeAxis[12] = {0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};

}  // namespace

TriangleMesh marching_cubes(const TsdfVolume& vol, double iso) {
  TriangleMesh mesh;
  const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
  bool observed = false;
  for (float w : vol.weight) {
    if (w > 0) {
      observed = true;
      break;
    }
  }
  if (!observed) {
    warn("marching_cubes: volume has no observed voxels; returning an empty mesh");
    return mesh;
  }
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
  const auto vertex_on = [&](int i, int j, int k, int edge) {
    const int* a = kCorner[kEdgeCorners[edge][0]];
    const int* b = kCorner[kEdgeCorners[edge][1]];
    const int ai = i + a[0], aj = j + a[1], ak = k + a[2];
    const std::uint64_t key = std::uint64_t(vol.index(ai, aj, ak)) * 3 + std::uint64_t(kEdgeAxis[edge]);
    if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
    const double va = vol.tsdf[vol.index(ai, aj, ak)];
    const double vb = vol.tsdf[vol.index(i + b[0], j + b[1], k + b[2])];
    const double t = va == vb ? 0.5 : (iso - va) / (vb - va);
    const Vec3 pa = vol.position(ai, aj, ak);
    const Vec3 pb = vol.position(i + b[0], j + b[1], k + b[2]);
    const auto id = std::uint32_t(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        int cube = 0;
        bool complete = true;
        for (int c = 0; c < 8 && complete; ++c) {
          const std::size_t idx = vol.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          complete = vol.weight[idx] > 0;
          if (vol.tsdf[idx] < iso) cube |= 1 << c;
        }
        if (!complete || kEdgeTable[cube] == 0) continue;
        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          // Table winding faces the inside; reversed here so normals point to the free side.
          const std::uint32_t v0 = vertex_on(i, j, k, kTriTable[cube][t]);
          const std::uint32_t v1 = vertex_on(i, j, k, kTriTable[cube][t + 2]);
          const std::uint32_t v2 = vertex_on(i, j, k, kTriTable[cube][t + 1]);
          if (triangle_area(mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]) < 1e-12) continue;
          mesh.triangles.push_back({v0, v1, v2});
        }
      }
    }
  }

  // Drop vertices no surviving triangle references.
  std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
  std::vector<Vec3> kept;
  for (auto& tri : mesh.triangles) {
    for (auto& v : tri) {
      if (remap[v] == UINT32_MAX) {
        remap[v] = std::uint32_t(kept.size());
        kept.push_back(mesh.vertices[v]);
      }
      v = remap[v];
    }
  }
  mesh.vertices = std::move(kept);
  return mesh;
}

}  // namespace semsplat
