// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "semsplat/geometry.hpp"
#include "semsplat/image.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

inline constexpr double kDefaultVoxelSize = 0.02;
inline constexpr double kTruncationVoxels = 4.0;
inline constexpr double kMaxFusionWeight = 64.0;
inline constexpr double kDefaultFScoreThreshold = 0.05;
inline constexpr double kPsnrSentinel = 99.0;

/// Voxel grid of truncated signed distances, in units of the truncation
/// distance. Voxel (i, j, k) sits at origin + voxel_size * (i, j, k).
struct TsdfVolume {
  Vec3 origin = Vec3::Zero();
  double voxel_size = kDefaultVoxelSize;
  double truncation = kTruncationVoxels * kDefaultVoxelSize;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<float> tsdf;
  std::vector<float> weight;

  /// Grid covering [lo, hi] plus a margin of two truncation distances.
  static TsdfVolume covering(const Vec3& lo, const Vec3& hi, double voxel_size = kDefaultVoxelSize);

  std::size_t index(int i, int j, int k) const { return (std::size_t(k) * dims[1] + j) * dims[0] + i; }
  Vec3 position(int i, int j, int k) const { return origin + voxel_size * Vec3(i, j, k); }
  std::size_t voxel_count() const { return tsdf.size(); }
};

/// Fuses one depth map (0 = no measurement) by nearest-pixel projection.
/// Parallel over z slabs; results do not depend on `threads`.
void tsdf_integrate(TsdfVolume& volume, const Image& depth, const Camera& camera, int threads = 1);

/// Zero-crossing surface of the observed part of the volume. Cells with an
/// unobserved corner emit nothing; triangles face the positive (free) side.
TriangleMesh marching_cubes(const TsdfVolume& volume, double iso = 0.0);

/// Area-weighted uniform surface samples. Throws ContractViolation on an empty mesh.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Exact nearest-neighbor queries over a uniform hash grid.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& points, double cell_size = 0.0);

  struct Hit {
    double distance = 0;
    std::size_t index = 0;
  };
  Hit nearest(const Vec3& q) const;
  /// The k nearest distances in ascending order (fewer if the set is
  /// smaller), ignoring the point with index `skip`.
  std::vector<double> k_nearest(const Vec3& q, std::size_t k, std::size_t skip = SIZE_MAX) const;

 private:
  std::array<long, 3> cell_of(const Vec3& p) const;
  std::size_t bucket(long x, long y, long z) const;

  const std::vector<Vec3>& points_;
  double cell_ = 1.0;
  Vec3 lo_ = Vec3::Zero();
  std::array<long, 3> dims_{1, 1, 1};
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> entries_;
};

/// Mean distance from each point to its three nearest other points.
std::vector<double> mean_knn_distance(const std::vector<Vec3>& points, std::size_t k = 3, int threads = 1);

struct GeometryReport {
  double accuracy = 0, completeness = 0, precision = 0, recall = 0, f_score = 0;
  double threshold = kDefaultFScoreThreshold;

  std::string to_text() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Accuracy/completeness are mean nearest-neighbor distances pred->gt and
/// gt->pred; precision/recall count distances strictly below `threshold`.
GeometryReport geometry_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                double threshold = kDefaultFScoreThreshold, int threads = 1);

/// 10 log10(1 / MSE); identical images report kPsnrSentinel.
double psnr(const Image& reference, const Image& rendered);

/// Keeps points seen by at least one camera whose depth map agrees within `tolerance`.
std::vector<Vec3> visible_points(const std::vector<Vec3>& points, const std::vector<Camera>& cameras,
                                 const std::vector<Image>& depths, double tolerance);

}  // namespace semsplat
