// SPDX-License-Identifier: Apache-2.0
#include "semsplat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "semsplat/config.hpp"
#include "semsplat/error.hpp"
#include "semsplat/parallel.hpp"

namespace semsplat {
namespace {

/// Written out term by term so every caller rounds identically.
double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

TsdfVolume TsdfVolume::covering(const Vec3& lo, const Vec3& hi, double voxel_size) {
  if (!(voxel_size > 0)) throw InvalidParameter("voxel_size must be > 0");
  TsdfVolume v;
  v.voxel_size = voxel_size;
  v.truncation = kTruncationVoxels * voxel_size;
  const double margin = 2.0 * v.truncation;
  v.origin = lo - Vec3::Constant(margin);
  for (int a = 0; a < 3; ++a) v.dims[a] = int(std::ceil((hi[a] - lo[a] + 2 * margin) / voxel_size)) + 1;
  const std::size_t n = std::size_t(v.dims[0]) * v.dims[1] * v.dims[2];
  v.tsdf.assign(n, 1.0f);
  v.weight.assign(n, 0.0f);
  return v;
}

void tsdf_integrate(TsdfVolume& vol, const Image& depth, const Camera& cam, int threads) {
  if (depth.width != cam.width || depth.height != cam.height || depth.channels != 1) {
    throw ContractViolation("tsdf_integrate: depth map does not match the camera");
  }
  const double tau = vol.truncation;
  parallel_for(std::size_t(vol.dims[2]), threads, [&](std::size_t slab) {
    const int k = int(slab);
    for (int j = 0; j < vol.dims[1]; ++j) {
      for (int i = 0; i < vol.dims[0]; ++i) {
        const Vec3 pc = cam.to_camera(vol.position(i, j, k));
        if (pc.z() <= 0) continue;
        const long u = std::lround(cam.fx * pc.x() / pc.z() + cam.cx);
        const long v = std::lround(cam.fy * pc.y() / pc.z() + cam.cy);
        if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
        const double d = depth.at(int(u), int(v));
        if (!(d > 0) || !std::isfinite(d)) continue;
        const double sdf = d - pc.z();
        if (sdf <= -tau) continue;
        const float obs = float(std::clamp(sdf / tau, -1.0, 1.0));
        const std::size_t idx = vol.index(i, j, k);
        const float w = vol.weight[idx];
        vol.tsdf[idx] = float((double(vol.tsdf[idx]) * w + obs) / (w + 1.0));
        vol.weight[idx] = float(std::min<double>(w + 1.0, kMaxFusionWeight));
      }
    }
  });
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw ContractViolation("sample_surface: empty mesh");
  std::vector<double> areas;
  areas.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    areas.push_back(triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]));
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[pick(rng)];
    const double r1 = std::sqrt(u01(rng)), r2 = u01(rng);
    out.push_back((1 - r1) * mesh.vertices[t[0]] + r1 * (1 - r2) * mesh.vertices[t[1]] +
                  r1 * r2 * mesh.vertices[t[2]]);
  }
  return out;
}

PointGrid::PointGrid(const std::vector<Vec3>& points, double cell_size) : points_(points) {
  if (points.empty()) throw ContractViolation("PointGrid: empty point set");
  Vec3 hi = points.front();
  lo_ = points.front();
  for (const auto& p : points) {
    lo_ = lo_.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 size = (hi - lo_).cwiseMax(1e-9);
  cell_ = cell_size > 0 ? cell_size : std::max(std::cbrt(size.prod() / double(points.size())) * 1.5, 1e-6);
  const double budget = 8.0 * double(points.size()) + 8.0;
  for (;;) {
    double cells = 1;
    for (int a = 0; a < 3; ++a) {
      dims_[a] = long(std::floor(size[a] / cell_)) + 1;
      cells *= double(dims_[a]);
    }
    if (cells <= budget) break;
    cell_ *= 2.0;
  }
  const std::size_t total = std::size_t(dims_[0] * dims_[1] * dims_[2]);
  offsets_.assign(total + 1, 0);
  std::vector<std::size_t> cell_index(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = cell_of(points[i]);
    cell_index[i] = bucket(c[0], c[1], c[2]);
    ++offsets_[cell_index[i] + 1];
  }
  for (std::size_t b = 0; b < total; ++b) offsets_[b + 1] += offsets_[b];
  entries_.resize(points.size());
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) entries_[fill[cell_index[i]]++] = std::uint32_t(i);
}

std::array<long, 3> PointGrid::cell_of(const Vec3& p) const {
  std::array<long, 3> c{};
  for (int a = 0; a < 3; ++a) c[a] = long(std::floor((p[a] - lo_[a]) / cell_));
  return c;
}

std::size_t PointGrid::bucket(long x, long y, long z) const {
  const long cx = std::clamp(x, 0L, dims_[0] - 1), cy = std::clamp(y, 0L, dims_[1] - 1),
             cz = std::clamp(z, 0L, dims_[2] - 1);
  return std::size_t((cz * dims_[1] + cy) * dims_[0] + cx);
}

namespace {

/// Calls fn(bucket) for every in-grid cell at Chebyshev index distance exactly r from `c`.
template <typename Fn>
void visit_ring(const std::array<long, 3>& c, long r, const std::array<long, 3>& dims, Fn&& fn) {
  const auto lo = [&](int a) { return std::max(c[a] - r, 0L); };
  const auto hi = [&](int a) { return std::min(c[a] + r, dims[a] - 1); };
  const auto cell = [&](long x, long y, long z) { return std::size_t((z * dims[1] + y) * dims[0] + x); };
  for (long z = lo(2); z <= hi(2); ++z) {
    for (long y = lo(1); y <= hi(1); ++y) {
      if (std::abs(z - c[2]) == r || std::abs(y - c[1]) == r) {
        for (long x = lo(0); x <= hi(0); ++x) fn(cell(x, y, z));
      } else {
        if (c[0] - r >= 0 && c[0] - r < dims[0]) fn(cell(c[0] - r, y, z));
        if (c[0] + r >= 0 && c[0] + r < dims[0]) fn(cell(c[0] + r, y, z));
      }
    }
  }
}

long max_ring(const std::array<long, 3>& c, const std::array<long, 3>& dims) {
  long m = 0;
  for (int a = 0; a < 3; ++a) m = std::max({m, std::abs(c[a]), std::abs(dims[a] - 1 - c[a])});
  return m;
}

}  // namespace

PointGrid::Hit PointGrid::nearest(const Vec3& q) const {
  const auto c = cell_of(q);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  const long last = max_ring(c, dims_);
  for (long r = 0; r <= last; ++r) {
    visit_ring(c, r, dims_, [&](std::size_t b) {
      for (std::uint32_t e = offsets_[b]; e < offsets_[b + 1]; ++e) {
        const std::uint32_t i = entries_[e];
        const double d2 = squared_distance(points_[i], q);
        if (d2 < best || (d2 == best && i < best_index)) {
          best = d2;
          best_index = i;
        }
      }
    });
    const double reach = (double(r) - 0.01) * cell_;  // slack for cell assignment rounding
    if (r > 0 && best <= reach * reach) break;
  }
  return {std::sqrt(best), best_index};
}

std::vector<double> PointGrid::k_nearest(const Vec3& q, std::size_t k, std::size_t skip) const {
  std::vector<double> best;  // squared, ascending, at most k
  if (k == 0) return best;
  const auto c = cell_of(q);
  const long last = max_ring(c, dims_);
  for (long r = 0; r <= last; ++r) {
    visit_ring(c, r, dims_, [&](std::size_t b) {
      for (std::uint32_t e = offsets_[b]; e < offsets_[b + 1]; ++e) {
        if (entries_[e] == skip) continue;
        const double d2 = squared_distance(points_[entries_[e]], q);
        if (best.size() == k && d2 >= best.back()) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
        if (best.size() > k) best.pop_back();
      }
    });
    const double reach = (double(r) - 0.01) * cell_;  // slack for cell assignment rounding
    if (r > 0 && best.size() == k && best.back() <= reach * reach) break;
  }
  for (double& d : best) d = std::sqrt(d);
  return best;
}

std::vector<double> mean_knn_distance(const std::vector<Vec3>& points, std::size_t k, int threads) {
  std::vector<double> out(points.size(), 0.0);
  if (points.size() < 2) return out;
  const PointGrid grid(points);
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const auto d = grid.k_nearest(points[i], k, i);
    double s = 0;
    for (double v : d) s += v;
    out[i] = d.empty() ? 0.0 : s / double(d.size());
  });
  return out;
}

std::string GeometryReport::to_text() const {
  std::ostringstream os;
  os << "accuracy = " << format_exact(accuracy) << "\ncompleteness = " << format_exact(completeness)
     << "\nprecision = " << format_exact(precision) << "\nrecall = " << format_exact(recall)
     << "\nf_score = " << format_exact(f_score) << "\nthreshold = " << format_exact(threshold) << '\n';
  return os.str();
}

std::string GeometryReport::csv_header() { return "accuracy,completeness,precision,recall,f_score,threshold"; }

std::string GeometryReport::csv_row() const {
  return format_exact(accuracy) + "," + format_exact(completeness) + "," + format_exact(precision) + "," +
         format_exact(recall) + "," + format_exact(f_score) + "," + format_exact(threshold);
}

GeometryReport geometry_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold,
                                int threads) {
  if (pred.empty() || gt.empty()) throw ContractViolation("geometry_metrics: empty point set");
  const auto directed = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to, double& mean, double& frac) {
    const PointGrid grid(to);
    std::vector<double> dist(from.size());
    parallel_for(from.size(), threads, [&](std::size_t i) { dist[i] = grid.nearest(from[i]).distance; });
    double sum = 0;
    std::size_t within = 0;
    for (double d : dist) {
      sum += d;
      within += d < threshold;
    }
    mean = sum / double(from.size());
    frac = double(within) / double(from.size());
  };
  GeometryReport r;
  r.threshold = threshold;
  directed(pred, gt, r.accuracy, r.precision);
  directed(gt, pred, r.completeness, r.recall);
  r.f_score = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ContractViolation("psnr: shape mismatch");
  if (a.data.empty()) return kPsnrSentinel;
  double se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  const double mse = se / double(a.data.size());
  if (mse == 0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, 10.0 * std::log10(1.0 / mse));
}

std::vector<Vec3> visible_points(const std::vector<Vec3>& points, const std::vector<Camera>& cameras,
                                 const std::vector<Image>& depths, double tolerance) {
  if (cameras.size() != depths.size()) throw ContractViolation("visible_points: one depth map per camera");
  std::vector<Vec3> out;
  for (const auto& p : points) {
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      const Camera& cam = cameras[c];
      const Vec3 pc = cam.to_camera(p);
      if (pc.z() <= 0) continue;
      const long u = std::lround(cam.fx * pc.x() / pc.z() + cam.cx);
      const long v = std::lround(cam.fy * pc.y() / pc.z() + cam.cy);
      if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
      const double d = depths[c].at(int(u), int(v));
      if (d > 0 && std::abs(d - pc.z()) < tolerance) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

}  // namespace semsplat
