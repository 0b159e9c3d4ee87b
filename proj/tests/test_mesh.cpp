// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "semsplat/error.hpp"
#include "semsplat/mesh.hpp"
#include "support.hpp"

using namespace semsplat;

namespace {

TsdfVolume sphere_volume(double radius, double voxel) {
  TsdfVolume v = TsdfVolume::covering(Vec3::Constant(-radius), Vec3::Constant(radius), voxel);
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        const double sdf = v.position(i, j, k).norm() - radius;
        v.tsdf[v.index(i, j, k)] = float(std::clamp(sdf / v.truncation, -1.0, 1.0));
        v.weight[v.index(i, j, k)] = 1.0f;
      }
  return v;
}

}  // namespace

TEST_CASE("tsdf covering grid") {
  const TsdfVolume v = TsdfVolume::covering(Vec3(0, 0, 0), Vec3(1, 0.5, 0.2), 0.1);
  CHECK(v.truncation == doctest::Approx(0.4));
  CHECK(v.origin.x() <= -0.8 + 1e-12);
  CHECK(v.position(v.dims[0] - 1, 0, 0).x() >= 1.8 - 1e-12);
  CHECK(v.voxel_count() == std::size_t(v.dims[0]) * v.dims[1] * v.dims[2]);
  for (float w : v.weight) CHECK(w == 0.0f);
}

TEST_CASE("tsdf integration of a fronto-parallel plane") {
  const Camera cam = test::frontal_camera(64, 64, 40);
  TsdfVolume v = TsdfVolume::covering(Vec3(-0.2, -0.2, 1.6), Vec3(0.2, 0.2, 2.4), 0.05);
  tsdf_integrate(v, Image(64, 64, 1, 2.0), cam);
  int checked = 0;
  for (int k = 0; k < v.dims[2]; ++k) {
    const Vec3 p = v.position(v.dims[0] / 2, v.dims[1] / 2, k);
    const float w = v.weight[v.index(v.dims[0] / 2, v.dims[1] / 2, k)];
    const double sdf = 2.0 - p.z();
    if (sdf <= -v.truncation) {
      CHECK(w == 0.0f);
      continue;
    }
    CHECK(w == 1.0f);
    CHECK(v.tsdf[v.index(v.dims[0] / 2, v.dims[1] / 2, k)] ==
          doctest::Approx(std::clamp(sdf / v.truncation, -1.0, 1.0)).epsilon(1e-5));
    ++checked;
  }
  CHECK(checked > 5);
  TsdfVolume twice = v;
  tsdf_integrate(twice, Image(64, 64, 1, 2.0), cam, 3);
  CHECK(twice.tsdf == v.tsdf);
  CHECK_THROWS_AS(tsdf_integrate(v, Image(8, 8, 1, 2.0), cam), ContractViolation);
}

TEST_CASE("marching cubes recovers a sphere with outward triangles") {
  const double r = 0.5;
  const TriangleMesh m = marching_cubes(sphere_volume(r, 0.05));
  REQUIRE_FALSE(m.empty());
  for (const Vec3& p : m.vertices) CHECK(std::abs(p.norm() - r) < 0.01);
  double area = 0;
  for (const auto& t : m.triangles) {
    const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
    const Vec3 n = (b - a).cross(c - a);
    if (n.norm() < 1e-14) continue;
    CHECK(n.dot((a + b + c) / 3.0) > 0);
    area += triangle_area(a, b, c);
  }
  CHECK(area == doctest::Approx(4 * M_PI * r * r).epsilon(0.03));
}

TEST_CASE("marching cubes skips unobserved cells") {
  TsdfVolume v = sphere_volume(0.5, 0.05);
  for (float& w : v.weight) w = 0.0f;
  CHECK(marching_cubes(v).empty());
}

TEST_CASE("surface sampling") {
  TriangleMesh plane;
  plane.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(1, 1, 1), Vec3(0, 1, 1)};
  plane.triangles = {{0, 1, 2}, {0, 2, 3}};
  const auto s = sample_surface(plane, 2000, 1);
  CHECK(s.size() == 2000);
  double mx = 0;
  for (const Vec3& p : s) {
    CHECK(p.z() == doctest::Approx(1.0));
    mx += p.x();
  }
  CHECK(mx / 2000 == doctest::Approx(0.5).epsilon(0.05));
  CHECK(sample_surface(plane, 10, 1) == sample_surface(plane, 10, 1));
  CHECK_THROWS_AS(sample_surface(TriangleMesh{}, 10, 0), ContractViolation);
}

TEST_CASE("point grid nearest neighbors agree with brute force") {
  std::mt19937_64 rng(4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(test::uniform(rng, 0, 1), test::uniform(rng, 0, 2), test::uniform(rng, -1, 0));
  const PointGrid grid(pts);
  for (int q = 0; q < 50; ++q) {
    const Vec3 x(test::uniform(rng, -0.5, 1.5), test::uniform(rng, -0.5, 2.5), test::uniform(rng, -1.5, 0.5));
    double best = 1e300;
    for (const Vec3& p : pts) best = std::min(best, (p - x).norm());
    CHECK(grid.nearest(x).distance == doctest::Approx(best));
  }
  const auto knn = mean_knn_distance({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0), Vec3(6, 0, 0)});
  CHECK(knn[0] == doctest::Approx((1 + 3 + 6) / 3.0));
  CHECK(knn[1] == doctest::Approx((1 + 2 + 5) / 3.0));
}

TEST_CASE("geometry metric examples") {
  const std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const GeometryReport same = geometry_metrics(a, a);
  CHECK(same.accuracy == 0.0);
  CHECK(same.f_score == 1.0);
  const GeometryReport shifted = geometry_metrics({Vec3(0, 0, 0.1), Vec3(1, 0, 0.1)}, a, 0.05);
  CHECK(shifted.accuracy == doctest::Approx(0.1));
  CHECK(shifted.completeness == doctest::Approx(0.1));
  CHECK(shifted.f_score == 0.0);
  const GeometryReport half = geometry_metrics({Vec3(0, 0, 0), Vec3(5, 0, 0)}, a, 0.05);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f_score == 0.5);
  CHECK(GeometryReport::csv_header().find("f_score") != std::string::npos);
}

TEST_CASE("geometry metrics match the brute-force oracle across thread counts") {
  std::mt19937_64 rng(8);
  std::vector<Vec3> p, g;
  for (int i = 0; i < 200; ++i) p.emplace_back(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
  for (int i = 0; i < 150; ++i) g.emplace_back(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
  const GeometryReport o = test::brute_force_metrics(p, g, 0.1);
  for (int threads : {1, 4}) {
    const GeometryReport r = geometry_metrics(p, g, 0.1, threads);
    CHECK(r.accuracy == o.accuracy);
    CHECK(r.completeness == o.completeness);
    CHECK(r.f_score == o.f_score);
  }
}

TEST_CASE("psnr examples") {
  const Image a(4, 4, 3, 0.5);
  CHECK(psnr(a, a) == kPsnrSentinel);
  CHECK(psnr(a, Image(4, 4, 3, 0.6)) == doctest::Approx(20.0));
  CHECK(psnr(a, Image(4, 4, 3, 0.51)) == doctest::Approx(40.0));
  CHECK_THROWS_AS(psnr(a, Image(4, 4, 1)), ContractViolation);
}

TEST_CASE("visible points") {
  const Camera cam = test::frontal_camera(16, 16, 10);
  const Image depth(16, 16, 1, 2.0);
  const auto vis = visible_points({Vec3(0, 0, 2.0), Vec3(0, 0, 3.0), Vec3(0, 0, -2.0), Vec3(50, 0, 2)}, {cam}, {depth}, 0.05);
  REQUIRE(vis.size() == 1);
  CHECK(vis[0].z() == 2.0);
}
