// SPDX-License-Identifier: Apache-2.0
#include "semsplat/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "semsplat/error.hpp"
#include "semsplat/io.hpp"

namespace semsplat {
namespace {

/// Two triangles over p0..p3 (in order around the quad), wound so their
/// normal agrees with `facing`.
void add_quad(std::vector<Triangle>& tris, const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3,
              const Vec3& facing, int class_id, const Vec3& albedo) {
  Triangle t1{p0, p1, p2, class_id, albedo};
  Triangle t2{p0, p2, p3, class_id, albedo};
  if ((p1 - p0).cross(p2 - p0).dot(facing) < 0) {
    std::swap(t1.b, t1.c);
    std::swap(t2.b, t2.c);
  }
  tris.push_back(t1);
  tris.push_back(t2);
}

/// Six faces of an axis-aligned box; `sign` +1 faces outward, -1 inward.
void add_box(std::vector<Triangle>& tris, const Vec3& lo, const Vec3& hi, double sign, const std::array<int, 6>& classes,
             const std::array<Vec3, 6>& albedo) {
  const auto corner = [&](int i) { return Vec3(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z()); };
  // Face order: -z, +z, -x, +x, -y, +y.
  add_quad(tris, corner(0), corner(1), corner(3), corner(2), Vec3(0, 0, -sign), classes[0], albedo[0]);
  add_quad(tris, corner(4), corner(5), corner(7), corner(6), Vec3(0, 0, sign), classes[1], albedo[1]);
  add_quad(tris, corner(0), corner(2), corner(6), corner(4), Vec3(-sign, 0, 0), classes[2], albedo[2]);
  add_quad(tris, corner(1), corner(3), corner(7), corner(5), Vec3(sign, 0, 0), classes[3], albedo[3]);
  add_quad(tris, corner(0), corner(1), corner(5), corner(4), Vec3(0, -sign, 0), classes[4], albedo[4]);
  add_quad(tris, corner(2), corner(3), corner(7), corner(6), Vec3(0, sign, 0), classes[5], albedo[5]);
}

Vec3 hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  Vec3 rgb;
  switch (int(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return rgb + Vec3::Constant(v - c);
}

std::string view_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", index);
  return buf;
}

}  // namespace

TriangleMesh SyntheticScene::mesh() const {
  TriangleMesh m;
  for (const auto& t : triangles) {
    const auto base = std::uint32_t(m.vertices.size());
    m.vertices.push_back(t.a);
    m.vertices.push_back(t.b);
    m.vertices.push_back(t.c);
    m.triangles.push_back({base, base + 1, base + 2});
  }
  return m;
}

SyntheticScene generate_room(std::uint64_t seed, int box_count, int class_count) {
  if (box_count < 0) throw InvalidParameter("box_count must be >= 0");
  if (class_count < kFirstBoxClass + box_count) {
    throw InvalidParameter("class_count " + std::to_string(class_count) + " too small for " +
                           std::to_string(box_count) + " boxes (need " + std::to_string(kFirstBoxClass + box_count) +
                           ")");
  }
  SyntheticScene s;
  s.class_count = class_count;
  const std::array<Vec3, 6> shell_albedo = {Vec3(0.62, 0.50, 0.38), Vec3(0.92, 0.92, 0.90), Vec3(0.78, 0.74, 0.64),
                                            Vec3(0.62, 0.72, 0.80), Vec3(0.80, 0.66, 0.70), Vec3(0.68, 0.78, 0.62)};
  add_box(s.triangles, s.room_lo, s.room_hi, -1.0,
          {kFloorClass, kCeilingClass, kFirstWallClass, kFirstWallClass + 1, kFirstWallClass + 2, kFirstWallClass + 3},
          shell_albedo);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  constexpr double kMargin = 0.3, kGap = 0.1, kTopLimit = 1.3;
  std::vector<Box> placed;
  for (int k = 0; k < box_count; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
      const double shrink = attempt < 2000 ? 1.0 : 0.5;
      const double sx = shrink * (0.35 + 0.45 * u01(rng));
      const double sy = shrink * (0.35 + 0.45 * u01(rng));
      const double sz = 0.3 + 0.5 * u01(rng);
      const double x0 = kMargin + (s.room_hi.x() - 2 * kMargin - sx) * u01(rng);
      const double y0 = kMargin + (s.room_hi.y() - 2 * kMargin - sy) * u01(rng);
      const double z0 = kMargin + (kTopLimit - sz - kMargin) * u01(rng);
      Box b{Vec3(x0, y0, z0), Vec3(x0 + sx, y0 + sy, z0 + sz), kFirstBoxClass + k};
      ok = std::none_of(placed.begin(), placed.end(), [&](const Box& o) {
        return b.lo.x() < o.hi.x() + kGap && o.lo.x() < b.hi.x() + kGap && b.lo.y() < o.hi.y() + kGap &&
               o.lo.y() < b.hi.y() + kGap;
      });
      if (ok) placed.push_back(b);
    }
    if (!ok) throw InvalidParameter("could not place " + std::to_string(box_count) + " non-overlapping boxes");
    const Vec3 albedo = hsv(u01(rng), 0.55 + 0.3 * u01(rng), 0.75 + 0.2 * u01(rng));
    const Box& b = placed.back();
    std::array<int, 6> cls;
    std::array<Vec3, 6> alb;
    cls.fill(b.class_id);
    alb.fill(albedo);
    add_box(s.triangles, b.lo, b.hi, 1.0, cls, alb);
  }
  s.boxes = placed;
  return s;
}

Image make_teacher_logits(const LabelMap& labels, int class_count, double peak, int softness) {
  if (!(peak > 0)) throw InvalidParameter("teacher peak must be > 0");
  if (softness < 0) throw InvalidParameter("teacher softness must be >= 0");
  const int w = labels.width, h = labels.height;
  Image onehot(w, h, class_count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.at(x, y);
      if (l < 0 || l >= class_count) throw InvalidParameter("label " + std::to_string(l) + " outside class range");
      onehot.at(x, y, l) = peak;
    }
  }
  if (softness == 0) return onehot;
  Image out(w, h, class_count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for (int yy = std::max(0, y - softness); yy <= std::min(h - 1, y + softness); ++yy) {
        for (int xx = std::max(0, x - softness); xx <= std::min(w - 1, x + softness); ++xx) {
          ++n;
          for (int c = 0; c < class_count; ++c) out.at(x, y, c) += onehot.at(xx, yy, c);
        }
      }
      for (int c = 0; c < class_count; ++c) out.at(x, y, c) = to_f32_exact(out.at(x, y, c) / n);
    }
  }
  return out;
}

Image perturb_depth(const Image& exact, const LabelMap& labels, std::uint64_t seed, const PerturbOptions& opts) {
  if (labels.width != exact.width || labels.height != exact.height) {
    throw ContractViolation("perturb_depth: labels and depth differ in size");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(0.5, 2.0), ub(-0.5, 0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = ua(rng);
  const double b = ub(rng);
  std::vector<double> sorted(exact.data);
  double median = 0.0;
  if (!sorted.empty()) {
    const auto mid = sorted.begin() + std::ptrdiff_t(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    median = *mid;
  }
  const double sigma = 0.01 * a * median;
  const Mask band = semantic_edge_mask(labels, opts.band_dilation);
  Image out(exact.width, exact.height, 1);
  for (std::size_t p = 0; p < exact.data.size(); ++p) {
    const double z = normal(rng);
    double scale = opts.noise ? sigma : 0.0;
    if (opts.boundary_band && band.bits[p]) scale = sigma * opts.band_noise_factor;
    out.data[p] = to_f32_exact(a * exact.data[p] + b + scale * z);
  }
  return out;
}

PointCloud init_point_cloud(const SyntheticScene& scene, std::size_t n, double noise_sigma, std::uint64_t seed) {
  if (n < 16) throw InvalidParameter("init_point_cloud: need at least 16 points");
  if (noise_sigma < 0) noise_sigma = 0.01 * scene.extent();
  std::vector<double> areas;
  for (const auto& t : scene.triangles) areas.push_back(triangle_area(t.a, t.b, t.c));
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Triangle& t = scene.triangles[pick(rng)];
    const double r1 = std::sqrt(u01(rng)), r2 = u01(rng);
    const Vec3 surface = (1 - r1) * t.a + r1 * (1 - r2) * t.b + r1 * r2 * t.c;
    const Vec3 jitter(normal(rng), normal(rng), normal(rng));
    cloud.points.push_back(surface + noise_sigma * jitter);
    cloud.colors.push_back(shade(scene, t, surface));
    cloud.classes.push_back(t.class_id);
  }
  return cloud;
}

std::vector<Camera> default_camera_rig(const SyntheticScene& scene, int count, int width, int height) {
  std::vector<Camera> cams;
  const Vec3 center = 0.5 * (scene.room_lo + scene.room_hi);
  for (int i = 0; i < count; ++i) {
    const double theta = 2.0 * M_PI * (i + 0.25) / count;
    const Vec3 dir(std::cos(theta), std::sin(theta), 0.0);
    const Vec3 eye = Vec3(center.x(), center.y(), 1.5 + 0.2 * (i % 2)) + 1.3 * dir;
    const Vec3 target = Vec3(center.x(), center.y(), 0.5) - 1.0 * dir;
    cams.push_back(Camera::look_at(eye, target, Vec3(0, 0, 1), 70.0, width, height));
  }
  return cams;
}

void write_view(const std::filesystem::path& dir, int index, const ViewSupervision& exact, const Image& teacher_logits,
                const Image& prior_depth) {
  const std::string stem = view_stem(index);
  write_png(dir / (stem + ".png"), exact.image);
  write_pfm(dir / (stem + ".pfm"), prior_depth);
  write_pfm(dir / (stem + ".gt.pfm"), exact.depth);
  write_semf(dir / (stem + ".semf"), teacher_logits);
  write_camera(dir / (stem + ".cam"), exact.camera);
}

std::vector<DatasetView> load_prior_bundle(const std::filesystem::path& dir, int class_count, int edge_dilation) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  std::vector<int> indices;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    int idx = -1;
    char tail[8] = {};
    if (std::sscanf(name.c_str(), "view_%d.%4s", &idx, tail) == 2 && std::string(tail) == "cam" &&
        name == view_stem(idx) + ".cam") {
      indices.push_back(idx);
    }
  }
  std::sort(indices.begin(), indices.end());
  if (indices.empty()) throw DataError(dir.string() + ": no view_*.cam files");

  std::vector<DatasetView> views;
  for (int idx : indices) {
    const std::string stem = view_stem(idx);
    const auto fail = [&](const std::string& field, const std::string& why) {
      return DataError("view " + std::to_string(idx) + " " + field + ": " + why);
    };
    DatasetView v;
    v.index = idx;
    try {
      v.camera = read_camera(dir / (stem + ".cam"));
    } catch (const Error& e) {
      throw fail("camera", e.what());
    }
    const int w = v.camera.width, h = v.camera.height;
    const auto shape = [](const Image& i) {
      return std::to_string(i.width) + "x" + std::to_string(i.height) + "x" + std::to_string(i.channels);
    };
    const std::string expected_hw = std::to_string(w) + "x" + std::to_string(h);
    Image image;
    const auto png = dir / (stem + ".png"), ppm = dir / (stem + ".ppm");
    try {
      image = std::filesystem::exists(png) ? read_png(png) : read_ppm(ppm);
    } catch (const Error& e) {
      throw fail("image", e.what());
    }
    if (image.width != w || image.height != h) throw fail("image", "expected " + expected_hw + ", found " + shape(image));
    Image depth;
    try {
      depth = read_pfm(dir / (stem + ".pfm"));
    } catch (const Error& e) {
      throw fail("depth", e.what());
    }
    if (depth.width != w || depth.height != h || depth.channels != 1) {
      throw fail("depth", "expected " + expected_hw + "x1, found " + shape(depth));
    }
    Image logits;
    try {
      logits = read_semf(dir / (stem + ".semf"));
    } catch (const Error& e) {
      throw fail("logits", e.what());
    }
    if (class_count <= 0) class_count = logits.channels;
    if (logits.channels != class_count) {
      throw fail("logits", "expected " + std::to_string(class_count) + " classes, found " +
                               std::to_string(logits.channels));
    }
    if (logits.width != w || logits.height != h) {
      throw fail("logits", "expected " + expected_hw + ", found " + shape(logits));
    }
    v.image = std::move(image);
    v.priors = PriorBundle::derive(std::move(logits), std::move(depth), edge_dilation);
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace semsplat
