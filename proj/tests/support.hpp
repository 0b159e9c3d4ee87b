// SPDX-License-Identifier: Apache-2.0
// Independent oracles shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "semsplat/losses.hpp"
#include "semsplat/mesh.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene.hpp"

namespace semsplat::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("semsplat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec4 random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

/// Camera at the origin looking down +z.
inline Camera frontal_camera(int w, int h, double f) {
  Camera c;
  c.fx = c.fy = f;
  c.cx = (w - 1) / 2.0;
  c.cy = (h - 1) / 2.0;
  c.width = w;
  c.height = h;
  return c;
}

/// Scene of `n` broad primitives in front of frontal_camera(16, 16, 20): every
/// primitive covers every pixel well above the alpha cutoff, transmittance
/// never reaches the early-exit floor, depths are distinct and the shortest
/// axis is unambiguous. Rendering is then differentiable in every parameter.
inline GaussianScene smooth_scene(std::mt19937_64& rng, int n, int classes) {
  GaussianScene s(classes);
  std::normal_distribution<double> nd;
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive p = GaussianPrimitive::zeros(classes);
    const double z = 3.0 + 0.3 * i + uniform(rng, 0.0, 0.1);
    p.position = Vec3(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), z);
    const double big = uniform(rng, 1.3, 1.8);
    p.log_scale = Vec3(std::log(big), std::log(big * uniform(rng, 1.05, 1.25)), std::log(uniform(rng, 0.75, 0.9)));
    // Keep the normal axis away from edge-on, where its view-facing sign flips.
    do {
      p.rotation = random_quaternion(rng);
    } while (std::abs(quaternion_to_matrix(p.rotation)(2, 2)) < 0.3);
    p.rotation *= uniform(rng, 0.8, 1.2);
    p.opacity_logit = logit(uniform(rng, 0.3, 0.75));
    for (int c = 0; c < 3; ++c) p.color_logit[c] = nd(rng);
    for (auto& v : p.semantic) v = nd(rng);
    s.primitives.push_back(p);
  }
  return s;
}

/// True when every primitive's alpha at every pixel stays inside
/// [2/255, 0.95] and transmittance stays above 1e-3.
inline bool in_smooth_regime(const GaussianScene& scene, const Camera& cam) {
  std::vector<ProjectedGaussian> proj;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    auto p = project(activate(scene.primitives[i]), cam, std::uint32_t(i));
    if (!p) return false;
    proj.push_back(*p);
  }
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      double t = 1.0;
      for (const auto& g : proj) {
        if (!g.footprint.contains(x, y)) return false;
        const double dx = x - g.mean2d.x(), dy = y - g.mean2d.y();
        const double a = g.opacity * std::exp(-0.5 * (g.conic[0] * dx * dx + 2 * g.conic[1] * dx * dy + g.conic[2] * dy * dy));
        if (a < 2.0 / 255.0 || a > 0.95) return false;
        t *= 1 - a;
      }
      if (t < 1e-3) return false;
    }
  return true;
}

/// Relative error of two gradient vectors: |a - b| / max(|a|, |b|, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-10) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Central differences of f over every coordinate of one parameter group.
template <class F>
std::vector<double> finite_difference(GaussianScene scene, ParamGroup g, double h, F&& f) {
  std::vector<double> out;
  for (auto& p : scene.primitives) {
    auto v = field(p, g);
    for (double& x : v) {
      const double saved = x;
      x = saved + h;
      const double up = f(scene);
      x = saved - h;
      const double down = f(scene);
      x = saved;
      out.push_back((up - down) / (2 * h));
    }
  }
  return out;
}

inline std::vector<double> flatten(const std::vector<GaussianPrimitive>& grads, ParamGroup g) {
  std::vector<double> out;
  for (const auto& p : grads) {
    const auto v = field(p, g);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

/// O(n^2) geometry metrics with the same distance formula and summation order
/// a sequential reference would use.
inline GeometryReport brute_force_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double tau) {
  const auto directed = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to, double& mean, double& frac) {
    double sum = 0;
    std::size_t within = 0;
    for (const Vec3& q : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& p : to) {
        const double dx = p.x() - q.x(), dy = p.y() - q.y(), dz = p.z() - q.z();
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      const double d = std::sqrt(best);
      sum += d;
      within += d < tau;
    }
    mean = sum / double(from.size());
    frac = double(within) / double(from.size());
  };
  GeometryReport r;
  r.threshold = tau;
  directed(pred, gt, r.accuracy, r.precision);
  directed(gt, pred, r.completeness, r.recall);
  r.f_score = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Priors for a render of `scene`: random teacher logits with a label edge,
/// prior depth an affine map of the rendered depth plus noise.
inline PriorBundle random_priors(std::mt19937_64& rng, const RenderOutput& r, int classes) {
  std::normal_distribution<double> nd;
  const int w = r.depth.width, h = r.depth.height;
  Image logits(w, h, classes);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int label = (x < w / 2) ? 0 : 1 + (y * classes / h) % (classes - 1);
      for (int c = 0; c < classes; ++c) logits.at(x, y, c) = nd(rng) + (c == label ? 4.0 : 0.0);
    }
  Image prior(w, h, 1);
  const double a = uniform(rng, 0.5, 2.0), b = uniform(rng, -0.5, 0.5);
  for (std::size_t i = 0; i < prior.data.size(); ++i) prior.data[i] = a * r.depth.data[i] + b + 0.05 * nd(rng);
  return PriorBundle::derive(std::move(logits), std::move(prior), 1);
}

/// Ground truth at least 0.05 away from the rendered value in every channel,
/// so the L1 term has no kink near the evaluation point.
inline Image offset_ground_truth(std::mt19937_64& rng, const Image& rendered) {
  Image gt = rendered;
  for (double& v : gt.data) v = v > 0.5 ? v - uniform(rng, 0.05, 0.45) : v + uniform(rng, 0.05, 0.45);
  return gt;
}

}  // namespace semsplat::test
