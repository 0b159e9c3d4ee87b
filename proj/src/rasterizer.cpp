// SPDX-License-Identifier: Apache-2.0
#include "semsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "semsplat/error.hpp"
#include "semsplat/parallel.hpp"

namespace semsplat {
namespace {

// Gradient slots per tile entry, excluding semantic channels.
enum Slot : int {
  kMeanX, kMeanY, kConicXX, kConicXY, kConicYY, kOpacity,
  kColorR, kColorG, kColorB, kDepth, kNormalX, kNormalY, kNormalZ, kSlotCount
};

std::uint64_t fnv_mix(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fingerprint(const GaussianScene& scene, const Camera& cam) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : scene.primitives) {
    h = fnv_mix(h, p.position.data(), sizeof(double) * 3);
    h = fnv_mix(h, p.log_scale.data(), sizeof(double) * 3);
    h = fnv_mix(h, p.rotation.data(), sizeof(double) * 4);
    h = fnv_mix(h, &p.opacity_logit, sizeof(double));
    h = fnv_mix(h, p.color_logit.data(), sizeof(double) * 3);
    h = fnv_mix(h, p.semantic.data(), sizeof(double) * p.semantic.size());
  }
  const double intr[4] = {cam.fx, cam.fy, cam.cx, cam.cy};
  h = fnv_mix(h, intr, sizeof(intr));
  h = fnv_mix(h, cam.rotation.data(), sizeof(double) * 9);
  h = fnv_mix(h, cam.translation.data(), sizeof(double) * 3);
  return h;
}

/// Symmetric product M * D * M^T with D diagonal, filled so the result is exactly symmetric.
Mat3 symmetric_mdmt(const Mat3& m, const Vec3& d) {
  Mat3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const double v = m(i, 0) * d[0] * m(j, 0) + m(i, 1) * d[1] * m(j, 1) + m(i, 2) * d[2] * m(j, 2);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

/// Image-plane coordinates x/z, y/z clamped to 1.3x the half field of view
/// before the Jacobian is evaluated, so off-screen primitives close to the
/// camera do not blow up into screen-filling footprints.
struct JacobianPoint {
  double u = 0, v = 0;
  bool u_clamped = false, v_clamped = false;
};

JacobianPoint jacobian_point(const Camera& cam, const Vec3& t) {
  const double lim_u = kFrustumClamp * 0.5 * cam.width / cam.fx;
  const double lim_v = kFrustumClamp * 0.5 * cam.height / cam.fy;
  JacobianPoint p;
  p.u = t.x() / t.z();
  p.v = t.y() / t.z();
  p.u_clamped = std::abs(p.u) > lim_u;
  p.v_clamped = std::abs(p.v) > lim_v;
  if (p.u_clamped) p.u = std::clamp(p.u, -lim_u, lim_u);
  if (p.v_clamped) p.v = std::clamp(p.v, -lim_v, lim_v);
  return p;
}

/// Row-form 2x3 perspective Jacobian at camera-space point t.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& t) {
  const double iz = 1.0 / t.z();
  const JacobianPoint c = jacobian_point(cam, t);
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * c.u * iz,
       0.0, cam.fy * iz, -cam.fy * c.v * iz;
  return j;
}

Mat2 project_covariance(const Eigen::Matrix<double, 2, 3>& j, const Mat3& v) {
  const Eigen::Matrix<double, 2, 3> jv = j * v;
  Mat2 c;
  c(0, 0) = jv.row(0).dot(j.row(0)) + kCovarianceDilation;
  c(1, 1) = jv.row(1).dot(j.row(1)) + kCovarianceDilation;
  c(0, 1) = c(1, 0) = jv.row(0).dot(j.row(1));
  return c;
}

/// Derivative of the unit-quaternion rotation matrix, contracted with dL/dR.
Vec4 rotation_matrix_vjp(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 d;
  d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
              w * g(2, 1) - 2 * x * g(2, 2));
  d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
              z * g(2, 1) - 2 * y * g(2, 2));
  d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
              x * g(2, 0) + y * g(2, 1));
  return d;
}

int shortest_axis(const Vec3& scale) {
  int k = 0;
  if (scale[1] < scale[k]) k = 1;
  if (scale[2] < scale[k]) k = 2;
  return k;
}

void check_grad_shape(const Image& g, int w, int h, int c, const char* name) {
  if (g.empty()) return;
  if (g.width != w || g.height != h || g.channels != c) {
    throw ContractViolation(std::string("render_backward: gradient buffer '") + name + "' has wrong shape");
  }
}

}  // namespace

Mat3 covariance3d(const ActivatedGaussian& g) {
  const Mat3 r = quaternion_to_matrix(g.rotation);
  return symmetric_mdmt(r, g.scale.cwiseProduct(g.scale));
}

std::optional<ProjectedGaussian> project(const ActivatedGaussian& g, const Camera& cam, std::uint32_t index) {
  const Vec3 t = cam.rotation * g.position + cam.translation;
  if (!(t.z() > kNearPlane)) return std::nullopt;

  const Mat3 r = quaternion_to_matrix(g.rotation);
  const Mat3 sigma = symmetric_mdmt(r, g.scale.cwiseProduct(g.scale));
  // View-space covariance W Sigma W^T, symmetrized explicitly.
  Mat3 view_cov = cam.rotation * sigma * cam.rotation.transpose();
  view_cov = 0.5 * (view_cov + view_cov.transpose()).eval();

  const auto j = projection_jacobian(cam, t);
  const Mat2 cov = project_covariance(j, view_cov);
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  if (!(det > 0.0)) return std::nullopt;

  ProjectedGaussian p;
  p.index = index;
  p.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
  p.cov2d = cov;
  p.conic = Vec3(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
  p.view_depth = t.z();

  const double rx = 3.0 * std::sqrt(cov(0, 0));
  const double ry = 3.0 * std::sqrt(cov(1, 1));
  const double fx0 = std::ceil(p.mean2d.x() - rx), fx1 = std::floor(p.mean2d.x() + rx);
  const double fy0 = std::ceil(p.mean2d.y() - ry), fy1 = std::floor(p.mean2d.y() + ry);
  if (!(fx1 >= 0.0 && fy1 >= 0.0 && fx0 <= cam.width - 1.0 && fy0 <= cam.height - 1.0)) return std::nullopt;
  p.footprint.x0 = int(std::max(fx0, 0.0));
  p.footprint.y0 = int(std::max(fy0, 0.0));
  p.footprint.x1 = int(std::min(fx1, cam.width - 1.0));
  p.footprint.y1 = int(std::min(fy1, cam.height - 1.0));
  if (p.footprint.x0 > p.footprint.x1 || p.footprint.y0 > p.footprint.y1) return std::nullopt;

  // alpha >= kMinAlpha needs a Mahalanobis radius below sqrt(2 ln(opacity / kMinAlpha)).
  if (g.opacity >= kMinAlpha) {
    const double k = std::sqrt(2.0 * std::log(g.opacity / kMinAlpha)) * (1.0 + 1e-6) + 1e-6;
    const double ax = k * std::sqrt(cov(0, 0)), ay = k * std::sqrt(cov(1, 1));
    p.raster.x0 = std::max(p.footprint.x0, int(std::max(std::ceil(p.mean2d.x() - ax), -1.0)));
    p.raster.y0 = std::max(p.footprint.y0, int(std::max(std::ceil(p.mean2d.y() - ay), -1.0)));
    p.raster.x1 = std::min(p.footprint.x1, int(std::min(std::floor(p.mean2d.x() + ax), double(cam.width))));
    p.raster.y1 = std::min(p.footprint.y1, int(std::min(std::floor(p.mean2d.y() + ay), double(cam.height))));
  }

  p.normal_axis = shortest_axis(g.scale);
  const Vec3 n = cam.rotation * r.col(p.normal_axis);
  p.normal_sign = n.dot(t) > 0.0 ? -1.0 : 1.0;
  p.normal_cam = p.normal_sign * n;

  p.t_cam = t;
  p.opacity = g.opacity;
  p.color = g.color;
  return p;
}

RenderOutput render(const GaussianScene& scene, const Camera& cam, const RenderOptions& options) {
  cam.validate(1e-6);
  const int width = cam.width, height = cam.height, classes = scene.class_count;
  RenderOutput out;
  out.rgb = Image(width, height, 3);
  out.depth = Image(width, height, 1);
  out.normal = Image(width, height, 3);
  out.semantic_logits = Image(width, height, classes);
  out.accum_alpha = Image(width, height, 1);

  BlendCache& cache = out.cache;
  cache.width = width;
  cache.height = height;
  cache.class_count = classes;
  cache.primitive_count = scene.size();
  cache.fingerprint = fingerprint(scene, cam);
  cache.tiles_x = (width + kTileSize - 1) / kTileSize;
  cache.tiles_y = (height + kTileSize - 1) / kTileSize;

  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (scene.primitives[i].semantic.size() != std::size_t(classes)) {
      throw InvalidParameter("primitive " + std::to_string(i) + ": semantic length does not match class_count");
    }
  }

  std::vector<std::optional<ProjectedGaussian>> staged(scene.size());
  parallel_for(scene.size(), options.threads, [&](std::size_t i) {
    staged[i] = project(activate(scene.primitives[i], i), cam, std::uint32_t(i));
  });
  for (auto& s : staged) {
    if (s) cache.projected.push_back(std::move(*s));
  }
  std::sort(cache.projected.begin(), cache.projected.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
    return a.view_depth < b.view_depth || (a.view_depth == b.view_depth && a.index < b.index);
  });

  const int tile_count = cache.tiles_x * cache.tiles_y;
  std::vector<std::uint32_t> counts(std::size_t(tile_count) + 1, 0);
  auto tile_range = [&](const Footprint& f) {
    return std::array<int, 4>{f.x0 / kTileSize, f.y0 / kTileSize, f.x1 / kTileSize, f.y1 / kTileSize};
  };
  for (const auto& p : cache.projected) {
    if (p.raster.x0 > p.raster.x1 || p.raster.y0 > p.raster.y1) continue;
    const auto [tx0, ty0, tx1, ty1] = tile_range(p.raster);
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx) ++counts[std::size_t(ty * cache.tiles_x + tx) + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  cache.tile_offsets = counts;
  cache.tile_entries.assign(counts.back(), 0);
  {
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t e = 0; e < cache.projected.size(); ++e) {
      const Footprint& r = cache.projected[e].raster;
      if (r.x0 > r.x1 || r.y0 > r.y1) continue;
      const auto [tx0, ty0, tx1, ty1] = tile_range(r);
      for (int ty = ty0; ty <= ty1; ++ty)
        for (int tx = tx0; tx <= tx1; ++tx) cache.tile_entries[cursor[std::size_t(ty * cache.tiles_x + tx)]++] = e;
    }
  }
  cache.pixel_consumed.assign(std::size_t(width) * height, 0);

  parallel_for(std::size_t(tile_count), options.threads, [&](std::size_t tile) {
    const int tx = int(tile) % cache.tiles_x, ty = int(tile) / cache.tiles_x;
    const std::uint32_t begin = cache.tile_offsets[tile], end = cache.tile_offsets[tile + 1];
    const int x_end = std::min(width, (tx + 1) * kTileSize), y_end = std::min(height, (ty + 1) * kTileSize);
    for (int y = ty * kTileSize; y < y_end; ++y) {
      for (int x = tx * kTileSize; x < x_end; ++x) {
        const std::size_t pix = std::size_t(y) * width + x;
        double transmittance = 1.0, weight_sum = 0.0, depth = 0.0;
        double rgb[3] = {0, 0, 0}, nrm[3] = {0, 0, 0};
        double* sem = out.semantic_logits.data.data() + pix * classes;
        std::uint32_t consumed = end - begin;
        std::uint32_t last_primitive = 0;
        for (std::uint32_t k = begin; k < end; ++k) {
          const ProjectedGaussian& g = cache.projected[cache.tile_entries[k]];
          if (!g.raster.contains(x, y)) continue;
          const double dx = x - g.mean2d.x(), dy = y - g.mean2d.y();
          const double power = -0.5 * (g.conic[0] * dx * dx + 2.0 * g.conic[1] * dx * dy + g.conic[2] * dy * dy);
          double alpha = g.opacity * std::exp(power);
          if (alpha < kMinAlpha) continue;
          alpha = std::min(alpha, kMaxAlpha);
          const double w = alpha * transmittance;
          for (int c = 0; c < 3; ++c) rgb[c] += w * g.color[c];
          for (int c = 0; c < 3; ++c) nrm[c] += w * g.normal_cam[c];
          depth += w * g.view_depth;
          const double* s = scene.primitives[g.index].semantic.data();
          for (int c = 0; c < classes; ++c) sem[c] += w * s[c];
          weight_sum += w;
          last_primitive = g.index;
          transmittance *= 1.0 - alpha;
          if (transmittance < kMinTransmittance) {
            consumed = k - begin + 1;
            break;
          }
        }
        if (!std::isfinite(weight_sum + depth + rgb[0] + rgb[1] + rgb[2] + nrm[0] + nrm[1] + nrm[2])) {
          std::ostringstream msg;
          msg << "non-finite blend at pixel (" << x << ", " << y << "), primitive " << last_primitive;
          throw RenderError(msg.str());
        }
        cache.pixel_consumed[pix] = consumed;
        for (int c = 0; c < 3; ++c) {
          out.rgb.data[pix * 3 + c] = rgb[c];
          out.normal.data[pix * 3 + c] = nrm[c];
        }
        out.depth.data[pix] = depth;
        out.accum_alpha.data[pix] = weight_sum;
      }
    }
  });
  return out;
}

SceneGradients render_backward(const GaussianScene& scene, const Camera& cam, const RenderGradients& grads,
                               const BlendCache& cache, const RenderOptions& options) {
  const int width = cam.width, height = cam.height, classes = scene.class_count;
  if (cache.width != width || cache.height != height || cache.class_count != classes ||
      cache.primitive_count != scene.size() || cache.fingerprint != fingerprint(scene, cam)) {
    throw ContractViolation("render_backward: blend cache does not match the scene/camera");
  }
  check_grad_shape(grads.rgb, width, height, 3, "rgb");
  check_grad_shape(grads.depth, width, height, 1, "depth");
  check_grad_shape(grads.normal, width, height, 3, "normal");
  check_grad_shape(grads.semantic_logits, width, height, classes, "semantic_logits");
  check_grad_shape(grads.accum_alpha, width, height, 1, "accum_alpha");

  SceneGradients result;
  result.per_primitive.assign(scene.size(), GaussianPrimitive::zeros(classes));
  result.screen_grad_norm.assign(scene.size(), 0.0);
  result.visible.assign(scene.size(), 0);

  const std::size_t entries = cache.tile_entries.size();
  std::vector<double> entry_grad(entries * kSlotCount, 0.0);
  std::vector<double> entry_sem(entries * std::size_t(classes), 0.0);
  const std::size_t tile_count = std::size_t(cache.tiles_x) * cache.tiles_y;

  const double zero3[3] = {0, 0, 0};
  auto channel_ptr = [](const Image& img, std::size_t pix, const double* fallback) -> const double* {
    return img.empty() ? fallback : img.data.data() + pix * img.channels;
  };
  std::vector<double> zero_sem(std::size_t(classes), 0.0);

  struct Contribution {
    std::uint32_t k;
    double alpha, gauss, transmittance, dx, dy;
    bool clamped;
  };

  parallel_for(tile_count, options.threads, [&](std::size_t tile) {
    const int tx = int(tile) % cache.tiles_x, ty = int(tile) / cache.tiles_x;
    const std::uint32_t begin = cache.tile_offsets[tile], end = cache.tile_offsets[tile + 1];
    if (begin == end) return;
    const int x_end = std::min(width, (tx + 1) * kTileSize), y_end = std::min(height, (ty + 1) * kTileSize);
    std::vector<Contribution> contribs;
    contribs.reserve(end - begin);
    for (int y = ty * kTileSize; y < y_end; ++y) {
      for (int x = tx * kTileSize; x < x_end; ++x) {
        const std::size_t pix = std::size_t(y) * width + x;
        const double* g_rgb = channel_ptr(grads.rgb, pix, zero3);
        const double* g_nrm = channel_ptr(grads.normal, pix, zero3);
        const double* g_sem = channel_ptr(grads.semantic_logits, pix, zero_sem.data());
        const double g_depth = grads.depth.empty() ? 0.0 : grads.depth.data[pix];
        const double g_acc = grads.accum_alpha.empty() ? 0.0 : grads.accum_alpha.data[pix];
        bool any = g_depth != 0.0 || g_acc != 0.0;
        for (int c = 0; c < 3 && !any; ++c) any = g_rgb[c] != 0.0 || g_nrm[c] != 0.0;
        for (int c = 0; c < classes && !any; ++c) any = g_sem[c] != 0.0;
        if (!any) continue;

        contribs.clear();
        double transmittance = 1.0;
        const std::uint32_t stop = begin + cache.pixel_consumed[pix];
        for (std::uint32_t k = begin; k < stop; ++k) {
          const ProjectedGaussian& g = cache.projected[cache.tile_entries[k]];
          if (!g.raster.contains(x, y)) continue;
          const double dx = x - g.mean2d.x(), dy = y - g.mean2d.y();
          const double power = -0.5 * (g.conic[0] * dx * dx + 2.0 * g.conic[1] * dx * dy + g.conic[2] * dy * dy);
          const double gauss = std::exp(power);
          double alpha = g.opacity * gauss;
          if (alpha < kMinAlpha) continue;
          const bool clamped = alpha > kMaxAlpha;
          alpha = std::min(alpha, kMaxAlpha);
          contribs.push_back({k, alpha, gauss, transmittance, dx, dy, clamped});
          transmittance *= 1.0 - alpha;
        }

        double suffix = 0.0;  // sum over later contributions of (g . f_i) w_i
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
          const ProjectedGaussian& g = cache.projected[cache.tile_entries[it->k]];
          const double* s = scene.primitives[g.index].semantic.data();
          double gf = g_depth * g.view_depth + g_acc;
          for (int c = 0; c < 3; ++c) gf += g_rgb[c] * g.color[c] + g_nrm[c] * g.normal_cam[c];
          for (int c = 0; c < classes; ++c) gf += g_sem[c] * s[c];
          const double w = it->alpha * it->transmittance;

          double* eg = entry_grad.data() + std::size_t(it->k) * kSlotCount;
          double* es = entry_sem.data() + std::size_t(it->k) * classes;
          for (int c = 0; c < 3; ++c) {
            eg[kColorR + c] += w * g_rgb[c];
            eg[kNormalX + c] += w * g_nrm[c];
          }
          eg[kDepth] += w * g_depth;
          for (int c = 0; c < classes; ++c) es[c] += w * g_sem[c];

          const double d_alpha = it->transmittance * gf - suffix / (1.0 - it->alpha);
          suffix += gf * w;
          if (it->clamped) continue;
          eg[kOpacity] += d_alpha * it->gauss;
          const double d_power = d_alpha * g.opacity * it->gauss;
          const double dx = it->dx, dy = it->dy;
          eg[kMeanX] += d_power * (g.conic[0] * dx + g.conic[1] * dy);
          eg[kMeanY] += d_power * (g.conic[1] * dx + g.conic[2] * dy);
          eg[kConicXX] += d_power * (-0.5 * dx * dx);
          eg[kConicXY] += d_power * (-0.5 * dx * dy);
          eg[kConicYY] += d_power * (-0.5 * dy * dy);
        }
      }
    }
  });

  // Fixed tile order reduction keeps the sums independent of the worker count.
  const std::size_t visible = cache.projected.size();
  std::vector<double> acc(visible * kSlotCount, 0.0);
  std::vector<double> acc_sem(visible * std::size_t(classes), 0.0);
  for (std::size_t k = 0; k < entries; ++k) {
    const std::size_t e = cache.tile_entries[k];
    for (int s = 0; s < kSlotCount; ++s) acc[e * kSlotCount + s] += entry_grad[k * kSlotCount + s];
    for (int c = 0; c < classes; ++c) acc_sem[e * classes + c] += entry_sem[k * classes + c];
  }

  parallel_for(visible, options.threads, [&](std::size_t e) {
    const ProjectedGaussian& proj = cache.projected[e];
    const double* a = acc.data() + e * kSlotCount;
    const GaussianPrimitive& prim = scene.primitives[proj.index];
    GaussianPrimitive& out = result.per_primitive[proj.index];
    result.visible[proj.index] = 1;
    result.screen_grad_norm[proj.index] = std::hypot(a[kMeanX] * 0.5 * width, a[kMeanY] * 0.5 * height);

    for (int c = 0; c < classes; ++c) out.semantic[std::size_t(c)] = acc_sem[e * classes + c];
    for (int c = 0; c < 3; ++c) out.color_logit[c] = a[kColorR + c] * proj.color[c] * (1.0 - proj.color[c]);
    out.opacity_logit = a[kOpacity] * proj.opacity * (1.0 - proj.opacity);

    const double qn = prim.rotation.norm();
    const Vec4 q = prim.rotation / qn;
    const Mat3 r = quaternion_to_matrix(q);
    const Vec3 scale = prim.log_scale.array().exp();
    const Vec3 scale_sq = scale.cwiseProduct(scale);
    const Mat3 sigma = symmetric_mdmt(r, scale_sq);
    Mat3 view_cov = cam.rotation * sigma * cam.rotation.transpose();
    view_cov = 0.5 * (view_cov + view_cov.transpose()).eval();
    const Vec3& t = proj.t_cam;
    const auto j = projection_jacobian(cam, t);

    // conic = inverse(cov2d): dL/dcov = -A G_A A.
    Mat2 conic;
    conic << proj.conic[0], proj.conic[1], proj.conic[1], proj.conic[2];
    Mat2 g_conic;
    g_conic << a[kConicXX], a[kConicXY], a[kConicXY], a[kConicYY];
    const Mat2 g_cov = -conic * g_conic * conic;

    // cov2d = J V J^T + dilation.
    const Mat3 g_view = j.transpose() * g_cov * j;
    const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov * j * view_cov;

    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_t = Vec3::Zero();
    g_t.x() += a[kMeanX] * cam.fx * iz;
    g_t.y() += a[kMeanY] * cam.fy * iz;
    g_t.z() += -a[kMeanX] * cam.fx * t.x() * iz2 - a[kMeanY] * cam.fy * t.y() * iz2;
    g_t.z() += a[kDepth];
    g_t.z() += g_j(0, 0) * (-cam.fx * iz2) + g_j(1, 1) * (-cam.fy * iz2);
    // J02 = -fx u / z with u = x / z, or a constant u once clamped.
    const JacobianPoint c = jacobian_point(cam, t);
    if (c.u_clamped) {
      g_t.z() += g_j(0, 2) * cam.fx * c.u * iz2;
    } else {
      g_t.x() += g_j(0, 2) * (-cam.fx * iz2);
      g_t.z() += g_j(0, 2) * (2.0 * cam.fx * t.x() * iz3);
    }
    if (c.v_clamped) {
      g_t.z() += g_j(1, 2) * cam.fy * c.v * iz2;
    } else {
      g_t.y() += g_j(1, 2) * (-cam.fy * iz2);
      g_t.z() += g_j(1, 2) * (2.0 * cam.fy * t.y() * iz3);
    }
    out.position = cam.rotation.transpose() * g_t;

    const Mat3 g_sigma = cam.rotation.transpose() * g_view * cam.rotation;
    const Mat3 rt_g_r = r.transpose() * g_sigma * r;
    for (int k = 0; k < 3; ++k) out.log_scale[k] = 2.0 * scale_sq[k] * rt_g_r(k, k);

    Mat3 g_r = 2.0 * g_sigma * r * scale_sq.asDiagonal();
    const Vec3 g_n(a[kNormalX], a[kNormalY], a[kNormalZ]);
    g_r.col(proj.normal_axis) += proj.normal_sign * (cam.rotation.transpose() * g_n);
    const Vec4 g_qhat = rotation_matrix_vjp(q, g_r);
    out.rotation = (g_qhat - q * q.dot(g_qhat)) / qn;
  });
  return result;
}

}  // namespace semsplat
