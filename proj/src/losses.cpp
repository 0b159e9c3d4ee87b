// SPDX-License-Identifier: Apache-2.0
#include "semsplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "semsplat/error.hpp"

namespace semsplat {
namespace {

constexpr double kNormalEps = 1e-8;

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(what) + ": shape mismatch (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                            std::to_string(b.channels) + ")");
  }
}

/// log-softmax of one pixel's channel vector, max-subtracted.
void log_softmax(std::span<const double> z, std::span<double> out) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) sum += std::exp(z[c] - m);
  const double lse = m + std::log(sum);
  for (std::size_t c = 0; c < z.size(); ++c) out[c] = z[c] - lse;
}

bool mask_at(const Mask& mask, std::size_t p) { return !mask.bits.empty() && mask.bits[p] != 0; }

struct Unit {
  Vec3 n;
  double norm;
};

Unit normalize_guarded(const double* v) {
  const Vec3 raw(v[0], v[1], v[2]);
  const double norm = raw.norm();
  return {raw / std::max(norm, kNormalEps), norm};
}

/// Pulls a gradient on normalize_guarded(v) back to v.
Vec3 normalize_vjp(const Unit& u, const Vec3& g) {
  if (u.norm <= kNormalEps) return g / kNormalEps;
  return (g - u.n * u.n.dot(g)) / u.norm;
}

}  // namespace

Image softmax_channels(const Image& logits) {
  Image out(logits.width, logits.height, logits.channels);
  std::vector<double> tmp(std::size_t(logits.channels));
  for (std::size_t p = 0; p < logits.pixel_count(); ++p) {
    log_softmax(logits.pixel(p), tmp);
    auto dst = out.pixel(p);
    for (int c = 0; c < logits.channels; ++c) dst[c] = std::exp(tmp[std::size_t(c)]);
  }
  return out;
}

LabelMap argmax_labels(const Image& logits) {
  LabelMap labels(logits.width, logits.height);
  for (std::size_t p = 0; p < logits.pixel_count(); ++p) labels.labels[p] = argmax_first(logits.pixel(p));
  return labels;
}

LossValue soft_distill_loss(const Image& teacher, const Image& student) {
  require_same_shape(teacher, student, "soft_distill_loss");
  LossValue out;
  out.grad = Image(student.width, student.height, student.channels);
  const std::size_t n = student.pixel_count();
  if (n == 0) return out;
  const std::size_t c_count = std::size_t(student.channels);
  std::vector<double> log_p(c_count), log_q(c_count);
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    log_softmax(teacher.pixel(p), log_p);
    log_softmax(student.pixel(p), log_q);
    auto g = out.grad.pixel(p);
    double kl = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) {
      const double pc = std::exp(log_p[c]);
      if (pc > 0.0) kl += pc * (log_p[c] - log_q[c]);
      g[c] = (std::exp(log_q[c]) - pc) / double(n);
    }
    total += kl;
  }
  out.value = total / double(n);
  return out;
}

LossValue hard_distill_loss(const LabelMap& labels, const Image& student) {
  if (labels.width != student.width || labels.height != student.height) {
    throw ContractViolation("hard_distill_loss: label map and logits differ in size");
  }
  LossValue out;
  out.grad = Image(student.width, student.height, student.channels);
  const std::size_t n = student.pixel_count();
  if (n == 0) return out;
  std::vector<double> log_q(std::size_t(student.channels));
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const int y = labels.labels[p];
    if (y < 0 || y >= student.channels) {
      throw ContractViolation("hard_distill_loss: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(student.channels) + ")");
    }
    log_softmax(student.pixel(p), log_q);
    total -= log_q[std::size_t(y)];
    auto g = out.grad.pixel(p);
    for (int c = 0; c < student.channels; ++c) g[c] = (std::exp(log_q[std::size_t(c)]) - (c == y ? 1.0 : 0.0)) / double(n);
  }
  out.value = total / double(n);
  return out;
}

Mask semantic_edge_mask(const LabelMap& labels, int dilation) {
  const int w = labels.width, h = labels.height;
  Mask edge(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.at(x, y);
      const bool differs = (x > 0 && labels.at(x - 1, y) != l) || (x + 1 < w && labels.at(x + 1, y) != l) ||
                           (y > 0 && labels.at(x, y - 1) != l) || (y + 1 < h && labels.at(x, y + 1) != l);
      if (differs) edge.set(x, y);
    }
  }
  if (dilation <= 0) return edge;
  // Separable Chebyshev dilation: rows, then columns.
  Mask rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dx = -dilation; dx <= dilation && !hit; ++dx) {
        const int xx = x + dx;
        hit = xx >= 0 && xx < w && edge.at(xx, y);
      }
      rows.set(x, y, hit);
    }
  }
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -dilation; dy <= dilation && !hit; ++dy) {
        const int yy = y + dy;
        hit = yy >= 0 && yy < h && rows.at(x, yy);
      }
      out.set(x, y, hit);
    }
  }
  return out;
}

PearsonResult pearson(const Image& x, const Image& y, const Mask& mask) {
  if (x.pixel_count() != y.pixel_count() || x.channels != 1 || y.channels != 1) {
    throw ContractViolation("pearson: inputs must be single-channel maps of equal size");
  }
  if (!mask.bits.empty() && mask.bits.size() != x.pixel_count()) {
    throw ContractViolation("pearson: mask size mismatch");
  }
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < x.pixel_count(); ++p) {
    if (mask_at(mask, p)) continue;
    sx += x.data[p];
    sy += y.data[p];
    ++n;
  }
  if (n < 2) throw DegenerateMask("pearson: fewer than two unmasked pixels (" + std::to_string(n) + ")");
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t p = 0; p < x.pixel_count(); ++p) {
    if (mask_at(mask, p)) continue;
    const double dx = x.data[p] - mx, dy = y.data[p] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  PearsonResult r;
  if (sxx / double(n) < 1e-12 || syy / double(n) < 1e-12) {
    r.degenerate = true;
    return r;
  }
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return r;
}

DepthLoss depth_loss(const Image& rendered, const Image& prior, const Mask& mask) {
  require_same_shape(rendered, prior, "depth_loss");
  DepthLoss out;
  out.grad = Image(rendered.width, rendered.height, 1);
  const PearsonResult pr = pearson(rendered, prior, mask);
  out.degenerate = pr.degenerate;
  out.value = 1.0 - pr.rho;
  if (pr.degenerate) return out;

  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
    if (mask_at(mask, p)) continue;
    sx += rendered.data[p];
    sy += prior.data[p];
    ++n;
  }
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
    if (mask_at(mask, p)) continue;
    const double dx = rendered.data[p] - mx, dy = prior.data[p] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  const double inv = 1.0 / std::sqrt(sxx * syy);
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
    if (mask_at(mask, p)) continue;
    const double dx = rendered.data[p] - mx, dy = prior.data[p] - my;
    out.grad.data[p] = -(dy * inv - rho * dx / sxx);
  }
  return out;
}

namespace {

struct TangentStencil {
  int lo, hi;  // sample indices along the axis; lo == hi means invalid
};

TangentStencil stencil(int i, int n) {
  if (n < 2) return {i, i};
  if (i == 0) return {0, 1};
  if (i == n - 1) return {n - 2, n - 1};
  return {i - 1, i + 1};
}

Vec3 back_project(const Image& depth, const Camera& cam, int x, int y) {
  return depth.at(x, y) * cam.pixel_ray(x, y);
}

}  // namespace

DepthNormals normals_from_depth(const Image& depth, const Camera& cam) {
  const int w = depth.width, h = depth.height;
  DepthNormals out{Image(w, h, 3), Mask(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto sx = stencil(x, w), sy = stencil(y, h);
      if (sx.lo == sx.hi || sy.lo == sy.hi) continue;
      if (!(depth.at(x, y) > 0 && depth.at(sx.lo, y) > 0 && depth.at(sx.hi, y) > 0 && depth.at(x, sy.lo) > 0 &&
            depth.at(x, sy.hi) > 0)) {
        continue;
      }
      const Vec3 tx = back_project(depth, cam, sx.hi, y) - back_project(depth, cam, sx.lo, y);
      const Vec3 ty = back_project(depth, cam, x, sy.hi) - back_project(depth, cam, x, sy.lo);
      const Vec3 c = ty.cross(tx);
      const double len = c.norm();
      if (!(len > 1e-18)) continue;
      const Vec3 n = c / len;
      for (int k = 0; k < 3; ++k) out.normals.at(x, y, k) = n[k];
      out.valid.set(x, y);
    }
  }
  return out;
}

Image normals_from_depth_backward(const Image& depth, const Camera& cam, const DepthNormals& normals,
                                  const Image& grad_normals) {
  const int w = depth.width, h = depth.height;
  Image grad(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!normals.valid.at(x, y)) continue;
      const Vec3 gn(grad_normals.at(x, y, 0), grad_normals.at(x, y, 1), grad_normals.at(x, y, 2));
      if (gn.isZero(0.0)) continue;
      const auto sx = stencil(x, w), sy = stencil(y, h);
      const Vec3 tx = back_project(depth, cam, sx.hi, y) - back_project(depth, cam, sx.lo, y);
      const Vec3 ty = back_project(depth, cam, x, sy.hi) - back_project(depth, cam, x, sy.lo);
      const Vec3 c = ty.cross(tx);
      const double len = c.norm();
      const Vec3 n = c / len;
      const Vec3 gc = (gn - n * n.dot(gn)) / len;
      const Vec3 g_ty = tx.cross(gc);
      const Vec3 g_tx = gc.cross(ty);
      grad.at(sx.hi, y) += g_tx.dot(cam.pixel_ray(sx.hi, y));
      grad.at(sx.lo, y) -= g_tx.dot(cam.pixel_ray(sx.lo, y));
      grad.at(x, sy.hi) += g_ty.dot(cam.pixel_ray(x, sy.hi));
      grad.at(x, sy.lo) -= g_ty.dot(cam.pixel_ray(x, sy.lo));
    }
  }
  return grad;
}

NormalLoss geometric_normal_loss(const Image& rendered, const Image& depth_normals, const Mask& valid) {
  require_same_shape(rendered, depth_normals, "geometric_normal_loss");
  NormalLoss out;
  out.grad_rendered = Image(rendered.width, rendered.height, 3);
  out.grad_depth_normals = Image(rendered.width, rendered.height, 3);
  std::size_t count = 0;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) count += mask_at(valid, p);
  if (count == 0) return out;
  const double inv = 1.0 / double(count);
  double total = 0.0;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
    if (!mask_at(valid, p)) continue;
    const Unit nr = normalize_guarded(rendered.data.data() + p * 3);
    const Vec3 nd(depth_normals.data[p * 3], depth_normals.data[p * 3 + 1], depth_normals.data[p * 3 + 2]);
    total += 1.0 - nr.n.dot(nd);
    const Vec3 g_r = normalize_vjp(nr, -nd * inv);
    for (int k = 0; k < 3; ++k) {
      out.grad_rendered.data[p * 3 + k] = g_r[k];
      out.grad_depth_normals.data[p * 3 + k] = -nr.n[k] * inv;
    }
  }
  out.value = total * inv;
  return out;
}

std::vector<PixelPair> boundary_pairs(const LabelMap& labels) {
  std::vector<PixelPair> pairs;
  const int w = labels.width, h = labels.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = std::uint32_t(y * w + x);
      if (x + 1 < w && labels.at(x + 1, y) != labels.at(x, y)) pairs.emplace_back(p, p + 1);
      if (y + 1 < h && labels.at(x, y + 1) != labels.at(x, y)) pairs.emplace_back(p, p + std::uint32_t(w));
    }
  }
  return pairs;
}

LossValue boundary_normal_loss(const Image& rendered, const std::vector<PixelPair>& pairs, double alpha) {
  LossValue out;
  out.grad = Image(rendered.width, rendered.height, 3);
  if (pairs.empty()) return out;
  const double inv = 1.0 / double(pairs.size());
  double total = 0.0;
  for (const auto& [u, v] : pairs) {
    const Unit nu = normalize_guarded(rendered.data.data() + std::size_t(u) * 3);
    const Unit nv = normalize_guarded(rendered.data.data() + std::size_t(v) * 3);
    const double dissimilarity = 1.0 - nu.n.dot(nv.n);
    const double s_neg = sigmoid(-alpha * dissimilarity);  // 1 - sigmoid(alpha * d)
    total += s_neg;
    const double d_loss = -alpha * s_neg * (1.0 - s_neg) * inv;  // d/d(dissimilarity)
    const Vec3 gu = normalize_vjp(nu, -nv.n * d_loss);
    const Vec3 gv = normalize_vjp(nv, -nu.n * d_loss);
    for (int k = 0; k < 3; ++k) {
      out.grad.data[std::size_t(u) * 3 + k] += gu[k];
      out.grad.data[std::size_t(v) * 3 + k] += gv[k];
    }
  }
  out.value = total * inv;
  return out;
}

LossValue photometric_loss(const Image& gt, const Image& rendered, double lambda_ssim) {
  require_same_shape(gt, rendered, "photometric_loss");
  LossValue out;
  out.grad = Image(rendered.width, rendered.height, rendered.channels);
  const std::size_t n = rendered.data.size();
  if (n == 0) return out;
  double l1 = 0.0;
  const double w1 = (1.0 - lambda_ssim) / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rendered.data[i] - gt.data[i];
    l1 += std::abs(r);
    out.grad.data[i] = r > 0 ? w1 : (r < 0 ? -w1 : 0.0);
  }
  out.value = (1.0 - lambda_ssim) * l1 / double(n);
  if (lambda_ssim > 0.0) {
    const LossValue s = ssim(rendered, gt);
    out.value += lambda_ssim * (1.0 - s.value);
    for (std::size_t i = 0; i < n; ++i) out.grad.data[i] -= lambda_ssim * s.grad.data[i];
  }
  return out;
}

PriorBundle PriorBundle::derive(Image teacher_logits, Image prior_depth, int edge_dilation) {
  PriorBundle b;
  b.teacher_labels = argmax_labels(teacher_logits);
  b.edge_mask = semantic_edge_mask(b.teacher_labels, edge_dilation);
  b.boundary_pairs = semsplat::boundary_pairs(b.teacher_labels);
  b.teacher_logits = std::move(teacher_logits);
  b.prior_depth = std::move(prior_depth);
  return b;
}

LossReport total_loss(const RenderOutput& render, const Image& gt, const PriorBundle& priors, const Camera& camera,
                      const TrainConfig& cfg, std::int64_t iteration) {
  LossReport rep;
  const int w = render.rgb.width, h = render.rgb.height;

  LossValue photo = photometric_loss(gt, render.rgb, cfg.lambda_ssim);
  rep.l_rgb = photo.value;
  rep.grads.rgb = std::move(photo.grad);

  auto add_scaled = [](Image& dst, const Image& src, double s, int w_, int h_, int c_) {
    if (dst.empty()) dst = Image(w_, h_, c_);
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * src.data[i];
  };

  const int classes = render.semantic_logits.channels;
  if (cfg.lambda_sem > 0.0) {
    if (cfg.lambda_soft > 0.0) {
      const LossValue soft = soft_distill_loss(priors.teacher_logits, render.semantic_logits);
      rep.l_soft = soft.value;
      add_scaled(rep.grads.semantic_logits, soft.grad, cfg.lambda_sem * cfg.lambda_soft, w, h, classes);
    }
    if (cfg.lambda_hard > 0.0) {
      const LossValue hard = hard_distill_loss(priors.teacher_labels, render.semantic_logits);
      rep.l_hard = hard.value;
      add_scaled(rep.grads.semantic_logits, hard.grad, cfg.lambda_sem * cfg.lambda_hard, w, h, classes);
    }
  }
  rep.l_sem = cfg.lambda_soft * rep.l_soft + cfg.lambda_hard * rep.l_hard;

  rep.guidance_active = iteration >= cfg.guidance_start_iter;
  const double guide_weight = rep.guidance_active ? cfg.lambda_guide : 0.0;
  if (cfg.lambda_guide > 0.0) {
    if (cfg.omega_d > 0.0) {
      const DepthLoss d = depth_loss(render.depth, priors.prior_depth, priors.edge_mask);
      rep.l_d = d.value;
      rep.depth_degenerate = d.degenerate;
      if (guide_weight > 0.0) add_scaled(rep.grads.depth, d.grad, guide_weight * cfg.omega_d, w, h, 1);
    }
    if (cfg.omega_ng > 0.0) {
      const DepthNormals nd = normals_from_depth(render.depth, camera);
      const NormalLoss ng = geometric_normal_loss(render.normal, nd.normals, nd.valid);
      rep.l_ng = ng.value;
      if (guide_weight > 0.0) {
        const double s = guide_weight * cfg.omega_ng;
        add_scaled(rep.grads.normal, ng.grad_rendered, s, w, h, 3);
        const Image gd = normals_from_depth_backward(render.depth, camera, nd, ng.grad_depth_normals);
        add_scaled(rep.grads.depth, gd, s, w, h, 1);
      }
    }
    if (cfg.omega_nb > 0.0) {
      const bool from_render = cfg.boundary_labels_from_render != 0;
      const std::vector<PixelPair> rendered_pairs =
          from_render ? boundary_pairs(argmax_labels(render.semantic_logits)) : std::vector<PixelPair>{};
      const LossValue nb =
          boundary_normal_loss(render.normal, from_render ? rendered_pairs : priors.boundary_pairs,
                               cfg.alpha_sigmoid_scale);
      rep.l_nb = nb.value;
      if (guide_weight > 0.0) add_scaled(rep.grads.normal, nb.grad, guide_weight * cfg.omega_nb, w, h, 3);
    }
  }
  rep.l_guide = cfg.omega_d * rep.l_d + cfg.omega_ng * rep.l_ng + cfg.omega_nb * rep.l_nb;
  rep.total = rep.l_rgb + cfg.lambda_sem * rep.l_sem + guide_weight * rep.l_guide;
  return rep;
}

}  // namespace semsplat
